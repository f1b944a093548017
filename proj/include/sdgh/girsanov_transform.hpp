#pragma once

// Pathwise solution of the random-coefficient equation for v = u / beta,
// the characteristic flow
//
//     dq/dt = beta v(t, q) - gamma,   q_x = exp( \int_0^t beta v_x(t', q) dt' ),
//
// and the sign persistence of the momentum V = v - v_xx.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sdgh/dynamics.hpp"
#include "sdgh/integrator.hpp"
#include "sdgh/noise.hpp"
#include "sdgh/torus.hpp"

namespace sdgh {

/// Trajectory whose integrated state is v; tracks and final_state() refer to u = beta v.
using TransformedTrajectory = Trajectory;

/// Classical RK4 on the transformed tendency, beta frozen at its left sample
/// within each step. `beta.dt` must divide opts.dt.
inline TransformedTrajectory solve_transformed(const SpectralField& v0, const GirsanovProcesses& beta,
                                               const ModelParams& params, const IntegrateOptions& opts) {
  detail::validate(opts);
  const double ratio = opts.dt / beta.dt;
  const int sub = static_cast<int>(std::lround(ratio));
  if (sub < 1 || std::abs(ratio - sub) > 1e-9) throw DomainError("solve_transformed: beta dt must divide dt");
  const int steps = step_count(opts.horizon, opts.dt);
  if (beta.beta.empty() || static_cast<std::size_t>(steps) * sub > beta.beta.size() - 1) {
    throw DomainError("solve_transformed: beta series shorter than horizon");
  }

  const TorusGrid& grid = v0.grid();
  const int m = grid.spectrum_size();
  TendencyKernel kernel(grid, params);
  std::vector<cplx> v(v0.coeffs().begin(), v0.coeffs().end());
  for (int k = grid.dealias_cutoff() + 1; k < m; ++k) v[k] = 0.0;
  std::vector<cplx> k1(m), k2(m), k3(m), k4(m), stage(m);

  Trajectory traj;
  traj.grid = grid;
  detail::RunRecorder rec(grid, opts, steps);
  int step = 0;
  double b = 1.0;
  for (;; ++step) {
    const double t = step * opts.dt;
    b = beta.beta[static_cast<std::size_t>(step) * sub];
    kernel.transformed(v, b, k1);
    const auto vals = kernel.last_values();
    if (rec.visit(step, t, b, v, vals, kernel.last_slopes(), traj)) break;
    const double speed = std::max(b * detail::grid_linf(vals), std::abs(params.gamma));
    int nsub = 1;
    if (opts.adaptive_substeps) {
      const double need = std::ceil(opts.dt * grid.n() * speed / opts.cfl);
      if (!(need <= 4096.0)) {
        rec.abort(StopKind::cfl_violation, t, b, v, traj);
        break;
      }
      nsub = std::max(1, static_cast<int>(need));
    } else if (rec.cfl_violated(b * detail::grid_linf(vals), params.gamma)) {
      rec.abort(StopKind::cfl_violation, t, b, v, traj);
      break;
    }
    const double h = opts.dt / nsub;
    for (int r = 0; r < nsub; ++r) {
      if (r > 0) kernel.transformed(v, b, k1);
      for (int k = 0; k < m; ++k) stage[k] = v[k] + 0.5 * h * k1[k];
      kernel.transformed(stage, b, k2);
      for (int k = 0; k < m; ++k) stage[k] = v[k] + 0.5 * h * k2[k];
      kernel.transformed(stage, b, k3);
      for (int k = 0; k < m; ++k) stage[k] = v[k] + h * k3[k];
      kernel.transformed(stage, b, k4);
      for (int k = 0; k < m; ++k) v[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    if (!detail::all_finite(v)) {
      ++step;
      rec.abort(StopKind::nonfinite, step * opts.dt, b, v, traj);
      break;
    }
  }
  traj.stop = rec.finish(step);
  if (traj.stop.kind == StopKind::horizon_reached) traj.stop.tau_estimate = step * opts.dt;
  traj.final_coeffs = std::move(v);
  traj.final_scale = b;
  return traj;
}

namespace detail {

/// f, f_x, f_xx of a half spectrum at x.
inline std::array<double, 3> eval_with_derivatives(std::span<const cplx> c, double x) {
  const int half = static_cast<int>(c.size()) - 1;
  std::array<double, 3> out{c[0].real(), 0.0, 0.0};
  const cplx step = std::polar(1.0, x);
  cplx phase = step;
  for (int k = 1; k < half; ++k) {
    const cplx z = c[k] * phase;
    const double kk = static_cast<double>(k);
    out[0] += 2.0 * z.real();
    out[1] -= 2.0 * kk * z.imag();
    out[2] -= 2.0 * kk * kk * z.real();
    phase *= step;
    if ((k & 63) == 0) phase = std::polar(1.0, (k + 1) * x);
  }
  out[0] += c[half].real() * std::cos(half * x);
  return out;
}

inline double wrap(double x) { return x - kTwoPi * std::floor(x / kTwoPi); }

}  // namespace detail

struct CharacteristicFlow {
  std::vector<double> seeds;
  std::vector<double> times;
  std::vector<std::vector<double>> q;         ///< [frame][seed], wrapped to [0, 2pi)
  std::vector<std::vector<double>> qx;        ///< [frame][seed]
  std::vector<std::vector<double>> invariant; ///< V(t,q) q_x^2 per frame and seed
  std::vector<double> V0;
  /// max over seeds of |V(t,q) q_x^2 - V0| / max|V0|, per frame.
  std::vector<double> invariant_error;
  std::vector<double> min_jacobian;
  bool flagged = false;
  std::string flag_reason;
};

/// Integrates particle paths through the stored snapshots of a transformed
/// run. Snapshots must be equispaced; v at intermediate times comes from
/// four-point Lagrange interpolation of the coefficients, in space from the
/// Fourier series. beta is taken from the snapshot scale at the left end of
/// each interval (exact when snapshots are taken every step).
inline CharacteristicFlow evolve_characteristics(const TransformedTrajectory& traj, std::span<const double> seeds,
                                                 double gamma, double resolution_tail = 0.1) {
  const std::size_t ns = traj.snapshot_coeffs.size();
  if (ns < 4) throw DomainError("evolve_characteristics: need at least four snapshots");
  const double dT = traj.snapshot_times[1] - traj.snapshot_times[0];
  const int m = traj.grid.spectrum_size();
  const int cutoff = traj.grid.dealias_cutoff();

  CharacteristicFlow flow;
  flow.seeds.assign(seeds.begin(), seeds.end());
  const std::size_t np = seeds.size();
  std::vector<double> q(seeds.begin(), seeds.end());
  std::vector<double> logqx(np, 0.0);
  std::vector<cplx> interp(m);

  // Coefficients of v at time t = t_i + theta dT, i.e. within snapshot interval i.
  auto coeffs_at = [&](std::size_t i, double theta) {
    std::size_t base = i == 0 ? 0 : i - 1;
    if (base + 3 >= ns) base = ns - 4;
    const double s = static_cast<double>(i) + theta - static_cast<double>(base);
    std::array<double, 4> w{};
    for (int a = 0; a < 4; ++a) {
      double l = 1.0;
      for (int b = 0; b < 4; ++b) {
        if (b != a) l *= (s - b) / (a - b);
      }
      w[a] = l;
    }
    for (int k = 0; k < m; ++k) {
      cplx acc = 0.0;
      for (int a = 0; a < 4; ++a) acc += w[a] * traj.snapshot_coeffs[base + a][k];
      interp[k] = acc;
    }
  };

  auto momentum_at = [](std::span<const cplx> c, double x) {
    const auto d = detail::eval_with_derivatives(c, x);
    return d[0] - d[2];
  };

  double v0max = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    flow.V0.push_back(momentum_at(traj.snapshot_coeffs[0], q[p]));
  }
  {
    const SpectralField v0 = traj.snapshot(0);
    for (double x : momentum(v0).V.values()) v0max = std::max(v0max, std::abs(x));
  }
  if (v0max == 0.0) v0max = 1.0;

  auto store = [&](std::size_t i) {
    flow.times.push_back(traj.snapshot_times[i]);
    std::vector<double> qx(np), inv(np), qw(np);
    double err = 0.0, minj = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < np; ++p) {
      qx[p] = std::exp(logqx[p]);
      qw[p] = detail::wrap(q[p]);
      inv[p] = momentum_at(traj.snapshot_coeffs[i], qw[p]) * qx[p] * qx[p];
      err = std::max(err, std::abs(inv[p] - flow.V0[p]) / v0max);
      minj = std::min(minj, qx[p]);
    }
    flow.q.push_back(std::move(qw));
    flow.qx.push_back(std::move(qx));
    flow.invariant.push_back(std::move(inv));
    flow.invariant_error.push_back(err);
    flow.min_jacobian.push_back(minj);
  };

  store(0);
  std::array<std::vector<cplx>, 3> stage_coeffs;
  for (std::size_t i = 0; i + 1 < ns; ++i) {
    if (std::abs(traj.snapshot_times[i + 1] - traj.snapshot_times[i] - dT) > 1e-9 * dT) {
      // Only the final (stop) snapshot may be off the stride; stop there.
      break;
    }
    const auto tail = detail::band_stats(traj.snapshot_coeffs[i + 1], 1.0, cutoff).tail;
    if (tail > resolution_tail) {
      flow.flagged = true;
      flow.flag_reason = "resolution exhausted at t=" + std::to_string(traj.snapshot_times[i + 1]);
      break;
    }
    const double b = traj.snapshot_scale[i];
    std::array<double, 3> thetas{0.0, 0.5, 1.0};
    for (int s = 0; s < 3; ++s) {
      if (s == 0) {
        stage_coeffs[0] = traj.snapshot_coeffs[i];
      } else if (s == 2) {
        stage_coeffs[2] = traj.snapshot_coeffs[i + 1];
      } else {
        coeffs_at(i, thetas[s]);
        stage_coeffs[1] = interp;
      }
    }
    for (std::size_t p = 0; p < np; ++p) {
      auto rhs = [&](int s, double x) {
        const auto d = detail::eval_with_derivatives(stage_coeffs[s], x);
        return std::array<double, 2>{b * d[0] - gamma, b * d[1]};
      };
      const auto r1 = rhs(0, q[p]);
      const auto r2 = rhs(1, q[p] + 0.5 * dT * r1[0]);
      const auto r3 = rhs(1, q[p] + 0.5 * dT * r2[0]);
      const auto r4 = rhs(2, q[p] + dT * r3[0]);
      q[p] += dT / 6.0 * (r1[0] + 2.0 * r2[0] + 2.0 * r3[0] + r4[0]);
      logqx[p] += dT / 6.0 * (r1[1] + 2.0 * r2[1] + 2.0 * r3[1] + r4[1]);
      if (!std::isfinite(q[p]) || !std::isfinite(logqx[p])) {
        flow.flagged = true;
        flow.flag_reason = "non-finite particle state";
      }
    }
    if (flow.flagged) break;
    store(i + 1);
  }
  return flow;
}

enum class SignClass { positive, negative, mixed };

inline const char* to_string(SignClass c) {
  switch (c) {
    case SignClass::positive: return "positive";
    case SignClass::negative: return "negative";
    case SignClass::mixed: return "mixed";
  }
  return "mixed";
}

/// Sign of a momentum field; zeros up to `rel_tol * max|V|` are allowed.
inline SignClass classify_sign(const SpectralField& V, double rel_tol = 1e-9) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, mag = 0.0;
  for (double x : V.values()) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    mag = std::max(mag, std::abs(x));
  }
  const double tol = rel_tol * mag;
  if (mag == 0.0) return SignClass::mixed;
  if (lo >= -tol) return SignClass::positive;
  if (hi <= tol) return SignClass::negative;
  return SignClass::mixed;
}

struct SignReport {
  SignClass initial = SignClass::mixed;
  std::vector<double> times;
  std::vector<bool> momentum_keeps_sign;  ///< V single-signed like V0
  std::vector<bool> slope_bounded;        ///< |v_x| <= |v| at every node
  std::vector<double> worst_slope_excess; ///< max(|v_x| - |v|) / ||v||_inf

  bool asserted() const { return initial != SignClass::mixed; }
  bool all_hold() const {
    return std::all_of(momentum_keeps_sign.begin(), momentum_keeps_sign.end(), [](bool b) { return b; }) &&
           std::all_of(slope_bounded.begin(), slope_bounded.end(), [](bool b) { return b; });
  }
};

/// Per-snapshot sign persistence of V and the bound |v_x| <= |v|. Mixed-sign
/// V0 yields an empty classification-only report.
inline SignReport sign_fields(const TransformedTrajectory& traj, double rel_tol = 1e-8) {
  SignReport rep;
  if (traj.snapshot_coeffs.empty()) return rep;
  rep.initial = classify_sign(momentum(traj.snapshot(0)).V, rel_tol);
  if (rep.initial == SignClass::mixed) return rep;
  for (std::size_t i = 0; i < traj.snapshot_coeffs.size(); ++i) {
    const SpectralField v = traj.snapshot(i);
    rep.times.push_back(traj.snapshot_times[i]);
    rep.momentum_keeps_sign.push_back(classify_sign(momentum(v).V, rel_tol) == rep.initial);
    const SpectralField vx = v.derivative();
    const double scale = std::max(linf_norm(v), 1e-300);
    double excess = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < v.n(); ++j) excess = std::max(excess, (std::abs(vx[j]) - std::abs(v[j])) / scale);
    rep.worst_slope_excess.push_back(excess);
    rep.slope_bounded.push_back(excess <= rel_tol);
  }
  return rep;
}

}  // namespace sdgh
