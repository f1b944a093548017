#pragma once

// Euler-Maruyama time stepping of
//
//     du + [(u - gamma) u_x + F(u)] dt = h(t,u) dW
//
// in coefficient space, with the stopping times
//
//     tau_{1,m} = inf{t : ||u||_{H^s} >= m},   tau_{2,n} = inf{t : ||u||_{W^{1,inf}} >= n}.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sdgh/dynamics.hpp"
#include "sdgh/noise.hpp"
#include "sdgh/torus.hpp"

namespace sdgh {

enum class StopKind {
  horizon_reached,
  hs_threshold,
  w1inf_threshold,
  nonfinite,
  resolution_exhausted,
  cfl_violation,
};

inline const char* to_string(StopKind k) {
  switch (k) {
    case StopKind::horizon_reached: return "horizon_reached";
    case StopKind::hs_threshold: return "hs_threshold";
    case StopKind::w1inf_threshold: return "w1inf_threshold";
    case StopKind::nonfinite: return "nonfinite";
    case StopKind::resolution_exhausted: return "resolution_exhausted";
    case StopKind::cfl_violation: return "cfl_violation";
  }
  return "unknown";
}

/// Caps m (on ||u||_{H^s}) and n (on ||u||_{W^{1,inf}}).
struct Thresholds {
  double hs_cap = 1e3;
  double w1inf_cap = 1e3;
  double s = 2.0;
};

struct StopInfo {
  StopKind kind = StopKind::horizon_reached;
  double tau_estimate = 0.0;
  double tau_uncertainty = 0.0;
  double hs_cap = 0.0;
  double w1inf_cap = 0.0;
  /// First hitting times of each cap, when reached before the run ended.
  std::optional<double> tau_hs;
  std::optional<double> tau_w1inf;
  int steps = 0;
};

/// Per-frame diagnostics shared by both solvers.
struct FrameTracks {
  std::vector<double> time;
  std::vector<double> hs;         ///< ||u||_{H^s}
  std::vector<double> h1;         ///< ||u||_{H^1}
  std::vector<double> linf;       ///< ||u||_inf (grid)
  std::vector<double> w1inf;      ///< ||u||_{W^{1,inf}} (refined grid)
  std::vector<double> min_slope;  ///< min u_x
  std::vector<double> argmin;     ///< location of min u_x
  std::vector<double> tail;       ///< H^1 energy fraction in the top third of the band
  std::vector<double> beta;       ///< Girsanov factor (1 for direct runs)

  std::size_t size() const noexcept { return time.size(); }
};

struct IntegrateOptions {
  double dt = 1e-4;
  double horizon = 1.0;
  Thresholds thresholds{};
  int record_stride = 10;
  /// 0 disables snapshot storage.
  int snapshot_stride = 0;
  /// Stop when the top third of the retained band carries this H^1 fraction.
  double resolution_tail = 0.1;
  /// dt <= cfl / (n max(||u||_inf, |gamma|)).
  double cfl = 0.5;
  bool enforce_cfl = true;
  /// Split a step that breaks the CFL bound into substeps instead of stopping:
  /// RK4 substeps with beta held fixed (transformed solver), or EM substeps
  /// driven by Brownian-bridge pieces of the step increment.
  bool adaptive_substeps = false;
  /// Refinement factor for W^{1,inf} in stopping rules.
  int w1inf_refine = 4;
  /// Newton-refine min u_x at recorded frames.
  bool refine_min_slope = true;
  /// Keep integrating after the first cap until the other one is hit too.
  bool record_both_caps = true;
};

namespace detail {

struct BandStats {
  double hs;
  double h1;
  double tail;
};

/// ||.||_{H^s}, ||.||_{H^1} and the top-third H^1 energy fraction of a half spectrum.
inline BandStats band_stats(std::span<const cplx> c, double s, int cutoff, double scale = 1.0) {
  double hs = 0.0, h1 = 0.0, tail = 0.0;
  const int tail_start = (2 * cutoff) / 3;
  const int m = static_cast<int>(c.size());
  for (int k = 0; k < m; ++k) {
    const double weight = (k == 0 || k == m - 1) ? 1.0 : 2.0;
    const double a2 = weight * std::norm(c[k]);
    const double kk = 1.0 + double(k) * k;
    const double e1 = kk * a2;
    h1 += e1;
    hs += std::pow(kk, s) * a2;
    if (k > tail_start) tail += e1;
  }
  const double frac = h1 > 0.0 ? tail / h1 : 0.0;
  return {std::sqrt(hs) * scale, std::sqrt(h1) * scale, frac};
}

inline bool all_finite(std::span<const cplx> c) {
  for (const auto& z : c) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

/// Refined W^{1,inf} of a half spectrum scaled by `scale`.
inline double refined_w1inf(const TorusGrid& grid, std::span<const cplx> c, double scale, int refine) {
  std::vector<cplx> copy(c.begin(), c.end());
  for (auto& z : copy) z *= scale;
  return w1inf_norm(SpectralField::from_coeffs(grid, std::move(copy)), refine);
}

inline double grid_w1inf(std::span<const double> v, std::span<const double> vx) {
  double m = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) m = std::max({m, std::abs(v[j]), std::abs(vx[j])});
  return m;
}

inline double grid_linf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

/// Tracks cap crossings and produces the StopInfo.
class StopMonitor {
 public:
  StopMonitor(const Thresholds& th, bool both) : th_(th), both_(both) {
    info_.hs_cap = th.hs_cap;
    info_.w1inf_cap = th.w1inf_cap;
  }

  /// Feed the norms at time t (after a step of size dt). Returns true when
  /// integration should stop.
  bool observe(double t, double dt, double hs, double w1inf) {
    bool first = !info_.tau_hs && !info_.tau_w1inf;
    if (!info_.tau_hs && hs >= th_.hs_cap) {
      info_.tau_hs = crossing(t, dt, prev_hs_, hs, th_.hs_cap);
      if (first) set_kind(StopKind::hs_threshold, *info_.tau_hs, dt);
    }
    first = first && !info_.tau_hs;
    if (!info_.tau_w1inf && w1inf >= th_.w1inf_cap) {
      info_.tau_w1inf = crossing(t, dt, prev_w1_, w1inf, th_.w1inf_cap);
      if (first) set_kind(StopKind::w1inf_threshold, *info_.tau_w1inf, dt);
    }
    prev_hs_ = hs;
    prev_w1_ = w1inf;
    if (!info_.tau_hs && !info_.tau_w1inf) return false;
    if (!both_) return true;
    return info_.tau_hs && info_.tau_w1inf;
  }

  void prime(double hs, double w1inf) {
    prev_hs_ = hs;
    prev_w1_ = w1inf;
  }

  bool any_cap() const { return info_.tau_hs || info_.tau_w1inf; }

  void terminate(StopKind kind, double t, double dt) {
    if (!any_cap()) set_kind(kind, t, dt);
  }

  StopInfo finish(int steps) {
    info_.steps = steps;
    return info_;
  }

 private:
  static double crossing(double t, double dt, double prev, double cur, double cap) {
    if (!(cur > prev)) return t;
    const double frac = std::clamp((cap - prev) / (cur - prev), 0.0, 1.0);
    return t - dt + frac * dt;
  }
  void set_kind(StopKind kind, double tau, double dt) {
    info_.kind = kind;
    info_.tau_estimate = tau;
    info_.tau_uncertainty = dt;
  }

  Thresholds th_;
  bool both_;
  StopInfo info_{};
  double prev_hs_ = 0.0;
  double prev_w1_ = 0.0;
};

inline void validate(const IntegrateOptions& opts) {
  if (!(opts.dt > 0.0)) throw DomainError("integrate: dt must be positive");
  if (!(opts.horizon > 0.0)) throw DomainError("integrate: horizon must be positive");
  if (!(opts.thresholds.hs_cap > 0.0) || !(opts.thresholds.w1inf_cap > 0.0)) {
    throw DomainError("integrate: thresholds must be positive");
  }
  if (!(opts.thresholds.s > 1.5)) throw DomainError("integrate: need s > 3/2");
  if (opts.record_stride < 1) throw DomainError("integrate: record_stride must be >= 1");
}

}  // namespace detail

struct Trajectory {
  TorusGrid grid{8};
  /// Norms of u. For the transformed solver the state is v and u = beta v.
  FrameTracks tracks;
  /// H^1 norm and min slope of the integrated state itself (v, or u for EM).
  std::vector<double> frame_h1_state;
  std::vector<double> frame_min_slope_state;
  std::vector<double> snapshot_times;
  std::vector<double> snapshot_scale;
  std::vector<std::vector<cplx>> snapshot_coeffs;
  std::vector<cplx> final_coeffs;
  double final_scale = 1.0;
  StopInfo stop;

  /// Integrated state at snapshot i (v for the transformed solver).
  SpectralField snapshot(std::size_t i) const { return SpectralField::from_coeffs(grid, snapshot_coeffs[i]); }
  /// u at snapshot i.
  SpectralField u_snapshot(std::size_t i) const { return snapshot_scale[i] * snapshot(i); }
  /// u at the stop.
  SpectralField final_state() const { return final_scale * SpectralField::from_coeffs(grid, final_coeffs); }
};

/// One Euler-Maruyama step in coefficient space. Owns the drift kernel.
class EmStepper {
 public:
  EmStepper(const TorusGrid& grid, const ModelParams& params, const NoiseSpec& spec)
      : kernel_(grid, params), spec_(&spec), drift_(grid.spectrum_size()) {}

  TendencyKernel& kernel() { return kernel_; }

  /// Evaluates the drift of `u`; afterwards kernel().last_values() holds u on the grid.
  void prepare(std::span<const cplx> u) { kernel_.drift(u, drift_); }

  /// u <- P[u + dt drift(u) + sum_k h_k(t,u) dW_k], P the 2/3 truncation.
  /// prepare(u) must have been called on the same state.
  void advance(std::vector<cplx>& u, double t, double dt, std::span<const double> dw) {
    const TorusGrid& grid = kernel_.grid();
    const int m = grid.spectrum_size();
    const int cutoff = grid.dealias_cutoff();
    const double w1 = detail::grid_w1inf(kernel_.last_values(), kernel_.last_slopes());
    if (auto sigma = scalar_multiplier(t, w1, *spec_)) {
      const double factor = 1.0 + *sigma * dw[0];
      for (int k = 0; k < m; ++k) u[k] = k <= cutoff ? factor * u[k] + dt * drift_[k] : cplx{0.0, 0.0};
      return;
    }
    const SpectralField ufield = SpectralField::from_coeffs(grid, u);
    const auto h = diffusion(t, ufield, *spec_);
    for (int k = 0; k < m; ++k) {
      if (k > cutoff) {
        u[k] = 0.0;
        continue;
      }
      cplx acc = u[k] + dt * drift_[k];
      for (std::size_t q = 0; q < h.size(); ++q) acc += h[q].coeffs()[k] * dw[q];
      u[k] = acc;
    }
  }

 private:
  TendencyKernel kernel_;
  const NoiseSpec* spec_;
  std::vector<cplx> drift_;
};

/// u_next = u + dt drift(u) + sum_k h_k(t,u) dW_k (Ito Euler-Maruyama).
/// Throws InvalidField when the result is not finite.
inline SpectralField step_em(const SpectralField& u, double t, double dt, std::span<const double> dw,
                             const NoiseSpec& spec, const ModelParams& params) {
  if (!(dt > 0.0)) throw DomainError("step_em: dt must be positive");
  if (static_cast<int>(dw.size()) != noise_modes(spec)) {
    throw DomainError("step_em: increment dimension does not match noise modes");
  }
  EmStepper stepper(u.grid(), params, spec);
  std::vector<cplx> c(u.coeffs().begin(), u.coeffs().end());
  stepper.prepare(c);
  stepper.advance(c, t, dt, dw);
  if (!detail::all_finite(c)) throw InvalidField("step_em: non-finite state");
  return SpectralField::from_coeffs(u.grid(), std::move(c));
}

namespace detail {

/// Shared per-step bookkeeping of both solvers: stop rules, frames, snapshots.
/// The state handed to `visit` is v; u = scale * v.
class RunRecorder {
 public:
  RunRecorder(const TorusGrid& grid, const IntegrateOptions& opts, int steps)
      : grid_(grid), opts_(opts), steps_(steps), monitor_(opts.thresholds, opts.record_both_caps) {}

  /// Inspect the state at step index `step` (time t). `values`, `slopes` are
  /// grid samples of the state. Returns true when the run must stop here.
  bool visit(int step, double t, double scale, std::span<const cplx> v, std::span<const double> values,
             std::span<const double> slopes, Trajectory& traj) {
    const auto bs = band_stats(v, opts_.thresholds.s, grid_.dealias_cutoff(), 1.0);
    double w1 = grid_w1inf(values, slopes) * scale;
    const bool frame = step == 0 || step % opts_.record_stride == 0 || step == steps_;
    const bool near_cap = w1 >= 0.5 * opts_.thresholds.w1inf_cap;
    if (frame || near_cap) w1 = refined_w1inf(grid_, v, scale, opts_.w1inf_refine);
    bool stop = false;
    if (step == 0) {
      monitor_.prime(scale * bs.hs, w1);
    } else {
      stop = monitor_.observe(t, opts_.dt, scale * bs.hs, w1);
    }
    if (bs.tail > opts_.resolution_tail) {
      monitor_.terminate(StopKind::resolution_exhausted, t, opts_.dt);
      stop = true;
    }
    if (!stop && step == steps_) {
      monitor_.terminate(StopKind::horizon_reached, t, opts_.dt);
      stop = true;
    }
    if (frame || stop) record(t, scale, v, bs, w1, traj);
    if (opts_.snapshot_stride > 0 && (step % opts_.snapshot_stride == 0 || stop)) {
      traj.snapshot_times.push_back(t);
      traj.snapshot_scale.push_back(scale);
      traj.snapshot_coeffs.emplace_back(v.begin(), v.end());
    }
    return stop;
  }

  bool cfl_violated(double linf_u, double gamma) const {
    const double speed = std::max(linf_u, std::abs(gamma));
    return opts_.enforce_cfl && speed > 0.0 && opts_.dt > opts_.cfl / (grid_.n() * speed);
  }

  /// Ends the run early with `kind` (recording the frame).
  void abort(StopKind kind, double t, double scale, std::span<const cplx> v, Trajectory& traj) {
    monitor_.terminate(kind, t, opts_.dt);
    if (all_finite(v)) {
      const auto bs = band_stats(v, opts_.thresholds.s, grid_.dealias_cutoff(), 1.0);
      record(t, scale, v, bs, refined_w1inf(grid_, v, scale, opts_.w1inf_refine), traj);
    }
  }

  StopInfo finish(int steps) { return monitor_.finish(steps); }

 private:
  void record(double t, double scale, std::span<const cplx> v, const BandStats& bs, double w1,
              Trajectory& traj) {
    const SpectralField field = SpectralField::from_coeffs(grid_, std::vector<cplx>(v.begin(), v.end()));
    auto& tr = traj.tracks;
    if (!tr.time.empty() && tr.time.back() == t) return;
    tr.time.push_back(t);
    tr.hs.push_back(scale * bs.hs);
    tr.h1.push_back(scale * bs.h1);
    tr.linf.push_back(scale * linf_norm(field));
    tr.w1inf.push_back(w1);
    const SlopeMinimum sm = opts_.refine_min_slope ? refined_min_slope(field) : min_slope(field);
    tr.min_slope.push_back(scale * sm.value);
    tr.argmin.push_back(sm.x);
    tr.tail.push_back(bs.tail);
    tr.beta.push_back(scale);
    traj.frame_h1_state.push_back(bs.h1);
    traj.frame_min_slope_state.push_back(sm.value);
  }

  TorusGrid grid_;
  const IntegrateOptions& opts_;
  int steps_;
  StopMonitor monitor_;
};

}  // namespace detail

/// Euler-Maruyama run driven by `path` (its dt must divide opts.dt).
inline Trajectory integrate(const SpectralField& u0, const NoiseSpec& spec, const ModelParams& params,
                            const BrownianPath& path, const IntegrateOptions& opts) {
  detail::validate(opts);
  if (path.n_modes() != noise_modes(spec)) throw DomainError("integrate: path modes do not match noise");
  const double ratio = opts.dt / path.dt();
  const int sub = static_cast<int>(std::lround(ratio));
  if (sub < 1 || std::abs(ratio - sub) > 1e-9) throw DomainError("integrate: path dt must divide dt");
  const int steps = step_count(opts.horizon, opts.dt);
  if (steps * sub > path.n_steps()) throw DomainError("integrate: path shorter than horizon");

  const TorusGrid& grid = u0.grid();
  EmStepper stepper(grid, params, spec);
  std::vector<cplx> u(u0.coeffs().begin(), u0.coeffs().end());
  for (int k = grid.dealias_cutoff() + 1; k < grid.spectrum_size(); ++k) u[k] = 0.0;

  Trajectory traj;
  traj.grid = grid;
  detail::RunRecorder rec(grid, opts, steps);
  std::vector<double> dw(path.n_modes());
  int step = 0;
  for (;; ++step) {
    const double t = step * opts.dt;
    stepper.prepare(u);
    const auto vals = stepper.kernel().last_values();
    if (rec.visit(step, t, 1.0, u, vals, stepper.kernel().last_slopes(), traj)) break;
    int nsub = 1;
    if (opts.adaptive_substeps) {
      const double speed = std::max(detail::grid_linf(vals), std::abs(params.gamma));
      const double need = std::ceil(opts.dt * grid.n() * speed / opts.cfl);
      if (!(need <= 4096.0)) {
        rec.abort(StopKind::cfl_violation, t, 1.0, u, traj);
        break;
      }
      nsub = std::max(1, static_cast<int>(need));
    } else if (rec.cfl_violated(detail::grid_linf(vals), params.gamma)) {
      rec.abort(StopKind::cfl_violation, t, 1.0, u, traj);
      break;
    }
    for (int q = 0; q < path.n_modes(); ++q) {
      double acc = 0.0;
      for (int r = 0; r < sub; ++r) acc += path.increment(q, step * sub + r);
      dw[q] = acc;
    }
    if (nsub == 1) {
      stepper.advance(u, t, opts.dt, dw);
    } else {
      // Finer EM steps inside [t, t+dt] with bridge increments consistent with dw.
      const double h = opts.dt / nsub;
      std::vector<std::vector<double>> pieces(dw.size());
      for (std::size_t q = 0; q < dw.size(); ++q) {
        pieces[q] = bridge_split(dw[q], opts.dt, nsub, path.seed(), step, static_cast<int>(q));
      }
      std::vector<double> dwr(dw.size());
      for (int r = 0; r < nsub && detail::all_finite(u); ++r) {
        if (r > 0) stepper.prepare(u);
        for (std::size_t q = 0; q < dw.size(); ++q) dwr[q] = pieces[q][r];
        stepper.advance(u, t + r * h, h, dwr);
      }
    }
    if (!detail::all_finite(u)) {
      rec.abort(StopKind::nonfinite, (step + 1) * opts.dt, 1.0, u, traj);
      ++step;
      break;
    }
  }
  traj.stop = rec.finish(step);
  if (traj.stop.kind == StopKind::horizon_reached) traj.stop.tau_estimate = step * opts.dt;
  traj.final_coeffs = std::move(u);
  return traj;
}

/// Convenience overload sampling the driving path from `seed`.
inline Trajectory integrate(const SpectralField& u0, const NoiseSpec& spec, const ModelParams& params,
                            std::uint64_t seed, const IntegrateOptions& opts) {
  const BrownianPath path = sample_path(opts.horizon, opts.dt, noise_modes(spec), seed);
  return integrate(u0, spec, params, path, opts);
}

}  // namespace sdgh
