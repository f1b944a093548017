#pragma once

// Brownian paths, the noise coefficient classes h(t,u) and the Girsanov-type
// processes
//
//     beta(t)  = exp( \int_0^t b dW - \int_0^t b^2/2 dt ),
//     alpha(t) = exp( \int_0^t b dW ).
//
// Ito throughout; exponent integrals are left-endpoint sums on the path grid.

#include <cmath>
#include <cstdint>
#include <optional>
#include <type_traits>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sdgh/errors.hpp"
#include "sdgh/parallel.hpp"
#include "sdgh/stats.hpp"
#include "sdgh/torus.hpp"

namespace sdgh {

class BrownianPath {
 public:
  BrownianPath(double dt, int n_steps, int n_modes, std::uint64_t seed, std::vector<double> increments)
      : dt_(dt), n_steps_(n_steps), n_modes_(n_modes), seed_(seed), increments_(std::move(increments)) {}

  double dt() const noexcept { return dt_; }
  int n_steps() const noexcept { return n_steps_; }
  int n_modes() const noexcept { return n_modes_; }
  std::uint64_t seed() const noexcept { return seed_; }
  double horizon() const noexcept { return dt_ * n_steps_; }

  /// Increments of one mode, step-ordered.
  std::span<const double> mode(int k) const {
    return std::span<const double>(increments_).subspan(static_cast<std::size_t>(k) * n_steps_, n_steps_);
  }
  double increment(int k, int step) const { return increments_[static_cast<std::size_t>(k) * n_steps_ + step]; }

  /// W(t_i), i = 0..n_steps, for one mode.
  std::vector<double> cumulative(int k = 0) const {
    std::vector<double> w(n_steps_ + 1, 0.0);
    const auto inc = mode(k);
    for (int i = 0; i < n_steps_; ++i) w[i + 1] = w[i] + inc[i];
    return w;
  }

  /// Same path on a grid `factor` times coarser (increments summed).
  BrownianPath coarsened(int factor) const {
    if (factor < 1 || n_steps_ % factor != 0) throw DomainError("coarsened: factor must divide the step count");
    const int m = n_steps_ / factor;
    std::vector<double> inc(static_cast<std::size_t>(m) * n_modes_, 0.0);
    for (int k = 0; k < n_modes_; ++k) {
      for (int i = 0; i < n_steps_; ++i) inc[static_cast<std::size_t>(k) * m + i / factor] += increment(k, i);
    }
    return BrownianPath(dt_ * factor, m, n_modes_, seed_, std::move(inc));
  }

 private:
  double dt_;
  int n_steps_;
  int n_modes_;
  std::uint64_t seed_;
  std::vector<double> increments_;
};

inline int step_count(double horizon, double dt) {
  return static_cast<int>(std::ceil(horizon / dt - 1e-9));
}

/// ceil(T/dt) independent N(0, dt) increments per mode, reproducible from `seed`.
inline BrownianPath sample_path(double horizon, double dt, int n_modes, std::uint64_t seed) {
  if (!(dt > 0.0) || !(horizon >= dt)) throw DomainError("sample_path: need dt > 0 and T >= dt");
  if (n_modes < 1) throw DomainError("sample_path: need at least one mode");
  const int steps = step_count(horizon, dt);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(dt));
  std::vector<double> inc(static_cast<std::size_t>(steps) * n_modes);
  for (double& x : inc) x = normal(rng);
  return BrownianPath(dt, steps, n_modes, seed, std::move(inc));
}

/// Splits an increment dw over a step of length h into m pieces drawn from
/// the Brownian bridge pinned at dw. Reproducible from (seed, step, mode).
inline std::vector<double> bridge_split(double dw, double h, int m, std::uint64_t seed, int step, int mode) {
  std::vector<double> out(static_cast<std::size_t>(m), dw);
  if (m <= 1) return out;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(mode), 0xb41du};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, std::sqrt(h / m));
  double sum = 0.0;
  for (double& x : out) {
    x = normal(rng);
    sum += x;
  }
  const double shift = (sum - dw) / m;
  for (double& x : out) x -= shift;
  return out;
}

/// Time profile b(t) of linear noise. Only closed-form presets, so that
/// 0 < b_* <= b^2(t) <= b^* is known analytically.
class BCoefficient {
 public:
  enum class Kind { constant, sinusoidal };

  static BCoefficient constant(double b) { return BCoefficient(Kind::constant, b * b, b * b, b); }

  /// b(t) = sqrt(b_* + (b^* - b_*)(1 + sin t)/2).
  static BCoefficient sinusoidal(double lower_sq, double upper_sq) {
    if (!(lower_sq >= 0.0 && upper_sq >= lower_sq)) {
      throw DomainError("sinusoidal b: need 0 <= b_* <= b^*");
    }
    return BCoefficient(Kind::sinusoidal, lower_sq, upper_sq, 0.0);
  }

  double operator()(double t) const {
    if (kind_ == Kind::constant) return value_;
    return std::sqrt(lower_sq_ + (upper_sq_ - lower_sq_) * 0.5 * (1.0 + std::sin(t)));
  }

  Kind kind() const noexcept { return kind_; }
  /// b_* and b^* of the two-sided bound on b^2.
  double lower_sq() const noexcept { return lower_sq_; }
  double upper_sq() const noexcept { return upper_sq_; }
  double constant_value() const noexcept { return value_; }

  /// Checks b_* <= b^2(t) <= b^* with b_* > 0 on `samples` points of [0, T].
  bool satisfies_bounds(double horizon, int samples = 4096) const {
    if (!(lower_sq_ > 0.0)) return false;
    for (int i = 0; i <= samples; ++i) {
      const double t = horizon * i / samples;
      const double b2 = (*this)(t) * (*this)(t);
      if (b2 < lower_sq_ * (1 - 1e-12) || b2 > upper_sq_ * (1 + 1e-12)) return false;
    }
    return true;
  }

  /// \int_0^t b^2 in closed form.
  double integrated_square(double t) const {
    if (kind_ == Kind::constant) return value_ * value_ * t;
    const double mid = 0.5 * (lower_sq_ + upper_sq_);
    return mid * t + 0.5 * (upper_sq_ - lower_sq_) * (1.0 - std::cos(t));
  }

 private:
  BCoefficient(Kind kind, double lo, double hi, double value)
      : kind_(kind), lower_sq_(lo), upper_sq_(hi), value_(value) {}

  Kind kind_;
  double lower_sq_;
  double upper_sq_;
  double value_;
};

// ---------------------------------------------------------------------------
// Noise classes

/// h(t,u) = b(t) u.
struct LinearNoise {
  BCoefficient b;
};

/// h(t,u) = a (1 + ||u||_{W^{1,inf}})^theta u.
struct NonlinearW1InfNoise {
  double a = 0.0;
  double theta = 0.0;

  /// Either theta > 1/2 with a != 0, or theta = 1/2 with a^2 > 2Q.
  bool strong_regime(double q) const {
    if (theta > 0.5) return a != 0.0;
    if (theta == 0.5) return a * a > 2.0 * q;
    return false;
  }
};

/// h(t,u) = h(x), independent of u.
struct AdditiveNoise {
  SpectralField h;
};

/// K-mode truncation of a cylindrical linear noise: h_k(t,u) = g_k(x) u(x).
struct MultiModeNoise {
  std::vector<SpectralField> g;
};

using NoiseSpec = std::variant<LinearNoise, NonlinearW1InfNoise, AdditiveNoise, MultiModeNoise>;

inline int noise_modes(const NoiseSpec& spec) {
  if (const auto* m = std::get_if<MultiModeNoise>(&spec)) return static_cast<int>(m->g.size());
  return 1;
}

/// Scalar factor sigma with h(t,u) = sigma u, when the noise is of that form.
inline std::optional<double> scalar_multiplier(double t, double w1inf, const NoiseSpec& spec) {
  if (const auto* lin = std::get_if<LinearNoise>(&spec)) return lin->b(t);
  if (const auto* nl = std::get_if<NonlinearW1InfNoise>(&spec)) {
    return nl->a * std::pow(1.0 + w1inf, nl->theta);
  }
  return std::nullopt;
}

/// h(t,u) as one field per driving mode.
inline std::vector<SpectralField> diffusion(double t, const SpectralField& u, const NoiseSpec& spec) {
  return std::visit(
      [&](const auto& s) -> std::vector<SpectralField> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, LinearNoise>) {
          return {s.b(t) * u};
        } else if constexpr (std::is_same_v<S, NonlinearW1InfNoise>) {
          return {s.a * std::pow(1.0 + w1inf_norm(u), s.theta) * u};
        } else if constexpr (std::is_same_v<S, AdditiveNoise>) {
          return {s.h};
        } else {
          std::vector<SpectralField> out;
          out.reserve(s.g.size());
          for (const auto& g : s.g) out.push_back(multiply(g, u));
          return out;
        }
      },
      spec);
}

// ---------------------------------------------------------------------------
// Girsanov processes

struct GirsanovProcesses {
  double dt = 0.0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> log_beta;

  double time(std::size_t i) const { return dt * static_cast<double>(i); }
  /// Left sample of beta for time t.
  double beta_at(double t) const {
    auto i = static_cast<std::size_t>(std::floor(t / dt + 1e-9));
    if (i >= beta.size()) i = beta.size() - 1;
    return beta[i];
  }
  /// \int_0^{t_i} beta dt as a left Riemann sum, i = 0..N.
  std::vector<double> integrated_beta() const {
    std::vector<double> out(beta.size(), 0.0);
    for (std::size_t i = 1; i < beta.size(); ++i) out[i] = out[i - 1] + beta[i - 1] * dt;
    return out;
  }
};

/// beta = 1 on every grid point (deterministic comparison runs).
inline GirsanovProcesses unit_girsanov(double horizon, double dt) {
  const int steps = step_count(horizon, dt);
  GirsanovProcesses g;
  g.dt = dt;
  g.beta.assign(steps + 1, 1.0);
  g.alpha.assign(steps + 1, 1.0);
  g.log_beta.assign(steps + 1, 0.0);
  return g;
}

template <class B>
GirsanovProcesses girsanov(const BrownianPath& path, B&& b) {
  if (path.n_modes() != 1) throw Unsupported("girsanov: only single-mode paths are supported");
  GirsanovProcesses g;
  g.dt = path.dt();
  const int n = path.n_steps();
  g.beta.resize(n + 1);
  g.alpha.resize(n + 1);
  g.log_beta.resize(n + 1);
  double stoch = 0.0, comp = 0.0;
  g.log_beta[0] = 0.0;
  g.beta[0] = g.alpha[0] = 1.0;
  for (int i = 0; i < n; ++i) {
    const double bt = b(path.dt() * i);
    stoch += bt * path.increment(0, i);
    comp += 0.5 * bt * bt * path.dt();
    g.log_beta[i + 1] = stoch - comp;
    g.beta[i + 1] = std::exp(stoch - comp);
    g.alpha[i + 1] = std::exp(stoch);
  }
  return g;
}

/// Monte Carlo ensemble of scalar paths: seeds base_seed + i.
struct ScalarEnsemble {
  std::size_t paths = 1000;
  double dt = 1e-3;
  double horizon = 1.0;
  std::uint64_t base_seed = 1;
  unsigned jobs = 1;
};

struct ExitTimeEstimate {
  double lambda = 0.0;
  double level = 0.0;
  double horizon = 0.0;
  double bound = 0.0;  ///< 1 - (1/R)^{1-2 lambda}
  WilsonInterval no_exit;
};

/// Empirical P(X(t) <= R for all grid t <= T) for
/// X = exp(\int b dW + \int (lambda b^2 - b^2/2) dt). "tau_R = infinity" is
/// read as "no exit before the horizon".
template <class B>
ExitTimeEstimate exit_time_tau_R(const ScalarEnsemble& ens, B&& b, double lambda, double level) {
  if (!(lambda < 0.5)) throw DomainError("exit_time_tau_R: lambda must be < 1/2");
  if (!(level > 1.0)) throw DomainError("exit_time_tau_R: R must exceed 1");
  std::vector<char> survived(ens.paths, 0);
  const double log_level = std::log(level);
  parallel_for(ens.paths, ens.jobs, [&](std::size_t i) {
    const BrownianPath path = sample_path(ens.horizon, ens.dt, 1, ens.base_seed + i);
    double x = 0.0;
    bool ok = true;
    for (int s = 0; s < path.n_steps() && ok; ++s) {
      const double bt = b(path.dt() * s);
      x += bt * path.increment(0, s) + (lambda - 0.5) * bt * bt * path.dt();
      ok = x <= log_level;
    }
    survived[i] = ok ? 1 : 0;
  });
  std::size_t count = 0;
  for (char c : survived) count += static_cast<std::size_t>(c);
  ExitTimeEstimate est;
  est.lambda = lambda;
  est.level = level;
  est.horizon = ens.horizon;
  est.bound = 1.0 - std::pow(1.0 / level, 1.0 - 2.0 * lambda);
  est.no_exit = wilson_interval(count, ens.paths);
  return est;
}

}  // namespace sdgh
