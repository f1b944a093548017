#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sdgh/integrator.hpp"

using namespace sdgh;

namespace {

SpectralField truncate_to_band(const SpectralField& f) { return f.truncated(f.grid().dealias_cutoff()); }

IntegrateOptions opts(double dt, double T) {
  IntegrateOptions o;
  o.dt = dt;
  o.horizon = T;
  return o;
}

}  // namespace

TEST(StepEm, ZeroNoiseIsExplicitEuler) {
  TorusGrid g(64);
  const ModelParams p{0.4, -0.1};
  const auto u = SpectralField::from_function(g, [](double x) { return std::sin(x) + 0.3 * std::cos(2 * x); });
  const double dt = 1e-3;
  const double dw[1] = {0.37};  // irrelevant for b == 0
  const auto next = step_em(u, 0.0, dt, dw, LinearNoise{BCoefficient::constant(0.0)}, p);
  const auto euler = truncate_to_band(u + dt * drift(u, p));
  EXPECT_LT(linf_norm(next - euler), 1e-14);
}

TEST(StepEm, ZeroIncrementIsDriftOnly) {
  TorusGrid g(64);
  const ModelParams p{0.0, 0.3};
  const auto u = SpectralField::from_function(g, [](double x) { return 0.5 * std::cos(x); });
  const double dw[1] = {0.0};
  const auto next = step_em(u, 0.0, 1e-3, dw, LinearNoise{BCoefficient::constant(1.0)}, p);
  EXPECT_LT(linf_norm(next - truncate_to_band(u + 1e-3 * drift(u, p))), 1e-15);
}

TEST(StepEm, ConstantFollowsScalarGbm) {
  TorusGrid g(32);
  const ModelParams p{0.5, -0.5};
  const double c = 1.3, dt = 1e-3, b = 0.8;
  const auto path = sample_path(0.05, dt, 1, 21);
  auto u = SpectralField::constant(g, c);
  double exact_log = std::log(c);
  for (int i = 0; i < path.n_steps(); ++i) {
    const double dw[1] = {path.increment(0, i)};
    u = step_em(u, i * dt, dt, dw, LinearNoise{BCoefficient::constant(b)}, p);
    exact_log += b * dw[0] - 0.5 * b * b * dt;
    // spatially constant
    double lo = u[0], hi = u[0];
    for (double v : u.values()) lo = std::min(lo, v), hi = std::max(hi, v);
    EXPECT_LT(hi - lo, 1e-13);
  }
  // Ito EM on GBM: log error accumulates like sum (dW^2 - dt) + O(dW^3)
  EXPECT_NEAR(std::log(u[0]), exact_log, 20 * dt * std::sqrt(path.n_steps()));
}

TEST(StepEm, RejectsBadIncrementDimension) {
  TorusGrid g(16);
  const double dw[2] = {0.0, 0.0};
  EXPECT_THROW(step_em(SpectralField::constant(g, 1.0), 0.0, 1e-3, dw, LinearNoise{BCoefficient::constant(1.0)}, {}),
               DomainError);
}

TEST(Integrate, ZeroStaysZero) {
  TorusGrid g(32);
  const auto tr = integrate(SpectralField::constant(g, 0.0), LinearNoise{BCoefficient::constant(1.0)}, {0.3, 0.1}, 5,
                            opts(1e-3, 1.0));
  EXPECT_EQ(tr.stop.kind, StopKind::horizon_reached);
  EXPECT_EQ(linf_norm(tr.final_state()), 0.0);
  const auto nl = integrate(SpectralField::constant(g, 0.0), NonlinearW1InfNoise{1.0, 1.0}, {}, 5, opts(1e-3, 1.0));
  EXPECT_EQ(nl.stop.kind, StopKind::horizon_reached);
}

TEST(Integrate, SmallDataDeterministicIsGlobalAndResolved) {
  const ModelParams p{0.3, -0.3};
  auto run = [&](int n) {
    TorusGrid g(n);
    auto u0 = SpectralField::from_function(g, [](double x) { return std::cos(x) + 0.5 * std::sin(2 * x); });
    u0 = (0.1 / hs_norm(u0, {3.0})) * u0;
    auto o = opts(1e-3, 5.0);
    o.record_stride = 500;
    return integrate(u0, LinearNoise{BCoefficient::constant(0.0)}, p, 1, o);
  };
  const auto a = run(64);
  const auto b = run(128);
  EXPECT_EQ(a.stop.kind, StopKind::horizon_reached);
  EXPECT_EQ(b.stop.kind, StopKind::horizon_reached);
  EXPECT_FALSE(a.stop.tau_hs || a.stop.tau_w1inf);
  ASSERT_EQ(a.tracks.size(), b.tracks.size());
  for (std::size_t i = 0; i < a.tracks.size(); ++i) {
    EXPECT_NEAR(a.tracks.hs[i], b.tracks.hs[i], 1e-10);
    // sampled maxima: agreement limited by the sampling grid, not the solution
    EXPECT_NEAR(a.tracks.w1inf[i], b.tracks.w1inf[i], 1e-3 * a.tracks.w1inf[i]);
  }
}

TEST(Integrate, SteepDataHitsW1InfCapBeforeRiccatiTime) {
  TorusGrid g(512);
  const ModelParams p{0.0, 0.0};
  const auto u0 = SpectralField::from_function(g, [](double x) { return 2.0 * std::sin(x) * std::exp(-2.0 * (1 + std::cos(x))); });
  auto o = opts(1e-4, 3.0);
  o.thresholds.w1inf_cap = 12.0;
  o.thresholds.hs_cap = 1e6;
  o.record_both_caps = false;
  const auto tr = integrate(u0, LinearNoise{BCoefficient::constant(0.0)}, p, 1, o);
  ASSERT_EQ(tr.stop.kind, StopKind::w1inf_threshold);
  ASSERT_TRUE(tr.stop.tau_w1inf.has_value());
  // Riccati upper bound M' <= N - M^2/2 blows up by t* = ln((|M0|+a)/(|M0|-a))/a, a = sqrt(2N)
  const double lambda = kPi / std::tanh(kPi);
  const double N = 0.5 * lambda * std::pow(h1_norm(u0), 2);
  const double a = std::sqrt(2.0 * N);
  const double M0 = refined_min_slope(u0).value;
  ASSERT_LT(M0, -a);
  const double t_star = std::log((-M0 + a) / (-M0 - a)) / a;
  EXPECT_LT(*tr.stop.tau_w1inf, t_star);
  EXPECT_GT(*tr.stop.tau_w1inf, 0.0);
}

TEST(Integrate, CflStopAndSubsteps) {
  TorusGrid g(64);
  const auto u0 = SpectralField::from_function(g, [](double x) { return 50.0 * std::cos(x); });
  auto o = opts(1e-3, 0.01);
  const auto stopped = integrate(u0, LinearNoise{BCoefficient::constant(0.0)}, {}, 1, o);
  EXPECT_EQ(stopped.stop.kind, StopKind::cfl_violation);
  EXPECT_EQ(stopped.stop.tau_estimate, 0.0);
  o.adaptive_substeps = true;
  o.thresholds.hs_cap = 1e9;
  o.thresholds.w1inf_cap = 1e9;
  const auto sub = integrate(u0, LinearNoise{BCoefficient::constant(0.0)}, {}, 1, o);
  EXPECT_NE(sub.stop.kind, StopKind::cfl_violation);
}

TEST(Integrate, SubstepsInertOnTameData) {
  TorusGrid g(32);
  const auto u0 = SpectralField::from_function(g, [](double x) { return 0.2 * std::cos(x); });
  auto o = opts(1e-3, 0.5);
  const auto a = integrate(u0, LinearNoise{BCoefficient::constant(1.0)}, {}, 9, o);
  o.adaptive_substeps = true;
  const auto b = integrate(u0, LinearNoise{BCoefficient::constant(1.0)}, {}, 9, o);
  EXPECT_EQ(linf_norm(a.final_state() - b.final_state()), 0.0);
}

TEST(Integrate, PathMustDivideStep) {
  TorusGrid g(32);
  const auto path = sample_path(1.0, 3e-4, 1, 2);
  EXPECT_THROW(integrate(SpectralField::constant(g, 1.0), LinearNoise{BCoefficient::constant(1.0)}, {}, path,
                         opts(1e-3, 0.5)),
               DomainError);
  const auto coarse = sample_path(0.2, 1e-3, 1, 2);
  EXPECT_THROW(integrate(SpectralField::constant(g, 1.0), LinearNoise{BCoefficient::constant(1.0)}, {}, coarse,
                         opts(1e-3, 0.5)),
               DomainError);
}

TEST(Integrate, SamePathSameTrajectory) {
  TorusGrid g(64);
  const auto u0 = SpectralField::from_function(g, [](double x) { return 0.5 * std::sin(x); });
  const auto a = integrate(u0, NonlinearW1InfNoise{0.5, 0.5}, {0.1, 0.2}, 77, opts(1e-3, 0.3));
  const auto b = integrate(u0, NonlinearW1InfNoise{0.5, 0.5}, {0.1, 0.2}, 77, opts(1e-3, 0.3));
  EXPECT_EQ(a.tracks.hs, b.tracks.hs);
  EXPECT_EQ(a.tracks.min_slope, b.tracks.min_slope);
}

TEST(Integrate, FramesFollowStride) {
  TorusGrid g(32);
  auto o = opts(1e-3, 0.1);
  o.record_stride = 10;
  const auto tr = integrate(SpectralField::constant(g, 0.1), LinearNoise{BCoefficient::constant(0.0)}, {}, 1, o);
  ASSERT_EQ(tr.tracks.size(), 11u);
  EXPECT_NEAR(tr.tracks.time.back(), 0.1, 1e-12);
}
