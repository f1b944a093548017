#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sdgh/breaking.hpp"
#include "sdgh/girsanov_transform.hpp"

using namespace sdgh;

namespace {

const double kLambda = kPi / std::tanh(kPi);

SpectralField bump(const TorusGrid& g, double A, double kappa) {
  return SpectralField::from_function(g, [=](double x) { return A * std::sin(x) * std::exp(-kappa * (1 + std::cos(x))); });
}

IntegrateOptions opts(double dt, double T) {
  IntegrateOptions o;
  o.dt = dt;
  o.horizon = T;
  o.record_stride = 1;
  o.thresholds.hs_cap = 1e6;
  o.thresholds.w1inf_cap = 1e6;
  return o;
}

}  // namespace

TEST(EmbeddingLambda, SeriesAndSampledRatios) {
  const auto est = embedding_lambda(300, 5, 128);
  EXPECT_NEAR(est.analytic, kLambda, 1e-10);
  EXPECT_LE(est.sampled, est.analytic * (1 + 1e-9));
  EXPECT_GT(est.sampled, 0.5 * est.analytic);
  TorusGrid g(64);
  // ||1||_{H^1} = 1 and sup 1 = 1
  EXPECT_NEAR(embedding_ratio(SpectralField::constant(g, 3.0)), 1.0, 1e-14);
  // the kernel attains the constant: G(0)^2 / ||G||_{H^1}^2 = lambda
  TorusGrid fine(4096);
  const auto G = SpectralField::from_function(fine, greens_kernel);
  EXPECT_NEAR(embedding_ratio(G), kLambda, 5e-3);  // kink at 0 limits sampling accuracy
}

TEST(EmbeddingK, MonotoneAndDomain) {
  EXPECT_THROW(embedding_K(1.5), DomainError);
  EXPECT_GT(embedding_K(2.0), embedding_K(3.0));
  EXPECT_GT(embedding_K(3.0), 1.0);
  // sin 2x: W^{1,inf} norm 2, H^2 norm sqrt(2 * 25 / 4)
  TorusGrid g(64);
  const auto f = SpectralField::from_function(g, [](double x) { return std::sin(2 * x); });
  EXPECT_LE(w1inf_norm(f), embedding_K(2.0) * hs_norm(f, {2.0}));
}

TEST(Threshold, ClosedFormAndLimits) {
  EXPECT_NEAR(breaking_threshold(1.0, 0.5, kLambda, 1.0), -0.5 * std::sqrt(4.0 + 4.0 * kLambda) - 1.0, 1e-14);
  // N form agrees
  for (double h1 : {0.3, 1.0, 2.5}) {
    EXPECT_NEAR(breaking_threshold(0.7, 0.2, kLambda, h1), breaking_threshold_N(0.7, 0.2, energy_N(kLambda, h1)),
                1e-13);
  }
  // vanishing data: threshold -> -b*/c
  EXPECT_NEAR(breaking_threshold(1.0, 0.25, kLambda, 1e-9), -4.0, 1e-12);
  // always below the deterministic level -sqrt(2N)
  const double N = energy_N(kLambda, 1.3);
  EXPECT_LT(breaking_threshold_N(0.5, 0.5, N), -std::sqrt(2 * N));
  EXPECT_THROW(breaking_threshold(1.0, 1.0, kLambda, 1.0), DomainError);
  EXPECT_THROW(breaking_threshold(0.0, 0.5, kLambda, 1.0), DomainError);
}

TEST(ProbabilityBound, LimitsInC) {
  ScalarEnsemble ens{400, 1e-2, 1.0, 60, 1};
  const auto tiny = breaking_probability_bound(ens, [](double) { return 1.0; }, 1e-8);
  EXPECT_GE(tiny.estimate.estimate, 0.99);
  const auto close = breaking_probability_bound(ens, [](double) { return 1.0; }, 0.99);
  EXPECT_GT(close.estimate.estimate, 0.0);
  EXPECT_LT(close.estimate.estimate, 0.2);
  const auto mid = breaking_probability_bound(ens, [](double) { return 1.0; }, 0.5);
  EXPECT_GT(mid.estimate.estimate, close.estimate.estimate);
  EXPECT_LT(mid.estimate.estimate, tiny.estimate.estimate + 1e-12);
  EXPECT_THROW(breaking_probability_bound(ens, [](double) { return 1.0; }, 0.0), DomainError);
}

TEST(Riccati, ConstantStateHasNoSlope) {
  TorusGrid g(32);
  const auto tr = solve_transformed(SpectralField::constant(g, 0.4), unit_girsanov(0.2, 1e-3), {0.0, 0.0},
                                    opts(1e-3, 0.2));
  const auto st = slope_track(tr, false);
  const auto rep = riccati_check(st, energy_N(kLambda, 0.4), 0.16);
  EXPECT_GT(rep.frames_checked, 0u);
  EXPECT_EQ(rep.upper_violations, 0u);
  const auto trap = monotone_trap(st, energy_N(kLambda, 0.4));
  EXPECT_FALSE(trap.qualifies);
}

class DeterministicBreaking : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    TorusGrid g(256);
    u0_ = new SpectralField(bump(g, 4.0, 6.0));
    beta_ = new GirsanovProcesses(unit_girsanov(1.0, 1e-4));
    auto o = opts(1e-4, 1.0);
    o.resolution_tail = 0.1;
    traj_ = new Trajectory(solve_transformed(*u0_, *beta_, {0.0, 0.0}, o));
  }
  static void TearDownTestSuite() {
    delete traj_;
    delete beta_;
    delete u0_;
  }
  static SpectralField* u0_;
  static GirsanovProcesses* beta_;
  static Trajectory* traj_;
};
SpectralField* DeterministicBreaking::u0_ = nullptr;
GirsanovProcesses* DeterministicBreaking::beta_ = nullptr;
Trajectory* DeterministicBreaking::traj_ = nullptr;

TEST_F(DeterministicBreaking, StopsBeforeHorizon) {
  EXPECT_NE(traj_->stop.kind, StopKind::horizon_reached);
  EXPECT_LT(traj_->stop.tau_estimate, 1.0);
}

TEST_F(DeterministicBreaking, RiccatiBoundAndTrapHold) {
  const double h1 = h1_norm(*u0_);
  const double N = energy_N(kLambda, h1);
  const auto st = slope_track(*traj_, false);
  const auto rep = riccati_check(st, N, h1 * h1);
  EXPECT_GT(rep.frames_checked, 20u);
  EXPECT_EQ(rep.gross_violations, 0u);
  const auto trap = monotone_trap(st, N);
  ASSERT_TRUE(trap.qualifies);
  EXPECT_TRUE(trap.holds);
}

TEST_F(DeterministicBreaking, RateTendsToMinusTwo) {
  const auto est = breaking_rate(*traj_, *beta_);
  ASSERT_TRUE(est.resolved) << est.reason;
  EXPECT_DOUBLE_EQ(est.beta_tau, 1.0);
  EXPECT_NEAR(est.terminal_ratio, 1.0, 0.15);
  EXPECT_NEAR(est.series.back() / est.target, 1.0, 0.15);
  // tau* must come after the last resolved frame
  EXPECT_GT(est.tau_star, est.last_resolved_time);
}

TEST(BreakingRate, ConstantBetaRescalesTime) {
  // beta == c: v(t) = w(c t) with w the unit-beta solution, so tau* scales by 1/c and the
  // target becomes -2c.
  TorusGrid g(256);
  const auto u0 = bump(g, 4.0, 6.0);
  const double c = 2.0, dt = 1e-4;
  GirsanovProcesses beta = unit_girsanov(1.0, dt);
  for (auto& b : beta.beta) b = c;
  auto o = opts(dt, 1.0);
  o.resolution_tail = 0.1;
  const auto tr = solve_transformed(u0, beta, {0.0, 0.0}, o);
  const auto est = breaking_rate(tr, beta);
  ASSERT_TRUE(est.resolved) << est.reason;
  EXPECT_DOUBLE_EQ(est.target, -2.0 * c);
  EXPECT_NEAR(est.terminal_ratio, 1.0, 0.15);

  const auto unit = unit_girsanov(1.0, dt);
  const auto ref = breaking_rate(solve_transformed(u0, unit, {0.0, 0.0}, o), unit);
  ASSERT_TRUE(ref.resolved) << ref.reason;
  EXPECT_NEAR(est.tau_star, ref.tau_star / c, 0.02 * ref.tau_star);
}

TEST(BreakingRate, SmoothDecayIsNotBreaking) {
  TorusGrid g(64);
  const auto u0 = SpectralField::from_function(g, [](double x) { return 0.05 * std::cos(x); });
  const auto beta = unit_girsanov(0.5, 1e-3);
  const auto tr = solve_transformed(u0, beta, {0.3, -0.3}, opts(1e-3, 0.5));
  const auto est = breaking_rate(tr, beta);
  EXPECT_FALSE(est.resolved);
}

TEST(Survival, CurveCountsStops) {
  std::vector<StopInfo> stops(4);
  stops[0].kind = StopKind::horizon_reached;
  stops[0].tau_estimate = 2.0;
  stops[1].kind = StopKind::hs_threshold;
  stops[1].tau_estimate = 0.5;
  stops[2].kind = StopKind::cfl_violation;
  stops[2].tau_estimate = 1.5;
  stops[3].kind = StopKind::horizon_reached;
  stops[3].tau_estimate = 2.0;
  const auto sc = survival_curve(stops, 2.0, 5);
  ASSERT_EQ(sc.times.size(), 5u);
  EXPECT_DOUBLE_EQ(sc.survival[0], 1.0);
  EXPECT_DOUBLE_EQ(sc.survival[1], 0.75);  // a stop at t counts as dead at t
  EXPECT_DOUBLE_EQ(sc.survival[2], 0.75);
  EXPECT_DOUBLE_EQ(sc.survival[3], 0.5);
  EXPECT_DOUBLE_EQ(sc.survival[4], 0.5);
  EXPECT_DOUBLE_EQ(sc.at_horizon.estimate, 0.5);
  for (std::size_t i = 1; i < sc.survival.size(); ++i) EXPECT_LE(sc.survival[i], sc.survival[i - 1]);
}

TEST(Lyapunov, LogOnePlusSquare) {
  FrameTracks tr;
  tr.time = {0.0, 0.1, 0.2};
  tr.hs = {0.0, 1.0, 3.0};
  const auto v = lyapunov_series(tr);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0], 0.0);
  EXPECT_NEAR(v[1], std::log(2.0), 1e-15);
  EXPECT_NEAR(v[2], std::log(10.0), 1e-15);
}

TEST(LogLemma, BoundedInValidRegime) {
  const auto r = log_lemma_check(1.0, 1.0, 1.5, 1.0, 2.0);
  EXPECT_TRUE(r.valid_regime);
  EXPECT_TRUE(r.finite);
  EXPECT_FALSE(r.divergent);
  EXPECT_LT(r.grid_max, 1e3);
  const auto eq = log_lemma_check(1.0, 2.0, 1.0, 1.0, 2.0);
  EXPECT_TRUE(eq.valid_regime);
  EXPECT_FALSE(eq.divergent);
}

TEST(LogLemma, DivergesOutsideRegime) {
  // eta = 1 with b < a: the (a - b)(1 + x) term grows along x = M y
  const auto r = log_lemma_check(2.0, 1.0, 1.0, 1.0, 2.0);
  EXPECT_FALSE(r.valid_regime);
  EXPECT_TRUE(r.divergent);
}

TEST(LogLemma, ExpressionAtOrigin) {
  // y = 0 kills every term
  EXPECT_EQ(log_lemma_expression(1.0, 2.0, 1.5, 3.0, 5.0, 0.0), 0.0);
  // y -> inf, x = 0: a + b - 2b + c / (1 + log(1+y^2)) -> a - b
  EXPECT_NEAR(log_lemma_expression(3.0, 1.0, 1.5, 0.0, 0.0, 1e8), 2.0, 1e-12);
}

TEST(DecayConstantsTest, DefaultsAreValid) {
  DecayConstants d;
  EXPECT_TRUE(d.valid());
  EXPECT_NEAR(d.rate(), ((4.0 - 2.0) * 8.0 - 8.0) / 64.0, 1e-15);
  EXPECT_NEAR(d.probability_bound(), 1.0 - std::pow(0.25, 0.25), 1e-15);
  EXPECT_NEAR(d.envelope(0.0), 1.0 / 40.0, 1e-15);
  EXPECT_LT(d.envelope(10.0), d.envelope(1.0));
  d.lambda2 = 3.0;
  EXPECT_FALSE(d.valid());
}
