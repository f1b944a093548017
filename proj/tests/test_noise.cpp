#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "sdgh/noise.hpp"
#include "sdgh/stats.hpp"

using namespace sdgh;

TEST(BrownianPath, SameSeedSameIncrements) {
  const auto a = sample_path(1.0, 1e-3, 2, 42);
  const auto b = sample_path(1.0, 1e-3, 2, 42);
  const auto c = sample_path(1.0, 1e-3, 2, 43);
  ASSERT_EQ(a.n_steps(), 1000);
  for (int k = 0; k < 2; ++k) {
    for (int i = 0; i < a.n_steps(); ++i) EXPECT_EQ(a.increment(k, i), b.increment(k, i));
  }
  EXPECT_NE(a.increment(0, 0), c.increment(0, 0));
}

TEST(BrownianPath, IncrementMeanWithinFourSigma) {
  const double dt = 1e-3;
  const auto p = sample_path(100.0, dt, 1, 7);
  ASSERT_EQ(p.n_steps(), 100000);
  const auto m = p.mode(0);
  const double mean = std::accumulate(m.begin(), m.end(), 0.0) / m.size();
  EXPECT_LT(std::abs(mean), 4.0 * std::sqrt(dt / m.size()));
}

TEST(BrownianPath, QuadraticVariationNearOne) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto p = sample_path(1.0, 1e-4, 1, seed);
    double qv = 0.0;
    for (double x : p.mode(0)) qv += x * x;
    EXPECT_NEAR(qv, 1.0, 0.05);
  }
}

TEST(BrownianPath, CoarsenedSumsIncrements) {
  const auto p = sample_path(1.0, 1e-3, 1, 5);
  const auto c = p.coarsened(4);
  EXPECT_EQ(c.n_steps(), 250);
  EXPECT_NEAR(c.increment(0, 3), p.increment(0, 12) + p.increment(0, 13) + p.increment(0, 14) + p.increment(0, 15),
              1e-15);
}

TEST(BrownianPath, BridgePiecesSumToIncrement) {
  const auto a = bridge_split(0.37, 1e-3, 16, 9, 120, 0);
  const auto b = bridge_split(0.37, 1e-3, 16, 9, 120, 0);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 0.37, 1e-14);
  EXPECT_EQ(bridge_split(0.2, 1e-3, 1, 9, 0, 0), std::vector<double>{0.2});
}

TEST(BCoefficient, SinusoidalRespectsBounds) {
  const auto b = BCoefficient::sinusoidal(0.5, 1.5);
  EXPECT_TRUE(b.satisfies_bounds(20.0));
  EXPECT_NEAR(b(kPi / 2) * b(kPi / 2), 1.5, 1e-14);
  EXPECT_NEAR(b(3 * kPi / 2) * b(3 * kPi / 2), 0.5, 1e-14);
  // closed-form integral against a fine midpoint rule
  double acc = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double t = 7.0 * (i + 0.5) / n;
    acc += b(t) * b(t) * 7.0 / n;
  }
  EXPECT_NEAR(b.integrated_square(7.0), acc, 1e-8);
  EXPECT_FALSE(BCoefficient::constant(0.0).satisfies_bounds(1.0));
  EXPECT_THROW(BCoefficient::sinusoidal(1.0, 0.5), DomainError);
}

TEST(Diffusion, LinearUnitNoiseIsIdentity) {
  TorusGrid g(32);
  const auto u = SpectralField::from_function(g, [](double x) { return std::cos(x); });
  const auto h = diffusion(0.3, u, LinearNoise{BCoefficient::constant(1.0)});
  ASSERT_EQ(h.size(), 1u);
  EXPECT_LT(linf_norm(h[0] - u), 1e-15);
}

TEST(Diffusion, ThetaZeroCollapsesToLinear) {
  TorusGrid g(32);
  const auto u = SpectralField::from_function(g, [](double x) { return 0.4 * std::sin(3 * x) + 1.0; });
  const auto h = diffusion(0.0, u, NonlinearW1InfNoise{1.0, 0.0});
  EXPECT_LT(linf_norm(h[0] - u), 1e-15);
}

TEST(Diffusion, W1InfWeightedNoise) {
  TorusGrid g(64);
  const auto u = SpectralField::from_function(g, [](double x) { return std::sin(2 * x); });
  const auto h = diffusion(0.0, u, NonlinearW1InfNoise{2.0, 1.0});
  EXPECT_LT(linf_norm(h[0] - 6.0 * u), 1e-12);
}

TEST(Diffusion, MultiModeAndAdditive) {
  TorusGrid g(32);
  const auto u = SpectralField::from_function(g, [](double x) { return std::cos(x); });
  const auto g1 = SpectralField::constant(g, 0.5);
  const auto g2 = SpectralField::from_function(g, [](double x) { return std::cos(x); });
  const auto h = diffusion(0.0, u, MultiModeNoise{{g1, g2}});
  ASSERT_EQ(h.size(), 2u);
  EXPECT_LT(linf_norm(h[0] - 0.5 * u), 1e-15);
  const auto sq = SpectralField::from_function(g, [](double x) { return std::cos(x) * std::cos(x); });
  EXPECT_LT(linf_norm(h[1] - sq), 1e-14);
  EXPECT_EQ(noise_modes(MultiModeNoise{{g1, g2}}), 2);
  const auto a = diffusion(0.0, u, AdditiveNoise{g2});
  EXPECT_LT(linf_norm(a[0] - g2), 1e-15);
}

TEST(Noise, StrongRegime) {
  EXPECT_TRUE((NonlinearW1InfNoise{1.0, 1.0}).strong_regime(0.0));
  EXPECT_FALSE((NonlinearW1InfNoise{0.0, 1.0}).strong_regime(0.0));
  EXPECT_FALSE((NonlinearW1InfNoise{1.0, 0.0}).strong_regime(0.0));
  EXPECT_TRUE((NonlinearW1InfNoise{2.1, 0.5}).strong_regime(2.0));
  EXPECT_FALSE((NonlinearW1InfNoise{1.9, 0.5}).strong_regime(2.0));
}

TEST(Girsanov, ZeroNoiseIsUnit) {
  const auto p = sample_path(1.0, 1e-2, 1, 3);
  const auto g = girsanov(p, BCoefficient::constant(0.0));
  for (std::size_t i = 0; i < g.beta.size(); ++i) {
    EXPECT_EQ(g.beta[i], 1.0);
    EXPECT_EQ(g.alpha[i], 1.0);
  }
}

TEST(Girsanov, LogBetaIsBrownianMinusHalfT) {
  const auto p = sample_path(2.0, 1e-3, 1, 17);
  const auto g = girsanov(p, BCoefficient::constant(1.0));
  const auto W = p.cumulative(0);
  for (std::size_t i = 0; i < g.beta.size(); i += 97) {
    EXPECT_NEAR(std::log(g.beta[i]) + 0.5 * g.time(i), W[i], 1e-11);
    EXPECT_NEAR(std::log(g.alpha[i]), W[i], 1e-11);
  }
}

TEST(Girsanov, MartingaleMeanAtOne) {
  std::vector<double> end(2000);
  for (std::size_t i = 0; i < end.size(); ++i) {
    end[i] = girsanov(sample_path(1.0, 1e-2, 1, 1000 + i), BCoefficient::constant(1.0)).beta.back();
  }
  const auto m = sample_moments(end);
  EXPECT_LT(std::abs(m.mean - 1.0), 3.0 * m.stderr_mean);
}

TEST(ExitTime, BoundFormulaAndEmpirical) {
  ScalarEnsemble ens{1000, 1e-2, 50.0, 500, 1};
  const auto e = exit_time_tau_R(ens, BCoefficient::constant(1.0), 0.0, 4.0);
  EXPECT_DOUBLE_EQ(e.bound, 0.75);
  EXPECT_GE(e.no_exit.estimate, e.bound - 2.0 * e.no_exit.half_width());
  const auto q = exit_time_tau_R(ens, BCoefficient::constant(1.0), 0.25, 16.0);
  EXPECT_NEAR(q.bound, 0.75, 1e-15);
  EXPECT_GE(q.no_exit.estimate, q.bound - 2.0 * q.no_exit.half_width());
}

TEST(ExitTime, HugeLevelAlmostNeverExited) {
  ScalarEnsemble ens{500, 1e-2, 50.0, 900, 1};
  const auto e = exit_time_tau_R(ens, BCoefficient::constant(1.0), 0.0, 1e6);
  EXPECT_GE(e.no_exit.estimate, 0.99);
  EXPECT_THROW(exit_time_tau_R(ens, BCoefficient::constant(1.0), 0.5, 4.0), DomainError);
}

TEST(Stats, WilsonKnownValues) {
  const auto w = wilson_interval(8, 10);
  EXPECT_NEAR(w.lower, 0.4902, 1e-4);
  EXPECT_NEAR(w.upper, 0.9433, 1e-4);
  const auto z = wilson_interval(0, 200);
  EXPECT_EQ(z.estimate, 0.0);
  EXPECT_NEAR(z.upper, 0.01885, 1e-5);
}
