#include <gtest/gtest.h>

#include <cmath>

#include "sdgh/dynamics.hpp"

using namespace sdgh;

namespace {

double max_abs(const SpectralField& f) { return linf_norm(f); }

SpectralField fn(const TorusGrid& g, double (*f)(double)) { return SpectralField::from_function(g, f); }

}  // namespace

TEST(NonlocalFlux, ConstantGivesZero) {
  TorusGrid g(64);
  const auto fl = nonlocal_flux(SpectralField::constant(g, 1.7), {0.4, 0.9});
  EXPECT_LT(max_abs(fl.F1), 1e-14);
  EXPECT_LT(max_abs(fl.F2), 1e-14);
  EXPECT_LT(max_abs(fl.F3), 1e-14);
  EXPECT_LT(max_abs(fl.F), 1e-14);
}

TEST(NonlocalFlux, BalancedParamsKillF3) {
  TorusGrid g(64);
  const auto u = SpectralField::from_function(g, [](double x) { return std::sin(x) + 0.3 * std::cos(4 * x); });
  const auto fl = nonlocal_flux(u, {0.7, -0.7});
  EXPECT_EQ(max_abs(fl.F3), 0.0);
  EXPECT_GT(max_abs(fl.F1), 0.1);
}

TEST(NonlocalFlux, CosineF1MatchesMultiplierAndGreens) {
  TorusGrid g(128);
  const auto u = fn(g, [](double x) { return std::cos(x); });
  const auto fl = nonlocal_flux(u, {0.0, 0.0});
  const auto expect = SpectralField::from_function(g, [](double x) { return -std::sin(2 * x) / 5.0; });
  EXPECT_LT(max_abs(fl.F1 - expect), 1e-14);
  // independent route: Green's quadrature of d_x(u^2)
  const auto usq = SpectralField::from_function(g, [](double x) { return std::cos(x) * std::cos(x); });
  EXPECT_LT(max_abs(helmholtz_inverse_greens(usq.derivative()) - fl.F1), 1e-9);
}

TEST(Drift, ConstantsSteadyWhenBalanced) {
  TorusGrid g(32);
  EXPECT_LT(max_abs(drift(SpectralField::constant(g, 2.5), {1.0, -1.0})), 1e-14);
}

TEST(Drift, ConstantEqualToGammaIsSteady) {
  TorusGrid g(32);
  for (double c0 : {-1.0, 0.0, 3.0}) {
    EXPECT_LT(max_abs(drift(SpectralField::constant(g, 0.8), {c0, 0.8})), 1e-14);
  }
}

TEST(Drift, MatchesFiniteDifferenceOnFinerGrid) {
  const ModelParams p{0.5, 0.2};
  TorusGrid g(64), fine(256);
  auto u_of = [](double x) { return 0.1 * std::cos(x); };
  const auto u = SpectralField::from_function(g, u_of);
  const auto spectral = drift(u, p);

  // Brute force on the fine grid: 8th-order differences, Green's quadrature
  // for (1 - d_xx)^{-1}; no Fourier multipliers.
  const auto uf = SpectralField::from_function(fine, u_of);
  const double h = fine.spacing();
  const auto d = detail::fd_derivatives(uf.values(), h, 1);
  std::vector<double> w(fine.n());
  for (int j = 0; j < fine.n(); ++j) w[j] = d[0][j] * d[0][j] + 0.5 * d[1][j] * d[1][j] + (p.c0 + p.gamma) * d[0][j];
  const auto dw = detail::fd_derivatives(w, h, 1);
  const auto F = helmholtz_inverse_greens(SpectralField::from_values(fine, dw[1]));
  double worst = 0.0;
  for (int j = 0; j < g.n(); ++j) {
    const int jf = 4 * j;
    const double bracket = (d[0][jf] - p.gamma) * d[1][jf] + F[jf];
    worst = std::max(worst, std::abs(-bracket - spectral[j]));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Transformed, BetaOneIsDrift) {
  TorusGrid g(64);
  const ModelParams p{0.3, -0.1};
  const auto v = SpectralField::from_function(g, [](double x) { return std::sin(x) + 0.2 * std::cos(3 * x); });
  EXPECT_LT(max_abs(transformed_tendency(v, 1.0, p) - drift(v, p)), 1e-14);
}

TEST(Transformed, ConstantGivesZero) {
  TorusGrid g(32);
  EXPECT_LT(max_abs(transformed_tendency(SpectralField::constant(g, 0.6), 1.7, {0.2, 0.4})), 1e-14);
}

TEST(Transformed, LinearInBetaWithoutF3) {
  TorusGrid g(64);
  const auto v = fn(g, [](double x) { return std::cos(x); });
  const auto one = transformed_tendency(v, 1.0, {0.0, 0.0});
  const auto two = transformed_tendency(v, 2.0, {0.0, 0.0});
  EXPECT_LT(max_abs(two - 2.0 * one), 1e-14);
  EXPECT_GT(max_abs(one), 0.1);
}

TEST(Transformed, RejectsNonPositiveBeta) {
  TorusGrid g(16);
  EXPECT_THROW(transformed_tendency(SpectralField::constant(g, 1.0), 0.0, {}), DomainError);
}

TEST(Momentum, CosineDoubles) {
  TorusGrid g(32);
  const auto V = momentum(fn(g, [](double x) { return std::cos(x); })).V;
  EXPECT_LT(max_abs(V - 2.0 * fn(g, [](double x) { return std::cos(x); })), 1e-13);
  EXPECT_LT(max_abs(momentum(SpectralField::constant(g, 1.0)).V - SpectralField::constant(g, 1.0)), 1e-15);
}

TEST(Momentum, KernelGivesFlatSpectrum) {
  // Sampled closed-form kernel on a fine grid; 2pi * V^(k) = 1 up to aliasing ~ k^2 / n^2.
  TorusGrid g(16384);
  const auto G = SpectralField::from_function(g, greens_kernel).truncated(8);
  const auto V = momentum(G).V;
  for (int k = 0; k < 8; ++k) {
    EXPECT_NEAR(kTwoPi * V.coeffs()[k].real(), 1.0, 1e-6) << "k=" << k;
    EXPECT_NEAR(V.coeffs()[k].imag(), 0.0, 1e-12);
  }
}
