#pragma once

// Initial data from the "initial" config object. Random families draw from a
// generator seeded by the datum seed only.
//
//   bump             u = A sin x exp(-kappa (1 + cos x))
//   fourier          mean + sum_k (cos_k cos kx + sin_k sin kx)
//   random_band      Gaussian coefficients ~ amplitude / (1+k)^decay, 1 <= k <= band;
//                    optional "hs_norm" rescales to that H^s size
//   signed_momentum  V0 = sign (mean + perturbation) with sum|perturbation| <= amplitude < mean,
//                    v0 = (1 - d_xx)^{-1} V0; seeds past the signed fraction get mixed-sign V0

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sdgh/dynamics.hpp"
#include "sdgh/harness/json_fields.hpp"
#include "sdgh/torus.hpp"

namespace sdgh::harness {

struct InitialDatum {
  SpectralField u0;
  /// "positive", "negative", "mixed" for signed_momentum; "given" otherwise.
  std::string family = "given";
};

namespace detail {

inline std::mt19937_64 datum_rng(std::uint64_t seed) {
  // Separate stream from the Brownian path drawn with the same seed.
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu, 0xda7au};
  return std::mt19937_64(seq);
}

inline SpectralField random_band(const TorusGrid& grid, std::mt19937_64& rng, int band, double amplitude,
                                 double decay) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<cplx> c(grid.spectrum_size(), cplx{0.0, 0.0});
  for (int k = 1; k <= band; ++k) {
    c[k] = amplitude * cplx{normal(rng), normal(rng)} / std::pow(1.0 + k, decay);
  }
  return SpectralField::from_coeffs(grid, std::move(c));
}

inline SpectralField momentum_perturbation(const TorusGrid& grid, std::mt19937_64& rng, int band,
                                           double amplitude) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> a(band), b(band);
  double total = 0.0;
  for (int k = 0; k < band; ++k) {
    a[k] = unif(rng) / (1.0 + k);
    b[k] = unif(rng) / (1.0 + k);
    total += std::abs(a[k]) + std::abs(b[k]);
  }
  const double scale = total > 0.0 ? amplitude / total : 0.0;
  return SpectralField::from_function(grid, [&](double x) {
    double s = 0.0;
    for (int k = 0; k < band; ++k) s += scale * (a[k] * std::cos((k + 1) * x) + b[k] * std::sin((k + 1) * x));
    return s;
  });
}

}  // namespace detail

/// Builds datum `index` (seed `seed`) of an ensemble of `ensemble` data.
inline InitialDatum make_initial(const json& spec, const TorusGrid& grid, std::uint64_t seed, std::size_t index,
                                 std::size_t ensemble, double s_index = 2.0) {
  const Fields f(spec, "initial");
  const std::string type = f.text("type");
  InitialDatum d{SpectralField::constant(grid, 0.0)};
  if (type == "bump") {
    const double A = f.number("amplitude");
    const double kappa = f.positive("kappa");
    d.u0 = SpectralField::from_function(grid, [&](double x) { return A * std::sin(x) * std::exp(-kappa * (1 + std::cos(x))); });
    return d;
  }
  if (type == "fourier") {
    const double mean = f.number("mean", 0.0);
    std::vector<std::array<double, 3>> modes;
    for (const Fields& m : f.objects("modes")) {
      const auto k = m.integer("k");
      if (k < 1 || k > grid.dealias_cutoff()) throw ConfigError(m.field("k"), "mode outside the retained band");
      modes.push_back({static_cast<double>(k), m.number("cos", 0.0), m.number("sin", 0.0)});
    }
    d.u0 = SpectralField::from_function(grid, [&](double x) {
      double v = mean;
      for (const auto& m : modes) v += m[1] * std::cos(m[0] * x) + m[2] * std::sin(m[0] * x);
      return v;
    });
    return d;
  }
  if (type == "random_band") {
    const auto band = f.integer("band");
    if (band < 1 || band > grid.dealias_cutoff()) throw ConfigError(f.field("band"), "outside the retained band");
    auto rng = detail::datum_rng(seed);
    d.u0 = detail::random_band(grid, rng, static_cast<int>(band), f.number("amplitude", 1.0), f.number("decay", 1.0));
    if (f.has("hs_norm")) {
      const double target = f.positive("hs_norm");
      d.u0 = (target / hs_norm(d.u0, {s_index})) * d.u0;
    }
    return d;
  }
  if (type == "signed_momentum") {
    const double sign = f.number("sign");
    if (sign != 1.0 && sign != -1.0) throw ConfigError(f.field("sign"), "must be +1 or -1");
    const double mean = f.positive("mean");
    const double amplitude = f.number("amplitude");
    if (!(amplitude >= 0.0 && amplitude < mean)) throw ConfigError(f.field("amplitude"), "need 0 <= amplitude < mean");
    const double fraction = f.number("fraction", 1.0);
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError(f.field("fraction"), "must lie in [0,1]");
    const auto band = f.integer("band", 4);
    if (band < 1 || band > grid.dealias_cutoff() / 2) throw ConfigError(f.field("band"), "outside the retained band");
    auto rng = detail::datum_rng(seed);
    const auto signed_count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ensemble)));
    SpectralField V = SpectralField::constant(grid, 0.0);
    if (index < signed_count) {
      V = sign * (SpectralField::constant(grid, mean) + detail::momentum_perturbation(grid, rng, static_cast<int>(band), amplitude));
      d.family = sign > 0 ? "positive" : "negative";
    } else {
      // Mixed sign: a first harmonic of size `mean` dominates a small mean.
      std::uniform_real_distribution<double> unif(0.0, kTwoPi);
      const double phase = unif(rng);
      V = SpectralField::from_function(grid, [&](double x) { return mean * std::sin(x + phase) + 0.25 * mean; }) +
          detail::momentum_perturbation(grid, rng, static_cast<int>(band), 0.5 * amplitude);
      d.family = "mixed";
    }
    d.u0 = helmholtz_inverse(V);
    return d;
  }
  throw ConfigError(f.field("type"), "unknown initial data type '" + type + "'");
}

}  // namespace sdgh::harness
