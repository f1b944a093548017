#pragma once

// Periodic collocation grid on T = R/2piZ and the spectral field type.
//
// Fourier convention (used everywhere in the library):
//
//     f^(k) = (1/2pi) \int_T f(x) e^{-ikx} dx  ~=  (1/n) sum_j f(x_j) e^{-ikx_j}
//
// so that f(x) = sum_k f^(k) e^{ikx}, the Green's kernel identity
// (G * f)^(k) = f^(k)/(1+k^2) holds with * the plain integral over T, and
//
//     ||f||_{H^s}^2 = sum_k (1+k^2)^s |f^(k)|^2 = (1/2pi) \int_T |D^s f|^2 dx.
//
// Every L^2-type norm is therefore taken against the normalised measure
// dx/2pi; in particular ||cos||_{H^1}^2 = 1 and ||1||_{H^1} = 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sdgh/errors.hpp"
#include "sdgh/fft.hpp"

namespace sdgh {

using cplx = std::complex<double>;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

class TorusGrid {
 public:
  explicit TorusGrid(int n) : n_(n) {
    if (n < 8 || (n & (n - 1)) != 0) {
      throw DomainError("TorusGrid: n must be a power of two >= 8, got " + std::to_string(n));
    }
  }

  int n() const noexcept { return n_; }
  int spectrum_size() const noexcept { return n_ / 2 + 1; }
  double length() const noexcept { return kTwoPi; }
  double spacing() const noexcept { return kTwoPi / n_; }
  double node(int j) const noexcept { return kTwoPi * j / n_; }
  /// Largest wavenumber kept by the 2/3 rule: quadratic products of modes
  /// |k| <= cutoff alias only onto modes above the cutoff.
  int dealias_cutoff() const noexcept { return (n_ - 1) / 3; }

  std::vector<double> nodes() const {
    std::vector<double> x(n_);
    for (int j = 0; j < n_; ++j) x[j] = node(j);
    return x;
  }

  friend bool operator==(const TorusGrid&, const TorusGrid&) = default;

 private:
  int n_;
};

/// Regularity exponent s of H^s.
struct SobolevIndex {
  double s;
};

namespace detail {

inline void require_finite(std::span<const double> v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidField(std::string(where) + ": non-finite sample");
  }
}

inline void require_same_grid(const TorusGrid& a, const TorusGrid& b) {
  if (!(a == b)) throw DomainError("fields live on different grids");
}

}  // namespace detail

/// Real periodic field: nodal samples together with the half spectrum
/// f^(k), k = 0..n/2. Immutable once built.
class SpectralField {
 public:
  static SpectralField from_values(const TorusGrid& grid, std::vector<double> values) {
    if (static_cast<int>(values.size()) != grid.n()) {
      throw DomainError("from_values: sample count does not match grid");
    }
    detail::require_finite(values, "SpectralField");
    std::vector<cplx> coeffs(grid.spectrum_size());
    detail::RealFft::get(grid.n()).forward(values, coeffs);
    return SpectralField(grid, std::move(values), std::move(coeffs));
  }

  static SpectralField from_coeffs(const TorusGrid& grid, std::vector<cplx> coeffs) {
    if (static_cast<int>(coeffs.size()) != grid.spectrum_size()) {
      throw DomainError("from_coeffs: spectrum size does not match grid");
    }
    coeffs.front().imag(0.0);
    coeffs.back().imag(0.0);
    std::vector<double> values(grid.n());
    detail::RealFft::get(grid.n()).inverse(coeffs, values);
    detail::require_finite(values, "SpectralField");
    return SpectralField(grid, std::move(values), std::move(coeffs));
  }

  template <class F>
  static SpectralField from_function(const TorusGrid& grid, F&& f) {
    std::vector<double> values(grid.n());
    for (int j = 0; j < grid.n(); ++j) values[j] = f(grid.node(j));
    return from_values(grid, std::move(values));
  }

  static SpectralField constant(const TorusGrid& grid, double c) {
    return from_values(grid, std::vector<double>(grid.n(), c));
  }

  const TorusGrid& grid() const noexcept { return grid_; }
  int n() const noexcept { return grid_.n(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const cplx> coeffs() const noexcept { return coeffs_; }
  double operator[](int j) const { return values_[j]; }

  /// Multiply f^(k) by m(k) for k = 0..n/2 (m must be even in k or the
  /// caller accepts the half-spectrum interpretation).
  template <class M>
  SpectralField with_multiplier(M&& m) const {
    std::vector<cplx> c(coeffs_.begin(), coeffs_.end());
    for (int k = 0; k < static_cast<int>(c.size()); ++k) c[k] *= m(k);
    return from_coeffs(grid_, std::move(c));
  }

  /// Spectral derivative; the Nyquist mode is dropped so the result stays real.
  SpectralField derivative(int order = 1) const {
    std::vector<cplx> c(coeffs_.begin(), coeffs_.end());
    static constexpr std::array<cplx, 4> i_pow{cplx{1, 0}, cplx{0, 1}, cplx{-1, 0}, cplx{0, -1}};
    for (int k = 0; k < static_cast<int>(c.size()); ++k) {
      c[k] *= i_pow[order % 4] * std::pow(static_cast<double>(k), order);
    }
    if (order > 0) c.back() = 0.0;
    return from_coeffs(grid_, std::move(c));
  }

  /// Zero every mode with |k| > kmax.
  SpectralField truncated(int kmax) const {
    std::vector<cplx> c(coeffs_.begin(), coeffs_.end());
    for (int k = kmax + 1; k < static_cast<int>(c.size()); ++k) c[k] = 0.0;
    return from_coeffs(grid_, std::move(c));
  }

  /// Zero-padded copy on a grid `factor` times finer (trigonometric interpolation).
  SpectralField refined(int factor) const {
    if (factor == 1) return *this;
    TorusGrid fine(grid_.n() * factor);
    std::vector<cplx> c(fine.spectrum_size(), cplx{0.0, 0.0});
    const int last = grid_.n() / 2;
    for (int k = 0; k < last; ++k) c[k] = coeffs_[k];
    // Split the Nyquist mode symmetrically so the interpolant is real.
    c[last] = 0.5 * coeffs_[last];
    return from_coeffs(fine, std::move(c));
  }

  /// Trigonometric interpolant (or its derivative) at an arbitrary point.
  double evaluate(double x, int derivative_order = 0) const {
    const int half = grid_.n() / 2;
    double sum = derivative_order == 0 ? coeffs_[0].real() : 0.0;
    const cplx step = std::polar(1.0, x);
    cplx phase = step;
    static constexpr std::array<cplx, 4> i_pow{cplx{1, 0}, cplx{0, 1}, cplx{-1, 0}, cplx{0, -1}};
    const cplx unit = i_pow[derivative_order % 4];
    for (int k = 1; k < half; ++k) {
      const double kp = std::pow(static_cast<double>(k), derivative_order);
      sum += 2.0 * kp * (unit * coeffs_[k] * phase).real();
      phase *= step;
      if ((k & 63) == 0) phase = std::polar(1.0, (k + 1) * x);
    }
    if (derivative_order == 0) sum += coeffs_[half].real() * std::cos(half * x);
    return sum;
  }

  friend SpectralField operator+(const SpectralField& a, const SpectralField& b) {
    detail::require_same_grid(a.grid_, b.grid_);
    std::vector<double> v(a.values_);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += b.values_[j];
    return from_values(a.grid_, std::move(v));
  }
  friend SpectralField operator-(const SpectralField& a, const SpectralField& b) {
    detail::require_same_grid(a.grid_, b.grid_);
    std::vector<double> v(a.values_);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] -= b.values_[j];
    return from_values(a.grid_, std::move(v));
  }
  friend SpectralField operator*(double s, const SpectralField& a) {
    std::vector<cplx> c(a.coeffs_.begin(), a.coeffs_.end());
    for (auto& z : c) z *= s;
    return from_coeffs(a.grid_, std::move(c));
  }
  friend SpectralField operator*(const SpectralField& a, double s) { return s * a; }

 private:
  SpectralField(const TorusGrid& grid, std::vector<double> values, std::vector<cplx> coeffs)
      : grid_(grid), values_(std::move(values)), coeffs_(std::move(coeffs)) {}

  TorusGrid grid_;
  std::vector<double> values_;
  std::vector<cplx> coeffs_;
};

/// Exact product of two band-limited fields (3/2-padded), returned on the
/// common grid with the modes above n/2 discarded.
inline SpectralField multiply(const SpectralField& a, const SpectralField& b) {
  detail::require_same_grid(a.grid(), b.grid());
  const int pad = 2;
  SpectralField fa = a.refined(pad);
  SpectralField fb = b.refined(pad);
  std::vector<double> prod(fa.values().begin(), fa.values().end());
  for (std::size_t j = 0; j < prod.size(); ++j) prod[j] *= fb[static_cast<int>(j)];
  SpectralField fine = SpectralField::from_values(fa.grid(), std::move(prod));
  std::vector<cplx> c(a.grid().spectrum_size());
  for (int k = 0; k < static_cast<int>(c.size()); ++k) c[k] = fine.coeffs()[k];
  c.back() = 0.0;
  return SpectralField::from_coeffs(a.grid(), std::move(c));
}

// ---------------------------------------------------------------------------
// Operators

/// Bessel potential D^s = (1 - d_xx)^{s/2}; s = -2 is the Helmholtz inverse.
inline SpectralField bessel_potential(const SpectralField& f, SobolevIndex s) {
  if (!std::isfinite(s.s)) throw DomainError("bessel_potential: non-finite s");
  return f.with_multiplier([&](int k) { return std::pow(1.0 + double(k) * k, 0.5 * s.s); });
}

/// (1 - d_xx)^{-1} as the Fourier multiplier 1/(1+k^2).
inline SpectralField helmholtz_inverse(const SpectralField& f) {
  return f.with_multiplier([](int k) { return 1.0 / (1.0 + double(k) * k); });
}

/// Periodic Green's kernel of 1 - d_xx on T.
inline double greens_kernel(double x) {
  const double r = x - kTwoPi * std::floor(x / kTwoPi);
  return std::cosh(r - kPi) / (2.0 * std::sinh(kPi));
}

namespace detail {

/// Repeated 8th-order central differences on the periodic grid.
inline std::vector<std::vector<double>> fd_derivatives(std::span<const double> f, double h,
                                                       int max_order) {
  static constexpr std::array<double, 4> w{4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
  const int n = static_cast<int>(f.size());
  std::vector<std::vector<double>> d(max_order + 1);
  d[0].assign(f.begin(), f.end());
  for (int m = 1; m <= max_order; ++m) {
    d[m].assign(n, 0.0);
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int r = 1; r <= 4; ++r) {
        acc += w[r - 1] * (d[m - 1][(j + r) % n] - d[m - 1][(j - r + n) % n]);
      }
      d[m][j] = acc / h;
    }
  }
  return d;
}

}  // namespace detail

/// Quadrature for (K * f)(x_i) = \int_0^{2pi} K(s) f(x_i - s) ds where K is
/// smooth on (0, 2pi) but kinks or jumps at s = 0. `jumps[j]` is
/// K^{(j)}(2pi-) - K^{(j)}(0+). Plain trapezoid on the grid (node value taken
/// as the one-sided average) plus Euler-Maclaurin endpoint corrections up to
/// h^6; the derivatives of f that the corrections need come from finite
/// differences, so nothing here touches a Fourier multiplier.
template <class Kernel>
SpectralField kinked_kernel_convolution(const SpectralField& f, Kernel&& kernel,
                                        const std::array<double, 6>& jumps,
                                        double kernel_at_node) {
  const int n = f.n();
  const double h = f.grid().spacing();
  std::vector<double> ksample(n);
  ksample[0] = kernel_at_node;
  for (int j = 1; j < n; ++j) ksample[j] = kernel(h * j);
  const auto vals = f.values();
  const auto d = detail::fd_derivatives(vals, h, 5);

  // B_2/2!, B_4/4!, B_6/6!
  static constexpr std::array<double, 3> bern{1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0};
  auto binom = [](int m, int j) {
    double r = 1.0;
    for (int i = 1; i <= j; ++i) r = r * (m - j + i) / i;
    return r;
  };

  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += ksample[j] * vals[(i - j + n) % n];
    acc *= h;
    double hp = h * h;
    for (int p = 1; p <= 3; ++p) {
      const int m = 2 * p - 1;
      double dm = 0.0;
      for (int j = 0; j <= m; ++j) {
        const double sign = ((m - j) % 2 == 0) ? 1.0 : -1.0;
        dm += binom(m, j) * jumps[j] * sign * d[m - j][i];
      }
      acc -= bern[p - 1] * hp * dm;
      hp *= h * h;
    }
    out[i] = acc;
  }
  return SpectralField::from_values(f.grid(), std::move(out));
}

/// G_T * f by corrected trapezoidal quadrature; the independent route to
/// bessel_potential(f, -2).
inline SpectralField helmholtz_inverse_greens(const SpectralField& f) {
  // G' jumps by +1 across s = 0; even derivatives are continuous.
  const std::array<double, 6> jumps{0.0, 1.0, 0.0, 1.0, 0.0, 1.0};
  return kinked_kernel_convolution(f, greens_kernel, jumps, greens_kernel(0.0));
}

/// Mollifier T_eps with multiplier (1 + eps^2 k^2)^{-1}.
inline SpectralField mollify(const SpectralField& f, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("mollify: eps must lie in (0,1)");
  return f.with_multiplier([&](int k) { return 1.0 / (1.0 + eps * eps * double(k) * k); });
}

// ---------------------------------------------------------------------------
// Norms

inline double hs_norm(const SpectralField& f, SobolevIndex s) {
  const auto c = f.coeffs();
  const int half = f.n() / 2;
  double acc = std::norm(c[0]) + std::norm(c[half]) * std::pow(1.0 + double(half) * half, s.s);
  for (int k = 1; k < half; ++k) acc += 2.0 * std::pow(1.0 + double(k) * k, s.s) * std::norm(c[k]);
  return std::sqrt(acc);
}

inline double l2_norm(const SpectralField& f) { return hs_norm(f, {0.0}); }
inline double h1_norm(const SpectralField& f) { return hs_norm(f, {1.0}); }

inline double linf_norm(const SpectralField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

/// max(||f||_inf, ||f_x||_inf) sampled on a grid `refine` times finer.
inline double w1inf_norm(const SpectralField& f, int refine = 1) {
  const SpectralField g = f.refined(refine);
  return std::max(linf_norm(g), linf_norm(g.derivative()));
}

struct Norms {
  double l2;
  double h1;
  double hs;
  double s;
  double linf;
  double w1inf;
};

inline Norms norms(const SpectralField& f, SobolevIndex s = {1.0}) {
  return Norms{l2_norm(f), h1_norm(f), hs_norm(f, s), s.s, linf_norm(f), w1inf_norm(f)};
}

// ---------------------------------------------------------------------------
// Minimum slope

struct SlopeMinimum {
  double value;  ///< M = min f_x
  int index;     ///< node attaining it (smallest index on ties)
  double x;      ///< location (node, or refined point)
};

/// M = min over nodes of f_x and the first node attaining it.
inline SlopeMinimum min_slope(const SpectralField& f) {
  const SpectralField fx = f.derivative();
  const auto v = fx.values();
  int arg = 0;
  for (int j = 1; j < static_cast<int>(v.size()); ++j) {
    if (v[j] < v[arg]) arg = j;
  }
  return {v[arg], arg, f.grid().node(arg)};
}

/// min f_x refined off-grid by Newton iteration on f_xx = 0 from the grid argmin.
inline SlopeMinimum refined_min_slope(const SpectralField& f) {
  SlopeMinimum grid_min = min_slope(f);
  const double h = f.grid().spacing();
  double x = grid_min.x;
  for (int it = 0; it < 8; ++it) {
    const double f2 = f.evaluate(x, 2);
    const double f3 = f.evaluate(x, 3);
    if (!(f3 > 0.0)) break;
    const double dx = std::clamp(-f2 / f3, -0.5 * h, 0.5 * h);
    x += dx;
    if (std::abs(dx) < 1e-14) break;
  }
  if (std::abs(x - grid_min.x) > h) return grid_min;
  const double value = f.evaluate(x, 1);
  if (!(value <= grid_min.value)) return grid_min;
  return {value, grid_min.index, x - kTwoPi * std::floor(x / kTwoPi)};
}

}  // namespace sdgh
