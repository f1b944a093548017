#pragma once

// Nonlocal DGH drift
//
//     du + [(u - gamma) u_x + F(u)] dt = h(t,u) dW,
//     F(u) = (1 - d_xx)^{-1} d_x (u^2 + u_x^2/2 + (c0 + gamma) u),
//
// and the random-coefficient equation obeyed by v = u / beta,
//
//     v_t + beta v v_x - gamma v_x + beta (1 - d_xx)^{-1} d_x (v^2 + v_x^2/2)
//         + (c0 + gamma) (1 - d_xx)^{-1} d_x v = 0.
//
// beta multiplies F1 + F2 but not F3. alpha is fixed to 1.

#include <cmath>
#include <span>
#include <vector>

#include "sdgh/torus.hpp"

namespace sdgh {

struct ModelParams {
  double c0 = 0.0;
  double gamma = 0.0;
  static constexpr double alpha = 1.0;

  /// c0 + gamma = 0, the standing assumption of the linear-noise theory.
  bool balanced(double tol = 1e-14) const { return std::abs(c0 + gamma) <= tol; }
};

struct MomentumField {
  SpectralField V;
};

/// Coefficient-space evaluation of the transformed tendency with 2/3-rule
/// dealiasing. Owns its FFT buffers, so one instance per thread.
///
///   out^(k) = -ik [ beta w1^(k)/2 - gamma v^(k)
///                   + (beta (w1 + w2)^(k) + (c0+gamma) v^(k)) / (1+k^2) ]
///
/// with w1 = v^2 and w2 = v_x^2/2 formed on the grid from the band-limited
/// input. v v_x is taken as d_x(v^2)/2, which is exact after truncation.
class TendencyKernel {
 public:
  TendencyKernel(const TorusGrid& grid, const ModelParams& params)
      : grid_(grid),
        params_(params),
        fft_(&detail::RealFft::get(grid.n())),
        cutoff_(grid.dealias_cutoff()),
        vhat_(grid.spectrum_size()),
        vxhat_(grid.spectrum_size()),
        w1hat_(grid.spectrum_size()),
        w2hat_(grid.spectrum_size()),
        scratch_(grid.spectrum_size()),
        v_(grid.n()),
        vx_(grid.n()),
        w1_(grid.n()),
        w2_(grid.n()) {}

  const TorusGrid& grid() const noexcept { return grid_; }
  const ModelParams& params() const noexcept { return params_; }

  /// Writes the transformed tendency of `v` into `out` (both half spectra).
  void transformed(std::span<const cplx> v, double beta, std::span<cplx> out) {
    load(v);
    const int m = grid_.spectrum_size();
    for (int j = 0; j < grid_.n(); ++j) {
      w1_[j] = v_[j] * v_[j];
      w2_[j] = 0.5 * vx_[j] * vx_[j];
    }
    fft_->forward(w1_, w1hat_);
    fft_->forward(w2_, w2hat_);
    const double c = params_.c0 + params_.gamma;
    for (int k = 0; k < m; ++k) {
      if (k > cutoff_) {
        out[k] = 0.0;
        continue;
      }
      const double kk = static_cast<double>(k);
      const cplx ik{0.0, kk};
      const double inv = 1.0 / (1.0 + kk * kk);
      const cplx bracket = beta * 0.5 * w1hat_[k] - params_.gamma * vhat_[k] +
                           (beta * (w1hat_[k] + w2hat_[k]) + c * vhat_[k]) * inv;
      out[k] = -ik * bracket;
    }
  }

  /// The drift of the u-equation is the transformed tendency at beta = 1.
  void drift(std::span<const cplx> u, std::span<cplx> out) { transformed(u, 1.0, out); }

  /// F1, F2, F3 of a band-limited input, as half spectra.
  void flux(std::span<const cplx> u, std::span<cplx> f1, std::span<cplx> f2, std::span<cplx> f3) {
    load(u);
    for (int j = 0; j < grid_.n(); ++j) {
      w1_[j] = v_[j] * v_[j];
      w2_[j] = 0.5 * vx_[j] * vx_[j];
    }
    fft_->forward(w1_, w1hat_);
    fft_->forward(w2_, w2hat_);
    const double c = params_.c0 + params_.gamma;
    for (int k = 0; k < grid_.spectrum_size(); ++k) {
      if (k > cutoff_) {
        f1[k] = f2[k] = f3[k] = 0.0;
        continue;
      }
      const double kk = static_cast<double>(k);
      const cplx ik_inv = cplx{0.0, kk} / (1.0 + kk * kk);
      f1[k] = ik_inv * w1hat_[k];
      f2[k] = ik_inv * w2hat_[k];
      f3[k] = ik_inv * c * vhat_[k];
    }
  }

  /// Grid samples of the last (truncated) input and of its derivative.
  std::span<const double> last_values() const noexcept { return v_; }
  std::span<const double> last_slopes() const noexcept { return vx_; }

 private:
  void load(std::span<const cplx> v) {
    const int m = grid_.spectrum_size();
    for (int k = 0; k < m; ++k) {
      vhat_[k] = k <= cutoff_ ? v[k] : cplx{0.0, 0.0};
      vxhat_[k] = cplx{0.0, static_cast<double>(k)} * vhat_[k];
    }
    fft_->inverse(vhat_, v_, scratch_);
    fft_->inverse(vxhat_, vx_, scratch_);
  }

  TorusGrid grid_;
  ModelParams params_;
  const detail::RealFft* fft_;
  int cutoff_;
  std::vector<cplx> vhat_, vxhat_, w1hat_, w2hat_, scratch_;
  std::vector<double> v_, vx_, w1_, w2_;
};

struct NonlocalFlux {
  SpectralField F1;
  SpectralField F2;
  SpectralField F3;
  SpectralField F;
};

/// F1 = (1-d_xx)^{-1} d_x(u^2), F2 = (1-d_xx)^{-1} d_x(u_x^2/2),
/// F3 = (1-d_xx)^{-1} d_x((c0+gamma) u); products dealiased.
inline NonlocalFlux nonlocal_flux(const SpectralField& u, const ModelParams& params) {
  TendencyKernel kernel(u.grid(), params);
  const int m = u.grid().spectrum_size();
  std::vector<cplx> f1(m), f2(m), f3(m), f(m);
  kernel.flux(u.coeffs(), f1, f2, f3);
  for (int k = 0; k < m; ++k) f[k] = f1[k] + f2[k] + f3[k];
  const auto& g = u.grid();
  return {SpectralField::from_coeffs(g, std::move(f1)), SpectralField::from_coeffs(g, std::move(f2)),
          SpectralField::from_coeffs(g, std::move(f3)), SpectralField::from_coeffs(g, std::move(f))};
}

/// -[(u - gamma) u_x + F(u)].
inline SpectralField drift(const SpectralField& u, const ModelParams& params) {
  TendencyKernel kernel(u.grid(), params);
  std::vector<cplx> out(u.grid().spectrum_size());
  kernel.drift(u.coeffs(), out);
  return SpectralField::from_coeffs(u.grid(), std::move(out));
}

/// -[beta v v_x - gamma v_x + beta (F1 + F2)(v) + F3(v)].
inline SpectralField transformed_tendency(const SpectralField& v, double beta,
                                          const ModelParams& params) {
  if (!(beta > 0.0)) throw DomainError("transformed_tendency: beta must be positive");
  TendencyKernel kernel(v.grid(), params);
  std::vector<cplx> out(v.grid().spectrum_size());
  kernel.transformed(v.coeffs(), beta, out);
  return SpectralField::from_coeffs(v.grid(), std::move(out));
}

/// V = v - v_xx.
inline MomentumField momentum(const SpectralField& v) {
  return {bessel_potential(v, SobolevIndex{2.0})};
}

}  // namespace sdgh
