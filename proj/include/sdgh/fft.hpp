#pragma once

// Thin FFTW wrapper: one cached r2c/c2r plan pair per transform length.
// Plans are created under a lock; execution through the new-array interface
// is re-entrant, so a single plan serves every worker thread.

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

namespace sdgh::detail {

using cplx = std::complex<double>;

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_dft_r2c_1d(n, in, out, flags);
    inv_ = fftw_plan_dft_c2r_1d(n, out, in, flags);
    fftw_free(out);
    fftw_free(in);
    if (fwd_ == nullptr || inv_ == nullptr) throw std::runtime_error("fftw planning failed");
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }

  int size() const noexcept { return n_; }

  /// c_k = (1/n) sum_j x_j e^{-i k x_j}, k = 0..n/2.
  void forward(std::span<const double> x, std::span<cplx> c) const {
    fftw_execute_dft_r2c(fwd_, const_cast<double*>(x.data()),
                         reinterpret_cast<fftw_complex*>(c.data()));
    const double scale = 1.0 / n_;
    for (auto& z : c) z *= scale;
  }

  /// x_j = sum_k c_k e^{i k x_j} over the full (conjugate-symmetric) spectrum.
  /// `scratch` must hold n/2+1 values; c2r destroys its input.
  void inverse(std::span<const cplx> c, std::span<double> x, std::span<cplx> scratch) const {
    std::copy(c.begin(), c.end(), scratch.begin());
    fftw_execute_dft_c2r(inv_, reinterpret_cast<fftw_complex*>(scratch.data()), x.data());
  }

  void inverse(std::span<const cplx> c, std::span<double> x) const {
    std::vector<cplx> scratch(c.size());
    inverse(c, x, scratch);
  }

  static const RealFft& get(int n) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<RealFft>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<RealFft>(n);
    return *slot;
  }

 private:
  int n_;
  fftw_plan fwd_{};
  fftw_plan inv_{};
};

}  // namespace sdgh::detail
