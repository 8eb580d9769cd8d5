#ifndef VISCID_FFT_HPP
#define VISCID_FFT_HPP

// Minimal owning wrapper over an FFTW real-to-complex / complex-to-real pair.

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace viscid {

using Spectrum = std::vector<std::complex<double>>;

class RealFFT {
 public:
  explicit RealFFT(std::size_t n) : n_(n), bins_(n / 2 + 1) {
    real_ = fftw_alloc_real(n_);
    cplx_ = fftw_alloc_complex(bins_);
    if (!real_ || !cplx_) {
      release();
      throw std::bad_alloc();
    }
    // Planning is not thread-safe in FFTW; execution is.
    std::lock_guard<std::mutex> lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), real_, cplx_, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), cplx_, real_, FFTW_ESTIMATE);
    if (!forward_ || !backward_) {
      release_locked();
      throw std::runtime_error("FFTW planning failed");
    }
  }

  RealFFT(const RealFFT&) = delete;
  RealFFT& operator=(const RealFFT&) = delete;

  ~RealFFT() { release(); }

  std::size_t size() const { return n_; }
  std::size_t bins() const { return bins_; }

  /// Forward transform of x zero-padded to the transform length.
  Spectrum forward(const double* x, std::size_t len) {
    std::memset(real_, 0, sizeof(double) * n_);
    std::memcpy(real_, x, sizeof(double) * std::min(len, n_));
    fftw_execute(forward_);
    Spectrum out(bins_);
    std::memcpy(reinterpret_cast<void*>(out.data()), cplx_, sizeof(fftw_complex) * bins_);
    return out;
  }

  /// Forward transform of an already laid-out length-n buffer.
  Spectrum forward(const std::vector<double>& x) { return forward(x.data(), x.size()); }

  /// Inverse transform, normalized, writing the first out.size() samples.
  void inverse(const Spectrum& s, std::vector<double>& out) {
    std::memcpy(cplx_, reinterpret_cast<const void*>(s.data()), sizeof(fftw_complex) * bins_);
    fftw_execute(backward_);
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < out.size() && i < n_; ++i) out[i] = real_[i] * scale;
  }

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  void release() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    release_locked();
  }

  void release_locked() {
    if (forward_) fftw_destroy_plan(forward_);
    if (backward_) fftw_destroy_plan(backward_);
    forward_ = backward_ = nullptr;
    if (real_) fftw_free(real_);
    if (cplx_) fftw_free(cplx_);
    real_ = nullptr;
    cplx_ = nullptr;
  }

  std::size_t n_;
  std::size_t bins_;
  double* real_ = nullptr;
  fftw_complex* cplx_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace viscid

#endif  // VISCID_FFT_HPP
