#ifndef VISCID_KERNEL_HPP
#define VISCID_KERNEL_HPP

// Heat kernel G(x,t) = (4 pi eps t)^{-1/2} exp(-x^2 / (4 eps t)), its norms, and
// convolution stencils on a uniform grid.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

#include "viscid/error.hpp"
#include "viscid/fft.hpp"
#include "viscid/grid.hpp"

namespace viscid {

struct HeatKernelParams {
  double eps = 1.0;

  explicit HeatKernelParams(double e) : eps(e) {
    if (!(e > 0.0) || !std::isfinite(e)) throw DomainError("viscosity must be positive");
  }
};

enum class KernelOrder { value, dx, dxx, dt };

enum class KernelNorm { G_L1, Gx_L1, Gx_Linf, Gxx_L1 };

/// Sharp constants C in ||.|| = C (eps t)^{-k}; checked against quadrature in the tests.
namespace kernel_constants {
inline constexpr double kGxL1 = 0.5641895835477563;     // pi^{-1/2}
inline constexpr double kGxLinf = 0.12098536225957168;  // e^{-1/2} (8 pi)^{-1/2}
inline constexpr double kGxxL1 = 0.48394144903828673;   // 2 (2 pi e)^{-1/2}
}  // namespace kernel_constants

inline double g_eval(const HeatKernelParams& k, double x, double t, KernelOrder order = KernelOrder::value) {
  if (!(t > 0.0)) throw DomainError("heat kernel needs t > 0");
  const double et = k.eps * t;
  const double g = std::exp(-x * x / (4.0 * et)) / std::sqrt(4.0 * M_PI * et);
  switch (order) {
    case KernelOrder::value: return g;
    case KernelOrder::dx: return -x / (2.0 * et) * g;
    case KernelOrder::dxx: return (x * x / (4.0 * et * et) - 1.0 / (2.0 * et)) * g;
    case KernelOrder::dt: return (x * x / (4.0 * k.eps * t * t) - 1.0 / (2.0 * t)) * g;
  }
  return g;
}

inline double kernel_norm(const HeatKernelParams& k, double t, KernelNorm which) {
  if (!(t > 0.0)) throw DomainError("kernel norm needs t > 0");
  const double et = k.eps * t;
  switch (which) {
    case KernelNorm::G_L1: return 1.0;
    case KernelNorm::Gx_L1: return kernel_constants::kGxL1 / std::sqrt(et);
    case KernelNorm::Gx_Linf: return kernel_constants::kGxLinf / et;
    case KernelNorm::Gxx_L1: return kernel_constants::kGxxL1 / et;
  }
  return 0.0;
}

/// int_0^T G(x, s) ds.
inline double time_integrated_kernel(double eps, double x, double T) {
  if (T <= 0.0) return 0.0;
  double ax = std::abs(x);
  double z = ax / std::sqrt(4.0 * eps * T);
  return std::sqrt(T / (M_PI * eps)) * std::exp(-z * z) - ax / (2.0 * eps) * std::erfc(z);
}

/// Translation-invariant weights w_d, d = -(n-1) .. n-1, acting as
/// out_i = sum_k w_{i-k} g_k; `reach` bounds the nonnegligible offsets.
struct Stencil {
  std::size_t n = 0;
  std::vector<double> w;  // index d + n - 1
  std::size_t reach = 0;

  double at(long d) const { return w[static_cast<std::size_t>(d + static_cast<long>(n) - 1)]; }
};

namespace detail {

template <class F>
Stencil make_stencil(std::size_t n, F&& weight) {
  Stencil s;
  s.n = n;
  s.w.assign(2 * n - 1, 0.0);
  double wmax = 0.0;
  for (long d = 0; d < static_cast<long>(n); ++d) {
    double a = weight(d);
    double b = d == 0 ? a : weight(-d);
    s.w[d + n - 1] = a;
    s.w[n - 1 - d] = b;
    wmax = std::max({wmax, std::abs(a), std::abs(b)});
  }
  // Weights decay like exp(-d^2); drop offsets that cannot change a sum.
  const double cut = 1e-20 * wmax;
  s.reach = 0;
  for (std::size_t d = 0; d < n; ++d) {
    if (std::abs(s.w[d + n - 1]) > cut || std::abs(s.w[n - 1 - d]) > cut) s.reach = d;
  }
  for (std::size_t d = s.reach + 1; d < n; ++d) s.w[d + n - 1] = s.w[n - 1 - d] = 0.0;
  return s;
}

}  // namespace detail

/// Kernel width sqrt(2 eps t) at which the trapezoid rule on the grid becomes
/// exact up to aliasing of order exp(-2 pi^2 (width/dx)^2).
inline bool kernel_resolved(double eps, double t, double dx) { return std::sqrt(2.0 * eps * t) >= 2.0 * dx; }

/// G(t) as a convolution on the grid. Resolved kernels use the trapezoid rule
/// (dx G(d dx), a semigroup to roundoff); narrow kernels act on piecewise-constant
/// data, which stays exact in mass for any t.
inline Stencil heat_stencil(double eps, double t, double dx, std::size_t n) {
  if (kernel_resolved(eps, t, dx)) {
    HeatKernelParams k(eps);
    return detail::make_stencil(n, [&](long d) { return dx * g_eval(k, d * dx, t); });
  }
  const double a = dx / std::sqrt(4.0 * eps * t);
  return detail::make_stencil(n, [a](long d) {
    double k = static_cast<double>(std::labs(d));
    if (k == 0.0) return std::erf(0.5 * a);
    return 0.5 * (std::erfc((k - 0.5) * a) - std::erfc((k + 0.5) * a));
  });
}

/// d/dx G(t) as a convolution on the grid; same regimes as heat_stencil.
inline Stencil dx_stencil(double eps, double t, double dx, std::size_t n) {
  HeatKernelParams k(eps);
  if (kernel_resolved(eps, t, dx)) {
    return detail::make_stencil(n, [&](long d) { return dx * g_eval(k, d * dx, t, KernelOrder::dx); });
  }
  return detail::make_stencil(n, [&](long d) {
    return g_eval(k, (d + 0.5) * dx, t) - g_eval(k, (d - 0.5) * dx, t);
  });
}

/// int_{sa}^{sb} d/dx G(s) ds applied to piecewise-constant data.
inline Stencil duhamel_stencil(double eps, double sa, double sb, double dx, std::size_t n) {
  auto dJ = [&](double x) { return time_integrated_kernel(eps, x, sb) - time_integrated_kernel(eps, x, sa); };
  return detail::make_stencil(n, [&](long d) { return dJ((d + 0.5) * dx) - dJ((d - 0.5) * dx); });
}

/// Convolution on an n-cell grid: direct summation up to `direct_max` cells,
/// FFT with zero padding to at least 2n beyond that.
class ConvolutionEngine {
 public:
  explicit ConvolutionEngine(std::size_t n, std::size_t direct_max = 2048) : n_(n), direct_max_(direct_max) {
    std::size_t len = 1;
    while (len < 2 * n_) len <<= 1;
    fft_len_ = len;
  }

  std::size_t n() const { return n_; }
  bool uses_fft() const { return n_ > direct_max_; }

  std::vector<double> apply(const Stencil& s, const std::vector<double>& g) {
    return uses_fft() ? apply_fft(s, g) : apply_direct(s, g);
  }

  std::vector<double> apply_direct(const Stencil& s, const std::vector<double>& g) const {
    check(s, g);
    const long n = static_cast<long>(n_);
    const long r = static_cast<long>(s.reach);
    std::vector<double> out(n_, 0.0);
    const double* w = s.w.data() + (n - 1);
    for (long k = 0; k < n; ++k) {
      const double gk = g[k];
      if (gk == 0.0) continue;
      const long lo = std::max(0L, k - r);
      const long hi = std::min(n - 1, k + r);
      for (long i = lo; i <= hi; ++i) out[i] += w[i - k] * gk;
    }
    return out;
  }

  std::vector<double> apply_fft(const Stencil& s, const std::vector<double>& g) {
    check(s, g);
    Spectrum a = spectrum(s);
    Spectrum b = transform(g);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
    std::vector<double> out(n_);
    fft().inverse(a, out);
    return out;
  }

  /// Spectrum of a stencil laid out circularly on the padded length.
  Spectrum spectrum(const Stencil& s) {
    std::vector<double> buf(fft_len_, 0.0);
    for (long d = -static_cast<long>(s.reach); d <= static_cast<long>(s.reach); ++d) {
      buf[static_cast<std::size_t>((d + static_cast<long>(fft_len_)) % static_cast<long>(fft_len_))] = s.at(d);
    }
    return fft().forward(buf);
  }

  Spectrum transform(const std::vector<double>& g) { return fft().forward(g.data(), g.size()); }

  void inverse(const Spectrum& s, std::vector<double>& out) {
    out.resize(n_);
    fft().inverse(s, out);
  }

 private:
  void check(const Stencil& s, const std::vector<double>& g) const {
    if (s.n != n_ || g.size() != n_) throw PreconditionError("stencil/data size mismatch");
  }

  RealFFT& fft() {
    if (!fft_) fft_ = std::make_unique<RealFFT>(fft_len_);
    return *fft_;
  }

  std::size_t n_;
  std::size_t direct_max_;
  std::size_t fft_len_;
  std::unique_ptr<RealFFT> fft_;
};

/// Fraction of the total |mass| of g that an order-0 stencil sends off the grid.
inline double tail_fraction(const Stencil& s, const std::vector<double>& g) {
  const long n = static_cast<long>(s.n);
  // prefix[m] = sum of w_d for d < m - (n-1)
  std::vector<double> prefix(s.w.size() + 1, 0.0);
  for (std::size_t i = 0; i < s.w.size(); ++i) prefix[i + 1] = prefix[i] + s.w[i];
  double total = 0.0, lost = 0.0;
  for (long k = 0; k < n; ++k) {
    double a = std::abs(g[k]);
    if (a == 0.0) continue;
    // received weight: d = i - k for i in [0, n-1]
    double inside = prefix[static_cast<std::size_t>(n - 1 - k + n)] - prefix[static_cast<std::size_t>(-k + n - 1)];
    total += a;
    lost += a * std::max(0.0, 1.0 - inside);
  }
  return total > 0.0 ? lost / total : 0.0;
}

/// Convolve cell averages with G(dt) (order 0) or d/dx G(dt) (order 1).
inline GridFunction convolve(const HeatKernelParams& k, const GridFunction& g, double dt, int order = 0,
                             double tail_tol = 1e-14) {
  if (!(dt > 0.0)) throw DomainError("convolution needs dt > 0");
  if (order != 0 && order != 1) throw DomainError("convolution order must be 0 or 1");
  if (g.layout != GridFunction::Layout::cells) throw PreconditionError("convolution needs cell averages");
  const std::size_t n = g.grid.n;
  Stencil mass_stencil = heat_stencil(k.eps, dt, g.dx(), n);
  if (tail_fraction(mass_stencil, g.values) > tail_tol) {
    throw DomainTooSmallError("heat kernel tail leaves the grid; widen the domain");
  }
  ConvolutionEngine engine(n);
  std::vector<double> out =
      engine.apply(order == 0 ? mass_stencil : dx_stencil(k.eps, dt, g.dx(), n), g.values);
  std::optional<double> t;
  if (g.time) t = *g.time + dt;
  return GridFunction(g.grid, std::move(out), t);
}

}  // namespace viscid

#endif  // VISCID_KERNEL_HPP
