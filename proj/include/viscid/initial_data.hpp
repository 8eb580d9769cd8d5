#ifndef VISCID_INITIAL_DATA_HPP
#define VISCID_INITIAL_DATA_HPP

// Nonnegative finite measures (atoms plus a piecewise-polynomial density) and
// their mollified projections onto a grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "viscid/error.hpp"
#include "viscid/grid.hpp"

namespace viscid {

struct Atom {
  double x;
  double mass;
};

/// Piecewise polynomial with pieces [breaks[i], breaks[i+1]] and local
/// coefficients in powers of (x - breaks[i]); zero outside [breaks.front(), breaks.back()].
class PiecewisePolynomial {
 public:
  PiecewisePolynomial(std::vector<double> breaks, std::vector<std::vector<double>> coeffs)
      : breaks_(std::move(breaks)), coeffs_(std::move(coeffs)) {
    if (breaks_.size() < 2 || coeffs_.size() + 1 != breaks_.size()) {
      throw ConfigError("piecewise polynomial needs m+1 breakpoints and m coefficient lists");
    }
    for (std::size_t i = 0; i + 1 < breaks_.size(); ++i) {
      if (!(breaks_[i + 1] > breaks_[i])) throw ConfigError("breakpoints must be strictly increasing");
    }
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
      double a = breaks_[i], b = breaks_[i + 1];
      for (int s = 0; s <= 64; ++s) {
        double v = eval_piece(i, a + (b - a) * s / 64.0);
        if (!(v >= -1e-14)) throw DomainError("density must be nonnegative");
      }
    }
  }

  /// Piecewise-linear interpolant of (x, u) samples, e.g. a two-column CSV.
  static PiecewisePolynomial linear(const std::vector<double>& x, const std::vector<double>& u) {
    if (x.size() < 2 || x.size() != u.size()) throw ConfigError("density samples need >= 2 (x, u) pairs");
    std::vector<std::vector<double>> c;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      c.push_back({u[i], (u[i + 1] - u[i]) / (x[i + 1] - x[i])});
    }
    return PiecewisePolynomial(x, std::move(c));
  }

  static PiecewisePolynomial constant(double lo, double hi, double value) {
    return PiecewisePolynomial({lo, hi}, {{value}});
  }

  double operator()(double x) const {
    if (x < breaks_.front() || x > breaks_.back()) return 0.0;
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
    std::size_t i = std::min<std::size_t>((it - breaks_.begin()) - 1, coeffs_.size() - 1);
    return eval_piece(i, x);
  }

  /// Exact integral over [a, b].
  double integral(double a, double b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
      double lo = std::max(a, breaks_[i]);
      double hi = std::min(b, breaks_[i + 1]);
      if (hi <= lo) continue;
      s += antiderivative(i, hi - breaks_[i]) - antiderivative(i, lo - breaks_[i]);
    }
    return s;
  }

  double total() const { return integral(breaks_.front(), breaks_.back()); }
  double lo() const { return breaks_.front(); }
  double hi() const { return breaks_.back(); }

 private:
  double eval_piece(std::size_t i, double x) const {
    double t = x - breaks_[i];
    double v = 0.0;
    const auto& c = coeffs_[i];
    for (std::size_t k = c.size(); k-- > 0;) v = v * t + c[k];
    return v;
  }

  double antiderivative(std::size_t i, double t) const {
    double v = 0.0;
    const auto& c = coeffs_[i];
    for (std::size_t k = c.size(); k-- > 0;) v = v * t + c[k] / static_cast<double>(k + 1);
    return v * t;
  }

  std::vector<double> breaks_;
  std::vector<std::vector<double>> coeffs_;
};

struct MeasureData {
  std::vector<Atom> atoms;
  std::optional<PiecewisePolynomial> density;

  double mass() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.mass;
    if (density) m += density->total();
    return m;
  }

  Interval support() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& a : atoms) {
      lo = std::min(lo, a.x);
      hi = std::max(hi, a.x);
    }
    if (density) {
      lo = std::min(lo, density->lo());
      hi = std::max(hi, density->hi());
    }
    return {lo, hi};
  }

  /// Stable textual id used in provenance records.
  std::string id() const {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (i) os << '+';
      os << "dirac:" << atoms[i].mass << '@' << atoms[i].x;
    }
    if (density) {
      if (!atoms.empty()) os << '+';
      os << "density[" << density->lo() << ',' << density->hi() << "]:" << density->total();
    }
    return os.str();
  }

  void validate() const {
    for (const auto& a : atoms) {
      if (!(a.mass > 0.0) || !std::isfinite(a.x)) throw DomainError("atoms need positive mass");
    }
    double m = mass();
    if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("measure needs finite positive mass");
  }

  MeasureData operator+(const MeasureData& other) const {
    if (density && other.density) throw ConfigError("cannot add two densities");
    MeasureData out = *this;
    out.atoms.insert(out.atoms.end(), other.atoms.begin(), other.atoms.end());
    if (other.density) out.density = other.density;
    return out;
  }
};

inline MeasureData dirac(double M, double x0) {
  if (!(M > 0.0) || !std::isfinite(M)) throw DomainError("dirac mass must be positive");
  if (!std::isfinite(x0)) throw DomainError("dirac position must be finite");
  return MeasureData{{Atom{x0, M}}, std::nullopt};
}

inline MeasureData density_measure(PiecewisePolynomial p) {
  MeasureData m{{}, std::move(p)};
  m.validate();
  return m;
}

inline PiecewisePolynomial load_density_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open density file " + path);
  std::vector<double> xs, us;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x, u;
    if (!(ls >> x >> u)) continue;  // header row
    xs.push_back(x);
    us.push_back(u);
  }
  return PiecewisePolynomial::linear(xs, us);
}

enum class MollifierShape { bump, hat, cosine };

/// Unit-mass mollifier of half-width h supported on |x| < h.
inline double mollifier(MollifierShape shape, double x, double h) {
  double s = x / h;
  if (std::abs(s) >= 1.0) return 0.0;
  switch (shape) {
    case MollifierShape::bump: {
      constexpr double kBumpNorm = 2.252283621043585;  // 1 / int_{-1}^{1} exp(-1/(1-s^2)) ds
      return kBumpNorm / h * std::exp(-1.0 / (1.0 - s * s));
    }
    case MollifierShape::hat:
      return (1.0 - std::abs(s)) / h;
    case MollifierShape::cosine:
      return 0.5 * (1.0 + std::cos(M_PI * s)) / h;
  }
  return 0.0;
}

/// Width of the k-th member of the approximating sequence.
inline double mollifier_width(double h0, int k) { return std::ldexp(h0, -k); }

namespace detail {

inline double mollifier_cell_mass(MollifierShape shape, double h, double a, double b) {
  a = std::max(a, -h);
  b = std::min(b, h);
  if (b <= a) return 0.0;
  auto f = [&](double z) { return mollifier(shape, z, h); };
  // The hat has a kink at 0; split there so the rule stays exact.
  if (a < 0.0 && b > 0.0) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, 0.0, 8, 1e-14) +
           boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, b, 8, 1e-14);
  }
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, 1e-14);
}

inline void renormalize(std::vector<double>& v, double dx, double M) {
  double s = 0.0;
  for (double x : v) s += x;
  if (!(s > 0.0)) throw ConfigError("projection has zero discrete mass; refine the grid");
  double k = M / (dx * s);
  for (double& x : v) x *= k;
}

}  // namespace detail

/// Mollify a measure with width h and project to cell averages; the result is
/// rescaled so its discrete mass equals the measure's mass.
inline GridFunction mollify(const MeasureData& measure, double h, const Grid& grid,
                            MollifierShape shape = MollifierShape::bump) {
  measure.validate();
  grid.validate();
  if (!(h > 0.0)) throw DomainError("mollifier width must be positive");
  Interval sup = measure.support();
  if (!grid.contains(sup.lo - h, sup.hi + h)) {
    throw ConfigError("grid does not contain the h-fattened support of the initial measure");
  }
  const double dx = grid.dx();
  std::vector<double> v(grid.n, 0.0);

  for (const auto& atom : measure.atoms) {
    std::size_t j0 = grid.cell_of(atom.x - h);
    std::size_t j1 = grid.cell_of(atom.x + h);
    for (std::size_t j = j0; j <= j1; ++j) {
      double a = grid.node(j) - atom.x;
      v[j] += atom.mass * detail::mollifier_cell_mass(shape, h, a, a + dx) / dx;
    }
  }

  if (measure.density) {
    const auto& rho = *measure.density;
    // Exact cell averages of the density, then a discrete convolution with the
    // cell masses of the mollifier.
    std::vector<double> cells(grid.n, 0.0);
    std::size_t k0 = grid.cell_of(rho.lo());
    std::size_t k1 = grid.cell_of(rho.hi());
    for (std::size_t k = k0; k <= k1; ++k) cells[k] = rho.integral(grid.node(k), grid.node(k + 1)) / dx;
    long reach = static_cast<long>(std::ceil(h / dx)) + 1;
    std::vector<double> w(2 * reach + 1);
    double wsum = 0.0;
    for (long d = -reach; d <= reach; ++d) {
      w[d + reach] = detail::mollifier_cell_mass(shape, h, (d - 0.5) * dx, (d + 0.5) * dx);
      wsum += w[d + reach];
    }
    for (double& x : w) x /= wsum;
    const long n = static_cast<long>(grid.n);
    for (long k = static_cast<long>(k0); k <= static_cast<long>(k1); ++k) {
      if (cells[k] == 0.0) continue;
      for (long d = -reach; d <= reach; ++d) {
        long j = k + d;
        if (j >= 0 && j < n) v[j] += cells[k] * w[d + reach];
      }
    }
  }

  detail::renormalize(v, dx, measure.mass());
  return GridFunction(grid, std::move(v), 0.0);
}

/// Debug projection: each atom becomes M/dx in the cell containing it and the
/// density is projected by exact cell averages, with no smoothing.
inline GridFunction spike(const MeasureData& measure, const Grid& grid) {
  measure.validate();
  Interval sup = measure.support();
  if (!grid.contains(sup.lo, sup.hi)) throw ConfigError("grid does not contain the measure support");
  const double dx = grid.dx();
  std::vector<double> v(grid.n, 0.0);
  for (const auto& atom : measure.atoms) v[grid.cell_of(atom.x)] += atom.mass / dx;
  if (measure.density) {
    for (std::size_t k = 0; k < grid.n; ++k) {
      v[k] += measure.density->integral(grid.node(k), grid.node(k + 1)) / dx;
    }
  }
  detail::renormalize(v, dx, measure.mass());
  return GridFunction(grid, std::move(v), 0.0);
}

/// Project a pointwise function onto the grid by midpoint sampling.
template <class F>
GridFunction sample(const Grid& grid, F&& f, std::optional<double> t = std::nullopt) {
  std::vector<double> v(grid.n);
  for (std::size_t j = 0; j < grid.n; ++j) v[j] = f(grid.center(j));
  return GridFunction(grid, std::move(v), t);
}

}  // namespace viscid

#endif  // VISCID_INITIAL_DATA_HPP
