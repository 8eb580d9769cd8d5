#ifndef VISCID_GRID_HPP
#define VISCID_GRID_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "viscid/error.hpp"

namespace viscid {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Uniform partition of [x_lo, x_hi] into n cells.
struct Grid {
  double x_lo = 0.0;
  double x_hi = 1.0;
  std::size_t n = 1;

  Grid() = default;
  Grid(double lo, double hi, std::size_t cells) : x_lo(lo), x_hi(hi), n(cells) { validate(); }

  void validate() const {
    if (!(x_hi > x_lo) || !std::isfinite(x_lo) || !std::isfinite(x_hi)) {
      throw ConfigError("grid needs finite x_lo < x_hi");
    }
    if (n < 2) throw ConfigError("grid needs at least 2 cells");
  }

  double dx() const { return (x_hi - x_lo) / static_cast<double>(n); }
  double center(std::size_t j) const { return x_lo + (static_cast<double>(j) + 0.5) * dx(); }
  double node(std::size_t j) const { return x_lo + static_cast<double>(j) * dx(); }

  /// Index of the cell containing x, clamped to the grid.
  std::size_t cell_of(double x) const {
    double s = std::floor((x - x_lo) / dx());
    if (s < 0.0) return 0;
    if (s >= static_cast<double>(n)) return n - 1;
    return static_cast<std::size_t>(s);
  }

  bool contains(double lo, double hi) const { return lo >= x_lo && hi <= x_hi; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.x_lo == b.x_lo && a.x_hi == b.x_hi && a.n == b.n;
  }
};

/// Samples on a Grid: cell averages (n values) or node values (n + 1 values,
/// used for Hamilton-Jacobi primitives).
struct GridFunction {
  enum class Layout { cells, nodes };

  Grid grid;
  std::vector<double> values;
  std::optional<double> time;
  Layout layout = Layout::cells;

  GridFunction() = default;
  GridFunction(Grid g, std::vector<double> v, std::optional<double> t = std::nullopt,
               Layout l = Layout::cells)
      : grid(g), values(std::move(v)), time(t), layout(l) {
    std::size_t want = layout == Layout::cells ? grid.n : grid.n + 1;
    if (values.size() != want) throw ConfigError("grid function size does not match its grid");
  }

  static GridFunction zeros(const Grid& g, Layout l = Layout::cells) {
    return GridFunction(g, std::vector<double>(l == Layout::cells ? g.n : g.n + 1, 0.0), std::nullopt, l);
  }

  std::size_t size() const { return values.size(); }
  double dx() const { return grid.dx(); }
  double x(std::size_t j) const { return layout == Layout::cells ? grid.center(j) : grid.node(j); }
  double operator[](std::size_t j) const { return values[j]; }
  double& operator[](std::size_t j) { return values[j]; }
};

/// dx * sum of values (cell layout).
inline double mass(const GridFunction& g) {
  if (g.layout != GridFunction::Layout::cells) throw PreconditionError("mass needs cell averages");
  double s = 0.0;
  for (double v : g.values) s += v;
  return g.dx() * s;
}

}  // namespace viscid

#endif  // VISCID_GRID_HPP
