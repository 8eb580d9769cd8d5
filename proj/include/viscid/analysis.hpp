#ifndef VISCID_ANALYSIS_HPP
#define VISCID_ANALYSIS_HPP

// Norms, the primitive transform, decay fits and the estimate checks run on
// solver trajectories.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "viscid/error.hpp"
#include "viscid/flux.hpp"
#include "viscid/grid.hpp"
#include "viscid/initial_data.hpp"
#include "viscid/oracles.hpp"
#include "viscid/solver.hpp"

namespace viscid {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double norm(const std::vector<double>& v, double dx, double p) {
  if (!(p >= 1.0)) throw DomainError("norm index must be >= 1");
  if (p == kInf) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }
  double s = 0.0;
  if (p == 1.0) {
    for (double x : v) s += std::abs(x);
    return dx * s;
  }
  if (p == 2.0) {
    for (double x : v) s += x * x;
    return std::sqrt(dx * s);
  }
  for (double x : v) s += std::pow(std::abs(x), p);
  return std::pow(dx * s, 1.0 / p);
}

inline double norm(const GridFunction& g, double p) { return norm(g.values, g.dx(), p); }

/// U(x_j) = int_{x_lo}^{x_j} u dy on the nodes. Cell averages are integrated
/// exactly, so U(x_hi) equals mass(g).
inline GridFunction primitive(const GridFunction& g) {
  if (g.layout != GridFunction::Layout::cells) throw PreconditionError("primitive needs cell averages");
  std::vector<double> U(g.size() + 1, 0.0);
  const double dx = g.dx();
  double acc = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    acc += g[j];
    U[j + 1] = dx * acc;
  }
  return GridFunction(g.grid, std::move(U), g.time, GridFunction::Layout::nodes);
}

/// Cell slopes (U_{j+1} - U_j)/dx of node data.
inline GridFunction gradient(const GridFunction& U) {
  if (U.layout != GridFunction::Layout::nodes) throw PreconditionError("gradient needs node values");
  std::vector<double> s(U.grid.n);
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = (U[j + 1] - U[j]) / U.dx();
  return GridFunction(U.grid, std::move(s), U.time);
}

/// Exact L1 distance between two piecewise-constant functions on arbitrary grids.
inline double l1_distance(const GridFunction& a, const GridFunction& b) {
  const double lo = std::min(a.grid.x_lo, b.grid.x_lo);
  const double hi = std::max(a.grid.x_hi, b.grid.x_hi);
  auto value = [](const GridFunction& g, double x) {
    if (x < g.grid.x_lo || x >= g.grid.x_hi) return 0.0;
    return g[std::min(g.grid.n - 1, static_cast<std::size_t>((x - g.grid.x_lo) / g.dx()))];
  };
  std::vector<double> cuts{lo, hi};
  for (std::size_t j = 0; j <= a.grid.n; ++j) cuts.push_back(a.grid.node(j));
  for (std::size_t j = 0; j <= b.grid.n; ++j) cuts.push_back(b.grid.node(j));
  std::sort(cuts.begin(), cuts.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double w = cuts[i + 1] - cuts[i];
    if (w <= 0.0) continue;
    double m = 0.5 * (cuts[i] + cuts[i + 1]);
    s += w * std::abs(value(a, m) - value(b, m));
  }
  return s;
}

inline std::vector<const GridFunction*> states(const Trajectory& traj) {
  std::vector<const GridFunction*> out{&traj.initial};
  for (const auto& s : traj.snapshots) out.push_back(&s);
  return out;
}

// ---------------------------------------------------------------------------
// Hamilton-Jacobi residual

struct HjResidual {
  double residual = 0.0;  ///< max |U_t + f(U_x) - eps U_xx|
  double scale = 0.0;     ///< truncation scale at the snapshot attaining max ratio
  double ratio = 0.0;     ///< max over snapshots of residual / scale
  double x = 0.0, t = 0.0;

  bool within() const { return ratio <= 1.0; }
};

/// Residual of the primitive in W_t + f(W_x) = eps W_xx by centered differences.
/// The scale is R (tau/t + (dx/l)^2), with R the largest term of the equation,
/// tau the snapshot spacing and l = min(sqrt(eps t), eps/max f').
inline HjResidual hj_residual(const Trajectory& traj, const FluxSpec& flux, double eps) {
  if (traj.snapshots.size() < 3) throw PreconditionError("HJ residual needs at least three snapshots");
  FluxEvaluator fe(flux);
  std::vector<GridFunction> U;
  for (const auto& s : traj.snapshots) U.push_back(primitive(s));
  const double dx = traj.snapshots[0].dx();
  const std::size_t n = traj.snapshots[0].size();
  HjResidual out;
  for (std::size_t k = 1; k + 1 < U.size(); ++k) {
    const double t0 = *U[k - 1].time, t1 = *U[k].time, t2 = *U[k + 1].time;
    const double h1 = t1 - t0, h2 = t2 - t1;
    const double cm = -h2 / (h1 * (h1 + h2)), c0 = (h2 - h1) / (h1 * h2), cp = h1 / (h2 * (h1 + h2));
    const auto& u = traj.snapshots[k].values;
    double worst = 0.0, wx = 0.0, R = 0.0, umax = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
      double Ut = cm * U[k - 1][j] + c0 * U[k][j] + cp * U[k + 1][j];
      double Ux = 0.5 * (u[j - 1] + u[j]);
      double fU = fe.value(std::max(0.0, Ux));
      double Uxx = (u[j] - u[j - 1]) / dx;
      double r = std::abs(Ut + fU - eps * Uxx);
      R = std::max({R, std::abs(Ut), std::abs(fU), eps * std::abs(Uxx)});
      umax = std::max(umax, Ux);
      if (r > worst) {
        worst = r;
        wx = U[k].x(j);
      }
    }
    double ell = std::sqrt(eps * t1);
    double A = fe.max_speed(umax);
    if (A > 0.0) ell = std::min(ell, eps / A);
    double scale = R * (std::max(h1, h2) / t1 + (dx / ell) * (dx / ell));
    double ratio = scale > 0.0 ? worst / scale : (worst > 0.0 ? kInf : 0.0);
    out.residual = std::max(out.residual, worst);
    if (ratio >= out.ratio) {
      out.ratio = ratio;
      out.scale = scale;
      out.x = wx;
      out.t = t1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decay fits

struct Window {
  double t_min = 0.0;
  double t_max = 0.0;
};

struct DecayFit {
  double norm_p = kInf;
  Window window;
  std::size_t points = 0;
  double exponent = 0.0;
  double constant = 0.0;
  double r2 = 0.0;
  std::optional<double> theoretical_exponent;
  std::optional<double> theoretical_constant_bound;
};

/// Least squares for log y = log C + beta log t.
inline DecayFit fit_power_law(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 2) throw PreconditionError("power-law fit needs matching series");
  const std::size_t m = t.size();
  double sx = 0, sy = 0;
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(t[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("power-law fit needs positive data");
    lx[i] = std::log(t[i]);
    ly[i] = std::log(y[i]);
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  DecayFit fit;
  fit.points = m;
  fit.window = {t.front(), t.back()};
  fit.exponent = sxy / sxx;
  fit.constant = std::exp(my - fit.exponent * mx);
  double sse = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double e = ly[i] - (my + fit.exponent * (lx[i] - mx));
    sse += e * e;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

/// [10 h^2/eps, t_end]: past the diffusive time of a width-h mollifier.
inline Window default_window(const Trajectory& traj, double h, double eps) {
  if (traj.snapshots.empty()) throw PreconditionError("empty trajectory");
  return {10.0 * h * h / eps, *traj.snapshots.back().time};
}

inline DecayFit fit_decay(const Trajectory& traj, double norm_p, Window window,
                          std::optional<double> theoretical_exponent = std::nullopt) {
  if (!(window.t_min < window.t_max)) throw PreconditionError("fit window needs t_min < t_max");
  std::vector<double> t, y;
  const double slack = 1e-12 * window.t_max;
  for (const auto& s : traj.snapshots) {
    if (*s.time < window.t_min - slack || *s.time > window.t_max + slack) continue;
    double v = norm(s, norm_p);
    if (!(v > 0.0)) throw DomainError("norm vanished inside the fit window");
    t.push_back(*s.time);
    y.push_back(v);
  }
  if (t.size() < 8) throw PreconditionError("fit window must contain at least 8 snapshots");
  DecayFit fit = fit_power_law(t, y);
  fit.norm_p = norm_p;
  fit.window = window;
  fit.theoretical_exponent = theoretical_exponent;
  return fit;
}

// ---------------------------------------------------------------------------
// Estimate checks

struct CheckRow {
  double t = 0.0;
  double measured = 0.0;
  double bound = 0.0;
  double ratio = 0.0;
};

struct EstimateCheck {
  std::string name;
  double lhs_max_ratio = 0.0;
  double tol = 0.0;
  bool applicable = true;
  std::string note;
  std::vector<CheckRow> details;

  EstimateCheck() = default;
  EstimateCheck(std::string n, double t) : name(std::move(n)), tol(t) {}

  bool pass() const { return !applicable || lhs_max_ratio <= 1.0 + tol; }
  std::string verdict() const { return !applicable ? "n/a" : (pass() ? "pass" : "fail"); }

  void add(double t, double measured, double bound) {
    double r = bound > 0.0 ? measured / bound : (measured > 0.0 ? kInf : 0.0);
    details.push_back({t, measured, bound, r});
    lhs_max_ratio = std::max(lhs_max_ratio, r);
  }
};

inline EstimateCheck inapplicable(std::string name, std::string why) {
  EstimateCheck c;
  c.name = std::move(name);
  c.applicable = false;
  c.note = std::move(why);
  return c;
}

struct Tolerances {
  double structural = 1e-10;
  double estimate = 5e-2;
};

namespace detail {

inline double time_of(const GridFunction& g) { return g.time ? *g.time : 0.0; }

inline void require_same_setup(const Trajectory& a, const Trajectory& b) {
  const auto& pa = a.provenance;
  const auto& pb = b.provenance;
  if (!(pa.config.grid == pb.config.grid) || pa.config.eps != pb.config.eps || pa.flux_id != pb.flux_id ||
      pa.scheme != pb.scheme || a.snapshots.size() != b.snapshots.size()) {
    throw PreconditionError("paired trajectories must share grid, eps, flux and scheme");
  }
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    if (*a.snapshots[k].time != *b.snapshots[k].time) throw PreconditionError("snapshot times differ");
  }
}

inline EstimateCheck nonincreasing(std::string name, const std::vector<double>& series,
                                   const std::vector<double>& times, double tol) {
  EstimateCheck c;
  c.name = std::move(name);
  c.tol = tol;
  for (std::size_t k = 1; k < series.size(); ++k) {
    double prev = series[k - 1];
    if (prev == 0.0) {
      c.add(times[k], series[k] == 0.0 ? 1.0 : kInf, 1.0);
    } else {
      c.add(times[k], series[k], prev);
    }
  }
  return c;
}

}  // namespace detail

/// Mass, max-min and L^p (p = 2, 4) checks on one trajectory. Violations are
/// measured relative to M0 or max|u0| and encoded as ratio 1 + violation.
inline std::vector<EstimateCheck> check_structural(const Trajectory& traj, Tolerances tol = {}) {
  auto all = states(traj);
  const auto& u0 = traj.initial;
  const double M0 = mass(u0);
  const double top = *std::max_element(u0.values.begin(), u0.values.end());
  const double bot = *std::min_element(u0.values.begin(), u0.values.end());
  const double scale = std::max(std::abs(top), std::abs(bot));
  std::vector<EstimateCheck> out;

  EstimateCheck m{"mass", tol.structural};
  EstimateCheck mm{"max_min", tol.structural};
  for (const auto& s : traj.snapshots) {
    double t = *s.time;
    m.add(t, 1.0 + (M0 > 0.0 ? std::abs(mass(s) - M0) / M0 : std::abs(mass(s))), 1.0);
    double hi = *std::max_element(s.values.begin(), s.values.end());
    double lo = *std::min_element(s.values.begin(), s.values.end());
    double excess = std::max({0.0, hi - top, bot - lo});
    mm.add(t, 1.0 + (scale > 0.0 ? excess / scale : excess), 1.0);
  }
  out.push_back(m);
  out.push_back(mm);
  for (double p : {2.0, 4.0}) {
    std::vector<double> series, times;
    for (const auto* s : all) {
      series.push_back(norm(*s, p));
      times.push_back(detail::time_of(*s));
    }
    out.push_back(detail::nonincreasing(p == 2.0 ? "lp_monotone_2" : "lp_monotone_4", series, times,
                                        tol.structural));
  }
  return out;
}

/// Single-run checks for both trajectories plus L1 contraction and, when the
/// initial data are ordered, order preservation.
inline std::vector<EstimateCheck> check_structural(const Trajectory& a, const Trajectory& b,
                                                   Tolerances tol = {}) {
  detail::require_same_setup(a, b);
  auto out = check_structural(a, tol);
  for (auto c : check_structural(b, tol)) {
    c.name += "_b";
    out.push_back(std::move(c));
  }
  auto sa = states(a), sb = states(b);
  const double dx = a.initial.dx();
  std::vector<double> dist, times;
  for (std::size_t k = 0; k < sa.size(); ++k) {
    double d = 0.0;
    for (std::size_t j = 0; j < sa[k]->size(); ++j) d += std::abs((*sa[k])[j] - (*sb[k])[j]);
    dist.push_back(dx * d);
    times.push_back(detail::time_of(*sa[k]));
  }
  out.push_back(detail::nonincreasing("l1_contraction", dist, times, tol.structural));

  int sign = 0;
  bool ordered = true;
  for (std::size_t j = 0; j < a.initial.size() && ordered; ++j) {
    double d = a.initial[j] - b.initial[j];
    if (d == 0.0) continue;
    int s = d < 0.0 ? -1 : 1;
    if (sign == 0) sign = s;
    ordered = s == sign;
  }
  if (!ordered) {
    out.push_back(inapplicable("order", "initial data are not ordered"));
    return out;
  }
  if (sign == 0) sign = -1;
  EstimateCheck ord{"order", tol.structural};
  const double scale = std::max(norm(a.initial, kInf), norm(b.initial, kInf));
  for (std::size_t k = 1; k < sa.size(); ++k) {
    double worst = 0.0;
    for (std::size_t j = 0; j < sa[k]->size(); ++j) {
      double d = sign < 0 ? (*sa[k])[j] - (*sb[k])[j] : (*sb[k])[j] - (*sa[k])[j];
      worst = std::max(worst, d);
    }
    ord.add(times[k], 1.0 + (scale > 0.0 ? worst / scale : worst), 1.0);
  }
  out.push_back(ord);
  return out;
}

/// 2 eps int int |u_x|^2 over [t_first, t_end] against ||u(t_first)||_2^2.
/// Centered differences on interior cells, trapezoid rule in time.
inline EstimateCheck check_spacetime(const Trajectory& traj, double eps, double tol = 5e-2) {
  if (traj.snapshots.size() < 32) throw PreconditionError("spacetime check needs at least 32 snapshots");
  EstimateCheck c{"spacetime", tol};
  const double dx = traj.snapshots[0].dx();
  auto energy = [&](const GridFunction& g) {
    double s = 0.0;
    for (std::size_t j = 1; j + 1 < g.size(); ++j) {
      double ux = (g[j + 1] - g[j - 1]) / (2.0 * dx);
      s += ux * ux;
    }
    return dx * s;
  };
  const double bound = std::pow(norm(traj.snapshots.front(), 2.0), 2);
  double integral = 0.0;
  double prev = energy(traj.snapshots.front());
  for (std::size_t k = 1; k < traj.snapshots.size(); ++k) {
    double e = energy(traj.snapshots[k]);
    integral += 0.5 * (prev + e) * (*traj.snapshots[k].time - *traj.snapshots[k - 1].time);
    prev = e;
    c.add(*traj.snapshots[k].time, 2.0 * eps * integral, bound);
  }
  if (bound == 0.0) c.lhs_max_ratio = 0.0;
  return c;
}

/// (int phi^2)^3 / (int phi_x^2 (int |phi|)^4) with forward differences;
/// empty for the zero function.
inline std::optional<double> nash_ratio(const GridFunction& g) {
  const double dx = g.dx();
  double l1 = norm(g, 1.0);
  if (l1 == 0.0) return std::nullopt;
  double l2sq = std::pow(norm(g, 2.0), 2);
  double d = 0.0;
  double prev = 0.0;
  for (std::size_t j = 0; j <= g.size(); ++j) {
    double cur = j < g.size() ? g[j] : 0.0;
    d += (cur - prev) * (cur - prev);
    prev = cur;
  }
  d /= dx;
  return l2sq * l2sq * l2sq / (d * l1 * l1 * l1 * l1);
}

struct NashEstimate {
  double C_hat = 0.0;
  std::vector<double> ratios;
  std::vector<std::string> notes;
};

inline NashEstimate check_nash(const std::vector<GridFunction>& samples) {
  NashEstimate est;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto r = nash_ratio(samples[i]);
    if (!r) {
      est.notes.push_back("sample " + std::to_string(i) + " is zero; skipped");
      continue;
    }
    est.ratios.push_back(*r);
    est.C_hat = std::max(est.C_hat, *r);
  }
  return est;
}

/// Gaussians across scales and bump mollifications of a point mass.
inline NashEstimate nash_reference_corpus() {
  std::vector<GridFunction> samples;
  for (double sigma : {0.05, 0.2, 1.0, 3.0}) {
    Grid g(-20 * sigma, 20 * sigma, 4000);
    samples.push_back(sample(g, [&](double x) { return std::exp(-x * x / (2 * sigma * sigma)); }));
  }
  for (auto shape : {MollifierShape::bump, MollifierShape::hat, MollifierShape::cosine}) {
    for (double h : {0.05, 0.5}) {
      Grid g(-2 * h, 2 * h, 4000);
      samples.push_back(mollify(dirac(1.0, 0.0), h, g, shape));
    }
  }
  return check_nash(samples);
}

enum class DecayKind { carlen_loss, feireisl, pcond_linf, l2_powerlaw, nash_lp };

inline std::string to_string(DecayKind k) {
  switch (k) {
    case DecayKind::carlen_loss: return "carlen_loss";
    case DecayKind::feireisl: return "feireisl";
    case DecayKind::pcond_linf: return "pcond_linf";
    case DecayKind::l2_powerlaw: return "l2_powerlaw";
    case DecayKind::nash_lp: return "nash_lp";
  }
  return "?";
}

struct DecayContext {
  double M = 1.0;
  double eps = 1.0;
  bool zero_flux = false;
  std::optional<double> p;          ///< flux exponent
  std::optional<double> min_p;      ///< smallest flux exponent
  std::optional<double> a;          ///< certified p-condition constant
  std::optional<double> nash_C;
  Tolerances tol;
};

/// Context for a flux: a = (p - 1)/2 once certify_p_condition accepts it.
inline DecayContext make_context(const FluxSpec& flux, double M, double eps,
                                 std::optional<double> nash_C = std::nullopt) {
  DecayContext ctx;
  ctx.M = M;
  ctx.eps = eps;
  ctx.zero_flux = flux.is_zero();
  ctx.p = flux.exponent();
  ctx.min_p = flux.min_exponent();
  ctx.nash_C = nash_C;
  if (ctx.p) {
    double a = 0.5 * (*ctx.p - 1.0);
    if (certify_p_condition(flux, a).pass()) ctx.a = a;
  }
  return ctx;
}

inline EstimateCheck check_decay_bounds(const Trajectory& traj, DecayKind kind, const DecayContext& ctx) {
  const std::string name = to_string(kind);
  const double M = ctx.M;
  EstimateCheck c{name, ctx.tol.estimate};
  switch (kind) {
    case DecayKind::carlen_loss: {
      if (!ctx.zero_flux && !(ctx.min_p && *ctx.min_p >= 2.0)) {
        return inapplicable(name, "needs f(s)/s in C^1 (power law with p >= 2)");
      }
      for (const auto& s : traj.snapshots) {
        double t = *s.time;
        c.add(t, norm(s, kInf), M / std::sqrt(4.0 * M_PI * ctx.eps * t));
      }
      return c;
    }
    case DecayKind::feireisl: {
      // Constant depends on eps; it is recorded, never failed.
      double C = 0.0;
      for (const auto& s : traj.snapshots) C = std::max(C, norm(s, kInf) * std::sqrt(*s.time) / M);
      for (const auto& s : traj.snapshots) c.add(*s.time, norm(s, kInf), C * M / std::sqrt(*s.time));
      c.note = "C(eps) = " + std::to_string(C);
      return c;
    }
    case DecayKind::pcond_linf:
    case DecayKind::l2_powerlaw: {
      if (!ctx.p || !ctx.a) return inapplicable(name, "needs a certified p-condition constant");
      const double p = *ctx.p, a = *ctx.a;
      for (const auto& s : traj.snapshots) {
        double t = *s.time;
        if (kind == DecayKind::pcond_linf) {
          c.add(t, norm(s, kInf), std::pow(M, 1.0 / p) * std::pow(a * t, -1.0 / p));
        } else {
          // ||u||_2^2 <= ||u||_inf ||u||_1 with the sup-norm bound above.
          c.add(t, norm(s, 2.0), std::pow(M, (p + 1.0) / (2.0 * p)) * std::pow(a * t, -1.0 / (2.0 * p)));
        }
      }
      return c;
    }
    case DecayKind::nash_lp: {
      if (!ctx.nash_C) return inapplicable(name, "needs an empirical Nash constant");
      const double M1 = norm(traj.initial, 1.0);
      for (double q : {2.0, 4.0}) {
        double e = (q - 1.0) / (2.0 * q);
        for (const auto& s : traj.snapshots) {
          double t = *s.time;
          c.add(t, norm(s, q), std::pow(*ctx.nash_C * q / ctx.eps, e) * M1 * std::pow(t, -e));
        }
      }
      return c;
    }
  }
  return c;
}

/// HJ gradient bound max v_x <= M^{1/p} (a t)^{-1/p} on a run_hj trajectory.
inline EstimateCheck check_hj_gradient(const Trajectory& hj, const DecayContext& ctx) {
  if (!ctx.p || !ctx.a) return inapplicable("hj_gradient", "needs a certified p-condition constant");
  EstimateCheck c{"hj_gradient", ctx.tol.estimate};
  for (const auto& s : hj.snapshots) {
    double t = *s.time;
    c.add(t, norm(gradient(s), kInf), std::pow(ctx.M, 1.0 / *ctx.p) * std::pow(*ctx.a * t, -1.0 / *ctx.p));
  }
  return c;
}

/// max_j |(v_{j+1} - v_j)/dx - u_j| per snapshot against `limit`; the two
/// trajectories must share grid and snapshot times.
inline EstimateCheck check_hj_matches_fv(const Trajectory& hj, const Trajectory& fv, double limit = 5e-3) {
  if (hj.snapshots.size() != fv.snapshots.size()) throw PreconditionError("snapshot counts differ");
  EstimateCheck c{"hj_matches_fv", 0.0};
  for (std::size_t k = 0; k < hj.snapshots.size(); ++k) {
    const auto& v = hj.snapshots[k];
    const auto& u = fv.snapshots[k];
    if (!(v.grid == u.grid) || *v.time != *u.time) throw PreconditionError("grids or times differ");
    auto slope = gradient(v);
    double worst = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) worst = std::max(worst, std::abs(slope[j] - u[j]));
    c.add(*u.time, worst, limit);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Parallel drivers

inline unsigned default_jobs() {
  if (const char* env = std::getenv("VISCID_JOBS")) {
    int j = std::atoi(env);
    if (j > 0) return static_cast<unsigned>(j);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(0..count-1) on up to `jobs` threads; results keep their index.
template <class T>
std::vector<T> parallel_map(std::size_t count, unsigned jobs, const std::function<T(std::size_t)>& fn) {
  std::vector<std::optional<T>> slots(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  std::vector<T> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Grid covering the h-fattened support, the inviscid front at t_end and a
/// diffusive margin of 12 sqrt(eps t_end), with dx <= dx_max.
inline Grid auto_grid(const FluxSpec& flux, const MeasureData& mu, double eps, double t_end, double h,
                      double dx_max) {
  Interval sup = mu.support();
  double front = 0.0;
  if (auto q = flux.exponent()) front = nwave_front(mu.mass(), *q, t_end);
  double pad = h + 12.0 * std::sqrt(eps * t_end) + 10.0 * dx_max;
  double lo = sup.lo - pad, hi = sup.hi + front + pad;
  return Grid(lo, hi, static_cast<std::size_t>(std::ceil((hi - lo) / dx_max)));
}

inline std::vector<double> log_times(double t0, double t1, std::size_t count) {
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i) {
    t[i] = count == 1 ? t1 : t0 * std::pow(t1 / t0, static_cast<double>(i) / static_cast<double>(count - 1));
  }
  t.back() = t1;
  return t;
}

/// Least-squares slope of y against x.
inline double trend_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  if (m < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

struct SweepSpec {
  SolverConfig base;  ///< scheme, cfl, t_end, snapshot_times
  FluxSpec flux = FluxSpec::power_law(2.0);
  MeasureData initial = dirac(1.0, 0.0);
  double h = 0.005;
  std::vector<double> eps_list{1e-1, 1e-2, 1e-3};
  double dx_factor = 0.25;  ///< dx = dx_factor * eps
  double slope_band = 0.1;
  unsigned jobs = default_jobs();
};

struct SweepRow {
  double eps = 0.0;
  Grid grid;
  EstimateCheck pcond, l2, carlen, feireisl;
  std::optional<DecayFit> linf_fit, l2_fit;
  Trajectory traj;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  double slope_pcond = 0.0;  ///< d(max ratio)/d(ln eps)
  double slope_l2 = 0.0;
  double slope_band = 0.1;

  bool bounded() const {
    for (const auto& r : rows) {
      if (!r.pcond.pass() || !r.l2.pass()) return false;
    }
    return true;
  }
  bool flat() const { return std::abs(slope_pcond) <= slope_band && std::abs(slope_l2) <= slope_band; }
  bool pass() const { return bounded() && flat(); }
};

inline SweepReport eps_sweep(const SweepSpec& spec) {
  if (spec.eps_list.size() < 2) throw ConfigError("sweep needs at least two viscosities");
  if (spec.dx_factor > 0.25) throw ConfigError("under-resolved sweep: dx must not exceed eps/4");
  const double M = spec.initial.mass();
  auto ctx0 = make_context(spec.flux, M, 1.0);
  std::function<SweepRow(std::size_t)> one = [&](std::size_t i) {
    SweepRow row;
    row.eps = spec.eps_list[i];
    SolverConfig cfg = spec.base;
    cfg.eps = row.eps;
    cfg.grid = auto_grid(spec.flux, spec.initial, row.eps, cfg.t_end, spec.h, spec.dx_factor * row.eps);
    row.grid = cfg.grid;
    auto u0 = mollify(spec.initial, spec.h, cfg.grid);
    row.traj = run(cfg, spec.flux, u0, spec.initial.id());
    DecayContext ctx = ctx0;
    ctx.eps = row.eps;
    row.pcond = check_decay_bounds(row.traj, DecayKind::pcond_linf, ctx);
    row.l2 = check_decay_bounds(row.traj, DecayKind::l2_powerlaw, ctx);
    row.carlen = check_decay_bounds(row.traj, DecayKind::carlen_loss, ctx);
    row.feireisl = check_decay_bounds(row.traj, DecayKind::feireisl, ctx);
    try {
      Window w = default_window(row.traj, spec.h, row.eps);
      std::optional<double> p = ctx.p;
      row.linf_fit = fit_decay(row.traj, kInf, w, p ? std::optional<double>(-1.0 / *p) : std::nullopt);
      row.l2_fit = fit_decay(row.traj, 2.0, w, p ? std::optional<double>(-0.5 / *p) : std::nullopt);
    } catch (const PreconditionError&) {
    }
    return row;
  };
  SweepReport rep;
  rep.slope_band = spec.slope_band;
  rep.rows = parallel_map<SweepRow>(spec.eps_list.size(), spec.jobs, one);
  std::vector<double> le, rp, rl;
  for (const auto& r : rep.rows) {
    le.push_back(std::log(r.eps));
    rp.push_back(r.pcond.lhs_max_ratio);
    rl.push_back(r.l2.lhs_max_ratio);
  }
  rep.slope_pcond = trend_slope(le, rp);
  rep.slope_l2 = trend_slope(le, rl);
  return rep;
}

struct InviscidRow {
  double eps = 0.0;
  std::size_t n = 0;
  double l1_error = 0.0;   ///< against the inviscid source solution
  double cauchy = 0.0;     ///< L1 distance to the previous row's solution
  double sup = 0.0;
};

struct InviscidReport {
  double M = 1.0, q = 2.0, t = 1.0;
  std::vector<InviscidRow> rows;
  double sup_bound = 0.0;     ///< M^{1/q} ((q-1) t)^{-1/q}
  double sup_ratio = 0.0;     ///< smallest-eps sup norm over sup_bound
  double final_target = 0.02;
  double tol = 5e-2;

  bool monotone() const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (!(rows[i].l1_error < rows[i - 1].l1_error)) return false;
    }
    return true;
  }
  bool pass() const {
    return !rows.empty() && monotone() && rows.back().l1_error <= final_target && sup_ratio <= 1.0 + tol;
  }
};

inline InviscidReport inviscid_limit(double M, double q, const std::vector<double>& eps_list, double t_probe,
                                     double h = 0.005, SolverConfig base = {}, unsigned jobs = default_jobs()) {
  if (eps_list.empty()) throw ConfigError("inviscid limit needs viscosities");
  auto flux = FluxSpec::power_law(q);
  auto mu = dirac(M, 0.0);
  InviscidReport rep;
  rep.M = M;
  rep.q = q;
  rep.t = t_probe;
  rep.sup_bound = std::pow(M, 1.0 / q) * std::pow((q - 1.0) * t_probe, -1.0 / q);
  std::function<GridFunction(std::size_t)> one = [&](std::size_t i) {
    SolverConfig cfg = base;
    cfg.eps = eps_list[i];
    cfg.t_start = 0.0;
    cfg.t_end = t_probe;
    cfg.snapshot_times = {t_probe};
    cfg.grid = auto_grid(flux, mu, cfg.eps, t_probe, h, 0.25 * cfg.eps);
    auto traj = run(cfg, flux, mollify(mu, h, cfg.grid));
    return traj.snapshots.back();
  };
  auto sols = parallel_map<GridFunction>(eps_list.size(), jobs, one);
  for (std::size_t i = 0; i < sols.size(); ++i) {
    const auto& u = sols[i];
    InviscidRow row;
    row.eps = eps_list[i];
    row.n = u.grid.n;
    double e = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
      e += std::abs(u[j] - oracle_nwave_cell(M, q, u.grid.node(j), u.grid.node(j + 1), t_probe));
    }
    row.l1_error = u.dx() * e;
    row.sup = norm(u, kInf);
    if (i > 0) row.cauchy = l1_distance(u, sols[i - 1]);
    rep.rows.push_back(row);
  }
  rep.sup_ratio = rep.rows.back().sup / rep.sup_bound;
  return rep;
}

struct UniquenessPair {
  double h_i = 0.0, h_j = 0.0;
  double distance = 0.0;  ///< ||U_{h_i} - U_{h_j}||_inf at t_probe
};

struct UniquenessReport {
  std::vector<double> h_list;
  std::vector<UniquenessPair> pairs;
  double order = 0.0;          ///< slope of log d(h_k, h_{k+1}) against log h_k
  double min_order = 0.8;
  double shape_h = 0.0;
  double shape_distance = 0.0;  ///< bump against hat at shape_h
  double shape_reference = 0.0; ///< distance between the last two widths
  std::vector<double> sup_constants;  ///< max_t ||u_h||_inf t^{1/p} / M^{1/p} for each h
  double sup_bound = 0.0;            ///< a^{-1/p} from the certified constant
  double tol = 5e-2;

  bool converges() const { return order >= min_order; }
  bool shape_comparable() const { return shape_distance <= shape_reference; }
  bool uniform_sup() const {
    for (double c : sup_constants) {
      if (c > sup_bound * (1.0 + tol)) return false;
    }
    return true;
  }
  bool pass() const { return converges() && shape_comparable() && uniform_sup(); }
};

/// Primitive distances between solutions from mollifications of one measure.
/// cfg supplies eps, grid and snapshot times; the last snapshot is the probe.
inline UniquenessReport uniqueness_probe(const MeasureData& mu, std::vector<double> h_list, const SolverConfig& cfg,
                                         const FluxSpec& flux, unsigned jobs = default_jobs()) {
  if (h_list.size() < 2) throw ConfigError("uniqueness probe needs at least two widths");
  for (std::size_t i = 1; i < h_list.size(); ++i) {
    if (!(h_list[i] <= h_list[i - 1])) throw ConfigError("mollifier widths must not increase");
  }
  if (cfg.grid.dx() > h_list.back()) throw PreconditionError("grid is coarser than the smallest width");
  const double M = mu.mass();
  auto ctx = make_context(flux, M, cfg.eps);
  UniquenessReport rep;
  rep.h_list = h_list;

  // Runs: every width with the bump, plus the hat at the last width.
  const std::size_t count = h_list.size() + 1;
  std::function<Trajectory(std::size_t)> one = [&](std::size_t i) {
    double h = i < h_list.size() ? h_list[i] : h_list.back();
    auto shape = i < h_list.size() ? MollifierShape::bump : MollifierShape::hat;
    return run(cfg, flux, mollify(mu, h, cfg.grid, shape));
  };
  auto trajs = parallel_map<Trajectory>(count, jobs, one);
  std::vector<GridFunction> U;
  for (const auto& tr : trajs) U.push_back(primitive(tr.snapshots.back()));
  auto dist = [&](std::size_t i, std::size_t j) {
    double d = 0.0;
    for (std::size_t k = 0; k < U[i].size(); ++k) d = std::max(d, std::abs(U[i][k] - U[j][k]));
    return d;
  };
  for (std::size_t i = 0; i < h_list.size(); ++i) {
    for (std::size_t j = i + 1; j < h_list.size(); ++j) rep.pairs.push_back({h_list[i], h_list[j], dist(i, j)});
  }
  std::vector<double> lh, ld;
  for (std::size_t i = 0; i + 1 < h_list.size(); ++i) {
    if (h_list[i + 1] == h_list[i]) continue;
    lh.push_back(std::log(h_list[i]));
    ld.push_back(std::log(std::max(dist(i, i + 1), std::numeric_limits<double>::min())));
  }
  rep.order = trend_slope(lh, ld);
  const std::size_t last = h_list.size() - 1;
  rep.shape_h = h_list[last];
  rep.shape_distance = dist(last, h_list.size());
  rep.shape_reference = dist(last - 1, last);

  if (ctx.p && ctx.a) {
    const double p = *ctx.p;
    rep.sup_bound = std::pow(*ctx.a, -1.0 / p);
    for (std::size_t i = 0; i < h_list.size(); ++i) {
      double c = 0.0;
      for (const auto& s : trajs[i].snapshots) {
        c = std::max(c, norm(s, kInf) * std::pow(*s.time, 1.0 / p) / std::pow(M, 1.0 / p));
      }
      rep.sup_constants.push_back(c);
    }
  }
  return rep;
}

}  // namespace viscid

#endif  // VISCID_ANALYSIS_HPP
