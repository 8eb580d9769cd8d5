#ifndef VISCID_FLUX_HPP
#define VISCID_FLUX_HPP

// Flux functions f with f(0) = f'(0) = 0 on r >= 0, the approximating family
// Phi_eta / Theta_eta, and grid certification of the p-condition
//
//     Theta_eta(r) = 2 r Phi_eta'(r) - Phi_eta(r) >= a r^{p/2} - b eta^gamma.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

// Boost 1.74 pchip calls isnan unqualified; <math.h> puts it in the global namespace.
#include <math.h>

#include <boost/math/interpolators/cubic_hermite.hpp>
#include <boost/math/interpolators/pchip.hpp>

#include "viscid/error.hpp"
#include "viscid/grid.hpp"

namespace viscid {

struct PowerLaw {
  double p;
};

struct PolyTerm {
  double mu;
  double p;
};

/// f(r) = sum_k mu_k r^{p_k}; an empty term list is the zero flux.
struct PolySum {
  std::vector<PolyTerm> terms;
};

/// C^1 flux sampled on [0, r_max] and interpolated by a monotone cubic
/// (Fritsch-Carlson slopes, f'(0) clamped to 0), or by a cubic Hermite when
/// derivative samples are supplied.
class TabulatedFlux {
 public:
  TabulatedFlux(std::vector<double> r, std::vector<double> f, std::vector<double> fprime = {},
                double holder_hint = 1.0)
      : holder_hint_(holder_hint) {
    if (r.size() < 4 || r.size() != f.size()) {
      throw ConfigError("tabulated flux needs at least 4 (r, f) samples of equal length");
    }
    if (!fprime.empty() && fprime.size() != r.size()) {
      throw ConfigError("tabulated flux derivative column has the wrong length");
    }
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (!std::isfinite(r[i]) || !std::isfinite(f[i]) ||
          (!fprime.empty() && !std::isfinite(fprime[i]))) {
        throw ConfigError("tabulated flux samples must be finite");
      }
      if (i > 0 && !(r[i] > r[i - 1])) {
        throw ConfigError("tabulated flux abscissae must be strictly increasing");
      }
    }
    if (r.front() != 0.0 || f.front() != 0.0) {
      throw ConfigError("tabulated flux must start at (0, 0): f(0) = 0");
    }
    if (!fprime.empty() && fprime.front() != 0.0) {
      throw ConfigError("tabulated flux must satisfy f'(0) = 0");
    }
    r_max_ = r.back();
    if (fprime.empty()) {
      interp_ = Pchip(std::vector<double>(r), std::vector<double>(f), 0.0);
    } else {
      fprime.front() = 0.0;
      interp_ = Hermite(std::vector<double>(r), std::vector<double>(f), std::move(fprime));
    }
    build_tables(r);
  }

  double value(double r) const {
    check(r);
    if (r == r_max_) return std::visit([&](const auto& s) { return s(r_max_); }, interp_);
    return std::visit([&](const auto& s) { return s(r); }, interp_);
  }

  double deriv(double r) const {
    check(r);
    if (r == 0.0) return 0.0;
    return std::visit([&](const auto& s) { return s.prime(r); }, interp_);
  }

  double r_max() const noexcept { return r_max_; }
  double holder_hint() const noexcept { return holder_hint_; }
  bool nondecreasing() const noexcept { return nondecreasing_; }

  /// f^+(r) = int_0^r max(f', 0), sampled on a fine table.
  double positive_part(double r) const { return lerp_table(plus_, r); }

  /// Upper bound for sup_{[0, r]} |f'| (sampled maximum with a 1% margin).
  double max_abs_deriv(double r) const {
    r = std::clamp(r, 0.0, r_max_);
    auto it = std::lower_bound(fine_r_.begin(), fine_r_.end(), r);
    std::size_t i = std::min<std::size_t>(it - fine_r_.begin(), fine_r_.size() - 1);
    return 1.01 * abs_prefix_max_[i];
  }

 private:
  using Pchip = boost::math::interpolators::pchip<std::vector<double>>;
  using Hermite = boost::math::interpolators::cubic_hermite<std::vector<double>>;

  void check(double r) const {
    if (!(r >= 0.0)) throw DomainError("flux evaluated at negative r");
    if (r > r_max_) throw ExtrapolationError("tabulated flux evaluated beyond r_max");
  }

  void build_tables(const std::vector<double>& knots) {
    constexpr int kSub = 32;
    fine_r_.clear();
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
      for (int s = 0; s < kSub; ++s) {
        fine_r_.push_back(knots[k] + (knots[k + 1] - knots[k]) * s / kSub);
      }
    }
    fine_r_.push_back(knots.back());
    plus_.assign(fine_r_.size(), 0.0);
    abs_prefix_max_.assign(fine_r_.size(), 0.0);
    nondecreasing_ = true;
    double prev = 0.0;
    double running = 0.0;
    for (std::size_t i = 0; i < fine_r_.size(); ++i) {
      double d = deriv(fine_r_[i]);
      if (d < 0.0) nondecreasing_ = false;
      running = std::max(running, std::abs(d));
      if (i > 0) {
        // Simpson on each fine interval.
        double mid = deriv(0.5 * (fine_r_[i] + fine_r_[i - 1]));
        if (mid < 0.0) nondecreasing_ = false;
        running = std::max(running, std::abs(mid));
        plus_[i] = plus_[i - 1] + (std::max(prev, 0.0) + 4.0 * std::max(mid, 0.0) + std::max(d, 0.0)) *
                                      (fine_r_[i] - fine_r_[i - 1]) / 6.0;
      }
      abs_prefix_max_[i] = running;
      prev = d;
    }
  }

  double lerp_table(const std::vector<double>& table, double r) const {
    check(r);
    auto it = std::upper_bound(fine_r_.begin(), fine_r_.end(), r);
    if (it == fine_r_.end()) return table.back();
    std::size_t i = (it - fine_r_.begin()) - 1;
    double w = (r - fine_r_[i]) / (fine_r_[i + 1] - fine_r_[i]);
    return table[i] + w * (table[i + 1] - table[i]);
  }

  std::variant<Pchip, Hermite> interp_ = Pchip({0.0, 1.0, 2.0, 3.0}, {0.0, 0.0, 0.0, 0.0});
  double r_max_ = 0.0;
  double holder_hint_ = 1.0;
  bool nondecreasing_ = true;
  std::vector<double> fine_r_;
  std::vector<double> plus_;
  std::vector<double> abs_prefix_max_;
};

class FluxSpec {
 public:
  using Kind = std::variant<PowerLaw, PolySum, TabulatedFlux>;

  static FluxSpec power_law(double p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw ConfigError("power-law exponent must satisfy p > 1");
    return FluxSpec(PowerLaw{p});
  }

  static FluxSpec poly_sum(std::vector<PolyTerm> terms) {
    for (const auto& t : terms) {
      if (!(t.mu > 0.0) || !std::isfinite(t.mu)) throw ConfigError("polysum coefficients must be > 0");
      if (!(t.p > 1.0) || !std::isfinite(t.p)) throw ConfigError("polysum exponents must be > 1");
    }
    return FluxSpec(PolySum{std::move(terms)});
  }

  static FluxSpec zero() { return FluxSpec(PolySum{}); }

  static FluxSpec tabulated(std::vector<double> r, std::vector<double> f,
                            std::vector<double> fprime = {}, double holder_hint = 1.0) {
    return FluxSpec(TabulatedFlux(std::move(r), std::move(f), std::move(fprime), holder_hint));
  }

  const Kind& kind() const noexcept { return kind_; }

  bool is_zero() const noexcept {
    auto* ps = std::get_if<PolySum>(&kind_);
    return ps != nullptr && ps->terms.empty();
  }

  /// p for a power law, max p_k for a polysum; empty for zero and tabulated fluxes.
  std::optional<double> exponent() const {
    if (auto* pl = std::get_if<PowerLaw>(&kind_)) return pl->p;
    if (auto* ps = std::get_if<PolySum>(&kind_)) {
      if (ps->terms.empty()) return std::nullopt;
      double p = 0.0;
      for (const auto& t : ps->terms) p = std::max(p, t.p);
      return p;
    }
    return std::nullopt;
  }

  /// Smallest exponent; used for the f(xi)/xi in C^1 applicability test.
  std::optional<double> min_exponent() const {
    if (auto* pl = std::get_if<PowerLaw>(&kind_)) return pl->p;
    if (auto* ps = std::get_if<PolySum>(&kind_)) {
      if (ps->terms.empty()) return std::nullopt;
      double p = std::numeric_limits<double>::infinity();
      for (const auto& t : ps->terms) p = std::min(p, t.p);
      return p;
    }
    return std::nullopt;
  }

  std::string id() const {
    std::ostringstream os;
    os.precision(17);
    if (auto* pl = std::get_if<PowerLaw>(&kind_)) {
      os << "power:" << pl->p;
    } else if (auto* ps = std::get_if<PolySum>(&kind_)) {
      if (ps->terms.empty()) return "zero";
      os << "polysum:";
      for (std::size_t i = 0; i < ps->terms.size(); ++i) {
        if (i) os << ',';
        os << ps->terms[i].mu << '@' << ps->terms[i].p;
      }
    } else {
      os << "table:r_max=" << std::get<TabulatedFlux>(kind_).r_max();
    }
    return os.str();
  }

 private:
  explicit FluxSpec(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

namespace detail {

inline void require_nonnegative(double r) {
  if (!(r >= 0.0)) throw DomainError("flux evaluated at negative r");
}

inline double pow_term(double r, double p) { return r == 0.0 ? 0.0 : std::pow(r, p); }

inline double pow_term_deriv(double r, double p) {
  return r == 0.0 ? 0.0 : p * std::pow(r, p - 1.0);
}

// eta^p [(1 + r/eta^2)^{p/2} - 1], accurate for r << eta^2.
inline double phi_power(double r, double eta, double p) {
  return std::pow(eta, p) * std::expm1(0.5 * p * std::log1p(r / (eta * eta)));
}

inline double theta_power(double r, double eta, double p) {
  return p * r * std::pow(r + eta * eta, 0.5 * p - 1.0) - phi_power(r, eta, p);
}

}  // namespace detail

inline double eval_flux(const FluxSpec& flux, double r) {
  return std::visit(
      [r](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, PowerLaw>) {
          detail::require_nonnegative(r);
          return detail::pow_term(r, k.p);
        } else if constexpr (std::is_same_v<K, PolySum>) {
          detail::require_nonnegative(r);
          double s = 0.0;
          for (const auto& t : k.terms) s += t.mu * detail::pow_term(r, t.p);
          return s;
        } else {
          return k.value(r);
        }
      },
      flux.kind());
}

inline double eval_flux_deriv(const FluxSpec& flux, double r) {
  return std::visit(
      [r](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, PowerLaw>) {
          detail::require_nonnegative(r);
          return detail::pow_term_deriv(r, k.p);
        } else if constexpr (std::is_same_v<K, PolySum>) {
          detail::require_nonnegative(r);
          double s = 0.0;
          for (const auto& t : k.terms) s += t.mu * detail::pow_term_deriv(r, t.p);
          return s;
        } else {
          return k.deriv(r);
        }
      },
      flux.kind());
}

/// Phi_eta(r) = (r + eta^2)^{p/2} - eta^p, summed termwise for a polysum.
inline double phi_eta(const FluxSpec& flux, double r, double eta) {
  detail::require_nonnegative(r);
  if (!(eta > 0.0)) throw DomainError("phi_eta requires eta > 0");
  if (auto* pl = std::get_if<PowerLaw>(&flux.kind())) return detail::phi_power(r, eta, pl->p);
  if (auto* ps = std::get_if<PolySum>(&flux.kind())) {
    double s = 0.0;
    for (const auto& t : ps->terms) s += t.mu * detail::phi_power(r, eta, t.p);
    return s;
  }
  throw UnsupportedError("no canonical Phi_eta family for a tabulated flux");
}

inline double theta_eta(const FluxSpec& flux, double r, double eta) {
  detail::require_nonnegative(r);
  if (!(eta > 0.0)) throw DomainError("theta_eta requires eta > 0");
  if (auto* pl = std::get_if<PowerLaw>(&flux.kind())) return detail::theta_power(r, eta, pl->p);
  if (auto* ps = std::get_if<PolySum>(&flux.kind())) {
    double s = 0.0;
    for (const auto& t : ps->terms) s += t.mu * detail::theta_power(r, eta, t.p);
    return s;
  }
  throw UnsupportedError("no canonical Theta_eta family for a tabulated flux");
}

// ---------------------------------------------------------------------------
// p-condition certification

struct PCondParams {
  double p = 2.0;
  double a = 1.0;
  double b = 0.0;
  double gamma = 1.0;
  Interval eta_range{1e-4, 1e-1};
  Interval r_range{1e-6, 1e3};
};

struct PCondReport {
  bool pass = false;
  double min_margin = 0.0;  ///< min over grid of Theta - a r^{p/2} + b eta^gamma
  double min_margin_r = 0.0;
  double min_margin_eta = 0.0;
  double best_a_b0 = 0.0;  ///< largest a with b = 0 at the smallest tested eta
  std::size_t points = 0;
};

inline std::vector<double> log_grid(Interval range, std::size_t n) {
  if (!(range.lo > 0.0) || !(range.hi >= range.lo) || n == 0) {
    throw DomainError("log grid needs 0 < lo <= hi and n >= 1");
  }
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = range.lo;
    return g;
  }
  double ratio = std::log(range.hi / range.lo);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = range.lo * std::exp(ratio * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  g.back() = range.hi;
  return g;
}

inline PCondReport verify_p_condition(const FluxSpec& flux, const PCondParams& params,
                                      std::size_t n_r = 200, std::size_t n_eta = 40) {
  if (!(params.a > 0.0) || !(params.b >= 0.0) || !(params.gamma > 0.0)) {
    throw DomainError("p-condition parameters need a > 0, b >= 0, gamma > 0");
  }
  constexpr double kRelTol = 1e-12;
  auto rs = log_grid(params.r_range, n_r);
  auto etas = log_grid(params.eta_range, n_eta);
  PCondReport rep;
  rep.pass = true;
  rep.min_margin = std::numeric_limits<double>::infinity();
  rep.best_a_b0 = std::numeric_limits<double>::infinity();
  for (double eta : etas) {
    double slack = params.b * std::pow(eta, params.gamma);
    for (double r : rs) {
      double th = theta_eta(flux, r, eta);
      double lower = params.a * std::pow(r, 0.5 * params.p);
      double margin = th - lower + slack;
      if (margin < -kRelTol * (std::abs(th) + lower + slack)) rep.pass = false;
      if (margin < rep.min_margin) {
        rep.min_margin = margin;
        rep.min_margin_r = r;
        rep.min_margin_eta = eta;
      }
      ++rep.points;
    }
  }
  for (double r : rs) {
    rep.best_a_b0 = std::min(rep.best_a_b0, theta_eta(flux, r, etas.front()) / std::pow(r, 0.5 * params.p));
  }
  return rep;
}

/// Slack b eta^gamma needed for a given a: the per-eta deficit
/// D(eta) = max_r (a r^{p/2} - Theta_eta(r))^+ is fitted as b eta^gamma.
struct SlackFit {
  bool vanishing = false;  ///< D(eta) -> 0 as eta -> 0 on the tested grid
  double b = 0.0;
  double gamma = 1.0;
  double gamma_fit = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> deficits;  ///< (eta, D(eta))
};

inline SlackFit find_p_condition_slack(const FluxSpec& flux, double p, double a, Interval r_range,
                                       Interval eta_range, std::size_t n_r = 200,
                                       std::size_t n_eta = 40,
                                       std::optional<double> gamma = std::nullopt) {
  auto rs = log_grid(r_range, n_r);
  auto etas = log_grid(eta_range, n_eta);
  SlackFit fit;
  std::vector<std::pair<double, double>> positive;
  for (double eta : etas) {
    double d = 0.0;
    for (double r : rs) d = std::max(d, a * std::pow(r, 0.5 * p) - theta_eta(flux, r, eta));
    fit.deficits.emplace_back(eta, d);
    if (d > 0.0) positive.emplace_back(std::log(eta), std::log(d));
  }
  if (positive.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : positive) {
      mx += x;
      my += y;
    }
    mx /= positive.size();
    my /= positive.size();
    double sxx = 0.0, sxy = 0.0;
    for (auto [x, y] : positive) {
      sxx += (x - mx) * (x - mx);
      sxy += (x - mx) * (y - my);
    }
    fit.gamma_fit = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  // Deficit must decay with eta; a deficit that persists at the smallest eta
  // with no decay rate means no admissible slack exists.
  constexpr double kMinRate = 0.1;
  if (positive.empty()) {
    fit.vanishing = true;
  } else if (positive.size() == 1) {
    fit.vanishing = fit.deficits.front().second == 0.0;
  } else {
    fit.vanishing = fit.gamma_fit > kMinRate;
  }
  if (gamma) {
    fit.gamma = *gamma;
    if (std::isfinite(fit.gamma_fit) && *gamma > fit.gamma_fit + 0.05) fit.vanishing = false;
  } else {
    fit.gamma = std::isfinite(fit.gamma_fit) && fit.gamma_fit > 0.0 ? fit.gamma_fit : 1.0;
  }
  for (auto [eta, d] : fit.deficits) fit.b = std::max(fit.b, d / std::pow(eta, fit.gamma));
  return fit;
}

struct PCondCertification {
  PCondParams params;
  PCondReport report;
  SlackFit slack;
  bool pass() const { return slack.vanishing && report.pass; }
};

inline double require_exponent(const FluxSpec& flux) {
  auto p = flux.exponent();
  if (!p) throw UnsupportedError("p-condition needs a power-law or polysum flux");
  return *p;
}

/// Certify the p-condition for a given a, letting the module find (b, gamma).
inline PCondCertification certify_p_condition(const FluxSpec& flux, double a,
                                              Interval r_range = {1e-6, 1e3},
                                              Interval eta_range = {1e-4, 1e-1},
                                              std::optional<double> gamma = std::nullopt,
                                              std::size_t n_r = 200, std::size_t n_eta = 40) {
  PCondCertification c;
  double p = require_exponent(flux);
  c.slack = find_p_condition_slack(flux, p, a, r_range, eta_range, n_r, n_eta, gamma);
  c.params = PCondParams{p, a, c.slack.b, c.slack.gamma, eta_range, r_range};
  c.report = verify_p_condition(flux, c.params, n_r, n_eta);
  return c;
}

/// Largest a admitting zero slack at the smallest tested eta on the default
/// certification grid.
inline double certified_a(const FluxSpec& flux, Interval r_range = {1e-6, 1e3},
                          Interval eta_range = {1e-4, 1e-1}, std::size_t n_r = 200) {
  double p = require_exponent(flux);
  PCondParams probe{p, 1.0, 0.0, 1.0, eta_range, r_range};
  return verify_p_condition(flux, probe, n_r, 1).best_a_b0;
}

struct GrowthReport {
  double c_hat = 0.0;
  double argmax_r = 0.0;
  bool pass = false;
};

/// C-hat = max over log-spaced r in (0, r_max] of |f'(r)| / (1 + r^{p-1}).
inline GrowthReport verify_growth(const FluxSpec& flux, double p, double r_max, std::size_t n = 400) {
  if (!(r_max > 0.0)) throw DomainError("verify_growth needs r_max > 0");
  GrowthReport rep;
  for (double r : log_grid({r_max * 1e-8, r_max}, n)) {
    double c = std::abs(eval_flux_deriv(flux, r)) / (1.0 + std::pow(r, p - 1.0));
    if (c > rep.c_hat) {
      rep.c_hat = c;
      rep.argmax_r = r;
    }
  }
  rep.pass = std::isfinite(rep.c_hat);
  return rep;
}

// ---------------------------------------------------------------------------
// Hot-loop evaluator used by the time integrators. Negative arguments (roundoff
// undershoot) are evaluated at 0, which keeps f nondecreasing in its argument.

class FluxEvaluator {
 public:
  explicit FluxEvaluator(const FluxSpec& flux) : flux_(&flux) {
    if (flux.is_zero()) {
      mode_ = Mode::zero;
    } else if (auto* pl = std::get_if<PowerLaw>(&flux.kind())) {
      p_ = pl->p;
      if (p_ == 2.0) mode_ = Mode::square;
      else if (p_ == 3.0) mode_ = Mode::cube;
      else if (p_ == 1.5) mode_ = Mode::three_halves;
      else if (p_ == 4.0) mode_ = Mode::fourth;
      else mode_ = Mode::power;
    } else if (auto* ps = std::get_if<PolySum>(&flux.kind())) {
      mode_ = Mode::polysum;
      terms_ = ps->terms;
    } else {
      mode_ = Mode::table;
      table_ = &std::get<TabulatedFlux>(flux.kind());
    }
  }

  double value(double u) const {
    u = u > 0.0 ? u : 0.0;
    switch (mode_) {
      case Mode::zero: return 0.0;
      case Mode::square: return u * u;
      case Mode::cube: return u * u * u;
      case Mode::three_halves: return u * std::sqrt(u);
      case Mode::fourth: { double s = u * u; return s * s; }
      case Mode::power: return detail::pow_term(u, p_);
      case Mode::polysum: {
        double s = 0.0;
        for (const auto& t : terms_) s += t.mu * detail::pow_term(u, t.p);
        return s;
      }
      case Mode::table: return table_->value(u);
    }
    return 0.0;
  }

  double deriv(double u) const {
    u = u > 0.0 ? u : 0.0;
    switch (mode_) {
      case Mode::zero: return 0.0;
      case Mode::square: return 2.0 * u;
      case Mode::cube: return 3.0 * u * u;
      case Mode::three_halves: return 1.5 * std::sqrt(u);
      case Mode::fourth: return 4.0 * u * u * u;
      case Mode::power: return detail::pow_term_deriv(u, p_);
      case Mode::polysum: {
        double s = 0.0;
        for (const auto& t : terms_) s += t.mu * detail::pow_term_deriv(u, t.p);
        return s;
      }
      case Mode::table: return table_->deriv(u);
    }
    return 0.0;
  }

  /// sup over [0, u_max] of |f'|. f' is nondecreasing for power laws and polysums.
  double max_speed(double u_max) const {
    u_max = std::max(u_max, 0.0);
    if (mode_ == Mode::table) return table_->max_abs_deriv(u_max);
    return deriv(u_max);
  }

  bool nondecreasing() const { return mode_ != Mode::table || table_->nondecreasing(); }

  /// Engquist-Osher split f = f^+ + f^-.
  double positive_part(double u) const {
    if (nondecreasing()) return value(u);
    return table_->positive_part(u > 0.0 ? u : 0.0);
  }

  double negative_part(double u) const { return value(u) - positive_part(u); }

  const FluxSpec& spec() const { return *flux_; }

 private:
  enum class Mode { zero, square, cube, three_halves, fourth, power, polysum, table };
  const FluxSpec* flux_;
  Mode mode_ = Mode::zero;
  double p_ = 0.0;
  std::vector<PolyTerm> terms_;
  const TabulatedFlux* table_ = nullptr;
};

}  // namespace viscid

#endif  // VISCID_FLUX_HPP
