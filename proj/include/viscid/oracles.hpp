#ifndef VISCID_ORACLES_HPP
#define VISCID_ORACLES_HPP

// Closed-form source solutions: heat kernel, viscous Burgers u_t + (u^2)_x = eps u_xx
// (Hopf-Cole), and the inviscid N-wave of u_t + (u^q)_x = 0.

#include <algorithm>
#include <cmath>

#include "viscid/error.hpp"
#include "viscid/kernel.hpp"

namespace viscid {

inline double oracle_heat(double M, double eps, double x, double t) {
  return M * g_eval(HeatKernelParams(eps), x, t);
}

/// Average of oracle_heat over [a, b].
inline double oracle_heat_cell(double M, double eps, double a, double b, double t) {
  if (!(t > 0.0)) throw DomainError("oracle needs t > 0");
  const double s = std::sqrt(4.0 * eps * t);
  double v;
  if (a >= 0.0) v = 0.5 * (std::erfc(a / s) - std::erfc(b / s));
  else if (b <= 0.0) v = 0.5 * (std::erfc(-b / s) - std::erfc(-a / s));
  else v = 0.5 * (std::erf(b / s) - std::erf(a / s));
  return M * v / (b - a);
}

namespace detail {

// log erfc(z), asymptotic beyond the underflow range of erfc.
inline double log_erfc(double z) {
  if (z < 26.0) return std::log(std::erfc(z));
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / (2.0 * z2) + 3.0 / (4.0 * z2 * z2) - 15.0 / (8.0 * z2 * z2 * z2);
  return -z2 - std::log(z * std::sqrt(M_PI)) + std::log(series);
}

inline double log_add(double a, double b) {
  double m = std::max(a, b);
  if (m == -INFINITY) return m;
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

}  // namespace detail

/// Source solution of u_t + (u^2)_x = eps u_xx with data M delta_0:
/// u = eps (1 - B) G / [erfc(z)/2 + B erfc(-z)/2], B = exp(-M/eps), z = x / sqrt(4 eps t).
inline double oracle_burgers_viscous(double M, double eps, double x, double t) {
  if (!(t > 0.0)) throw DomainError("oracle needs t > 0");
  if (!(eps > 0.0)) throw DomainError("oracle needs eps > 0");
  const double z = x / std::sqrt(4.0 * eps * t);
  const double log_g = -z * z - 0.5 * std::log(4.0 * M_PI * eps * t);
  const double log_one_minus_b = std::log(-std::expm1(-M / eps));
  const double log_left = std::log(0.5) + detail::log_erfc(z);
  const double log_right = -M / eps + std::log(0.5) + detail::log_erfc(-z);
  const double log_phi = detail::log_add(log_left, log_right);
  return std::exp(std::log(eps) + log_one_minus_b + log_g - log_phi);
}

/// Entropy source solution of u_t + (u^q)_x = 0 with data M delta_0:
/// u = (x / (q t))^{1/(q-1)} on (0, s(t)), zero elsewhere.
inline double nwave_front(double M, double q, double t) {
  return std::pow(M * q / (q - 1.0), (q - 1.0) / q) * std::pow(q * t, 1.0 / q);
}

inline double oracle_nwave(double M, double q, double x, double t) {
  if (!(t > 0.0)) throw DomainError("oracle needs t > 0");
  if (!(q > 1.0)) throw DomainError("N-wave needs q > 1");
  if (x <= 0.0 || x >= nwave_front(M, q, t)) return 0.0;
  return std::pow(x / (q * t), 1.0 / (q - 1.0));
}

/// Exact average of the N-wave over [a, b].
inline double oracle_nwave_cell(double M, double q, double a, double b, double t) {
  if (!(t > 0.0)) throw DomainError("oracle needs t > 0");
  const double lo = std::max(a, 0.0);
  const double hi = std::min(b, nwave_front(M, q, t));
  if (hi <= lo) return 0.0;
  auto prim = [&](double x) {
    return q * t * (q - 1.0) / q * std::pow(x / (q * t), q / (q - 1.0));
  };
  return (prim(hi) - prim(lo)) / (b - a);
}

/// q = 2 case: u = x / (2t) on (0, 2 sqrt(M t)).
inline double oracle_burgers_inviscid(double M, double x, double t) {
  if (!(t > 0.0)) throw DomainError("oracle needs t > 0");
  const double s = 2.0 * std::sqrt(M * t);
  return (x > 0.0 && x < s) ? x / (2.0 * t) : 0.0;
}

}  // namespace viscid

#endif  // VISCID_ORACLES_HPP
