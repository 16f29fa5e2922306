#pragma once
// Exponentially scaled modified Bessel function of the first kind in log
// form, log(I_nu(z) e^{-z}), for real order nu >= 0 and z >= 0.
//
// Regimes:
//  * moderate z: the standard library's cyl_bessel_i (falls back to the
//    positive power series in log space when the value underflows);
//  * large z, small order (nu^2 << z): Hankel asymptotic expansion;
//  * large z, large order: Debye uniform asymptotic expansion.

#include <cmath>
#include <limits>
#include <numbers>

namespace xborder {

namespace detail {

// Positive power series, summed relative to its largest term.
inline double log_bessel_i_series(double nu, double z) {
  const double half = 0.5 * z;
  const double q = half * half;
  const double log_t0 = nu * std::log(half) - std::lgamma(nu + 1.0);
  // Terms t_k / t_0 = prod q / (m (m + nu)).
  double log_max = 0.0, log_t = 0.0;
  for (int k = 1; k < 100000; ++k) {
    log_t += std::log(q / (static_cast<double>(k) * (static_cast<double>(k) + nu)));
    if (log_t > log_max) log_max = log_t;
    if (log_t < log_max - 40.0) break;
  }
  double sum = 0.0, t = std::exp(-log_max);
  for (int k = 0; k < 100000; ++k) {
    if (k > 0) t *= q / (static_cast<double>(k) * (static_cast<double>(k) + nu));
    sum += t;
    if (t < 1e-18 * sum && k > 2.0 * half) break;
  }
  return log_t0 + log_max + std::log(sum) - z;
}

inline double log_bessel_i_hankel(double nu, double z) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (k * 8.0 * z);
    if (std::abs(next) > std::abs(term)) break;  // asymptotic series starts diverging
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return -0.5 * std::log(2.0 * std::numbers::pi * z) + std::log(sum);
}

inline double log_bessel_i_debye(double nu, double z) {
  const double x = z / nu;
  const double s = std::sqrt(1.0 + x * x);
  const double p = 1.0 / s;
  const double p2 = p * p;
  const double u1 = p * (3.0 - 5.0 * p2) / 24.0;
  const double u2 = p2 * (81.0 + p2 * (-462.0 + p2 * 385.0)) / 1152.0;
  const double u3 = p * p2 * (30375.0 + p2 * (-369603.0 + p2 * (765765.0 - p2 * 425425.0))) / 414720.0;
  const double u4 =
      p2 * p2 *
      (4465125.0 + p2 * (-94121676.0 + p2 * (349922430.0 + p2 * (-446185740.0 + p2 * 185910725.0)))) /
      39813120.0;
  const double inv = 1.0 / nu;
  const double series = 1.0 + inv * (u1 + inv * (u2 + inv * (u3 + inv * u4)));
  // nu*eta - z with eta = s + log(x / (1 + s)), written to avoid cancellation.
  const double exponent = nu * (1.0 / (s + x)) + nu * std::log(x / (1.0 + s));
  return exponent - 0.5 * std::log(2.0 * std::numbers::pi * nu) - 0.5 * std::log(s) + std::log(series);
}

}  // namespace detail

// log(I_nu(z) * exp(-z)).
inline double log_bessel_i_scaled(double nu, double z) {
  if (z < 0.0 || nu < 0.0 || std::isnan(z) || std::isnan(nu)) return std::numeric_limits<double>::quiet_NaN();
  if (z == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (z < 500.0) {
    if (nu > 50.0 && z < 0.05 * nu) return detail::log_bessel_i_series(nu, z);
    const double v = std::cyl_bessel_i(nu, z);
    if (v > 1e-290 && std::isfinite(v)) return std::log(v) - z;
    return detail::log_bessel_i_series(nu, z);
  }
  if (nu * nu < 0.25 * z) return detail::log_bessel_i_hankel(nu, z);
  return detail::log_bessel_i_debye(nu, z);
}

inline double log_bessel_i(double nu, double z) { return log_bessel_i_scaled(nu, z) + z; }

}  // namespace xborder
