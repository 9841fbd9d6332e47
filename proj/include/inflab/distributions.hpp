#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace inflab::dist {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("gamma_p: shape must be positive");
  if (x <= 0.0) return 0.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  constexpr double eps = 1e-16;
  if (x < a + 1.0) {
    // series  x^a e^-x / Gamma(a+1) * sum x^n / ((a+1)...(a+n))
    double term = 1.0 / a, sum = term, ap = a;
    for (int n = 0; n < 10000; ++n) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * eps) break;
    }
    return std::min(1.0, sum * std::exp(log_prefix));
  }
  // continued fraction for Q(a, x), modified Lentz
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < eps) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_prefix) * h);
}

inline double chi2_cdf(double x, double dof) {
  if (!(dof > 0.0)) throw std::domain_error("chi2_cdf: dof must be positive");
  return x <= 0.0 ? 0.0 : gamma_p(0.5 * dof, 0.5 * x);
}

/// Upper tail probability P(X > x).
inline double chi2_sf(double x, double dof) { return 1.0 - chi2_cdf(x, dof); }

/// Inverse of chi2_cdf: bracketing bisection finished with Newton steps on the density.
inline double chi2_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("chi2_quantile: p must be in (0, 1)");
  if (!(dof > 0.0)) throw std::domain_error("chi2_quantile: dof must be positive");
  double lo = 0.0, hi = std::max(1.0, dof);
  while (chi2_cdf(hi, dof) < p) hi *= 2.0;
  for (int i = 0; i < 60; ++i) {
    double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, dof) < p ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  const double k = 0.5 * dof;
  for (int i = 0; i < 5; ++i) {
    double pdf = std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::log(2.0) - std::lgamma(k));
    if (!(pdf > 0.0)) break;
    double step = (chi2_cdf(x, dof) - p) / pdf;
    double next = x - step;
    if (!(next > lo && next < hi)) break;
    x = next;
    if (std::fabs(step) < 1e-14 * x) break;
  }
  return x;
}

}  // namespace inflab::dist
