#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "inflab/series.hpp"

namespace inflab {

enum class TrendMethod { hp, deterministic };

/// Trend/cycle split of one series. `parameter` holds lambda for HP, the polynomial degree otherwise.
struct GapEstimate {
  TimeSeries gap;
  TimeSeries trend;
  TrendMethod method;
  double parameter;
  std::vector<double> coefficients;  // polynomial coefficients (deterministic trend only)
};

inline constexpr double kMonthlyHpLambda = 14400.0;

namespace detail {

/// Solves the symmetric positive definite pentadiagonal system given by its main diagonal and
/// first/second superdiagonals, using a banded Cholesky factorization A = L L'.
inline std::vector<double> solve_spd_pentadiagonal(const std::vector<double>& diag, const std::vector<double>& sup1,
                                                   const std::vector<double>& sup2, const std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  std::vector<double> l0(n), l1(n, 0.0), l2(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= 2) l2[i] = sup2[i - 2] / l0[i - 2];
    if (i >= 1) l1[i] = (sup1[i - 1] - (i >= 2 ? l2[i] * l1[i - 1] : 0.0)) / l0[i - 1];
    double p = diag[i] - l1[i] * l1[i] - l2[i] * l2[i];
    if (!(p > 0.0)) throw std::domain_error("pentadiagonal system is not positive definite");
    l0[i] = std::sqrt(p);
  }
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = rhs[i];
    if (i >= 1) s -= l1[i] * y[i - 1];
    if (i >= 2) s -= l2[i] * y[i - 2];
    y[i] = s / l0[i];
  }
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = y[k];
    if (k + 1 < n) s -= l1[k + 1] * x[k + 1];
    if (k + 2 < n) s -= l2[k + 2] * x[k + 2];
    x[k] = s / l0[k];
  }
  return x;
}

}  // namespace detail

/// Hodrick-Prescott trend: solves (I + lambda D'D) tau = x with D the second-difference operator.
inline GapEstimate hp_filter(const TimeSeries& x, double lambda) {
  const std::size_t n = x.size();
  if (n < 5) throw std::invalid_argument("hp_filter needs at least 5 observations");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("hp_filter lambda must be positive");

  std::vector<double> diag(n, 1.0), sup1(n - 1, 0.0), sup2(n - 2, 0.0);
  constexpr double row[3] = {1.0, -2.0, 1.0};
  for (std::size_t k = 0; k + 2 < n; ++k) {
    for (int a = 0; a < 3; ++a) {
      diag[k + a] += lambda * row[a] * row[a];
      if (a < 2) sup1[k + a] += lambda * row[a] * row[a + 1];
    }
    sup2[k] += lambda * row[0] * row[2];
  }
  // solve for the cycle c = x - tau, which satisfies (I + lambda D'D) c = lambda D'D x; linear
  // inputs then give an exactly zero right-hand side
  std::vector<double> rhs(n, 0.0);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    const double d2 = lambda * (x[k] - 2.0 * x[k + 1] + x[k + 2]);
    for (int a = 0; a < 3; ++a) rhs[k + a] += row[a] * d2;
  }
  auto cycle = detail::solve_spd_pentadiagonal(diag, sup1, sup2, rhs);
  std::vector<double> tau(n);
  for (std::size_t i = 0; i < n; ++i) tau[i] = x[i] - cycle[i];
  return {TimeSeries(x.start(), std::move(cycle), x.name() + "_gap"),
          TimeSeries(x.start(), std::move(tau), x.name() + "_trend"), TrendMethod::hp, lambda, {}};
}

/// Least-squares polynomial trend in the month index t = 0, 1, ...
inline GapEstimate fit_trend(const TimeSeries& x, int degree) {
  if (degree != 1 && degree != 2) throw std::invalid_argument("trend degree must be 1 or 2");
  const auto n = static_cast<Eigen::Index>(x.size());
  if (n <= degree + 1) throw std::invalid_argument("fit_trend needs more than degree + 1 observations");
  Eigen::MatrixXd X(n, degree + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double p = 1.0;
    for (int k = 0; k <= degree; ++k, p *= static_cast<double>(t)) X(t, k) = p;
    y(t) = x[static_cast<std::size_t>(t)];
  }
  Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  Eigen::VectorXd fitted = X * beta;
  std::vector<double> trend(fitted.data(), fitted.data() + n), resid(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) resid[i] = x[i] - trend[i];
  return {TimeSeries(x.start(), std::move(resid), x.name() + "_gap"),
          TimeSeries(x.start(), std::move(trend), x.name() + "_trend"), TrendMethod::deterministic,
          static_cast<double>(degree), std::vector<double>(beta.data(), beta.data() + beta.size())};
}

/// log(ise) minus its HP trend.
inline TimeSeries gap_log_diff(const TimeSeries& ise, double lambda = kMonthlyHpLambda) {
  return hp_filter(log_series(ise), lambda).gap.renamed("gap");
}

/// (ise - trend) / trend for a deterministic polynomial trend. With `on_logs` the trend is fitted to
/// log(ise) and the deviation is ise / exp(trend) - 1.
inline TimeSeries gap_pct_dev(const TimeSeries& ise, int degree = 1, bool on_logs = false) {
  std::vector<double> out(ise.size());
  if (on_logs) {
    auto fit = fit_trend(log_series(ise), degree);
    for (std::size_t i = 0; i < ise.size(); ++i) out[i] = ise[i] / std::exp(fit.trend[i]) - 1.0;
  } else {
    auto fit = fit_trend(ise, degree);
    double scale = 0.0;
    for (double v : ise.values()) scale = std::max(scale, std::fabs(v));
    for (std::size_t i = 0; i < ise.size(); ++i) {
      double tr = fit.trend[i];
      if (std::fabs(tr) <= 1e-12 * scale) throw std::domain_error("zero trend value at " + (ise.start() + static_cast<long>(i)).str());
      out[i] = (ise[i] - tr) / tr;
    }
  }
  return {ise.start(), std::move(out), "gap"};
}

}  // namespace inflab
