#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "inflab/distributions.hpp"
#include "inflab/series.hpp"

namespace inflab {

/// Deterministic terms in the Dickey-Fuller regression.
enum class AdfSpec { none, constant_no_trend, constant_trend };

inline const char* to_string(AdfSpec s) {
  switch (s) {
    case AdfSpec::none: return "No constant, no time trend";
    case AdfSpec::constant_no_trend: return "Constant, no time trend";
    case AdfSpec::constant_trend: return "Constant and time trend";
  }
  return "?";
}

struct AdfResult {
  double rho;         // coefficient on x_{t-1}
  double rho_se;
  double rho_pvalue;  // two-sided Gaussian p-value of rho (not the unit-root p-value)
  double adf_stat;    // rho / se(rho)
  double p_value;     // MacKinnon response-surface p-value of adf_stat
  int lags;
  AdfSpec spec;
  int n_obs;
};

namespace detail {

// MacKinnon (1994) response-surface coefficients for one integrated variable, as used by
// most statistics packages for ADF p-values. Index: none, constant, constant+trend.
struct MacKinnonSurface {
  double tau_max, tau_min, tau_star;
  std::array<double, 3> small_p;
  std::array<double, 4> large_p;
};

inline constexpr std::array<MacKinnonSurface, 3> kMacKinnon = {{
    {std::numeric_limits<double>::infinity(), -19.04, -1.04, {0.6344, 1.2378, 3.2496e-2},
     {0.4797, 9.3557e-1, -0.6999e-1, 3.3066e-2}},
    {2.74, -18.83, -1.61, {2.1659, 1.4412, 3.8269e-2}, {1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2}},
    {0.7, -16.18, -2.89, {3.2512, 1.6047, 4.9588e-2}, {2.5261, 6.1654e-1, -3.7956e-1, -6.0285e-2}},
}};

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  double rss;
};

inline OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) throw std::domain_error("ADF regressors are perfectly collinear");
  OlsFit f;
  f.beta = qr.solve(y);
  f.rss = (y - X * f.beta).squaredNorm();
  const double dof = static_cast<double>(X.rows() - X.cols());
  const double s2 = f.rss / dof;
  // (X'X)^-1 = P R^-1 R^-T P'
  const auto k = X.cols();
  Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd cov = qr.colsPermutation() * (Rinv * Rinv.transpose()) * qr.colsPermutation().transpose();
  f.se = (s2 * cov.diagonal()).cwiseSqrt();
  return f;
}

/// Regression of dx_t on deterministic terms, x_{t-1} and `lags` lagged differences, using
/// observations t = first..n-1 of the level series (first >= lags + 1).
inline OlsFit adf_regression(std::span<const double> x, AdfSpec spec, int lags, std::size_t first) {
  const std::size_t n = x.size();
  const auto rows = static_cast<Eigen::Index>(n - first);
  const int det = spec == AdfSpec::none ? 0 : spec == AdfSpec::constant_no_trend ? 1 : 2;
  Eigen::MatrixXd X(rows, 1 + det + lags);
  Eigen::VectorXd y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::size_t t = first + static_cast<std::size_t>(r);
    y(r) = x[t] - x[t - 1];
    X(r, 0) = x[t - 1];
    if (det >= 1) X(r, 1) = 1.0;
    if (det >= 2) X(r, 2) = static_cast<double>(t);
    for (int j = 1; j <= lags; ++j) X(r, det + j) = x[t - j] - x[t - j - 1];
  }
  return ols(X, y);
}

}  // namespace detail

/// MacKinnon approximate p-value of an ADF t-statistic.
inline double mackinnon_pvalue(double stat, AdfSpec spec) {
  const auto& c = detail::kMacKinnon[static_cast<std::size_t>(spec)];
  if (stat > c.tau_max) return 1.0;
  if (stat < c.tau_min) return 0.0;
  double z = 0.0;
  if (stat <= c.tau_star) {
    for (std::size_t i = c.small_p.size(); i-- > 0;) z = z * stat + c.small_p[i];
  } else {
    for (std::size_t i = c.large_p.size(); i-- > 0;) z = z * stat + c.large_p[i];
  }
  return dist::normal_cdf(z);
}

/// Schwert upper bound used for automatic lag selection: floor(12 (T/100)^(1/4)).
inline int schwert_max_lag(std::size_t n) {
  return static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

/// Augmented Dickey-Fuller test. `lags` empty selects the order by AIC over 0..schwert_max_lag on a
/// common sample, then re-estimates on all usable observations.
inline AdfResult adf_test(std::span<const double> x, AdfSpec spec, std::optional<int> lags = std::nullopt) {
  const std::size_t n = x.size();
  if (lags && *lags < 0) throw std::invalid_argument("adf_test: lags must be >= 0");
  int p = 0;
  if (lags) {
    p = *lags;
    if (n < static_cast<std::size_t>(p) + 10) throw std::invalid_argument("adf_test: too few observations");
  } else {
    if (n < 10) throw std::invalid_argument("adf_test: too few observations");
    int max_lag = std::min(schwert_max_lag(n), static_cast<int>(n) - 10);
    max_lag = std::max(max_lag, 0);
    const std::size_t first = static_cast<std::size_t>(max_lag) + 1;
    const double m = static_cast<double>(n - first);
    double best = std::numeric_limits<double>::infinity();
    for (int q = 0; q <= max_lag; ++q) {
      auto fit = detail::adf_regression(x, spec, q, first);
      const double k = static_cast<double>(fit.beta.size());
      const double aic = m * std::log(fit.rss / m) + 2.0 * k;
      if (aic < best - 1e-12) {
        best = aic;
        p = q;
      }
    }
  }
  auto fit = detail::adf_regression(x, spec, p, static_cast<std::size_t>(p) + 1);
  AdfResult r;
  r.rho = fit.beta(0);
  r.rho_se = fit.se(0);
  r.adf_stat = r.rho / r.rho_se;
  r.rho_pvalue = 2.0 * dist::normal_cdf(-std::fabs(r.adf_stat));
  r.p_value = mackinnon_pvalue(r.adf_stat, spec);
  r.lags = p;
  r.spec = spec;
  r.n_obs = static_cast<int>(n) - p - 1;
  return r;
}

inline AdfResult adf_test(const TimeSeries& x, AdfSpec spec, std::optional<int> lags = std::nullopt) {
  return adf_test(x.values(), spec, lags);
}

}  // namespace inflab
