#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "inflab/detrend.hpp"

using namespace inflab;
using Catch::Matchers::WithinAbs;

namespace {

// Dense oracle: (I + lambda D'D) tau = x with D built explicitly.
std::vector<double> hp_dense(const std::vector<double>& x, double lambda) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n - 2, n);
  for (Eigen::Index i = 0; i < n - 2; ++i) {
    D(i, i) = 1.0;
    D(i, i + 1) = -2.0;
    D(i, i + 2) = 1.0;
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) + lambda * D.transpose() * D;
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  Eigen::VectorXd tau = A.fullPivLu().solve(b);
  return {tau.data(), tau.data() + n};
}

TimeSeries series(std::vector<double> v) { return {YearMonth(2000, 1), std::move(v), "x"}; }

}  // namespace

TEST_CASE("hp_filter matches a dense solve") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 5 + rng() % 196;
    std::vector<double> x(n);
    double level = 0.0;
    for (auto& v : x) v = (level += nd(rng));
    for (double lambda : {1.0, 1600.0, kMonthlyHpLambda}) {
      auto est = hp_filter(series(x), lambda);
      auto oracle = hp_dense(x, lambda);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK_THAT(est.trend[i], WithinAbs(oracle[i], 1e-8 * (1.0 + std::fabs(oracle[i]))));
        CHECK(est.trend[i] + est.gap[i] == Catch::Approx(x[i]).margin(1e-12));
      }
    }
  }
}

TEST_CASE("hp_filter passes linear signals to the trend") {
  std::vector<double> x(60);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = 2.0 - 0.3 * static_cast<double>(t);
  for (double lambda : {1e-8, 1.0, kMonthlyHpLambda, 1e7}) {
    auto est = hp_filter(series(x), lambda);
    for (double g : est.gap.values()) CHECK_THAT(g, WithinAbs(0.0, 1e-10));
  }
  SECTION("adding a line shifts the trend by the same line") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    std::vector<double> y(80), z(80);
    for (std::size_t t = 0; t < y.size(); ++t) {
      y[t] = nd(rng);
      z[t] = y[t] + 1.5 + 0.25 * static_cast<double>(t);
    }
    auto a = hp_filter(series(y), kMonthlyHpLambda), b = hp_filter(series(z), kMonthlyHpLambda);
    for (std::size_t t = 0; t < y.size(); ++t) {
      CHECK_THAT(b.trend[t] - a.trend[t], WithinAbs(1.5 + 0.25 * static_cast<double>(t), 1e-8));
    }
  }
  SECTION("a vanishing penalty returns the input") {
    std::vector<double> y = {1.0, 4.0, -2.0, 3.0, 0.5, 7.0};
    auto est = hp_filter(series(y), 1e-8);
    for (std::size_t t = 0; t < y.size(); ++t) CHECK_THAT(est.trend[t], WithinAbs(y[t], 1e-6));
  }
  CHECK_THROWS(hp_filter(series({1, 2, 3, 4}), 10.0));
  CHECK_THROWS(hp_filter(series({1, 2, 3, 4, 5}), 0.0));
}

TEST_CASE("fit_trend") {
  SECTION("exact line") {
    std::vector<double> x(30);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = 3.0 + 0.2 * static_cast<double>(t);
    auto fit = fit_trend(series(x), 1);
    for (double g : fit.gap.values()) CHECK_THAT(g, WithinAbs(0.0, 1e-10));
  }
  SECTION("residuals of a quadratic are orthogonal to the regressors") {
    std::vector<double> x(50);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = static_cast<double>(t * t);
    auto fit = fit_trend(series(x), 1);
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      s0 += fit.gap[t];
      s1 += static_cast<double>(t) * fit.gap[t];
    }
    CHECK(std::fabs(s0) < 1e-8);
    CHECK(std::fabs(s1) < 1e-8 * 50 * 50 * 50);
  }
  SECTION("noisy line matches the closed-form simple regression") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    const std::size_t n = 120;
    std::vector<double> x(n);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const double tt = static_cast<double>(t);
      x[t] = 10.0 + 0.05 * tt + nd(rng);
      sx += tt;
      sy += x[t];
      sxx += tt * tt;
      sxy += tt * x[t];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icept = (sy - slope * sx) / n;
    auto fit = fit_trend(series(x), 1);
    CHECK_THAT(fit.coefficients[0], WithinAbs(icept, 1e-10));
    CHECK_THAT(fit.coefficients[1], WithinAbs(slope, 1e-12));
  }
  SECTION("degree two residuals are orthogonal to t squared") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    std::vector<double> x(40);
    for (auto& v : x) v = nd(rng);
    auto fit = fit_trend(series(x), 2);
    double s2 = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) s2 += static_cast<double>(t * t) * fit.gap[t];
    CHECK(std::fabs(s2) < 1e-8);
  }
  CHECK_THROWS(fit_trend(series({1, 2, 3}), 3));
  CHECK_THROWS(fit_trend(series({1, 2}), 1));
}

TEST_CASE("gap_log_diff") {
  std::vector<double> growth(100), flat(100, 250.0);
  for (std::size_t t = 0; t < growth.size(); ++t) growth[t] = std::exp(4.0 + 0.003 * static_cast<double>(t));
  for (double g : gap_log_diff(series(growth)).values()) CHECK_THAT(g, WithinAbs(0.0, 1e-10));
  for (double g : gap_log_diff(series(flat)).values()) CHECK_THAT(g, WithinAbs(0.0, 1e-10));

  SECTION("recovers an injected cycle") {
    const std::size_t n = 300;
    std::vector<double> ise(n), cycle(n);
    for (std::size_t t = 0; t < n; ++t) {
      cycle[t] = 0.02 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 24.0);
      ise[t] = std::exp(4.6 + 0.002 * static_cast<double>(t) + cycle[t]);
    }
    auto gap = gap_log_diff(series(ise), kMonthlyHpLambda);
    double mg = 0, mc = 0;
    for (std::size_t t = 0; t < n; ++t) {
      mg += gap[t] / n;
      mc += cycle[t] / n;
    }
    double sgc = 0, sgg = 0, scc = 0;
    for (std::size_t t = 0; t < n; ++t) {
      sgc += (gap[t] - mg) * (cycle[t] - mc);
      sgg += (gap[t] - mg) * (gap[t] - mg);
      scc += (cycle[t] - mc) * (cycle[t] - mc);
    }
    CHECK(sgc / std::sqrt(sgg * scc) > 0.99);
  }
  CHECK_THROWS(gap_log_diff(series({1, 2, 0, 4, 5})));
}

TEST_CASE("gap_pct_dev") {
  std::vector<double> line(20), scaled(20);
  for (std::size_t t = 0; t < line.size(); ++t) {
    line[t] = 100.0 + 2.0 * static_cast<double>(t);
    scaled[t] = 1.02 * line[t];
  }
  for (double g : gap_pct_dev(series(line)).values()) CHECK_THAT(g, WithinAbs(0.0, 1e-12));

  SECTION("proportional scaling of a line is absorbed by the trend") {
    // a line scaled by 1.02 is still a line, so the deviation from its own fit is zero
    for (double g : gap_pct_dev(series(scaled)).values()) CHECK_THAT(g, WithinAbs(0.0, 1e-12));
  }
  SECTION("deviation is measured relative to the fitted trend") {
    std::vector<double> x = {100.0, 103.0, 101.5, 108.0, 104.0, 110.5, 109.0};
    auto fit = fit_trend(series(x), 1);
    auto g = gap_pct_dev(series(x));
    for (std::size_t t = 0; t < x.size(); ++t)
      CHECK_THAT(g[t], WithinAbs((x[t] - fit.trend[t]) / fit.trend[t], 1e-14));
  }
  SECTION("hand-built five-point series") {
    // x = 10, 12, 11, 15, 14 on t = 0..4: slope 11/10, intercept 12.4 - 2 * 1.1
    auto g = gap_pct_dev(series({10, 12, 11, 15, 14}));
    const double trend[] = {10.2, 11.3, 12.4, 13.5, 14.6};
    const double x[] = {10, 12, 11, 15, 14};
    for (std::size_t t = 0; t < 5; ++t) CHECK_THAT(g[t], WithinAbs((x[t] - trend[t]) / trend[t], 1e-12));
  }
  SECTION("zero trend value is rejected") { CHECK_THROWS_AS(gap_pct_dev(series({-2, -1, 0, 1, 2})), std::domain_error); }
}
