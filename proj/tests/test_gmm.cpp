#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "inflab/gmm.hpp"
#include "inflab/synth.hpp"

using namespace inflab;
using namespace inflab::gmm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SynthConfig config(int T, std::uint64_t seed) {
  SynthConfig c;
  c.T = T;
  c.seed = seed;
  return c;
}

MacroDataset noiseless(int T, std::uint64_t seed) {
  auto c = config(T, seed);
  c.sigma_i = 0.0;
  c.sigma_R = 0.0;
  return generate(c).data;
}

// Five-point central stencil on the mean moments, coded independently of moment_jacobian.
Eigen::MatrixXd stencil_jacobian(const MomentSystem& sys, const MacroDataset& data, const Theta& th) {
  Eigen::MatrixXd G(static_cast<Eigen::Index>(sys.size()), 7);
  auto mean_at = [&](const Theta& t) {
    Eigen::MatrixXd m = build_moment_matrix(sys, ModelParams::from_free(t, 0.03), data);
    return Eigen::VectorXd(m.colwise().mean());
  };
  for (std::size_t k = 0; k < 7; ++k) {
    const double h = 1e-4 * std::fabs(th[k]);
    auto shifted = [&](double s) {
      Theta t = th;
      t[k] += s * h;
      return mean_at(t);
    };
    G.col(static_cast<Eigen::Index>(k)) = (-shifted(2) + 8.0 * shifted(1) - 8.0 * shifted(-1) + shifted(-2)) / (12.0 * h);
  }
  return G;
}

}  // namespace

TEST_CASE("default moment system") {
  auto sys = default_moment_system();
  CHECK(sys.size() == 23);
  CHECK(sys.dof() == 16);
  for (const auto& c : sys.conditions()) {
    const auto& z = c.instrument;
    CHECK(c.residual != Residual::expectations);
    if (z.kind == Instrument::Kind::observable) CHECK(z.lag >= 1);
  }
  auto c = sys.conditions();
  c.resize(c.size() - 17);
  CHECK_THROWS_AS(MomentSystem(c), std::invalid_argument);
  c.push_back(c.front());
  CHECK(MomentSystem(c).dof() == 0);
}

TEST_CASE("moment system parser") {
  CHECK(parse_moment_system("default23").describe() == default_moment_system().describe());
  auto sys = parse_moment_system(" e1*1, e3*pi(-1), e1*e3, e4*e4(-1), e4*gap(-2), e3*de(-1), e4*i(-1) ");
  REQUIRE(sys.size() == 7);
  CHECK(sys.describe() == "e1*1, e3*pi(-1), e1*e3, e4*e4(-1), e4*gap(-2), e3*de(-1), e4*i(-1)");
  CHECK(sys.first_row() == 2);
  CHECK_THROWS(parse_moment_system("e1*1, e3*1, e4*1, e1*pi(-1), e3*pi(-1), e4*pi(-1)"));
  CHECK_THROWS(parse_moment_system("e1*1, e3*1, e4*1, e1*pi, e3*pi(-1), e4*pi(-1), e4*gap(-1)"));
  CHECK_THROWS(parse_moment_system("e1*1, e3*1, e4*1, e9*pi(-1), e3*pi(-1), e4*pi(-1), e4*gap(-1)"));
  CHECK_THROWS(parse_moment_system("e1*1, e3*1, e4*1, e1 pi(-1), e3*pi(-1), e4*pi(-1), e4*gap(-1)"));
  CHECK_THROWS(parse_moment_system("e1*1, e3*1, e4*1, e1*1(-1), e3*pi(-1), e4*pi(-1), e4*gap(-1)"));
}

TEST_CASE("residuals at the true parameters") {
  const auto p = ModelParams::reference_hp_gap();
  const auto data = noiseless(300, 3);
  for (YearMonth t = data.start() + 1; t <= data.end(); t = t + 1) {
    auto e = residuals(p, data, t);
    CHECK(std::fabs(e[0]) < 1e-10);
    CHECK(e[1] == 0.0);
    CHECK(std::fabs(e[2]) < 1e-10);
    CHECK_THAT(e[4], WithinAbs(-(e[3] + p.v * p.b * e[2]), 1e-12));
  }
  CHECK_THROWS_AS(residuals(p, data, data.start()), std::out_of_range);
  CHECK_THROWS_AS(residuals(p, data, data.end() + 1), std::out_of_range);

  SECTION("the composite residual with the observed real rate") {
    const auto noisy = generate(config(200, 4)).data;
    for (YearMonth t = noisy.start() + 1; t <= noisy.end(); t = t + 7) {
      auto e = residuals(p, noisy, t, RealRateSource::observed);
      CHECK_THAT(e[4], WithinAbs(-(e[3] + p.v * p.b * (e[2] + e[0])), 1e-12));
    }
  }
}

TEST_CASE("moment matrix construction") {
  const auto p = ModelParams::reference_hp_gap();
  const auto data = generate(config(150, 8)).data;
  auto sys = parse_moment_system("e1*1, e3*1, e4*1, e2*pi(-1), e2*1, e1*pi(-1), e4*e3");
  Eigen::MatrixXd m = build_moment_matrix(sys, p, data);
  REQUIRE(m.rows() == 149);
  REQUIRE(m.cols() == 7);
  CHECK(m.col(3).isZero(0.0));
  CHECK(m.col(4).isZero(0.0));
  for (Eigen::Index row = 0; row < m.rows(); ++row) {
    const YearMonth t = data.start() + 1 + static_cast<int>(row);
    auto e = residuals(p, data, t);
    CHECK(m(row, 0) == e[0]);
    CHECK(m(row, 1) == e[2]);
    CHECK(m(row, 2) == e[3]);
    CHECK_THAT(m(row, 5), WithinAbs(e[0] * data.inflation().at(t - 1), 1e-18));
    CHECK_THAT(m(row, 6), WithinAbs(e[3] * e[2], 1e-18));
  }
  CHECK(build_moment_matrix(default_moment_system(), p, data).cols() == 23);
}

TEST_CASE("sample moments vanish at the true parameters in large samples") {
  const auto p = ModelParams::reference_hp_gap();
  const auto data = generate(config(200000, 12)).data;
  Eigen::MatrixXd m = build_moment_matrix(default_moment_system(), p, data);
  const double T = static_cast<double>(m.rows());
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    const double mean = m.col(k).mean();
    const double sd = std::sqrt((m.col(k).array() - mean).square().sum() / (T - 1.0));
    CHECK(std::fabs(mean) < 0.01 * sd);
  }
}

TEST_CASE("perturbing v moves the moments away from zero") {
  const auto p = ModelParams::reference_hp_gap();
  const auto data = generate(config(600, 21)).data;
  auto sys = default_moment_system();
  MomentEvaluator ev(sys, data);
  auto truth = to_theta(p);
  const Eigen::MatrixXd W = hac_weight(ev.moments(truth));
  const double T = static_cast<double>(ev.rows());
  const double at_truth = T * objective(ev, truth, W);
  CHECK(at_truth < dist::chi2_quantile(0.999, 23));
  for (double f : {0.7, 1.3}) {
    auto th = truth;
    th[4] *= f;
    CHECK(T * objective(ev, th, W) > 10.0 * at_truth);
  }
}

TEST_CASE("HAC long-run covariance") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;

  SECTION("L = 0 gives the inverse of the second-moment matrix") {
    Eigen::MatrixXd m(400, 5);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = nd(rng) * (1.0 + j) + (j == 2 ? 0.3 * m(i, 0) : 0.0);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(5, 5);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index a = 0; a < 5; ++a)
        for (Eigen::Index b = 0; b < 5; ++b) S(a, b) += m(i, a) * m(i, b) / static_cast<double>(m.rows());
    Eigen::MatrixXd oracle = S.fullPivLu().inverse();
    Eigen::MatrixXd W = hac_weight(m, 0);
    CHECK((W - oracle).cwiseAbs().maxCoeff() < 1e-10 * oracle.cwiseAbs().maxCoeff());
    CHECK((long_run_covariance(m, 0) - S).cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("positive semidefinite for any input and bandwidth") {
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::Index T = 30 + static_cast<Eigen::Index>(rng() % 100), n = 1 + static_cast<Eigen::Index>(rng() % 8);
      Eigen::MatrixXd m(T, n);
      for (Eigen::Index i = 0; i < T; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = nd(rng) + (i > 0 ? 0.8 * m(i - 1, j) : 0.0);
      for (int L : {0, 1, 3, 12, 40}) {
        Eigen::MatrixXd S = long_run_covariance(m, L);
        CHECK((S - S.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().minCoeff() >= -1e-10);
      }
    }
  }

  SECTION("AR(1) long-run variance") {
    // m_t = rho m_{t-1} + u_t with unit innovations: long-run variance 1 / (1 - rho)^2
    const double rho = 0.2;
    Eigen::MatrixXd m(20000, 1);
    double prev = 0.0;
    for (int burn = 0; burn < 100; ++burn) prev = rho * prev + nd(rng);
    for (Eigen::Index t = 0; t < m.rows(); ++t) m(t, 0) = prev = rho * prev + nd(rng);
    CHECK_THAT(long_run_covariance(m)(0, 0), WithinRel(1.0 / ((1.0 - rho) * (1.0 - rho)), 0.05));
  }

  SECTION("automatic bandwidth and rank checks") {
    CHECK(auto_bandwidth(100) == 4);
    CHECK(auto_bandwidth(600) == 5);
    CHECK(auto_bandwidth(20000) == 12);
    Eigen::MatrixXd m(50, 4);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, 0) = nd(rng);
      m(i, 1) = m(i, 2) = m(i, 3) = 2.0 * m(i, 0);
    }
    CHECK_THROWS_AS(hac_weight(m, 0), std::domain_error);
    CHECK_THROWS_AS(hac_weight(m.topRows(4), 0), std::invalid_argument);
    CHECK_THROWS_AS(long_run_covariance(m, -1), std::invalid_argument);
  }
}

TEST_CASE("efficient-weighting J is invariant to instrument rescaling") {
  const auto p = ModelParams::reference_hp_gap();
  const auto data = generate(config(600, 5)).data;
  auto sys = default_moment_system();
  Theta th = to_theta(p);
  th[0] *= 1.05;
  th[4] *= 0.97;
  auto J = [&](const MomentSystem& s) {
    MomentEvaluator ev(s, data);
    return static_cast<double>(ev.rows()) * objective(ev, th, hac_weight(ev.moments(th)));
  };
  const double base = J(sys);
  for (std::size_t k : {0u, 4u, 13u, 20u, 22u})
    for (double f : {-3.0, 0.01, 250.0}) CHECK_THAT(J(sys.with_scaled_instrument(k, f)), WithinRel(base, 1e-8));
}

TEST_CASE("moment Jacobian agrees with an independent stencil") {
  const auto data = generate(config(400, 6)).data;
  auto sys = default_moment_system();
  MomentEvaluator ev(sys, data);
  Theta th = to_theta(ModelParams::reference_trend_gap());
  Eigen::MatrixXd G = moment_jacobian(ev, th);
  Eigen::MatrixXd oracle = stencil_jacobian(sys, data, th);
  for (Eigen::Index j = 0; j < G.cols(); ++j)
    for (Eigen::Index i = 0; i < G.rows(); ++i)
      CHECK_THAT(G(i, j), WithinAbs(oracle(i, j), 1e-5 * std::max(1e-3, oracle.col(j).cwiseAbs().maxCoeff())));
}

TEST_CASE("estimation on synthetic data") {
  const auto truth = ModelParams::reference_hp_gap();
  const auto data = generate(config(600, 17)).data;
  auto sys = default_moment_system();
  const auto start = ModelParams::from_free({0.6, 0.07, 1.2, 2.0, 0.45, 0.018, 1.5}, 0.03);
  auto res = estimate(sys, data, start);

  CHECK(res.n_conditions == 23);
  CHECK(res.dof == 16);
  CHECK(res.n_obs == 598);
  CHECK(res.J_stat >= 0.0);
  CHECK_THAT(res.J_stat, WithinRel(res.n_obs * res.objective_value, 1e-14));
  CHECK(res.weighting == Weighting::hac_second_step);
  auto th = res.theta_hat.free();
  for (std::size_t k = 0; k < 7; ++k) CHECK(res.t_values[k] == th[k] / res.std_errors[k]);

  MomentEvaluator ev(sys, data);
  CHECK(res.objective_value <= objective(ev, to_theta(truth), res.weight));
  auto tv = to_theta(truth);
  for (std::size_t k = 0; k < 7; ++k) CHECK(std::fabs(th[k] - tv[k]) < 4.0 * res.std_errors[k]);
}

TEST_CASE("exactly identified system fits the sample moments") {
  const auto data = generate(config(600, 9)).data;
  auto sys = parse_moment_system("e1*de(-1), e3*1, e3*gap(-1), e3*i(-1), e4*1, e4*gap(-1), e4*de(-1)");
  EstimateOptions o;
  o.steps = 1;
  auto res = estimate(sys, data, ModelParams::reference_hp_gap(), o);
  CHECK(res.dof == 0);
  CHECK(res.J_pvalue == 1.0);
  CHECK(res.J_stat < 1e-6);
}

TEST_CASE("estimate input checks") {
  const auto data = generate(config(60, 2)).data;
  EstimateOptions o;
  o.steps = 0;
  CHECK_THROWS(estimate(default_moment_system(), data, ModelParams::reference_hp_gap(), o));
  auto tiny = generate(config(50, 2)).data;
  std::vector<Condition> many(60, Condition{Residual::real_rate, Instrument::constant()});
  CHECK_THROWS(estimate(MomentSystem(many), tiny, ModelParams::reference_hp_gap()));
}
