#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "inflab/dataset.hpp"
#include "inflab/distributions.hpp"
#include "inflab/model.hpp"
#include "inflab/optimize.hpp"

namespace inflab::gmm {

inline constexpr std::size_t kParams = ModelParams::kFree;
using Theta = std::array<double, kParams>;

/// Residuals of the empirical system. `expectations` is identically zero because expected
/// inflation is constructed from its own equation; `gap_composite` equals
/// -(inflation_arf + v b (policy_rule + real_rate)) when shocks use the observed real rate and
/// -(inflation_arf + v b policy_rule) when they use the implied one.
enum class Residual { real_rate = 1, expectations = 2, policy_rule = 3, inflation_arf = 4, gap_composite = 5 };

enum class Observable { inflation, gap, nominal_rate, real_rate, exp_depreciation, target };

inline const char* short_name(Residual r) {
  switch (r) {
    case Residual::real_rate: return "e1";
    case Residual::expectations: return "e2";
    case Residual::policy_rule: return "e3";
    case Residual::inflation_arf: return "e4";
    case Residual::gap_composite: return "e5";
  }
  return "?";
}

inline const char* short_name(Observable o) {
  switch (o) {
    case Observable::inflation: return "pi";
    case Observable::gap: return "gap";
    case Observable::nominal_rate: return "i";
    case Observable::real_rate: return "R";
    case Observable::exp_depreciation: return "de";
    case Observable::target: return "pibar";
  }
  return "?";
}

/// Something a residual is multiplied by: the constant, a lagged observable, or another
/// residual (contemporaneous or lagged), the latter giving product moments.
struct Instrument {
  enum class Kind { constant, observable, residual };
  Kind kind = Kind::constant;
  Observable observable = Observable::inflation;
  Residual residual = Residual::real_rate;
  int lag = 0;
  double scale = 1.0;

  static Instrument constant() { return {}; }
  static Instrument lagged(Observable o, int lag = 1) { return {Kind::observable, o, Residual::real_rate, lag, 1.0}; }
  static Instrument product(Residual r, int lag = 0) { return {Kind::residual, Observable::inflation, r, lag, 1.0}; }

  [[nodiscard]] std::string label() const {
    std::string s;
    switch (kind) {
      case Kind::constant: return "1";
      case Kind::observable: s = short_name(observable); break;
      case Kind::residual: s = short_name(residual); break;
    }
    if (lag > 0) s += "(-" + std::to_string(lag) + ")";
    return s;
  }
};

struct Condition {
  Residual residual;
  Instrument instrument;

  [[nodiscard]] std::string label() const { return std::string(short_name(residual)) + "*" + instrument.label(); }
};

/// Orthogonality conditions E[residual_t * instrument_t] = 0.
class MomentSystem {
 public:
  explicit MomentSystem(std::vector<Condition> conditions,
                        RealRateSource shock_real_rate = RealRateSource::implied)
      : conditions_(std::move(conditions)), shock_real_rate_(shock_real_rate) {
    if (conditions_.size() < kParams)
      throw std::invalid_argument("moment system is underidentified: " + std::to_string(conditions_.size()) +
                                  " conditions for " + std::to_string(kParams) + " parameters");
    for (const auto& c : conditions_) {
      const auto& z = c.instrument;
      if (z.kind == Instrument::Kind::observable && z.lag < 1)
        throw std::invalid_argument("instrument " + z.label() + " is not predetermined (lag must be >= 1)");
      if (z.lag < 0) throw std::invalid_argument("negative instrument lag");
      if (z.scale == 0.0 || !std::isfinite(z.scale)) throw std::invalid_argument("instrument scale must be nonzero");
    }
  }

  [[nodiscard]] const std::vector<Condition>& conditions() const { return conditions_; }
  [[nodiscard]] std::size_t size() const { return conditions_.size(); }
  [[nodiscard]] int dof() const { return static_cast<int>(conditions_.size()) - static_cast<int>(kParams); }
  [[nodiscard]] RealRateSource shock_real_rate() const { return shock_real_rate_; }

  /// Index (0-based, into the dataset) of the first month for which every condition is defined.
  [[nodiscard]] std::size_t first_row() const {
    std::size_t first = 1;  // residuals need the previous month's inflation
    for (const auto& c : conditions_) {
      const auto& z = c.instrument;
      if (z.kind == Instrument::Kind::observable) first = std::max(first, static_cast<std::size_t>(z.lag));
      if (z.kind == Instrument::Kind::residual) first = std::max(first, 1 + static_cast<std::size_t>(z.lag));
    }
    return first;
  }

  /// Copy with one condition's instrument multiplied by k.
  [[nodiscard]] MomentSystem with_scaled_instrument(std::size_t condition, double k) const {
    auto c = conditions_;
    c.at(condition).instrument.scale *= k;
    return MomentSystem(std::move(c), shock_real_rate_);
  }

  [[nodiscard]] std::string describe() const {
    std::string s;
    for (std::size_t k = 0; k < conditions_.size(); ++k) s += (k ? ", " : "") + conditions_[k].label();
    return s;
  }

 private:
  std::vector<Condition> conditions_;
  RealRateSource shock_real_rate_;
};

/// Residuals e1, e3, e4 each paired with {1, pi(-1), de(-1), gap(-1), i(-1), R(-1)}, the three
/// contemporaneous products e1*e3, e1*e4, e3*e4 and the first-order own products e3*e3(-1),
/// e4*e4(-1): 18 + 3 + 2 = 23 conditions. e5 is left out because it is an exact linear
/// combination of e3 and e4.
inline MomentSystem default_moment_system() {
  std::vector<Condition> c;
  const Observable lagged[] = {Observable::inflation, Observable::exp_depreciation, Observable::gap,
                               Observable::nominal_rate, Observable::real_rate};
  for (Residual r : {Residual::real_rate, Residual::policy_rule, Residual::inflation_arf}) {
    c.push_back({r, Instrument::constant()});
    for (Observable o : lagged) c.push_back({r, Instrument::lagged(o, 1)});
  }
  c.push_back({Residual::real_rate, Instrument::product(Residual::policy_rule)});
  c.push_back({Residual::real_rate, Instrument::product(Residual::inflation_arf)});
  c.push_back({Residual::policy_rule, Instrument::product(Residual::inflation_arf)});
  c.push_back({Residual::policy_rule, Instrument::product(Residual::policy_rule, 1)});
  c.push_back({Residual::inflation_arf, Instrument::product(Residual::inflation_arf, 1)});
  return MomentSystem(std::move(c));
}

namespace detail {

inline Residual parse_residual(std::string_view s) {
  if (s == "e1") return Residual::real_rate;
  if (s == "e2") return Residual::expectations;
  if (s == "e3") return Residual::policy_rule;
  if (s == "e4") return Residual::inflation_arf;
  if (s == "e5") return Residual::gap_composite;
  throw std::invalid_argument("unknown residual '" + std::string(s) + "'");
}

inline std::optional<Observable> parse_observable(std::string_view s) {
  for (Observable o : {Observable::inflation, Observable::gap, Observable::nominal_rate, Observable::real_rate,
                       Observable::exp_depreciation, Observable::target})
    if (s == short_name(o)) return o;
  return std::nullopt;
}

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Parses `default23` or a comma-separated list such as `e1*1, e3*pi(-1), e1*e3, e4*e4(-1)`.
inline MomentSystem parse_moment_system(std::string_view text,
                                        RealRateSource shock_real_rate = RealRateSource::implied) {
  text = detail::strip(text);
  if (text == "default23") {
    auto d = default_moment_system();
    return MomentSystem(d.conditions(), shock_real_rate);
  }
  std::vector<Condition> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto next = text.find(',', pos);
    auto item = detail::strip(text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    pos = next == std::string_view::npos ? text.size() + 1 : next + 1;
    if (item.empty()) continue;
    auto star = item.find('*');
    if (star == std::string_view::npos) throw std::invalid_argument("condition '" + std::string(item) + "' lacks '*'");
    Residual res = detail::parse_residual(detail::strip(item.substr(0, star)));
    auto rhs = detail::strip(item.substr(star + 1));
    int lag = 0;
    if (auto p = rhs.find('('); p != std::string_view::npos) {
      auto close = rhs.find(')', p);
      if (close == std::string_view::npos || rhs.substr(p + 1, 1) != "-")
        throw std::invalid_argument("bad lag in '" + std::string(item) + "'");
      lag = std::stoi(std::string(rhs.substr(p + 2, close - p - 2)));
      rhs = detail::strip(rhs.substr(0, p));
    }
    Instrument z;
    if (rhs == "1") {
      if (lag != 0) throw std::invalid_argument("the constant takes no lag");
      z = Instrument::constant();
    } else if (auto o = detail::parse_observable(rhs)) {
      z = Instrument::lagged(*o, lag);
    } else {
      z = Instrument::product(detail::parse_residual(rhs), lag);
    }
    out.push_back({res, z});
  }
  return MomentSystem(std::move(out), shock_real_rate);
}

/// Dataset unpacked into decimal-unit arrays for repeated moment evaluation.
class MomentEvaluator {
 public:
  MomentEvaluator(MomentSystem sys, const MacroDataset& data) : sys_(std::move(sys)) {
    const MacroDataset d = data.in_units(RateUnits::decimal);
    n_ = d.size();
    first_ = sys_.first_row();
    if (n_ <= first_) throw std::invalid_argument("too few observations (" + std::to_string(n_) + ")");
    auto copy = [](const TimeSeries& s) { return std::vector<double>(s.values().begin(), s.values().end()); };
    cols_ = {copy(d.inflation()), copy(d.gap()), copy(d.nominal_rate()), copy(d.real_rate()),
             copy(d.exp_depreciation()), copy(d.target())};
    start_ = d.start();
    pi_bar_mean_ = 0.0;
    for (double v : cols_[5]) pi_bar_mean_ += v;
    pi_bar_mean_ /= static_cast<double>(n_);
  }

  [[nodiscard]] const MomentSystem& system() const { return sys_; }
  [[nodiscard]] std::size_t rows() const { return n_ - first_; }
  [[nodiscard]] std::size_t first_row() const { return first_; }
  [[nodiscard]] YearMonth start() const { return start_; }
  [[nodiscard]] double mean_target() const { return pi_bar_mean_; }

  [[nodiscard]] const std::vector<double>& column(Observable o) const { return cols_[static_cast<std::size_t>(o)]; }

  /// All five residuals at dataset index t >= 1.
  [[nodiscard]] std::array<double, 5> residuals_at(const Theta& th, std::size_t t) const {
    const auto& pi = cols_[0];
    const auto& y = cols_[1];
    const auto& i = cols_[2];
    const auto& R = cols_[3];
    const auto& de = cols_[4];
    const auto& tg = cols_[5];
    const double b = th[0], g = th[1], c1 = th[2], c2 = th[3], v = th[4], r = th[5], phi = th[6];
    const double pe = g * de[t] + (1.0 - g) * pi[t - 1];
    const double o = pi[t] - pe - v * y[t];
    const double Rs = sys_.shock_real_rate() == RealRateSource::observed ? R[t] : i[t] - pe;
    const double a = y[t] + b * (Rs - r) - o;
    const double vb = v * b;
    const double on_lag = (1.0 + vb) * (1.0 - g) - vb * c1, on_dep = (1.0 + vb) * g, on_tgt = (c1 - 1.0) * vb;
    return {R[t] - (i[t] - pe),
            0.0,
            i[t] - r - tg[t] - c1 * (pi[t - 1] - tg[t]) - c2 * a,
            pi[t] - (on_lag * pi[t - 1] + on_dep * de[t] + on_tgt * tg[t] + phi * y[t]),
            phi * y[t] - (v * (1.0 - b * c2) * a + (1.0 + v) * o)};
  }

  /// T x n matrix of residual * instrument products, one row per usable month.
  [[nodiscard]] Eigen::MatrixXd moments(const Theta& th) const {
    if (rows() <= sys_.size())
      throw std::invalid_argument("too few observations (" + std::to_string(rows()) + " usable) for " +
                                  std::to_string(sys_.size()) + " conditions");
    // residual table for every month t >= 1
    std::vector<std::array<double, 5>> res(n_);
    for (std::size_t t = 1; t < n_; ++t) res[t] = residuals_at(th, t);
    const auto T = static_cast<Eigen::Index>(rows());
    const auto& conds = sys_.conditions();
    Eigen::MatrixXd m(T, static_cast<Eigen::Index>(conds.size()));
    for (std::size_t k = 0; k < conds.size(); ++k) {
      const auto& c = conds[k];
      const auto j = static_cast<std::size_t>(c.residual) - 1;
      const auto& z = c.instrument;
      for (Eigen::Index row = 0; row < T; ++row) {
        const std::size_t t = first_ + static_cast<std::size_t>(row);
        double zv = 1.0;
        switch (z.kind) {
          case Instrument::Kind::constant: break;
          case Instrument::Kind::observable: zv = cols_[static_cast<std::size_t>(z.observable)][t - z.lag]; break;
          case Instrument::Kind::residual:
            zv = res[t - static_cast<std::size_t>(z.lag)][static_cast<std::size_t>(z.residual) - 1];
            break;
        }
        m(row, static_cast<Eigen::Index>(k)) = res[t][j] * zv * z.scale;
      }
    }
    return m;
  }

  [[nodiscard]] Eigen::VectorXd mean_moments(const Theta& th) const { return moments(th).colwise().mean(); }

  /// Diagonal first-step weighting: 1 / mean(z^2) for observable instruments, 1 otherwise, so the
  /// first step does not depend on the units of the instruments.
  [[nodiscard]] Eigen::MatrixXd first_step_weighting() const {
    const auto& conds = sys_.conditions();
    Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(conds.size()));
    for (std::size_t k = 0; k < conds.size(); ++k) {
      const auto& z = conds[k].instrument;
      if (z.kind == Instrument::Kind::observable) {
        const auto& col = cols_[static_cast<std::size_t>(z.observable)];
        double ss = 0.0;
        for (std::size_t t = first_; t < n_; ++t) {
          const double v = col[t - z.lag] * z.scale;
          ss += v * v;
        }
        ss /= static_cast<double>(rows());
        if (ss > 0.0) w(static_cast<Eigen::Index>(k)) = 1.0 / ss;
      } else {
        w(static_cast<Eigen::Index>(k)) = 1.0 / (z.scale * z.scale);
      }
    }
    return w.asDiagonal();
  }

 private:
  MomentSystem sys_;
  std::size_t n_ = 0, first_ = 0;
  std::array<std::vector<double>, 6> cols_;
  YearMonth start_;
  double pi_bar_mean_ = 0.0;
};

inline Theta to_theta(const ModelParams& p) { return p.free(); }

/// The five residuals at month t (dataset in any units; evaluated in decimals).
inline std::array<double, 5> residuals(const ModelParams& theta, const MacroDataset& data, YearMonth t,
                                       RealRateSource shock_real_rate = RealRateSource::implied) {
  const long off = t - data.start();
  if (off < 1 || off >= static_cast<long>(data.size()))
    throw std::out_of_range("residuals: month " + t.str() + " has no predecessor in the dataset");
  // a single constant condition is enough to unpack the data
  std::vector<Condition> c(kParams, Condition{Residual::real_rate, Instrument::constant()});
  MomentEvaluator ev(MomentSystem(std::move(c), shock_real_rate), data);
  return ev.residuals_at(to_theta(theta), static_cast<std::size_t>(off));
}

inline Eigen::MatrixXd build_moment_matrix(const MomentSystem& sys, const ModelParams& theta,
                                           const MacroDataset& data) {
  return MomentEvaluator(sys, data).moments(to_theta(theta));
}

/// Newey-West automatic bandwidth floor(4 (T/100)^(2/9)).
inline int auto_bandwidth(std::size_t T) {
  return static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(T) / 100.0, 2.0 / 9.0)));
}

/// Bartlett-kernel long-run covariance S = G0 + sum_l (1 - l/(L+1)) (G_l + G_l'), with
/// G_l = (1/T) sum_t m_t m_{t-l}' (uncentered).
inline Eigen::MatrixXd long_run_covariance(const Eigen::MatrixXd& m, std::optional<int> bandwidth = std::nullopt) {
  const auto T = m.rows();
  const int L = bandwidth ? *bandwidth : auto_bandwidth(static_cast<std::size_t>(T));
  if (L < 0) throw std::invalid_argument("bandwidth must be >= 0");
  Eigen::MatrixXd S = (m.transpose() * m) / static_cast<double>(T);
  for (int l = 1; l <= L && l < T; ++l) {
    const double w = 1.0 - static_cast<double>(l) / (L + 1.0);
    Eigen::MatrixXd G = (m.bottomRows(T - l).transpose() * m.topRows(T - l)) / static_cast<double>(T);
    S += w * (G + G.transpose());
  }
  return 0.5 * (S + S.transpose());
}

struct PseudoInverse {
  Eigen::MatrixXd inverse;
  int rank;
};

/// Moore-Penrose inverse of a symmetric positive semidefinite matrix.
inline PseudoInverse psd_pseudo_inverse(const Eigen::MatrixXd& S, double rel_tol = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double cut = rel_tol * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  int rank = 0;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev(k) > cut) {
      inv(k) = 1.0 / ev(k);
      ++rank;
    }
  }
  Eigen::MatrixXd P = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  return {0.5 * (P + P.transpose()), rank};
}

/// Efficient weighting matrix: inverse (or pseudo-inverse) of the HAC long-run covariance.
/// S is scaled to unit diagonal before inversion, so rescaling a moment column rescales the
/// weighting exactly inversely.
inline Eigen::MatrixXd hac_weight(const Eigen::MatrixXd& moments, std::optional<int> bandwidth = std::nullopt) {
  const auto n = moments.cols();
  if (moments.rows() <= n) throw std::invalid_argument("hac_weight needs more rows than moment conditions");
  const Eigen::MatrixXd S = long_run_covariance(moments, bandwidth);
  Eigen::VectorXd d(n);
  for (Eigen::Index k = 0; k < n; ++k) d(k) = S(k, k) > 0.0 ? 1.0 / std::sqrt(S(k, k)) : 1.0;
  auto pinv = psd_pseudo_inverse(d.asDiagonal() * S * d.asDiagonal());
  if (pinv.rank < n - 2)
    throw std::domain_error("moment covariance is ill-conditioned: rank " + std::to_string(pinv.rank) + " of " +
                            std::to_string(n));
  return d.asDiagonal() * pinv.inverse * d.asDiagonal();
}

/// Parameter box: b, c1, c2, v, phi in (0, 10]; gamma in (0.001, 0.999); r in (-0.05, 0.10).
inline std::vector<opt::Bound> default_bounds() {
  return {{0.0, 10.0}, {0.001, 0.999}, {0.0, 10.0}, {0.0, 10.0}, {0.0, 10.0}, {-0.05, 0.10}, {0.0, 10.0}};
}

enum class Weighting { identity_first_step, hac_second_step };

struct EstimateOptions {
  int steps = 3;                       // 1: first step only; 2: two-step; more: iterated weighting
  int starts = 4;                      // start points per step: the previous solution plus perturbed theta0
  double start_spread = 0.3;           // relative size of the start perturbations
  std::optional<int> bandwidth;        // HAC lags; automatic when empty
  std::vector<opt::Bound> bounds = default_bounds();
  opt::Options optimizer{};
  double jacobian_relative_step = 1e-6;
};

struct GmmResult {
  explicit GmmResult(const ModelParams& theta) : theta_hat(theta) {}

  ModelParams theta_hat;
  std::array<double, kParams> std_errors{};
  std::array<double, kParams> t_values{};
  double J_stat = 0.0;
  int dof = 0;
  double J_pvalue = 1.0;
  Weighting weighting = Weighting::identity_first_step;
  int n_conditions = 0;
  int n_obs = 0;
  bool converged = false;
  double objective_value = 0.0;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd weight;
  std::vector<std::string> warnings;
};

/// Central-difference Jacobian of the mean moment vector, step h_k = rel * max(|theta_k|, 1e-3).
inline Eigen::MatrixXd moment_jacobian(const MomentEvaluator& ev, const Theta& th, double rel = 1e-6) {
  Eigen::MatrixXd G(static_cast<Eigen::Index>(ev.system().size()), static_cast<Eigen::Index>(kParams));
  for (std::size_t k = 0; k < kParams; ++k) {
    const double h = rel * std::max(std::fabs(th[k]), 1e-3);
    Theta up = th, dn = th;
    up[k] += h;
    dn[k] -= h;
    G.col(static_cast<Eigen::Index>(k)) = (ev.mean_moments(up) - ev.mean_moments(dn)) / (2.0 * h);
  }
  return G;
}

namespace detail {

inline Theta to_array(const Eigen::VectorXd& x) {
  Theta t{};
  for (std::size_t k = 0; k < kParams; ++k) t[k] = x(static_cast<Eigen::Index>(k));
  return t;
}

/// Moves a point that rounded onto a box edge back into the open box.
inline Eigen::VectorXd inside(Eigen::VectorXd x, const std::vector<opt::Bound>& bounds) {
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const auto& b = bounds[static_cast<std::size_t>(k)];
    const double pad = 1e-9 * (std::isfinite(b.hi - b.lo) ? b.hi - b.lo : 1.0);
    if (std::isfinite(b.lo)) x(k) = std::max(x(k), b.lo + pad);
    if (std::isfinite(b.hi)) x(k) = std::min(x(k), b.hi - pad);
  }
  return x;
}

/// Start number s >= 1: each coordinate scaled by 1 +- spread, signs from the bits of s
/// (Gray-coded so consecutive starts differ in one coordinate only).
inline Eigen::VectorXd perturbed_start(const Eigen::VectorXd& x0, int s, double spread) {
  Eigen::VectorXd x = x0;
  const unsigned code = static_cast<unsigned>(s) ^ (static_cast<unsigned>(s) >> 1);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const bool up = ((code >> (k % 8)) & 1u) != 0;
    x(k) *= (k % 2 == 0) == up ? 1.0 + spread : 1.0 - spread;
  }
  return x;
}

inline Eigen::VectorXd to_vector(const Theta& t) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(kParams));
  for (std::size_t k = 0; k < kParams; ++k) x(static_cast<Eigen::Index>(k)) = t[k];
  return x;
}

}  // namespace detail

/// Quadratic-form objective g_T(theta)' W g_T(theta).
inline double objective(const MomentEvaluator& ev, const Theta& th, const Eigen::MatrixXd& W) {
  const Eigen::VectorXd g = ev.mean_moments(th);
  return g.dot(W * g);
}

/// Multi-step GMM. Step 1 uses the unit-free diagonal weighting, each later step the HAC
/// weighting evaluated at the previous step's estimate. J, standard errors and t-values refer
/// to the last step.
inline GmmResult estimate(const MomentSystem& sys, const MacroDataset& data, const ModelParams& theta0,
                          const EstimateOptions& options = {}) {
  if (options.steps < 1) throw std::invalid_argument("estimate: steps must be >= 1");
  MomentEvaluator ev(sys, data);
  const auto T = static_cast<double>(ev.rows());
  const double pi_bar = ev.mean_target();

  Eigen::MatrixXd W = ev.first_step_weighting();
  const Eigen::VectorXd x0 = detail::inside(detail::to_vector(to_theta(theta0)), options.bounds);
  Eigen::VectorXd x = x0;
  opt::Result res;
  GmmResult out(theta0);
  bool all_converged = true;
  for (int step = 1; step <= options.steps; ++step) {
    if (step > 1) {
      W = hac_weight(ev.moments(detail::to_array(x)), options.bandwidth);
      x = detail::inside(x, options.bounds);
    }
    // minimized on the J scale so that optimizer tolerances do not depend on the data units
    auto f = [&](const Eigen::VectorXd& u) { return T * objective(ev, detail::to_array(u), W); };
    res = opt::minimize(f, x, options.bounds, options.optimizer);
    for (int s = 1; s < options.starts; ++s) {
      Eigen::VectorXd alt = detail::inside(detail::perturbed_start(x0, s, options.start_spread), options.bounds);
      if (!std::isfinite(f(alt))) continue;
      auto r = opt::minimize(f, alt, options.bounds, options.optimizer);
      if (r.value < res.value) res = r;
    }
    all_converged = all_converged && res.converged;
    x = res.x;
  }
  const Theta th = detail::to_array(x);
  out.theta_hat = ModelParams::from_free(th, pi_bar);
  out.objective_value = objective(ev, th, W);
  out.J_stat = T * out.objective_value;
  out.n_conditions = static_cast<int>(sys.size());
  out.n_obs = static_cast<int>(ev.rows());
  out.dof = sys.dof();
  out.J_pvalue = out.dof > 0 ? dist::chi2_sf(out.J_stat, out.dof) : 1.0;
  out.weighting = options.steps > 1 ? Weighting::hac_second_step : Weighting::identity_first_step;
  out.converged = all_converged;
  out.weight = W;

  const Eigen::MatrixXd G = moment_jacobian(ev, th, options.jacobian_relative_step);
  const Eigen::MatrixXd info = G.transpose() * W * G;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  const double emax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(es.eigenvalues()(0) > 1e-12 * emax)) {
    std::ostringstream msg;
    msg << "G'WG is singular; weakly identified direction:";
    for (std::size_t k = 0; k < kParams; ++k)
      msg << ' ' << ModelParams::kNames[k] << '=' << es.eigenvectors()(static_cast<Eigen::Index>(k), 0);
    out.warnings.push_back(msg.str());
    out.covariance = psd_pseudo_inverse(info).inverse / T;
  } else {
    out.covariance = info.inverse() / T;
  }
  for (std::size_t k = 0; k < kParams; ++k) {
    out.std_errors[k] = std::sqrt(std::max(0.0, out.covariance(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))));
    out.t_values[k] = th[k] / out.std_errors[k];
  }
  if (!out.converged) out.warnings.push_back("optimizer did not report convergence");
  return out;
}

}  // namespace inflab::gmm
