#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "inflab/dataset.hpp"
#include "inflab/series.hpp"

namespace inflab {

/// Structural parameters of the five-equation inflation-targeting model plus the (constant)
/// inflation target. Rates are decimal fractions per year.
///
///   gap_t      = a_t + o_t - b (R_t - r)                         demand
///   R_t        = i_t - pi^e_t                                    real rate
///   pi^e_t     = gamma d^e_t + (1 - gamma) pi_{t-1}              expectations
///   i_t        = r + pi_bar + c1 (pi_{t-1} - pi_bar) + c2 a_t     policy rule
///   pi_t       = pi^e_t + v gap_t + o_t                          Phillips curve
///
/// phi is the gap coefficient of the approximate reduced form.
struct ModelParams {
  static constexpr std::size_t kFree = 7;
  static constexpr std::array<const char*, kFree> kNames = {"b", "gamma", "c1", "c2", "v", "r", "phi"};

  double b, gamma, c1, c2, v, r, phi, pi_bar;

  ModelParams(double b_, double gamma_, double c1_, double c2_, double v_, double r_, double phi_, double pi_bar_)
      : b(b_), gamma(gamma_), c1(c1_), c2(c2_), v(v_), r(r_), phi(phi_), pi_bar(pi_bar_) {
    validate();
  }

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("invalid model parameters: ") + what);
    };
    for (double x : {b, gamma, c1, c2, v, r, phi, pi_bar}) need(std::isfinite(x), "non-finite value");
    need(b > 0.0, "b must be > 0");
    need(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
    need(c1 > 0.0, "c1 must be > 0");
    need(c2 > 0.0, "c2 must be > 0");
    need(v > 0.0, "v must be > 0");
    need(phi > 0.0, "phi must be > 0");
  }

  /// Free parameters in the fixed order of kNames.
  [[nodiscard]] std::array<double, kFree> free() const { return {b, gamma, c1, c2, v, r, phi}; }

  [[nodiscard]] static ModelParams from_free(const std::array<double, kFree>& x, double pi_bar) {
    return {x[0], x[1], x[2], x[3], x[4], x[5], x[6], pi_bar};
  }

  /// Reference estimates with the HP-filter gap.
  static ModelParams reference_hp_gap(double pi_bar = 0.03) {
    return {0.53035, 0.063522, 1.1049, 2.3245, 0.50492, 0.015771, 1.3972, pi_bar};
  }

  /// Reference estimates with the deterministic-trend gap.
  static ModelParams reference_trend_gap(double pi_bar = 0.03) {
    return {0.53344, 0.10865, 1.1356, 2.6344, 0.34683, 0.016707, 1.6183, pi_bar};
  }

  bool operator==(const ModelParams&) const = default;
};

/// Coefficients of the reduced form
///   pi_t = on_lag_inflation pi_{t-1} + on_exp_depreciation d^e_t + on_target pi_bar
///          + on_demand_shock a_t + on_supply_shock o_t.
struct RfCoefficients {
  double on_lag_inflation;
  double on_exp_depreciation;
  double on_target;
  double on_demand_shock;
  double on_supply_shock;
};

inline RfCoefficients rf_coefficients(const ModelParams& p) {
  const double vb = p.v * p.b;
  return {(1.0 + vb) * (1.0 - p.gamma) - vb * p.c1, (1.0 + vb) * p.gamma, (p.c1 - 1.0) * vb,
          p.v * (1.0 - p.b * p.c2), 1.0 + p.v};
}

/// |on_lag_inflation| < 1: inflation returns to target after a shock.
inline bool is_stable(const ModelParams& p) { return std::fabs(rf_coefficients(p).on_lag_inflation) < 1.0; }

struct SteadyState {
  double inflation, nominal_rate, real_rate, gap;
};

inline SteadyState steady_state(const ModelParams& p) { return {p.pi_bar, p.r + p.pi_bar, p.r, 0.0}; }

/// Demand (a) and supply (o) shocks over one range.
struct ShockPath {
  TimeSeries a;
  TimeSeries o;

  ShockPath(TimeSeries a_, TimeSeries o_) : a(std::move(a_)), o(std::move(o_)) {
    if (a.start() != o.start() || a.size() != o.size())
      throw std::invalid_argument("demand and supply shock series are not aligned");
  }
};

struct SimPath {
  TimeSeries inflation;
  TimeSeries gap;
  TimeSeries nominal_rate;
  TimeSeries real_rate;
  TimeSeries expected_inflation;
  bool stable = true;  // false when the parameters give |on_lag_inflation| >= 1
};

namespace detail {

inline void require_aligned(const TimeSeries& x, const TimeSeries& y, const char* what) {
  if (x.start() != y.start() || x.size() != y.size())
    throw std::invalid_argument(std::string(what) + ": '" + x.name() + "' and '" + y.name() + "' are not aligned");
}

}  // namespace detail

/// Runs the five structural equations forward. pi0 is the inflation of the month before the
/// first shock month; output months coincide with the shock months.
inline SimPath simulate_structural(const ModelParams& p, const ShockPath& shocks, const TimeSeries& d_e, double pi0) {
  detail::require_aligned(shocks.a, d_e, "simulate_structural");
  if (!std::isfinite(pi0)) throw std::invalid_argument("simulate_structural: pi0 must be finite");
  const std::size_t n = d_e.size();
  std::vector<double> pi(n), gap(n), i(n), R(n), pe(n);
  double prev = pi0;
  for (std::size_t t = 0; t < n; ++t) {
    const double a = shocks.a[t], o = shocks.o[t];
    pe[t] = p.gamma * d_e[t] + (1.0 - p.gamma) * prev;
    i[t] = p.r + p.pi_bar + p.c1 * (prev - p.pi_bar) + p.c2 * a;
    R[t] = i[t] - pe[t];
    gap[t] = a + o - p.b * (R[t] - p.r);
    pi[t] = pe[t] + p.v * gap[t] + o;
    prev = pi[t];
  }
  const YearMonth s = d_e.start();
  return {TimeSeries(s, std::move(pi), "inflation"),        TimeSeries(s, std::move(gap), "gap"),
          TimeSeries(s, std::move(i), "nominal_rate"),      TimeSeries(s, std::move(R), "real_rate"),
          TimeSeries(s, std::move(pe), "expected_inflation"), is_stable(p)};
}

/// Approximate reduced form driven by an exogenous gap path.
inline TimeSeries simulate_arf(const ModelParams& p, const TimeSeries& gap_path, const TimeSeries& d_e, double pi0) {
  detail::require_aligned(gap_path, d_e, "simulate_arf");
  if (!std::isfinite(pi0)) throw std::invalid_argument("simulate_arf: pi0 must be finite");
  const auto c = rf_coefficients(p);
  std::vector<double> pi(d_e.size());
  double prev = pi0;
  for (std::size_t t = 0; t < pi.size(); ++t) {
    pi[t] = c.on_lag_inflation * prev + c.on_exp_depreciation * d_e[t] + c.on_target * p.pi_bar + p.phi * gap_path[t];
    prev = pi[t];
  }
  return {d_e.start(), std::move(pi), "inflation"};
}

enum class ShockKind { demand, supply };

/// Response to a single shock of `size` in the first month, starting from the steady state with
/// d^e held at the target. All series are deviations from their steady-state values.
inline SimPath impulse_response(const ModelParams& p, ShockKind kind, double size, int horizon,
                                YearMonth start = YearMonth(2000, 1)) {
  if (horizon < 1) throw std::invalid_argument("impulse_response: horizon must be >= 1");
  const auto n = static_cast<std::size_t>(horizon);
  std::vector<double> a(n, 0.0), o(n, 0.0);
  (kind == ShockKind::demand ? a : o)[0] = size;
  ShockPath shocks(TimeSeries(start, a, "a"), TimeSeries(start, o, "o"));
  auto path = simulate_structural(p, shocks, TimeSeries(start, std::vector<double>(n, p.pi_bar), "d_e"), p.pi_bar);
  const auto ss = steady_state(p);
  auto dev = [](const TimeSeries& s, double level) { return map(s, [level](double x) { return x - level; }); };
  return {dev(path.inflation, ss.inflation), dev(path.gap, ss.gap), dev(path.nominal_rate, ss.nominal_rate),
          dev(path.real_rate, ss.real_rate), dev(path.expected_inflation, ss.inflation), path.stable};
}

/// Which real rate enters the demand equation when shocks are backed out of data.
enum class RealRateSource {
  observed,  // the dataset's real_rate column
  implied,   // i_t - pi^e_t from the expectations equation
};

/// Inverts the Phillips curve and demand equation:
///   o_t = pi_t - pi^e_t - v gap_t,   a_t = gap_t + b (R_t - r) - o_t.
/// The first month is consumed as pi_{t-1}.
inline ShockPath recover_shocks(const ModelParams& p, const MacroDataset& data,
                                RealRateSource source = RealRateSource::observed) {
  const MacroDataset d = data.in_units(RateUnits::decimal);
  if (d.size() < 2) throw std::invalid_argument("recover_shocks needs at least two months");
  const std::size_t n = d.size() - 1;
  std::vector<double> a(n), o(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = k + 1;
    const double pe = p.gamma * d.exp_depreciation()[t] + (1.0 - p.gamma) * d.inflation()[t - 1];
    const double R = source == RealRateSource::observed ? d.real_rate()[t] : d.nominal_rate()[t] - pe;
    o[k] = d.inflation()[t] - pe - p.v * d.gap()[t];
    a[k] = d.gap()[t] + p.b * (R - p.r) - o[k];
  }
  return {TimeSeries(d.start() + 1, std::move(a), "a"), TimeSeries(d.start() + 1, std::move(o), "o")};
}

/// Packs a simulated path into a dataset. The target is the constant pi_bar; expected
/// depreciation is the series that drove the simulation.
inline MacroDataset to_dataset(const ModelParams& p, const SimPath& path, const TimeSeries& d_e) {
  return {path.inflation.renamed("inflation"),
          path.gap.renamed("gap"),
          path.nominal_rate.renamed("nominal_rate"),
          path.real_rate.renamed("real_rate"),
          d_e.renamed("exp_depreciation"),
          TimeSeries(d_e.start(), std::vector<double>(d_e.size(), p.pi_bar), "target"),
          RateUnits::decimal};
}

}  // namespace inflab
