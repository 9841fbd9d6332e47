#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "inflab/distributions.hpp"
#include "inflab/gmm.hpp"
#include "inflab/series.hpp"
#include "inflab/unitroot.hpp"

namespace inflab::report {

/// Fixed-point text with `digits` decimals; identical on every platform for a given double.
inline std::string fixed(double v, int digits = 5) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

inline std::string lpad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

/// Significance levels listed under the J statistic.
inline constexpr double kJLevels[] = {0.05, 0.02, 0.01};

/// Degrees of freedom some tables quote for the 23-condition system; shown for comparison.
inline constexpr int kComparisonDof = 14;

struct EstimateColumn {
  std::string label;  // e.g. "HP filter gap"
  gmm::GmmResult result;
};

/// Parameter / value / t-value table, one column pair per estimate, followed by the J test.
inline void write_estimate_text(std::ostream& out, std::span<const EstimateColumn> cols) {
  out << "GMM estimates\n\n";
  out << pad("Parameter", 12);
  for (const auto& c : cols) out << lpad(c.label, 26);
  out << '\n' << pad("", 12);
  for (std::size_t k = 0; k < cols.size(); ++k) out << lpad("Value", 13) << lpad("t-value", 13);
  out << '\n';
  for (std::size_t p = 0; p < ModelParams::kFree; ++p) {
    out << pad(ModelParams::kNames[p], 12);
    for (const auto& c : cols) {
      out << lpad(fixed(c.result.theta_hat.free()[p]), 13) << lpad(fixed(c.result.t_values[p], 3), 13);
    }
    out << '\n';
  }
  out << '\n' << pad("J-statistic", 12);
  for (const auto& c : cols) out << lpad(fixed(c.result.J_stat, 3), 13) << lpad("", 13);
  out << '\n' << pad("p-value", 12);
  for (const auto& c : cols) out << lpad(fixed(c.result.J_pvalue, 4), 13) << lpad("", 13);
  out << '\n';
  for (const auto& c : cols) {
    const auto& r = c.result;
    out << '\n' << c.label << ": " << r.n_conditions << " conditions, 7 parameters, " << r.n_obs
        << " observations, dof = " << r.dof << ", weighting "
        << (r.weighting == gmm::Weighting::hac_second_step ? "HAC" : "first step only") << ", "
        << (r.converged ? "converged" : "NOT converged") << '\n';
    if (r.dof > 0) {
      out << "  chi2(" << r.dof << ") critical values:";
      for (double a : kJLevels) out << "  " << fixed(100 * a, 0) << "% " << fixed(dist::chi2_quantile(1.0 - a, r.dof), 3);
      out << '\n';
    }
    for (const auto& w : r.warnings) out << "  warning: " << w << '\n';
  }
  out << "\nNote: the J statistic has dof = conditions - parameters (23 - 7 = 16 for the default system).\n"
      << "Tables quoting " << kComparisonDof << " df for the same 23 conditions use critical values";
  for (double a : kJLevels) out << ' ' << fixed(dist::chi2_quantile(1.0 - a, kComparisonDof), 3);
  out << " (5%, 2%, 1%); they are listed for comparison only.\n";
}

/// Same content as CSV: item,column,value,std_error,t_value.
inline void write_estimate_csv(std::ostream& out, std::span<const EstimateColumn> cols) {
  out << "item,column,value,std_error,t_value\n";
  for (const auto& c : cols) {
    const auto& r = c.result;
    const auto th = r.theta_hat.free();
    for (std::size_t p = 0; p < ModelParams::kFree; ++p)
      out << ModelParams::kNames[p] << ',' << c.label << ',' << format_double(th[p]) << ','
          << format_double(r.std_errors[p]) << ',' << format_double(r.t_values[p]) << '\n';
    out << "J_statistic," << c.label << ',' << format_double(r.J_stat) << ",,\n";
    out << "J_pvalue," << c.label << ',' << format_double(r.J_pvalue) << ",,\n";
    out << "dof," << c.label << ',' << r.dof << ",,\n";
    out << "n_conditions," << c.label << ',' << r.n_conditions << ",,\n";
    out << "n_obs," << c.label << ',' << r.n_obs << ",,\n";
    for (double a : kJLevels)
      if (r.dof > 0)
        out << "critical_" << fixed(100 * a, 0) << "pct," << c.label << ','
            << format_double(dist::chi2_quantile(1.0 - a, r.dof)) << ",,\n";
    out << "converged," << c.label << ',' << (r.converged ? 1 : 0) << ",,\n";
  }
}

struct AdfRow {
  std::string variable;
  AdfResult result;
};

/// The model-specification label contains a comma, so that field is quoted.
inline void write_adf_csv(std::ostream& out, std::span<const AdfRow> rows) {
  out << "variable,spec,rho,rho_pvalue,adf_stat,adf_pvalue\n";
  for (const auto& r : rows)
    out << r.variable << ",\"" << to_string(r.result.spec) << "\"," << format_double(r.result.rho) << ','
        << format_double(r.result.rho_pvalue) << ',' << format_double(r.result.adf_stat) << ','
        << format_double(r.result.p_value) << '\n';
}

inline void write_adf_text(std::ostream& out, std::span<const AdfRow> rows) {
  out << "Unit root tests (augmented Dickey-Fuller)\n\n"
      << pad("Variable", 28) << pad("Model specification", 28) << lpad("rho", 10) << lpad("P-value", 10)
      << lpad("ADF", 10) << lpad("P-value", 10) << lpad("lags", 6) << lpad("obs", 6) << '\n';
  for (const auto& r : rows)
    out << pad(r.variable, 28) << pad(to_string(r.result.spec), 28) << lpad(fixed(r.result.rho, 3), 10)
        << lpad(fixed(r.result.rho_pvalue, 3), 10) << lpad(fixed(r.result.adf_stat, 3), 10)
        << lpad(fixed(r.result.p_value, 3), 10) << lpad(std::to_string(r.result.lags), 6)
        << lpad(std::to_string(r.result.n_obs), 6) << '\n';
  out << "\nThe first p-value is the two-sided normal p-value of rho; the second is the\n"
         "MacKinnon response-surface p-value of the ADF statistic.\n";
}

/// Summary of repeated synth + estimate runs.
struct MonteCarloSummary {
  int replications = 0;
  int failures = 0;
  std::array<double, ModelParams::kFree> truth{};
  std::array<double, ModelParams::kFree> coverage{};  // share within 3 standard errors
  std::array<double, ModelParams::kFree> median{};
  double j_rejection = 0.0;  // share with J p-value < 0.05
  double mean_j = 0.0;
  int dof = 0;
};

inline MonteCarloSummary summarize(const std::array<double, ModelParams::kFree>& truth,
                                   std::span<const gmm::GmmResult> runs, int failures) {
  MonteCarloSummary s;
  s.replications = static_cast<int>(runs.size()) + failures;
  s.failures = failures;
  s.truth = truth;
  if (runs.empty()) return s;
  const double n = static_cast<double>(runs.size());
  for (std::size_t p = 0; p < ModelParams::kFree; ++p) {
    std::vector<double> v;
    int inside = 0;
    for (const auto& r : runs) {
      const double x = r.theta_hat.free()[p];
      v.push_back(x);
      if (std::fabs(x - truth[p]) <= 3.0 * r.std_errors[p]) ++inside;
    }
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    s.median[p] = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
    s.coverage[p] = inside / n;
  }
  int rej = 0;
  for (const auto& r : runs) {
    if (r.J_pvalue < 0.05) ++rej;
    s.mean_j += r.J_stat / n;
  }
  s.j_rejection = rej / n;
  s.dof = runs.front().dof;
  return s;
}

inline void write_montecarlo_text(std::ostream& out, const MonteCarloSummary& s) {
  out << "Monte Carlo: " << s.replications << " replications, " << s.failures << " failed\n\n"
      << pad("Parameter", 12) << lpad("Truth", 12) << lpad("Median", 12) << lpad("Rel.err", 10)
      << lpad("Cover(3se)", 12) << '\n';
  for (std::size_t p = 0; p < ModelParams::kFree; ++p)
    out << pad(ModelParams::kNames[p], 12) << lpad(fixed(s.truth[p]), 12) << lpad(fixed(s.median[p]), 12)
        << lpad(fixed(s.median[p] / s.truth[p] - 1.0, 4), 10) << lpad(fixed(s.coverage[p], 3), 12) << '\n';
  out << "\nJ test: rejection rate at 5% = " << fixed(s.j_rejection, 3) << ", mean J = " << fixed(s.mean_j, 3)
      << " (dof " << s.dof << ")\n";
}

inline void write_montecarlo_csv(std::ostream& out, const MonteCarloSummary& s) {
  out << "parameter,truth,median,coverage_3se\n";
  for (std::size_t p = 0; p < ModelParams::kFree; ++p)
    out << ModelParams::kNames[p] << ',' << format_double(s.truth[p]) << ',' << format_double(s.median[p]) << ','
        << format_double(s.coverage[p]) << '\n';
  out << "J_rejection_5pct,," << format_double(s.j_rejection) << ",\n";
  out << "mean_J,," << format_double(s.mean_j) << ",\n";
  out << "dof,," << s.dof << ",\n";
  out << "replications,," << s.replications << ",\n";
  out << "failures,," << s.failures << ",\n";
}

}  // namespace inflab::report
