#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "inflab/dataset.hpp"
#include "inflab/detrend.hpp"
#include "inflab/gmm.hpp"
#include "inflab/model.hpp"
#include "inflab/series.hpp"
#include "inflab/synth.hpp"

namespace inflab {

/// Every recognised key with its default and a one-line description, section by section.
struct ConfigKey {
  const char* key;  // "section.name"
  const char* fallback;
  const char* help;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"run.seed", "1", "RNG seed (overridden by --seed)"},
      {"run.out", "out", "output directory (overridden by --out)"},
      {"data.dataset", "", "ready-made dataset CSV; replaces the raw series below"},
      {"data.cpi", "", "CPI level CSV (date,value)"},
      {"data.trm", "", "end-of-month exchange rate CSV"},
      {"data.ise_old", "", "activity index, older base"},
      {"data.ise_new", "", "activity index, newer base"},
      {"data.policy_rate", "", "nominal policy rate CSV, percent per year"},
      {"data.target", "", "inflation target CSV, percent per year"},
      {"data.inflation_lag", "12", "months in the year-over-year inflation and depreciation rates"},
      {"data.expectation_window", "6", "months averaged into expected depreciation"},
      {"data.real_rate", "ex_post", "real rate construction: ex_post (i - pi) or ex_ante (i - pi^e)"},
      {"gap.method", "hp", "hp (log level minus HP trend) or trend (percent deviation from a fitted trend)"},
      {"gap.lambda", "14400", "HP smoothing parameter"},
      {"gap.degree", "1", "trend polynomial degree, 1 or 2"},
      {"gap.on_logs", "false", "fit the deterministic trend to log levels"},
      {"model.preset", "hp_gap", "starting parameter set: hp_gap or trend_gap"},
      {"model.pi_bar", "0.03", "inflation target for simulation, decimal per year"},
      {"model.b", "", "override b"},
      {"model.gamma", "", "override gamma"},
      {"model.c1", "", "override c1"},
      {"model.c2", "", "override c2"},
      {"model.v", "", "override v"},
      {"model.r", "", "override r"},
      {"model.phi", "", "override phi"},
      {"estimate.moments", "default23", "default23 or a list such as e1*1, e3*pi(-1), e1*e3"},
      {"estimate.shock_real_rate", "implied", "real rate used to back out shocks: implied or observed"},
      {"estimate.steps", "3", "GMM steps; 2 is two-step, 3 re-estimates the HAC weighting once more"},
      {"estimate.bandwidth", "auto", "HAC lags or auto"},
      {"estimate.theta0", "jitter", "start: jitter (preset scaled by 1 +- jitter), preset, or 7 comma-separated values"},
      {"estimate.jitter", "0.2", "relative start-value jitter"},
      {"estimate.max_evaluations", "40000", "objective evaluations per step"},
      {"estimate.simplex_restarts", "2", "Nelder-Mead restarts per step"},
      {"synth.T", "600", "months kept"},
      {"synth.mode", "arf", "arf or structural"},
      {"synth.sigma_a", "0.002", "demand shock sd (structural mode)"},
      {"synth.sigma_o", "0.003", "supply shock innovation sd"},
      {"synth.rho_o", "0.5", "supply shock persistence (arf mode)"},
      {"synth.sigma_e", "0.002", "reduced-form disturbance sd (arf mode)"},
      {"synth.sigma_i", "0.002", "policy-rule noise sd"},
      {"synth.sigma_R", "0.002", "real-rate noise sd"},
      {"synth.rho_d", "0.9", "expected depreciation persistence"},
      {"synth.sigma_d", "0.005", "expected depreciation innovation sd"},
      {"synth.real_rate", "ex_ante", "ex_ante or ex_post"},
      {"synth.burn_in", "200", "months discarded before the sample"},
      {"synth.start", "2000-01", "first month of the sample"},
      {"simulate.months", "120", "simulation length"},
      {"simulate.sigma_a", "0", "demand shock sd"},
      {"simulate.sigma_o", "0", "supply shock sd"},
      {"simulate.pi0", "", "inflation before the first month; defaults to pi_bar"},
      {"simulate.rho_d", "0", "expected depreciation persistence"},
      {"simulate.sigma_d", "0", "expected depreciation innovation sd"},
      {"simulate.start", "2000-01", "first simulated month"},
      {"irf.shock", "both", "demand, supply or both"},
      {"irf.size", "0.01", "shock size, decimal"},
      {"irf.horizon", "36", "months"},
      {"montecarlo.replications", "100", "synthetic datasets to estimate"},
  };
  return keys;
}

/// Parsed key = value configuration with [section] headers. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
class RunConfig {
 public:
  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    RunConfig c = parse(in, path.string());
    c.base_dir_ = path.parent_path();
    return c;
  }

  static RunConfig parse(std::istream& in, const std::string& origin = "<config>") {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    std::set<std::string> known;
    for (const auto& k : config_keys()) known.insert(k.key);
    RunConfig c;
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty())
        throw std::invalid_argument(origin + ": key '" + section + "' is outside any [section]");
      for (const auto& [key, value] : body) {
        const std::string full = section + "." + key;
        if (!known.count(full)) throw std::invalid_argument(origin + ": unknown key '" + full + "'");
        c.values_[full] = std::string(detail::trim(value.data()));
      }
    }
    return c;
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  [[nodiscard]] bool has(const std::string& key) const {
    auto it = values_.find(key);
    return it != values_.end() && !it->second.empty();
  }

  [[nodiscard]] std::string text(const std::string& key) const {
    if (auto it = values_.find(key); it != values_.end()) return it->second;
    for (const auto& k : config_keys())
      if (key == k.key) return k.fallback;
    throw std::logic_error("undeclared config key " + key);
  }

  [[nodiscard]] double number(const std::string& key) const {
    const std::string s = text(key);
    try {
      return parse_double(s, 0);
    } catch (const std::exception&) {
      throw std::invalid_argument("config key " + key + ": '" + s + "' is not a number");
    }
  }

  [[nodiscard]] long integer(const std::string& key) const {
    const std::string s = text(key);
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw std::invalid_argument("config key " + key + ": '" + s + "' is not an integer");
    return v;
  }

  [[nodiscard]] bool flag(const std::string& key) const {
    const std::string s = text(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("config key " + key + ": '" + s + "' is not a boolean");
  }

  /// A file path resolved against the config file's directory; empty when unset.
  [[nodiscard]] std::optional<std::filesystem::path> path(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    std::filesystem::path p = text(key);
    if (p.is_relative()) p = base_dir_ / p;
    if (!std::filesystem::exists(p)) throw std::invalid_argument("config key " + key + ": file " + p.string() + " does not exist");
    return p;
  }

  /// Every explicitly set key, sorted; used for the run manifest.
  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

  // ---- typed views ----

  [[nodiscard]] ModelParams model() const {
    const double pi_bar = number("model.pi_bar");
    const std::string preset = text("model.preset");
    ModelParams p = preset == "hp_gap"      ? ModelParams::reference_hp_gap(pi_bar)
                    : preset == "trend_gap" ? ModelParams::reference_trend_gap(pi_bar)
                                            : throw std::invalid_argument("model.preset: unknown preset '" + preset + "'");
    auto x = p.free();
    for (std::size_t k = 0; k < ModelParams::kFree; ++k) {
      const std::string key = std::string("model.") + ModelParams::kNames[k];
      if (has(key)) x[k] = number(key);
    }
    return ModelParams::from_free(x, pi_bar);
  }

  [[nodiscard]] SynthConfig synth(std::uint64_t seed) const {
    SynthConfig s;
    s.params = model();
    s.T = static_cast<int>(integer("synth.T"));
    s.mode = parse_synth_mode(text("synth.mode"));
    s.sigma_a = number("synth.sigma_a");
    s.sigma_o = number("synth.sigma_o");
    s.rho_o = number("synth.rho_o");
    s.sigma_e = number("synth.sigma_e");
    s.sigma_i = number("synth.sigma_i");
    s.sigma_R = number("synth.sigma_R");
    s.rho_d = number("synth.rho_d");
    s.sigma_d = number("synth.sigma_d");
    s.real_rate = parse_real_rate_convention(text("synth.real_rate"));
    s.burn_in = static_cast<int>(integer("synth.burn_in"));
    s.start = YearMonth::parse(text("synth.start"));
    s.seed = seed;
    s.validate();
    return s;
  }

  [[nodiscard]] gmm::MomentSystem moment_system() const {
    const std::string src = text("estimate.shock_real_rate");
    RealRateSource rs = src == "implied"    ? RealRateSource::implied
                        : src == "observed" ? RealRateSource::observed
                                            : throw std::invalid_argument("estimate.shock_real_rate: unknown value '" + src + "'");
    return gmm::parse_moment_system(text("estimate.moments"), rs);
  }

  [[nodiscard]] gmm::EstimateOptions estimate_options() const {
    gmm::EstimateOptions o;
    o.steps = static_cast<int>(integer("estimate.steps"));
    if (o.steps < 1) throw std::invalid_argument("estimate.steps must be >= 1");
    if (text("estimate.bandwidth") != "auto") {
      o.bandwidth = static_cast<int>(integer("estimate.bandwidth"));
      if (*o.bandwidth < 0) throw std::invalid_argument("estimate.bandwidth must be >= 0");
    }
    o.optimizer.max_evaluations = static_cast<int>(integer("estimate.max_evaluations"));
    o.optimizer.simplex_restarts = static_cast<int>(integer("estimate.simplex_restarts"));
    return o;
  }

  /// Mixed into the seed of start-value draws so they never share a stream with a dataset
  /// generated from the same seed.
  static constexpr std::uint64_t kStartSalt = 0x9E3779B97F4A7C15ULL;

  /// GMM start values: `jitter` (preset scaled by 1 +- estimate.jitter, drawn from `seed`),
  /// `preset`, or seven comma-separated values in the order b, gamma, c1, c2, v, r, phi.
  [[nodiscard]] ModelParams theta0(std::uint64_t seed) const {
    const ModelParams base = model();
    const std::string how = text("estimate.theta0");
    if (how == "preset") return base;
    if (how == "jitter") return jittered(base, number("estimate.jitter"), seed ^ kStartSalt);
    const auto parts = detail::split(how);
    if (parts.size() != ModelParams::kFree)
      throw std::invalid_argument("estimate.theta0: expected jitter, preset or 7 values, got '" + how + "'");
    std::array<double, ModelParams::kFree> x{};
    for (std::size_t k = 0; k < x.size(); ++k) {
      try {
        x[k] = parse_double(detail::trim(parts[k]), 0);
      } catch (const std::exception&) {
        throw std::invalid_argument("estimate.theta0: '" + std::string(parts[k]) + "' is not a number");
      }
    }
    return ModelParams::from_free(x, base.pi_bar);
  }

  [[nodiscard]] int inflation_lag() const { return positive("data.inflation_lag"); }
  [[nodiscard]] int expectation_window() const { return positive("data.expectation_window"); }

 private:
  int positive(const std::string& key) const {
    const long v = integer(key);
    if (v < 1) throw std::invalid_argument("config key " + key + " must be >= 1");
    return static_cast<int>(v);
  }

  std::map<std::string, std::string> values_;
  std::filesystem::path base_dir_ = ".";
};

}  // namespace inflab
