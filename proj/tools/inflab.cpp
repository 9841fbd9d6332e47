// inflab: command-line front end for the inflation-targeting model library.
//
//   inflab <ingest|gap|adf|simulate|irf|estimate|synth|montecarlo> --config PATH [--out DIR] [--seed N]
//
// Rates are read and written in percent and handled internally as decimals; the gap is a
// fraction everywhere. Every run writes its CSV and text outputs plus <command>.manifest.json.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "inflab/config.hpp"
#include "inflab/dataset.hpp"
#include "inflab/detrend.hpp"
#include "inflab/gmm.hpp"
#include "inflab/model.hpp"
#include "inflab/random.hpp"
#include "inflab/report.hpp"
#include "inflab/synth.hpp"
#include "inflab/unitroot.hpp"

#ifndef INFLAB_VERSION
#define INFLAB_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace inflab;

namespace {

const std::vector<std::string> kCommands = {"ingest", "gap", "adf", "simulate", "irf", "estimate", "synth", "montecarlo"};

// ---------------------------------------------------------------------------
// files

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[md[k] >> 4];
    out += hex[md[k] & 15];
  }
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Writes through a temporary file in the target directory and renames it into place, so a
/// reader never sees a half-written file.
void write_atomic(const fs::path& p, const std::string& bytes) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("short write to " + tmp.string());
    }
  }
  fs::rename(tmp, p);
}

/// Collects the run's inputs and outputs and writes them, then the manifest.
class Run {
 public:
  Run(std::string command, const RunConfig& cfg, fs::path config_path, fs::path out_dir, std::uint64_t seed)
      : command_(std::move(command)), cfg_(cfg), config_path_(std::move(config_path)), out_(std::move(out_dir)),
        seed_(seed) {}

  [[nodiscard]] const RunConfig& config() const { return cfg_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  /// Resolves a data path and records its hash.
  std::optional<fs::path> input(const std::string& key) {
    auto p = cfg_.path(key);
    if (p) inputs_[key] = {fs::weakly_canonical(*p).string(), sha256_hex(read_file(*p))};
    return p;
  }

  void output(const std::string& name, const std::string& bytes) { files_.emplace_back(name, bytes); }

  void commit() {
    fs::create_directories(out_);
    json m;
    m["tool"] = "inflab";
    m["version"] = INFLAB_VERSION;
    m["command"] = command_;
    m["seed"] = seed_;
    m["config_file"] = {{"path", fs::weakly_canonical(config_path_).string()},
                        {"sha256", sha256_hex(read_file(config_path_))}};
    json eff = json::object();
    for (const auto& k : config_keys()) eff[k.key] = cfg_.text(k.key);
    m["config"] = eff;
    json in = json::object();
    for (const auto& [key, v] : inputs_) in[key] = {{"path", v.first}, {"sha256", v.second}};
    m["inputs"] = in;
    json outs = json::object();
    for (const auto& [name, bytes] : files_) {
      write_atomic(out_ / name, bytes);
      outs[name] = sha256_hex(bytes);
      std::cout << "wrote " << (out_ / name).string() << '\n';
    }
    m["outputs"] = outs;
    const std::string manifest = command_ + ".manifest.json";
    write_atomic(out_ / manifest, m.dump(2) + "\n");
    std::cout << "wrote " << (out_ / manifest).string() << '\n';
  }

 private:
  std::string command_;
  const RunConfig& cfg_;
  fs::path config_path_;
  fs::path out_;
  std::uint64_t seed_;
  std::map<std::string, std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::string>> files_;
};

template <typename F>
std::string render(F&& f) {
  std::ostringstream s;
  f(s);
  return s.str();
}

// ---------------------------------------------------------------------------
// data assembly

/// Raw series after the standard transforms, before alignment. Rates in percent.
struct RawData {
  TimeSeries inflation;
  TimeSeries depreciation;
  TimeSeries exp_depreciation;
  TimeSeries ise;
  TimeSeries policy_rate;
  TimeSeries target;
};

TimeSeries read_input(Run& run, const std::string& key, const std::string& name) {
  auto p = run.input(key);
  if (!p) throw std::invalid_argument("config key " + key + " is required when data.dataset is not set");
  try {
    return read_series_csv(p->string()).renamed(name);
  } catch (const std::exception& e) {
    throw std::invalid_argument(p->string() + ": " + e.what());
  }
}

RawData load_raw(Run& run) {
  const auto& cfg = run.config();
  const int lag = cfg.inflation_lag();
  auto cpi = read_input(run, "data.cpi", "cpi");
  auto trm = read_input(run, "data.trm", "trm");
  auto ise = read_input(run, "data.ise_new", "ise");
  if (cfg.has("data.ise_old")) ise = splice(read_input(run, "data.ise_old", "ise_old"), ise).renamed("ise");
  auto dep = yoy_pct_change(trm, lag).renamed("depreciation");
  return {yoy_pct_change(cpi, lag).renamed("inflation"),
          dep,
          trailing_mean(dep, cfg.expectation_window()).renamed("exp_depreciation"),
          ise,
          read_input(run, "data.policy_rate", "policy_rate"),
          read_input(run, "data.target", "target")};
}

/// Output gap of the (full) activity series by the named method.
TimeSeries make_gap(const RunConfig& cfg, const TimeSeries& ise, const std::string& method) {
  if (method == "hp") return gap_log_diff(ise, cfg.number("gap.lambda"));
  if (method == "trend")
    return gap_pct_dev(ise, static_cast<int>(cfg.integer("gap.degree")), cfg.flag("gap.on_logs"));
  throw std::invalid_argument("gap.method: unknown method '" + method + "' (expected hp or trend)");
}

/// Aligns the raw series with one gap and builds R by the configured convention. The ex-ante
/// rate needs pi_{t-1}, so it drops the first aligned month.
MacroDataset assemble(const RunConfig& cfg, const RawData& raw, const TimeSeries& gap) {
  auto a = align({raw.inflation, gap.renamed("gap"), raw.policy_rate, raw.exp_depreciation, raw.target});
  const auto& pi = a[0];
  const std::string conv = cfg.text("data.real_rate");
  if (conv == "ex_post") {
    std::vector<double> r(pi.size());
    for (std::size_t t = 0; t < pi.size(); ++t) r[t] = a[2][t] - pi[t];
    return {pi, a[1], a[2], TimeSeries(pi.start(), std::move(r), "real_rate"), a[3], a[4], RateUnits::percent};
  }
  if (conv != "ex_ante") throw std::invalid_argument("data.real_rate: unknown value '" + conv + "'");
  if (pi.size() < 2) throw std::invalid_argument("aligned sample is shorter than two months");
  const double g = cfg.model().gamma;
  std::vector<double> r(pi.size() - 1);
  for (std::size_t t = 1; t < pi.size(); ++t) r[t - 1] = a[2][t] - (g * a[3][t] + (1.0 - g) * pi[t - 1]);
  const YearMonth from = pi.start() + 1, to = pi.end();
  return {pi.slice(from, to), a[1].slice(from, to), a[2].slice(from, to), TimeSeries(from, std::move(r), "real_rate"),
          a[3].slice(from, to), a[4].slice(from, to), RateUnits::percent};
}

MacroDataset read_dataset(Run& run) {
  auto p = run.input("data.dataset");
  std::ifstream in(*p);
  if (!in) throw std::runtime_error("cannot open " + p->string());
  try {
    return read_dataset_csv(in);
  } catch (const std::exception& e) {
    throw std::invalid_argument(p->string() + ": " + e.what());
  }
}

bool has_dataset(const RunConfig& cfg) { return cfg.has("data.dataset"); }

std::string range_line(const MacroDataset& d) {
  return d.start().str() + " .. " + d.end().str() + " (" + std::to_string(d.size()) + " months)";
}

// ---------------------------------------------------------------------------
// commands

void cmd_ingest(Run& run) {
  const auto& cfg = run.config();
  if (has_dataset(cfg)) {
    const auto d = read_dataset(run);
    run.output("dataset.csv", render([&](auto& s) { write_dataset_csv(s, d); }));
    run.output("ingest.txt", render([&](auto& s) {
                 s << "Dataset re-emitted from data.dataset\n"
                   << "range: " << range_line(d) << "\nrate units: " << to_string(d.units()) << '\n';
               }));
    return;
  }
  const auto raw = load_raw(run);
  const std::string method = cfg.text("gap.method");
  const auto d = assemble(cfg, raw, make_gap(cfg, raw.ise, method));
  run.output("dataset.csv", render([&](auto& s) { write_dataset_csv(s, d); }));
  run.output("ingest.txt", render([&](auto& s) {
               s << "Dataset assembled from raw series\n\n"
                 << "inflation:        " << cfg.inflation_lag() << "-month percent change of CPI, "
                 << raw.inflation.start().str() << " .. " << raw.inflation.end().str() << '\n'
                 << "depreciation:     " << cfg.inflation_lag() << "-month percent change of TRM\n"
                 << "exp_depreciation: mean of the previous " << cfg.expectation_window() << " months of depreciation, "
                 << raw.exp_depreciation.start().str() << " .. " << raw.exp_depreciation.end().str() << '\n'
                 << "gap:              " << (method == "hp" ? "log ISE minus HP trend, lambda " + cfg.text("gap.lambda")
                                                             : "percent deviation from a degree " + cfg.text("gap.degree") +
                                                                   " trend")
                 << (cfg.has("data.ise_old") ? ", ISE spliced from two bases" : "") << '\n'
                 << "real_rate:        " << cfg.text("data.real_rate") << '\n'
                 << "range:            " << range_line(d) << '\n';
             }));
}

void cmd_gap(Run& run) {
  const auto& cfg = run.config();
  if (has_dataset(cfg)) throw std::invalid_argument("gap needs the raw activity series (data.ise_new), not data.dataset");
  auto ise = read_input(run, "data.ise_new", "ise");
  if (cfg.has("data.ise_old")) ise = splice(read_input(run, "data.ise_old", "ise_old"), ise).renamed("ise");
  const double lambda = cfg.number("gap.lambda");
  const int degree = static_cast<int>(cfg.integer("gap.degree"));
  const bool on_logs = cfg.flag("gap.on_logs");
  const auto hp = hp_filter(log_series(ise), lambda);
  const auto hp_gap = gap_log_diff(ise, lambda);
  const auto tr = on_logs ? fit_trend(log_series(ise), degree) : fit_trend(ise, degree);
  const auto tr_gap = gap_pct_dev(ise, degree, on_logs);
  run.output("gap.csv", render([&](auto& s) {
               s << "date,ise,log_ise,hp_trend,hp_gap,det_trend,trend_gap\n";
               for (std::size_t t = 0; t < ise.size(); ++t)
                 s << (ise.start() + static_cast<long>(t)).str() << ',' << format_double(ise[t]) << ','
                   << format_double(std::log(ise[t])) << ',' << format_double(hp.trend[t]) << ','
                   << format_double(hp_gap[t]) << ',' << format_double(tr.trend[t]) << ','
                   << format_double(tr_gap[t]) << '\n';
             }));
  run.output("gap.txt", render([&](auto& s) {
               auto stats = [](const TimeSeries& x) {
                 double lo = x[0], hi = x[0], ss = 0.0;
                 for (double v : x.values()) {
                   lo = std::min(lo, v);
                   hi = std::max(hi, v);
                   ss += v * v;
                 }
                 return report::fixed(lo, 4) + "  " + report::fixed(hi, 4) + "  " +
                        report::fixed(std::sqrt(ss / static_cast<double>(x.size())), 4);
               };
               s << "Output gap, " << ise.start().str() << " .. " << ise.end().str() << " (" << ise.size()
                 << " months)\n\n"
                 << "HP filter on log ISE, lambda " << cfg.text("gap.lambda") << "\n  min  max  rms: " << stats(hp_gap)
                 << "\nDeterministic trend, degree " << degree << (on_logs ? " on logs" : " on levels")
                 << "\n  min  max  rms: " << stats(tr_gap) << "\n  coefficients:";
               for (double c : tr.coefficients) s << ' ' << format_double(c);
               s << '\n';
             }));
}

void cmd_adf(Run& run) {
  const auto& cfg = run.config();
  std::vector<report::AdfRow> rows;
  auto add = [&](const std::string& name, const TimeSeries& x) {
    rows.push_back({name, adf_test(x, AdfSpec::constant_no_trend)});
  };
  if (has_dataset(cfg)) {
    const auto d = read_dataset(run).in_units(RateUnits::percent);
    add("gap", d.gap());
    add("inflation", d.inflation());
    add("exp_depreciation", d.exp_depreciation());
    add("real_rate", d.real_rate());
    add("nominal_rate", d.nominal_rate());
  } else {
    const auto raw = load_raw(run);
    const auto hp = assemble(cfg, raw, make_gap(cfg, raw.ise, "hp"));
    const auto tr = assemble(cfg, raw, make_gap(cfg, raw.ise, "trend"));
    add("hp_gap", hp.gap());
    add("trend_gap", tr.gap());
    add("inflation", hp.inflation());
    add("depreciation", raw.depreciation.slice(hp.start(), hp.end()));
    add("real_rate", hp.real_rate());
    add("nominal_rate", hp.nominal_rate());
  }
  run.output("adf.csv", render([&](auto& s) { report::write_adf_csv(s, rows); }));
  run.output("adf.txt", render([&](auto& s) { report::write_adf_text(s, rows); }));
}

void write_path_csv(std::ostream& s, const SimPath& p, const TimeSeries& d_e, const TimeSeries* a, const TimeSeries* o) {
  s << "# rate_units: percent\n"
    << "date,inflation,gap,nominal_rate,real_rate,expected_inflation,exp_depreciation" << (a ? ",a,o" : "") << '\n';
  auto pct = [](double v) { return format_double(kPercentPerUnit * v); };
  for (std::size_t t = 0; t < p.inflation.size(); ++t) {
    s << (p.inflation.start() + static_cast<long>(t)).str() << ',' << pct(p.inflation[t]) << ','
      << format_double(p.gap[t]) << ',' << pct(p.nominal_rate[t]) << ',' << pct(p.real_rate[t]) << ','
      << pct(p.expected_inflation[t]) << ',' << pct(d_e[t]);
    if (a) s << ',' << format_double((*a)[t]) << ',' << format_double((*o)[t]);
    s << '\n';
  }
}

void cmd_simulate(Run& run) {
  const auto& cfg = run.config();
  const ModelParams p = cfg.model();
  const long months = cfg.integer("simulate.months");
  if (months < 1) throw std::invalid_argument("simulate.months must be >= 1");
  const double sa = cfg.number("simulate.sigma_a"), so = cfg.number("simulate.sigma_o");
  const double rho_d = cfg.number("simulate.rho_d"), sd = cfg.number("simulate.sigma_d");
  if (sa < 0 || so < 0 || sd < 0) throw std::invalid_argument("simulate: standard deviations must be >= 0");
  if (!(rho_d >= 0.0 && rho_d < 1.0)) throw std::invalid_argument("simulate.rho_d must lie in [0, 1)");
  const double pi0 = cfg.has("simulate.pi0") ? cfg.number("simulate.pi0") : p.pi_bar;
  const YearMonth start = YearMonth::parse(cfg.text("simulate.start"));

  // draw order per month: d^e innovation, a, o
  Rng rng(run.seed());
  const auto n = static_cast<std::size_t>(months);
  std::vector<double> a(n), o(n), de(n);
  double d_prev = p.pi_bar;
  for (std::size_t t = 0; t < n; ++t) {
    de[t] = d_prev = p.pi_bar + rho_d * (d_prev - p.pi_bar) + rng.normal(sd);
    a[t] = rng.normal(sa);
    o[t] = rng.normal(so);
  }
  ShockPath shocks(TimeSeries(start, std::move(a), "a"), TimeSeries(start, std::move(o), "o"));
  TimeSeries d_e(start, std::move(de), "exp_depreciation");
  const auto path = simulate_structural(p, shocks, d_e, pi0);
  const auto ss = steady_state(p);
  const auto rf = rf_coefficients(p);
  run.output("simulate.csv", render([&](auto& s) { write_path_csv(s, path, d_e, &shocks.a, &shocks.o); }));
  run.output("simulate.txt", render([&](auto& s) {
               s << "Structural simulation, " << months << " months from " << start.str() << "\n\n"
                 << "parameters:";
               for (std::size_t k = 0; k < ModelParams::kFree; ++k)
                 s << ' ' << ModelParams::kNames[k] << '=' << format_double(p.free()[k]);
               s << " pi_bar=" << format_double(p.pi_bar) << "\nreduced form: on_lag "
                 << report::fixed(rf.on_lag_inflation, 6) << ", on_exp_depreciation "
                 << report::fixed(rf.on_exp_depreciation, 6) << ", on_target " << report::fixed(rf.on_target, 6)
                 << (path.stable ? "" : "  (UNSTABLE: |on_lag| >= 1)") << "\nsteady state (percent): inflation "
                 << report::fixed(100 * ss.inflation, 4) << ", nominal rate " << report::fixed(100 * ss.nominal_rate, 4)
                 << ", real rate " << report::fixed(100 * ss.real_rate, 4) << "\nshock sd: a " << cfg.text("simulate.sigma_a")
                 << ", o " << cfg.text("simulate.sigma_o") << ", d^e " << cfg.text("simulate.sigma_d") << '\n'
                 << "final month (percent): inflation " << report::fixed(100 * path.inflation[n - 1], 4)
                 << ", nominal rate " << report::fixed(100 * path.nominal_rate[n - 1], 4) << '\n';
             }));
}

void cmd_irf(Run& run) {
  const auto& cfg = run.config();
  const ModelParams p = cfg.model();
  const std::string which = cfg.text("irf.shock");
  std::vector<std::pair<std::string, ShockKind>> kinds;
  if (which == "demand" || which == "both") kinds.emplace_back("demand", ShockKind::demand);
  if (which == "supply" || which == "both") kinds.emplace_back("supply", ShockKind::supply);
  if (kinds.empty()) throw std::invalid_argument("irf.shock: expected demand, supply or both, got '" + which + "'");
  const double size = cfg.number("irf.size");
  const int horizon = static_cast<int>(cfg.integer("irf.horizon"));
  std::vector<std::pair<std::string, SimPath>> paths;
  for (const auto& [name, kind] : kinds) paths.emplace_back(name, impulse_response(p, kind, size, horizon));
  run.output("irf.csv", render([&](auto& s) {
               s << "# deviations from steady state; rates in percentage points, gap as a fraction\n"
                 << "shock,month,inflation,gap,nominal_rate,real_rate,expected_inflation\n";
               auto pct = [](double v) { return format_double(kPercentPerUnit * v); };
               for (const auto& [name, r] : paths)
                 for (std::size_t h = 0; h < r.inflation.size(); ++h)
                   s << name << ',' << h << ',' << pct(r.inflation[h]) << ',' << format_double(r.gap[h]) << ','
                     << pct(r.nominal_rate[h]) << ',' << pct(r.real_rate[h]) << ',' << pct(r.expected_inflation[h])
                     << '\n';
             }));
  run.output("irf.txt", render([&](auto& s) {
               const auto rf = rf_coefficients(p);
               s << "Impulse responses, shock size " << cfg.text("irf.size") << ", horizon " << horizon
                 << " months\ninflation persistence (on_lag) " << report::fixed(rf.on_lag_inflation, 6) << "\n\n"
                 << report::pad("shock", 10) << report::lpad("impact pi", 12) << report::lpad("impact gap", 12)
                 << report::lpad("impact i", 12) << report::lpad("pi at end", 12) << '\n';
               for (const auto& [name, r] : paths)
                 s << report::pad(name, 10) << report::lpad(report::fixed(100 * r.inflation[0], 4), 12)
                   << report::lpad(report::fixed(r.gap[0], 4), 12)
                   << report::lpad(report::fixed(100 * r.nominal_rate[0], 4), 12)
                   << report::lpad(report::fixed(100 * r.inflation[r.inflation.size() - 1], 6), 12) << '\n';
               s << "\nRates in percentage points, gap as a fraction.\n";
             }));
}

void cmd_synth(Run& run) {
  const auto& cfg = run.config();
  const auto sc = cfg.synth(run.seed());
  const auto out = generate(sc);
  const auto d = out.data.in_units(RateUnits::percent);
  run.output("dataset.csv", render([&](auto& s) { write_dataset_csv(s, d); }));
  run.output("shocks.csv", render([&](auto& s) {
               s << "date,a,o\n";
               for (std::size_t t = 0; t < out.shocks.a.size(); ++t)
                 s << (out.shocks.a.start() + static_cast<long>(t)).str() << ',' << format_double(out.shocks.a[t])
                   << ',' << format_double(out.shocks.o[t]) << '\n';
             }));
  run.output("synth.txt", render([&](auto& s) {
               s << "Synthetic dataset, mode " << to_string(sc.mode) << ", seed " << sc.seed << "\nrange: "
                 << range_line(d) << ", burn-in " << sc.burn_in << " months\nreal rate: " << to_string(sc.real_rate)
                 << "\nparameters:";
               for (std::size_t k = 0; k < ModelParams::kFree; ++k)
                 s << ' ' << ModelParams::kNames[k] << '=' << format_double(sc.params.free()[k]);
               s << " pi_bar=" << format_double(sc.params.pi_bar) << '\n';
             }));
}

void cmd_estimate(Run& run) {
  const auto& cfg = run.config();
  const auto sys = cfg.moment_system();
  const auto opts = cfg.estimate_options();
  const auto theta0 = cfg.theta0(run.seed());
  std::vector<std::pair<std::string, MacroDataset>> inputs;
  if (has_dataset(cfg)) {
    inputs.emplace_back("Dataset gap", read_dataset(run));
  } else {
    const auto raw = load_raw(run);
    inputs.emplace_back("HP filter gap", assemble(cfg, raw, make_gap(cfg, raw.ise, "hp")));
    inputs.emplace_back("Trend gap", assemble(cfg, raw, make_gap(cfg, raw.ise, "trend")));
  }
  std::vector<report::EstimateColumn> cols;
  for (const auto& [label, d] : inputs) cols.push_back({label, gmm::estimate(sys, d, theta0, opts)});
  run.output("estimate.csv", render([&](auto& s) { report::write_estimate_csv(s, cols); }));
  run.output("estimate.txt", render([&](auto& s) {
               report::write_estimate_text(s, cols);
               s << "\nSample: ";
               for (const auto& [label, d] : inputs) s << label << ' ' << range_line(d) << "; ";
               s << "steps " << opts.steps << ", start";
               for (double x : theta0.free()) s << ' ' << format_double(x);
               s << "\nMoment conditions: " << sys.describe() << '\n';
             }));
}

unsigned worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("INFLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw std::invalid_argument("INFLAB_THREADS must be a positive integer");
    n = std::min(n, static_cast<unsigned>(v));
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, jobs));
}

void cmd_montecarlo(Run& run) {
  const auto& cfg = run.config();
  const long reps = cfg.integer("montecarlo.replications");
  if (reps < 1) throw std::invalid_argument("montecarlo.replications must be >= 1");
  const auto sys = cfg.moment_system();
  const auto opts = cfg.estimate_options();
  const auto base = cfg.synth(run.seed());
  const auto n = static_cast<std::size_t>(reps);

  // replication k uses data seed seed + k; results land by index so the thread count never
  // changes the output
  std::vector<std::optional<gmm::GmmResult>> results(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < n;) {
      const std::uint64_t seed = run.seed() + k;
      try {
        auto sc = base;
        sc.seed = seed;
        results[k] = gmm::estimate(sys, generate(sc).data, cfg.theta0(seed), opts);
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < worker_count(n); ++w) pool.emplace_back(work);
  }

  std::vector<gmm::GmmResult> ok;
  int failures = 0;
  for (auto& r : results) {
    if (r)
      ok.push_back(*r);
    else
      ++failures;
  }
  const auto summary = report::summarize(base.params.free(), ok, failures);
  run.output("montecarlo.csv", render([&](auto& s) { report::write_montecarlo_csv(s, summary); }));
  run.output("montecarlo_runs.csv", render([&](auto& s) {
               s << "replication,seed";
               for (auto nm : ModelParams::kNames) s << ',' << nm;
               for (auto nm : ModelParams::kNames) s << ",se_" << nm;
               s << ",J_stat,J_pvalue,converged,error\n";
               for (std::size_t k = 0; k < n; ++k) {
                 s << k << ',' << run.seed() + k;
                 if (results[k]) {
                   const auto& r = *results[k];
                   for (double x : r.theta_hat.free()) s << ',' << format_double(x);
                   for (double x : r.std_errors) s << ',' << format_double(x);
                   s << ',' << format_double(r.J_stat) << ',' << format_double(r.J_pvalue) << ','
                     << (r.converged ? 1 : 0) << ",\n";
                 } else {
                   for (std::size_t c = 0; c < 2 * ModelParams::kFree + 3; ++c) s << ',';
                   std::string msg = errors[k];
                   std::replace(msg.begin(), msg.end(), ',', ';');
                   s << msg << '\n';
                 }
               }
             }));
  run.output("montecarlo.txt", render([&](auto& s) {
               report::write_montecarlo_text(s, summary);
               s << "\nT = " << base.T << ", mode " << to_string(base.mode) << ", seeds " << run.seed() << " .. "
                 << run.seed() + n - 1 << ", GMM steps " << opts.steps << '\n';
             }));
}

std::string help_footer() {
  std::ostringstream s;
  s << "Config keys (file format: [section] headers, key = value, # or ; comments):\n";
  std::string section;
  for (const auto& k : config_keys()) {
    const std::string key = k.key;
    const std::string sec = key.substr(0, key.find('.'));
    if (sec != section) {
      s << "  [" << sec << "]\n";
      section = sec;
    }
    std::string left = "    " + key.substr(key.find('.') + 1) + " = " + (*k.fallback ? k.fallback : "(unset)");
    s << report::pad(left, 40) << ' ' << k.help << '\n';
  }
  s << "\nEnvironment: INFLAB_THREADS caps the montecarlo worker count.\n"
       "Errors are printed as one line: inflab: error: <command>: <message>, with exit code 1\n"
       "(2 for usage errors).";
  return s.str();
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"inflab " INFLAB_VERSION ": inflation-targeting model toolkit", "inflab"};
  std::string command, config_path, out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("command", command, "ingest | gap | adf | simulate | irf | estimate | synth | montecarlo")
      ->required()
      ->check(CLI::IsMember(kCommands));
  app.add_option("--config", config_path, "config file")->required();
  app.add_option("--out", out_dir, "output directory (default: run.out, relative to the config file)");
  app.add_option("--seed", seed, "RNG seed (default: run.seed)");
  app.set_version_flag("--version", INFLAB_VERSION);
  app.footer(help_footer());
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "inflab: error: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    RunConfig cfg = RunConfig::load(config_path);
    const fs::path base = fs::path(config_path).parent_path();
    fs::path out = out_dir.empty() ? fs::path(cfg.text("run.out")) : fs::path(out_dir);
    if (out_dir.empty() && out.is_relative()) out = base / out;
    if (seed) cfg.set("run.seed", std::to_string(*seed));
    const long s = cfg.integer("run.seed");
    if (s < 0) throw std::invalid_argument("run.seed must be >= 0");
    cfg.set("run.out", out.string());

    Run run(command, cfg, config_path, out, static_cast<std::uint64_t>(s));
    if (command == "ingest") cmd_ingest(run);
    else if (command == "gap") cmd_gap(run);
    else if (command == "adf") cmd_adf(run);
    else if (command == "simulate") cmd_simulate(run);
    else if (command == "irf") cmd_irf(run);
    else if (command == "estimate") cmd_estimate(run);
    else if (command == "synth") cmd_synth(run);
    else cmd_montecarlo(run);
    run.commit();
  } catch (const std::exception& e) {
    std::cerr << "inflab: error: " << command << ": " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}
