#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "inflab/dataset.hpp"
#include "inflab/model.hpp"
#include "inflab/random.hpp"

namespace inflab {

/// How the synthetic economy is driven.
enum class SynthMode {
  /// i.i.d. demand and supply shocks fed through the five structural equations. The gap
  /// coefficient phi plays no part in this process.
  structural,
  /// The approximate reduced form holds up to an i.i.d. disturbance e_t, with an AR(1) supply
  /// shock; the gap and the demand shock are the values that make all five structural equations
  /// hold as well. This is the process under which every estimated parameter, phi included, is
  /// identified.
  arf,
};

/// Which inflation enters the observed real rate i_t - pi.
enum class RealRateConvention {
  ex_post,  // i_t - pi_t
  ex_ante,  // i_t - pi^e_t
};

inline const char* to_string(SynthMode m) { return m == SynthMode::structural ? "structural" : "arf"; }
inline const char* to_string(RealRateConvention c) { return c == RealRateConvention::ex_post ? "ex_post" : "ex_ante"; }

inline SynthMode parse_synth_mode(std::string_view s) {
  if (s == "structural") return SynthMode::structural;
  if (s == "arf") return SynthMode::arf;
  throw std::invalid_argument("unknown synth mode '" + std::string(s) + "'");
}

inline RealRateConvention parse_real_rate_convention(std::string_view s) {
  if (s == "ex_post") return RealRateConvention::ex_post;
  if (s == "ex_ante") return RealRateConvention::ex_ante;
  throw std::invalid_argument("unknown real rate convention '" + std::string(s) + "'");
}

struct SynthConfig {
  ModelParams params = ModelParams::reference_hp_gap();
  int T = 600;
  SynthMode mode = SynthMode::arf;
  double sigma_a = 0.002;   // demand shock (structural mode)
  double sigma_o = 0.003;   // supply shock innovation
  double rho_o = 0.5;       // supply shock persistence (arf mode)
  double sigma_e = 0.002;   // reduced-form disturbance (arf mode)
  double sigma_i = 0.002;   // policy-rule noise added to i_t
  double sigma_R = 0.002;   // measurement noise on the real rate
  double rho_d = 0.9;       // expected depreciation persistence around pi_bar
  double sigma_d = 0.005;   // expected depreciation innovation
  RealRateConvention real_rate = RealRateConvention::ex_ante;
  int burn_in = 200;
  YearMonth start = YearMonth(2000, 1);
  std::uint64_t seed = 1;

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("invalid synth config: ") + what);
    };
    params.validate();
    need(T >= 50, "T must be >= 50");
    need(burn_in >= 0, "burn_in must be >= 0");
    for (double s : {sigma_a, sigma_o, sigma_e, sigma_i, sigma_R, sigma_d})
      need(std::isfinite(s) && s >= 0.0, "standard deviations must be >= 0");
    need(rho_d >= 0.0 && rho_d < 1.0, "rho_d must lie in [0, 1)");
    need(rho_o > -1.0 && rho_o < 1.0, "rho_o must lie in (-1, 1)");
    if (mode == SynthMode::arf) {
      need(std::fabs(params.phi - params.v) > 1e-8, "arf mode needs phi != v");
      need(std::fabs(1.0 - params.b * params.c2) > 1e-8, "arf mode needs b c2 != 1");
    }
  }
};

struct SynthOutput {
  MacroDataset data;   // decimal units
  ShockPath shocks;    // true a_t, o_t over the dataset range
};

/// Draws one synthetic dataset. Every month consumes five normals in a fixed order (d^e, o,
/// a or e, policy noise, real-rate noise), so the output is a pure function of the config.
/// The economy starts at the steady state and runs `burn_in` months before the kept sample.
inline SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  const ModelParams& p = cfg.params;
  Rng rng(cfg.seed);
  const auto total = static_cast<std::size_t>(cfg.burn_in + cfg.T);
  const auto keep = static_cast<std::size_t>(cfg.burn_in);
  const std::size_t n = static_cast<std::size_t>(cfg.T);
  std::vector<double> pi(n), gap(n), i_obs(n), R(n), de(n), a_out(n), o_out(n);

  double pi_prev = p.pi_bar, d_prev = p.pi_bar, o_prev = 0.0;
  for (std::size_t t = 0; t < total; ++t) {
    const double d = p.pi_bar + cfg.rho_d * (d_prev - p.pi_bar) + rng.normal(cfg.sigma_d);
    const double o_innov = rng.normal(cfg.sigma_o);
    const double third = rng.normal(cfg.mode == SynthMode::structural ? cfg.sigma_a : cfg.sigma_e);
    const double eta = rng.normal(cfg.sigma_i);
    const double zeta = rng.normal(cfg.sigma_R);

    const double pe = p.gamma * d + (1.0 - p.gamma) * pi_prev;
    const double rule_no_a = p.r + p.pi_bar + p.c1 * (pi_prev - p.pi_bar);
    double a = 0.0, o = 0.0, y = 0.0;
    if (cfg.mode == SynthMode::structural) {
      a = third;
      o = o_innov;
      const double i = rule_no_a + p.c2 * a;
      y = a + o - p.b * (i - pe - p.r);
    } else {
      o = cfg.rho_o * o_prev + o_innov;
      // x = (R - r) net of the demand-shock term in the policy rule
      const double x = rule_no_a - p.r - pe;
      y = (o - third + p.v * p.b * x) / (p.phi - p.v);
      a = (y - o + p.b * x) / (1.0 - p.b * p.c2);
    }
    const double i = rule_no_a + p.c2 * a;
    const double infl = pe + p.v * y + o;
    if (t >= keep) {
      const std::size_t k = t - keep;
      pi[k] = infl;
      gap[k] = y;
      i_obs[k] = i + eta;
      R[k] = i_obs[k] - (cfg.real_rate == RealRateConvention::ex_post ? infl : pe) + zeta;
      de[k] = d;
      a_out[k] = a;
      o_out[k] = o;
    }
    pi_prev = infl;
    d_prev = d;
    o_prev = o;
  }
  const YearMonth s = cfg.start;
  MacroDataset data(TimeSeries(s, std::move(pi), "inflation"), TimeSeries(s, std::move(gap), "gap"),
                    TimeSeries(s, std::move(i_obs), "nominal_rate"), TimeSeries(s, std::move(R), "real_rate"),
                    TimeSeries(s, std::move(de), "exp_depreciation"),
                    TimeSeries(s, std::vector<double>(n, p.pi_bar), "target"), RateUnits::decimal);
  return {std::move(data), ShockPath(TimeSeries(s, std::move(a_out), "a"), TimeSeries(s, std::move(o_out), "o"))};
}

/// Each free parameter scaled by 1 + rel * u with u uniform on (-1, 1); used as a GMM start.
inline ModelParams jittered(const ModelParams& p, double rel, std::uint64_t seed) {
  Rng rng(seed);
  auto x = p.free();
  for (auto& v : x) v *= 1.0 + rel * (2.0 * rng.uniform() - 1.0);
  return ModelParams::from_free(x, p.pi_bar);
}

}  // namespace inflab
