#pragma once

#include <array>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "inflab/series.hpp"

namespace inflab {

/// How rate series (inflation, interest rates, depreciation, target) are expressed.
/// The gap is always a dimensionless fraction.
enum class RateUnits { percent, decimal };

inline constexpr double kPercentPerUnit = 100.0;

inline const char* to_string(RateUnits u) { return u == RateUnits::percent ? "percent" : "decimal"; }

inline RateUnits parse_rate_units(std::string_view s) {
  if (s == "percent") return RateUnits::percent;
  if (s == "decimal") return RateUnits::decimal;
  throw std::invalid_argument("unknown rate units '" + std::string(s) + "'");
}

/// Observables of the estimation system, all on one monthly range.
class MacroDataset {
 public:
  MacroDataset(TimeSeries inflation, TimeSeries gap, TimeSeries nominal_rate, TimeSeries real_rate,
               TimeSeries exp_depreciation, TimeSeries target, RateUnits units)
      : inflation_(std::move(inflation)),
        gap_(std::move(gap)),
        nominal_rate_(std::move(nominal_rate)),
        real_rate_(std::move(real_rate)),
        exp_depreciation_(std::move(exp_depreciation)),
        target_(std::move(target)),
        units_(units) {
    for (const TimeSeries* s : members()) {
      if (s->start() != inflation_.start() || s->size() != inflation_.size())
        throw std::invalid_argument("dataset member '" + s->name() + "' spans " + s->start().str() + ".." +
                                    s->end().str() + ", expected " + inflation_.start().str() + ".." +
                                    inflation_.end().str());
    }
  }

  [[nodiscard]] const TimeSeries& inflation() const { return inflation_; }
  [[nodiscard]] const TimeSeries& gap() const { return gap_; }
  [[nodiscard]] const TimeSeries& nominal_rate() const { return nominal_rate_; }
  [[nodiscard]] const TimeSeries& real_rate() const { return real_rate_; }
  [[nodiscard]] const TimeSeries& exp_depreciation() const { return exp_depreciation_; }
  [[nodiscard]] const TimeSeries& target() const { return target_; }
  [[nodiscard]] RateUnits units() const { return units_; }
  [[nodiscard]] std::size_t size() const { return inflation_.size(); }
  [[nodiscard]] YearMonth start() const { return inflation_.start(); }
  [[nodiscard]] YearMonth end() const { return inflation_.end(); }

  [[nodiscard]] std::array<const TimeSeries*, 6> members() const {
    return {&inflation_, &gap_, &nominal_rate_, &real_rate_, &exp_depreciation_, &target_};
  }

  /// Copy with every rate series in the requested units. The gap is left alone.
  [[nodiscard]] MacroDataset in_units(RateUnits to) const {
    if (to == units_) return *this;
    const double f = to == RateUnits::decimal ? 1.0 / kPercentPerUnit : kPercentPerUnit;
    auto scale = [f](const TimeSeries& s) { return map(s, [f](double v) { return v * f; }); };
    return {scale(inflation_), gap_, scale(nominal_rate_), scale(real_rate_), scale(exp_depreciation_),
            scale(target_), to};
  }

  [[nodiscard]] MacroDataset slice(YearMonth from, YearMonth to) const {
    return {inflation_.slice(from, to),    gap_.slice(from, to),
            nominal_rate_.slice(from, to), real_rate_.slice(from, to),
            exp_depreciation_.slice(from, to), target_.slice(from, to), units_};
  }

  bool operator==(const MacroDataset&) const = default;

 private:
  TimeSeries inflation_, gap_, nominal_rate_, real_rate_, exp_depreciation_, target_;
  RateUnits units_;
};

inline constexpr std::array<const char*, 6> kDatasetColumns = {"inflation",        "gap",   "nominal_rate", "real_rate",
                                                                "exp_depreciation", "target"};

/// Dataset CSV: a `# rate_units: <percent|decimal>` line, then `date,<six columns>`.
inline void write_dataset_csv(std::ostream& out, const MacroDataset& d) {
  out << "# rate_units: " << to_string(d.units()) << '\n';
  out << "date";
  for (auto c : kDatasetColumns) out << ',' << c;
  out << '\n';
  auto cols = d.members();
  for (std::size_t t = 0; t < d.size(); ++t) {
    out << (d.start() + static_cast<long>(t)).str();
    for (const TimeSeries* s : cols) out << ',' << format_double((*s)[t]);
    out << '\n';
  }
}

inline MacroDataset read_dataset_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  RateUnits units = RateUnits::percent;
  bool header = false;
  std::vector<std::vector<double>> cols(kDatasetColumns.size());
  YearMonth start, prev;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = detail::trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      constexpr std::string_view key = "# rate_units:";
      if (text.starts_with(key)) units = parse_rate_units(detail::trim(text.substr(key.size())));
      continue;
    }
    auto f = detail::split(text);
    if (!header) {
      bool ok = f.size() == kDatasetColumns.size() + 1 && f[0] == "date";
      for (std::size_t k = 0; ok && k < kDatasetColumns.size(); ++k) ok = f[k + 1] == kDatasetColumns[k];
      if (!ok) throw std::invalid_argument("line " + std::to_string(lineno) + ": unexpected dataset header");
      header = true;
      continue;
    }
    if (f.size() != kDatasetColumns.size() + 1)
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(kDatasetColumns.size() + 1) + " columns");
    YearMonth m = YearMonth::parse(f[0]);
    if (rows == 0)
      start = m;
    else if (m != prev + 1)
      throw std::invalid_argument("line " + std::to_string(lineno) + ": month " + m.str() + " does not follow " +
                                  prev.str());
    for (std::size_t k = 0; k < kDatasetColumns.size(); ++k) cols[k].push_back(parse_double(f[k + 1], lineno));
    prev = m;
    ++rows;
  }
  if (rows == 0) throw std::invalid_argument("dataset has no rows");
  auto mk = [&](std::size_t k) { return TimeSeries(start, std::move(cols[k]), kDatasetColumns[k]); };
  return {mk(0), mk(1), mk(2), mk(3), mk(4), mk(5), units};
}

}  // namespace inflab
