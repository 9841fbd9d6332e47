#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace inflab {

/// Calendar month. Ordered and usable as an integer index (year * 12 + month - 1).
class YearMonth {
 public:
  constexpr YearMonth() = default;
  constexpr YearMonth(int year, int month) : year_(year), month_(month) {
    if (month < 1 || month > 12) throw std::invalid_argument("month must be in 1..12");
  }

  static constexpr YearMonth from_index(long idx) {
    long y = idx >= 0 ? idx / 12 : (idx - 11) / 12;
    return {static_cast<int>(y), static_cast<int>(idx - y * 12) + 1};
  }

  /// Parses `YYYY-MM`.
  static YearMonth parse(std::string_view text) {
    auto bad = [&] { return std::invalid_argument("bad month '" + std::string(text) + "', expected YYYY-MM"); };
    if (text.size() != 7 || text[4] != '-') throw bad();
    int y = 0, m = 0;
    auto r1 = std::from_chars(text.data(), text.data() + 4, y);
    auto r2 = std::from_chars(text.data() + 5, text.data() + 7, m);
    if (r1.ec != std::errc{} || r1.ptr != text.data() + 4 || r2.ec != std::errc{} || r2.ptr != text.data() + 7)
      throw bad();
    if (m < 1 || m > 12) throw bad();
    return {y, m};
  }

  [[nodiscard]] constexpr int year() const { return year_; }
  [[nodiscard]] constexpr int month() const { return month_; }
  [[nodiscard]] constexpr long index() const { return static_cast<long>(year_) * 12 + (month_ - 1); }

  [[nodiscard]] std::string str() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year_, month_);
    return buf;
  }

  constexpr YearMonth operator+(long months) const { return from_index(index() + months); }
  constexpr YearMonth operator-(long months) const { return from_index(index() - months); }
  constexpr long operator-(const YearMonth& o) const { return index() - o.index(); }
  constexpr auto operator<=>(const YearMonth& o) const { return index() <=> o.index(); }
  constexpr bool operator==(const YearMonth& o) const = default;

 private:
  int year_ = 2000;
  int month_ = 1;
};

/// Monthly series with no holes: value i belongs to month start + i.
class TimeSeries {
 public:
  TimeSeries(YearMonth start, std::vector<double> values, std::string name = {})
      : start_(start), values_(std::move(values)), name_(std::move(name)) {
    if (values_.empty()) throw std::invalid_argument("series '" + name_ + "' is empty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]))
        throw std::invalid_argument("series '" + name_ + "' has a missing or non-finite value at " +
                                    (start_ + static_cast<long>(i)).str());
    }
  }

  [[nodiscard]] YearMonth start() const { return start_; }
  [[nodiscard]] YearMonth end() const { return start_ + static_cast<long>(values_.size()) - 1; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] std::span<const double> values() const& { return values_; }
  [[nodiscard]] std::vector<double> values() && { return std::move(values_); }
  [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }

  /// Value at a calendar month; throws if outside the range.
  [[nodiscard]] double at(YearMonth m) const {
    long off = m - start_;
    if (off < 0 || off >= static_cast<long>(values_.size()))
      throw std::out_of_range("month " + m.str() + " outside series '" + name_ + "'");
    return values_[static_cast<std::size_t>(off)];
  }

  [[nodiscard]] bool contains(YearMonth m) const { return m >= start_ && m <= end(); }

  /// Sub-range [from, to], both inclusive and inside this series.
  [[nodiscard]] TimeSeries slice(YearMonth from, YearMonth to) const {
    if (from > to || !contains(from) || !contains(to))
      throw std::out_of_range("slice " + from.str() + ".." + to.str() + " outside series '" + name_ + "'");
    auto b = values_.begin() + (from - start_);
    return {from, std::vector<double>(b, b + (to - from) + 1), name_};
  }

  [[nodiscard]] TimeSeries renamed(std::string name) const { return {start_, values_, std::move(name)}; }

  bool operator==(const TimeSeries&) const = default;

 private:
  YearMonth start_;
  std::vector<double> values_;
  std::string name_;
};

/// Elementwise transform keeping the calendar.
template <typename F>
TimeSeries map(const TimeSeries& x, F&& f, std::string name = {}) {
  std::vector<double> out(x.size());
  std::transform(x.values().begin(), x.values().end(), out.begin(), f);
  return {x.start(), std::move(out), name.empty() ? x.name() : std::move(name)};
}

/// 100 * (x[t] / x[t - lag] - 1).
inline TimeSeries yoy_pct_change(const TimeSeries& x, int lag_months) {
  if (lag_months < 1) throw std::invalid_argument("lag must be positive");
  const auto lag = static_cast<std::size_t>(lag_months);
  if (x.size() <= lag)
    throw std::invalid_argument("series '" + x.name() + "' needs more than " + std::to_string(lag) + " months");
  std::vector<double> out(x.size() - lag);
  for (std::size_t t = lag; t < x.size(); ++t) {
    double base = x[t - lag];
    if (base == 0.0)
      throw std::domain_error("zero base value in '" + x.name() + "' at " + (x.start() + static_cast<long>(t - lag)).str());
    out[t - lag] = 100.0 * (x[t] / base - 1.0);
  }
  return {x.start() + lag_months, std::move(out), x.name()};
}

/// Mean of the `window` months strictly before t. The first output month is start + window.
inline TimeSeries trailing_mean(const TimeSeries& x, int window) {
  if (window < 1) throw std::invalid_argument("window must be positive");
  const auto w = static_cast<std::size_t>(window);
  if (w >= x.size())
    throw std::invalid_argument("window " + std::to_string(w) + " leaves no output for series '" + x.name() + "'");
  std::vector<double> out(x.size() - w);
  for (std::size_t t = w; t < x.size(); ++t) {
    double s = 0.0;
    for (std::size_t k = t - w; k < t; ++k) s += x[k];
    out[t - w] = s / static_cast<double>(w);
  }
  return {x.start() + window, std::move(out), x.name()};
}

/// Ratio splice: `old_base` is rescaled by the mean of new/old over the overlap and used only
/// before `new_base` starts. Values inside new_base's range are copied unchanged.
inline TimeSeries splice(const TimeSeries& old_base, const TimeSeries& new_base) {
  YearMonth lo = std::max(old_base.start(), new_base.start());
  YearMonth hi = std::min(old_base.end(), new_base.end());
  if (lo > hi) throw std::invalid_argument("series '" + old_base.name() + "' and '" + new_base.name() + "' do not overlap");
  double ratio_sum = 0.0;
  for (YearMonth m = lo; m <= hi; m = m + 1) {
    double o = old_base.at(m), n = new_base.at(m);
    if (o == 0.0 || n == 0.0) throw std::domain_error("zero value in splice overlap at " + m.str());
    ratio_sum += n / o;
  }
  const double k = ratio_sum / static_cast<double>((hi - lo) + 1);

  YearMonth start = std::min(old_base.start(), new_base.start());
  YearMonth end = std::max(new_base.end(), old_base.end());
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(end - start) + 1);
  for (YearMonth m = start; m <= end; m = m + 1) {
    if (new_base.contains(m))
      out.push_back(new_base.at(m));
    else if (old_base.contains(m))
      out.push_back(k * old_base.at(m));
    else
      throw std::invalid_argument("splice would leave a gap at " + m.str());
  }
  return {start, std::move(out), new_base.name()};
}

/// Trims every series to the common intersection of their ranges.
inline std::vector<TimeSeries> align(std::span<const TimeSeries> series) {
  if (series.empty()) throw std::invalid_argument("align: no series");
  YearMonth lo = series.front().start(), hi = series.front().end();
  for (const auto& s : series) {
    lo = std::max(lo, s.start());
    hi = std::min(hi, s.end());
  }
  if (lo > hi) {
    // name the series whose range is binding on each side
    std::string late, early;
    for (const auto& s : series) {
      if (s.start() == lo) late = s.name();
      if (s.end() == hi) early = s.name();
    }
    throw std::invalid_argument("align: empty intersection ('" + late + "' starts " + lo.str() + " after '" + early +
                                "' ends " + hi.str() + ")");
  }
  std::vector<TimeSeries> out;
  out.reserve(series.size());
  for (const auto& s : series) out.push_back(s.slice(lo, hi));
  return out;
}

inline std::vector<TimeSeries> align(std::initializer_list<TimeSeries> series) {
  return align(std::span<const TimeSeries>(series.begin(), series.size()));
}

inline TimeSeries log_series(const TimeSeries& x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0))
      throw std::domain_error("log of non-positive value in '" + x.name() + "' at " +
                              (x.start() + static_cast<long>(i)).str());
  }
  return map(x, [](double v) { return std::log(v); });
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view text, std::size_t line) {
  double v = 0.0;
  auto first = text.data(), last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  auto r = std::from_chars(first, last, v);
  if (r.ec != std::errc{} || r.ptr != last || text.empty())
    throw std::invalid_argument("line " + std::to_string(line) + ": bad number '" + std::string(text) + "'");
  return v;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = line.find(sep, pos);
    out.push_back(trim(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace detail

/// Reads `date,value` with a header row; months must be consecutive and ascending.
inline TimeSeries read_series_csv(std::istream& in, std::string name) {
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<double> values;
  YearMonth start, prev;
  while (std::getline(in, line)) {
    ++lineno;
    auto text = detail::trim(line);
    if (text.empty()) continue;
    auto cols = detail::split(text);
    if (!header) {
      if (cols.size() != 2 || cols[0] != "date")
        throw std::invalid_argument("line " + std::to_string(lineno) + ": expected header 'date,value'");
      header = true;
      continue;
    }
    if (cols.size() != 2)
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected 2 columns, got " +
                                  std::to_string(cols.size()));
    YearMonth m;
    try {
      m = YearMonth::parse(cols[0]);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (values.empty()) {
      start = m;
    } else if (m != prev + 1) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": month " + m.str() + " does not follow " +
                                  prev.str());
    }
    values.push_back(parse_double(cols[1], lineno));
    prev = m;
  }
  if (!header) throw std::invalid_argument("missing header row");
  if (values.empty()) throw std::invalid_argument("no data rows");
  return {start, std::move(values), std::move(name)};
}

inline TimeSeries read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return read_series_csv(in, path);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

inline void write_series_csv(std::ostream& out, const TimeSeries& x) {
  out << "date,value\n";
  for (std::size_t i = 0; i < x.size(); ++i)
    out << (x.start() + static_cast<long>(i)).str() << ',' << format_double(x[i]) << '\n';
}

}  // namespace inflab
