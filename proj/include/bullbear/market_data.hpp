#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bullbear/csv.hpp"
#include "bullbear/dates.hpp"
#include "bullbear/errors.hpp"
#include "bullbear/math.hpp"

namespace bullbear::data {

struct DailyBar {
  Date date;
  double adjusted_close = 0.0;  // > 0
};

struct DailyYield {
  Date date;
  double yield_percent = 0.0;  // annualized, in percent
};

// One week of the return series. Returns and realized variance are scaled by
// 100 (and 100^2) to match the weekly-percent convention used throughout.
struct WeeklyObservation {
  Date anchor_date;
  double log_return = 0.0;
  double realized_variance = 0.0;
  double risk_free = 0.0;

  bool operator==(const WeeklyObservation&) const = default;
};

struct ReturnSeries {
  std::vector<WeeklyObservation> observations;

  std::size_t size() const { return observations.size(); }
  bool empty() const { return observations.empty(); }
  const WeeklyObservation& operator[](std::size_t i) const {
    return observations[i];
  }

  std::vector<double> returns() const {
    std::vector<double> r(observations.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = observations[i].log_return;
    return r;
  }

  // First index with anchor_date >= d, or size() if none.
  std::size_t lower_bound(Date d) const {
    auto it = std::lower_bound(
        observations.begin(), observations.end(), d,
        [](const WeeklyObservation& o, Date x) { return o.anchor_date < x; });
    return std::size_t(it - observations.begin());
  }

  ReturnSeries prefix(std::size_t n) const {
    ReturnSeries s;
    s.observations.assign(observations.begin(), observations.begin() + n);
    return s;
  }

  void validate() const {
    for (std::size_t i = 1; i < observations.size(); ++i)
      if (!(observations[i - 1].anchor_date < observations[i].anchor_date))
        throw DataError("weekly series anchors not strictly increasing at " +
                        observations[i].anchor_date.to_string());
    for (const auto& o : observations) {
      if (!std::isfinite(o.log_return))
        throw DataError("non-finite weekly return at " +
                        o.anchor_date.to_string());
      if (o.realized_variance < 0.0)
        throw DataError("negative realized variance at " +
                        o.anchor_date.to_string());
    }
  }
};

// Fingerprint used to tie a posterior sample to the series it was fit on.
inline std::uint64_t series_hash(const ReturnSeries& s) {
  std::uint64_t h = fnv1a64_append(0xcbf29ce484222325ull,
                                   std::int64_t(s.observations.size()));
  for (const auto& o : s.observations) {
    h = fnv1a64_append(h, o.anchor_date.days_since_epoch());
    h = fnv1a64_append(h, o.log_return);
    h = fnv1a64_append(h, o.realized_variance);
    h = fnv1a64_append(h, o.risk_free);
  }
  return h;
}

struct ColumnMap {
  std::string date = "Date";
  std::string value = "Adj Close";
};

struct LoadStats {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;    // unparseable or nonpositive price
  std::size_t duplicates = 0;      // identical (date, value) repeats
};

namespace detail {

inline double value_of(const DailyBar& b) { return b.adjusted_close; }
inline double value_of(const DailyYield& y) { return y.yield_percent; }

template <typename Row>
std::vector<Row> load_dated_values(const std::string& path,
                                   const ColumnMap& cols, LoadStats* stats) {
  csv::Table t = csv::read_file(path);
  int dc = t.require_column(cols.date);
  int vc = t.require_column(cols.value);
  LoadStats st;
  std::vector<Row> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    ++st.rows_read;
    if (int(row.size()) <= std::max(dc, vc)) {
      ++st.rows_dropped;
      continue;
    }
    double v;
    if (!csv::parse_double(row[vc], v) || !std::isfinite(v)) {
      ++st.rows_dropped;
      continue;
    }
    Date d;
    try {
      d = Date::parse(row[dc]);
    } catch (const DataError&) {
      ++st.rows_dropped;
      continue;
    }
    out.push_back(Row{d, v});
  }
  std::stable_sort(out.begin(), out.end(), [](const Row& a, const Row& b) {
    return a.date < b.date;
  });
  // Identical duplicate rows collapse; conflicting duplicates are an error.
  std::vector<Row> dedup;
  dedup.reserve(out.size());
  for (const auto& r : out) {
    if (!dedup.empty() && dedup.back().date == r.date) {
      if (value_of(dedup.back()) == value_of(r)) {
        ++st.duplicates;
        continue;
      }
      throw DataError("conflicting duplicate rows for date " +
                      r.date.to_string() + " in " + path);
    }
    dedup.push_back(r);
  }
  if (stats) *stats = st;
  if (dedup.empty()) throw DataError("no valid rows in " + path);
  return dedup;
}

}  // namespace detail

inline std::vector<DailyBar> load_daily_prices(const std::string& path,
                                               const ColumnMap& cols = {},
                                               LoadStats* stats = nullptr) {
  auto bars = detail::load_dated_values<DailyBar>(path, cols, stats);
  std::vector<DailyBar> ok;
  ok.reserve(bars.size());
  for (const auto& b : bars) {
    if (b.adjusted_close > 0.0) {
      ok.push_back(b);
    } else if (stats) {
      ++stats->rows_dropped;
    }
  }
  if (ok.empty()) throw DataError("no valid rows in " + path);
  return ok;
}

inline std::vector<DailyYield> load_yield_series(const std::string& path,
                                                 const ColumnMap& cols = {},
                                                 LoadStats* stats = nullptr) {
  return detail::load_dated_values<DailyYield>(path, cols, stats);
}

enum class AnchorDay { Wednesday, Thursday };

inline std::chrono::weekday anchor_weekday(AnchorDay a) {
  return a == AnchorDay::Wednesday ? std::chrono::Wednesday
                                   : std::chrono::Thursday;
}

// Builds the weekly return series from daily closes. The anchor is the
// primary weekday if traded that week, else the following day; weeks with
// neither telescope into the next available anchor, so the cumulative
// log-price is preserved exactly. Realized variance sums squared daily
// log-returns over each anchor-to-anchor span. The weekly risk-free leg
// converts the annualized yield in effect at the span start using the span's
// calendar-day length over 365.
inline ReturnSeries build_weekly_series(
    std::span<const DailyBar> daily,
    std::span<const DailyYield> rf_daily = {},
    AnchorDay anchor = AnchorDay::Wednesday) {
  const auto primary = anchor_weekday(anchor);
  const auto fallback = primary + std::chrono::days{1};

  // anchor indices into `daily`
  std::vector<std::size_t> anchors;
  std::size_t i = 0;
  while (i < daily.size()) {
    Date monday = daily[i].date.week_monday();
    std::size_t primary_ix = SIZE_MAX, fallback_ix = SIZE_MAX;
    std::size_t j = i;
    for (; j < daily.size() && daily[j].date.week_monday() == monday; ++j) {
      auto wd = daily[j].date.weekday();
      if (wd == primary) primary_ix = j;
      if (wd == fallback) fallback_ix = j;
    }
    if (primary_ix != SIZE_MAX)
      anchors.push_back(primary_ix);
    else if (fallback_ix != SIZE_MAX)
      anchors.push_back(fallback_ix);
    i = j;
  }
  if (anchors.size() < 2)
    throw DataError("need at least 2 weekly anchors, found " +
                    std::to_string(anchors.size()));

  // daily squared log-returns, indexed by the bar that closes the move
  std::vector<double> daily_sq(daily.size(), 0.0);
  for (std::size_t d = 1; d < daily.size(); ++d) {
    double r = 100.0 * (std::log(daily[d].adjusted_close) -
                        std::log(daily[d - 1].adjusted_close));
    daily_sq[d] = r * r;
  }

  auto yield_at = [&](Date when) -> double {
    if (rf_daily.empty()) return 0.0;
    auto it = std::upper_bound(
        rf_daily.begin(), rf_daily.end(), when,
        [](Date x, const DailyYield& y) { return x < y.date; });
    if (it == rf_daily.begin()) return rf_daily.front().yield_percent;
    return std::prev(it)->yield_percent;
  };

  ReturnSeries out;
  out.observations.reserve(anchors.size() - 1);
  for (std::size_t a = 1; a < anchors.size(); ++a) {
    std::size_t prev = anchors[a - 1], cur = anchors[a];
    WeeklyObservation obs;
    obs.anchor_date = daily[cur].date;
    obs.log_return = 100.0 * (std::log(daily[cur].adjusted_close) -
                              std::log(daily[prev].adjusted_close));
    double rv = 0.0;
    for (std::size_t d = prev + 1; d <= cur; ++d) rv += daily_sq[d];
    obs.realized_variance = rv;
    if (!rf_daily.empty()) {
      double span_days =
          double(days_between(daily[prev].date, daily[cur].date));
      double y = yield_at(daily[prev].date);
      obs.risk_free = 100.0 * std::log1p(y / 100.0) * span_days / 365.0;
    }
    out.observations.push_back(obs);
  }
  out.validate();
  return out;
}

struct SummaryStats {
  std::size_t count = 0;
  double mean = 0.0;
  double mean_rv_sqrt = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

inline SummaryStats summary_stats(const ReturnSeries& series) {
  if (series.size() < 4)
    throw DataError("series too short for summary statistics (need >= 4)");
  std::vector<double> r = series.returns();
  Moments m = moments(r);
  if (!(m.variance > 0.0))
    throw NumericalError("zero return variance: higher moments undefined");
  SummaryStats s;
  s.count = series.size();
  s.mean = m.mean;
  double rv = 0.0;
  for (const auto& o : series.observations)
    rv += std::sqrt(o.realized_variance);
  s.mean_rv_sqrt = rv / double(series.size());
  s.skewness = m.skewness;
  s.excess_kurtosis = m.excess_kurtosis;
  return s;
}

inline void save_weekly_csv(const ReturnSeries& series,
                            const std::string& path) {
  csv::Writer w(path);
  w.raw_row({"anchor_date", "log_return", "realized_variance", "risk_free"});
  for (const auto& o : series.observations)
    w.raw_row({o.anchor_date.to_string(), csv::format_double(o.log_return),
               csv::format_double(o.realized_variance),
               csv::format_double(o.risk_free)});
}

inline ReturnSeries load_weekly_csv(const std::string& path) {
  csv::Table t = csv::read_file(path);
  int dc = t.require_column("anchor_date");
  int rc = t.require_column("log_return");
  int vc = t.require_column("realized_variance");
  int fc = t.require_column("risk_free");
  ReturnSeries s;
  s.observations.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    WeeklyObservation o;
    o.anchor_date = Date::parse(row[dc]);
    if (!csv::parse_double(row[rc], o.log_return) ||
        !csv::parse_double(row[vc], o.realized_variance) ||
        !csv::parse_double(row[fc], o.risk_free))
      throw DataError("bad numeric field in " + path + " at " + row[dc]);
    s.observations.push_back(o);
  }
  if (s.empty()) throw DataError("no weekly observations in " + path);
  s.validate();
  return s;
}

}  // namespace bullbear::data
