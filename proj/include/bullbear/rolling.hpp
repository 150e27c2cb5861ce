#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bullbear/csv.hpp"
#include "bullbear/forecast.hpp"
#include "bullbear/parallel.hpp"

namespace bullbear::forecast {

struct PredictiveLikelihoodTrace {
  std::string model;
  std::vector<Date> dates;        // evaluation weeks
  std::vector<double> log_pred;   // log p(r_t | r_{1:t-1})
  std::vector<double> cumulative; // running sum of log_pred

  double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }

  void push(Date d, double lp) {
    dates.push_back(d);
    log_pred.push_back(lp);
    cumulative.push_back((cumulative.empty() ? 0.0 : cumulative.back()) + lp);
  }
};

// One evaluation week of the rolling out-of-sample run.
struct OriginForecast {
  Date date;                          // week being forecast
  Eigen::VectorXd state_probs;        // P(s_t | r_{1:t-1}), draw-averaged
  double bull_prob = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double sharpe = 0.0;
  std::map<double, double> var_levels;
  double logscore = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> grid, pdf;  // filled when a density surface is requested
};

struct RollingOptions {
  bool warm_start = true;  // chain continues from the previous origin
  int warm_burn_in = 500;  // burn-in after the first origin when warm
  int draw_thin = 1;       // thin posterior draws per forecast
  std::vector<double> var_levels = {0.01, 0.05};
  int jobs = 1;            // parallel origins (cold start only)
  bool capture_density = false;  // record the per-origin density grid
  int density_points = 801;
  double density_span_sd = 12.0;
};

struct RollingResult {
  std::string model;
  std::vector<OriginForecast> origins;
  PredictiveLikelihoodTrace trace;
  std::vector<std::string> warnings;
};

// An estimator maps a history (plus optional warm-start draw and per-origin
// seed) to a posterior sample. The default wraps gibbs_estimate; tests and
// fixed-parameter runs can inject their own.
using Estimator = std::function<mcmc::PosteriorSample(
    const data::ReturnSeries& history, const mcmc::PosteriorDraw* warm,
    std::uint64_t seed)>;

// Re-estimates at every origin in the window and forecasts one week ahead.
// Evaluation weeks are the anchors with from <= date <= to; each week t is
// scored at the realized return with the analytic mixture density fitted on
// r_{1:t-1}.
inline RollingResult rolling_forecast_with(const data::ReturnSeries& series,
                                           Date from, Date to,
                                           const Estimator& estimator,
                                           std::uint64_t master_seed,
                                           const std::string& model_label,
                                           const RollingOptions& opts = {}) {
  series.validate();
  std::vector<std::size_t> eval_ix;
  for (std::size_t i = 0; i < series.size(); ++i) {
    Date d = series[i].anchor_date;
    if (d >= from && d <= to) eval_ix.push_back(i);
  }
  if (eval_ix.empty())
    throw DataError("no evaluation weeks in [" + from.to_string() + ", " +
                    to.to_string() + "]");
  if (eval_ix.front() < 200)
    throw DataError("first forecast origin leaves only " +
                    std::to_string(eval_ix.front()) +
                    " observations of history (need >= 200)");

  RollingResult out;
  out.model = model_label;
  out.trace.model = model_label;

  struct Slot {
    std::optional<OriginForecast> origin;
    double logscore = 0.0;
    std::string warning;
  };
  std::vector<Slot> slots(eval_ix.size());

  auto run_origin = [&](std::size_t n, const mcmc::PosteriorDraw* warm,
                        mcmc::PosteriorDraw* last_out) {
    std::size_t e = eval_ix[n];
    data::ReturnSeries history = series.prefix(e);
    std::uint64_t seed = derive_seed(master_seed, n);
    try {
      mcmc::PosteriorSample sample = estimator(history, warm, seed);
      if (last_out && !sample.draws.empty()) *last_out = sample.draws.back();
      PredictiveMixture mix =
          predictive_mixture(sample, history, 1, opts.draw_thin);
      OriginForecast of;
      of.date = series[e].anchor_date;
      const int k = sample.spec.states();
      of.state_probs = Eigen::VectorXd::Zero(k);
      std::size_t comps = mix.size();
      for (std::size_t c = 0; c < comps; ++c)
        of.state_probs(int(c % std::size_t(k))) += mix.w[c];
      of.bull_prob = regime::regime_probability(of.state_probs);
      of.mean = mix.mean;
      of.sd = std::sqrt(mix.variance);
      of.sharpe = mix.mean / of.sd;
      for (double level : opts.var_levels)
        of.var_levels[level] = mix.quantile(level);
      of.logscore = mix.logpdf(series[e].log_return);
      if (opts.capture_density) {
        double sd = std::sqrt(mix.variance);
        double lo = mix.mean - opts.density_span_sd * sd;
        double hi = mix.mean + opts.density_span_sd * sd;
        of.grid.resize(std::size_t(opts.density_points));
        of.pdf.resize(std::size_t(opts.density_points));
        for (int i = 0; i < opts.density_points; ++i) {
          of.grid[std::size_t(i)] =
              lo + (hi - lo) * double(i) / double(opts.density_points - 1);
          of.pdf[std::size_t(i)] = mix.pdf(of.grid[std::size_t(i)]);
        }
      }
      slots[n].origin = std::move(of);
      slots[n].logscore = slots[n].origin->logscore;
    } catch (const std::exception& ex) {
      slots[n].warning = "origin " + series[e].anchor_date.to_string() +
                         " skipped: " + ex.what();
    }
  };

  if (opts.warm_start) {
    mcmc::PosteriorDraw last;
    bool have_last = false;
    for (std::size_t n = 0; n < eval_ix.size(); ++n) {
      run_origin(n, have_last ? &last : nullptr, &last);
      if (slots[n].origin) have_last = true;
    }
  } else {
    parallel_for(eval_ix.size(), opts.jobs,
                 [&](std::size_t n) { run_origin(n, nullptr, nullptr); });
  }

  for (std::size_t n = 0; n < eval_ix.size(); ++n) {
    if (!slots[n].origin) {
      out.warnings.push_back(slots[n].warning);
      continue;
    }
    out.origins.push_back(*slots[n].origin);
    out.trace.push(slots[n].origin->date, slots[n].logscore);
  }
  return out;
}

inline RollingResult rolling_forecast(const data::ReturnSeries& series,
                                      const ModelSpec& spec,
                                      const PriorSpec& priors,
                                      const McmcConfig& cfg, Date from, Date to,
                                      const RollingOptions& opts = {}) {
  Estimator est = [&](const data::ReturnSeries& history,
                      const mcmc::PosteriorDraw* warm, std::uint64_t seed) {
    McmcConfig c = cfg;
    c.seed = seed;
    if (opts.warm_start && warm != nullptr) c.burn_in = opts.warm_burn_in;
    return mcmc::gibbs_estimate(history, spec, priors, c, warm);
  };
  return rolling_forecast_with(series, from, to, est, cfg.seed, spec.label(),
                               opts);
}

// --- model comparison -------------------------------------------------------

struct BayesFactorTrace {
  std::string model;
  std::vector<Date> dates;
  std::vector<double> log_bf;  // cumulative_M(t) - cumulative_benchmark(t)
  double final_value = 0.0;
  bool strong_evidence = false;  // |final| > log 5 (Kass-Raftery)
};

inline std::vector<BayesFactorTrace> bayes_factor_trace(
    const std::vector<PredictiveLikelihoodTrace>& traces,
    const std::string& benchmark) {
  const PredictiveLikelihoodTrace* bench = nullptr;
  for (const auto& t : traces)
    if (t.model == benchmark) bench = &t;
  if (!bench) throw DataError("benchmark model '" + benchmark + "' not found");
  std::vector<BayesFactorTrace> out;
  for (const auto& t : traces) {
    if (t.dates.size() != bench->dates.size())
      throw DataError("trace for " + t.model +
                      " covers a different evaluation window than benchmark");
    for (std::size_t i = 0; i < t.dates.size(); ++i)
      if (t.dates[i] != bench->dates[i])
        throw DataError("trace dates for " + t.model +
                        " do not match benchmark");
    BayesFactorTrace bf;
    bf.model = t.model;
    bf.dates = t.dates;
    bf.log_bf.resize(t.dates.size());
    for (std::size_t i = 0; i < t.dates.size(); ++i)
      bf.log_bf[i] = t.cumulative[i] - bench->cumulative[i];
    bf.final_value = bf.log_bf.empty() ? 0.0 : bf.log_bf.back();
    bf.strong_evidence = std::abs(bf.final_value) > std::log(5.0);
    out.push_back(std::move(bf));
  }
  return out;
}

// --- CSV artifacts ----------------------------------------------------------

inline std::string var_column_name(double level) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "var%02d", int(std::lround(level * 100)));
  return buf;
}

inline void write_forecast_csv(const std::vector<OriginForecast>& origins,
                               const std::string& path) {
  if (origins.empty()) throw DataError("no forecasts to write");
  const int k = int(origins.front().state_probs.size());
  csv::Writer w(path);
  std::vector<std::string> head{"date", "bull_prob"};
  for (int j = 1; j <= k; ++j) head.push_back("p_state" + std::to_string(j));
  head.insert(head.end(), {"mean", "sd", "sharpe"});
  for (const auto& [level, _] : origins.front().var_levels)
    head.push_back(var_column_name(level));
  head.push_back("logscore");
  w.raw_row(head);
  for (const auto& o : origins) {
    std::vector<std::string> row{o.date.to_string(),
                                 csv::format_double(o.bull_prob)};
    for (int j = 0; j < k; ++j)
      row.push_back(csv::format_double(o.state_probs(j)));
    row.push_back(csv::format_double(o.mean));
    row.push_back(csv::format_double(o.sd));
    row.push_back(csv::format_double(o.sharpe));
    for (const auto& [_, q] : o.var_levels)
      row.push_back(csv::format_double(q));
    row.push_back(std::isnan(o.logscore) ? ""
                                         : csv::format_double(o.logscore));
    w.raw_row(row);
  }
}

inline std::vector<OriginForecast> read_forecast_csv(const std::string& path) {
  csv::Table t = csv::read_file(path);
  int dc = t.require_column("date");
  int bc = t.require_column("bull_prob");
  std::vector<int> pcols;
  for (int j = 1;; ++j) {
    int c = t.column("p_state" + std::to_string(j));
    if (c < 0) break;
    pcols.push_back(c);
  }
  if (pcols.empty()) throw DataError("no p_state columns in " + path);
  int mc = t.require_column("mean");
  int sc = t.require_column("sd");
  int shc = t.require_column("sharpe");
  int lc = t.column("logscore");
  std::vector<std::pair<double, int>> vcols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const std::string& h = t.header[c];
    if (h.rfind("var", 0) == 0 && h.size() == 5)
      vcols.push_back({std::stod(h.substr(3)) / 100.0, int(c)});
  }
  std::vector<OriginForecast> out;
  for (const auto& row : t.rows) {
    OriginForecast o;
    o.date = Date::parse(row[dc]);
    csv::parse_double(row[bc], o.bull_prob);
    o.state_probs.resize(int(pcols.size()));
    for (std::size_t j = 0; j < pcols.size(); ++j)
      csv::parse_double(row[pcols[j]], o.state_probs(int(j)));
    csv::parse_double(row[mc], o.mean);
    csv::parse_double(row[sc], o.sd);
    csv::parse_double(row[shc], o.sharpe);
    for (const auto& [level, c] : vcols) {
      double v;
      if (csv::parse_double(row[c], v)) o.var_levels[level] = v;
    }
    if (lc >= 0 && !row[lc].empty()) csv::parse_double(row[lc], o.logscore);
    out.push_back(std::move(o));
  }
  return out;
}

inline void write_trace_csv(const PredictiveLikelihoodTrace& trace,
                            const std::string& path) {
  csv::Writer w(path);
  w.raw_row({"model", "date", "log_pred", "cumulative"});
  for (std::size_t i = 0; i < trace.dates.size(); ++i)
    w.raw_row({trace.model, trace.dates[i].to_string(),
               csv::format_double(trace.log_pred[i]),
               csv::format_double(trace.cumulative[i])});
}

inline PredictiveLikelihoodTrace read_trace_csv(const std::string& path) {
  csv::Table t = csv::read_file(path);
  int mc = t.require_column("model");
  int dc = t.require_column("date");
  int lc = t.require_column("log_pred");
  PredictiveLikelihoodTrace tr;
  for (const auto& row : t.rows) {
    if (tr.model.empty()) tr.model = row[mc];
    double lp;
    if (!csv::parse_double(row[lc], lp))
      throw DataError("bad log_pred value in " + path);
    tr.push(Date::parse(row[dc]), lp);
  }
  return tr;
}

inline void write_density_surface_csv(
    const std::vector<std::pair<Date, const ForecastBundle*>>& bundles,
    const std::string& path) {
  csv::Writer w(path);
  w.raw_row({"origin", "grid_point", "pdf"});
  for (const auto& [date, b] : bundles)
    for (std::size_t i = 0; i < b->grid.size(); ++i)
      w.raw_row({date.to_string(), csv::format_double(b->grid[i]),
                 csv::format_double(b->pdf[i])});
}

inline void write_density_surface_csv(
    const std::vector<OriginForecast>& origins, const std::string& path) {
  csv::Writer w(path);
  w.raw_row({"origin", "grid_point", "pdf"});
  for (const auto& o : origins)
    for (std::size_t i = 0; i < o.grid.size(); ++i)
      w.raw_row({o.date.to_string(), csv::format_double(o.grid[i]),
                 csv::format_double(o.pdf[i])});
}

}  // namespace bullbear::forecast
