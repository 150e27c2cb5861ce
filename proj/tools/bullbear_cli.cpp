// bullbear: bull/bear regime estimation, forecasting and market-timing CLI.
//
// Subcommands: ingest, estimate, smooth, forecast, backtest, compare, sweep.
// Options can come from a JSON config file (--config); command-line flags
// take precedence over the file, which takes precedence over defaults.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "bullbear/bullbear.hpp"

namespace bb = bullbear;
using nlohmann::json;

namespace {

// --- config file overlay ----------------------------------------------------

std::string g_config_path;

class ConfigFile {
 public:
  // Loads the file named by --config the first time a subcommand needs it.
  void ensure_loaded() {
    if (loaded_ || g_config_path.empty()) return;
    std::ifstream in(g_config_path);
    if (!in) throw bb::DataError("cannot open config file: " + g_config_path);
    try {
      in >> doc_;
    } catch (const json::exception& e) {
      throw bb::DataError("bad config file " + g_config_path + ": " +
                          e.what());
    }
    loaded_ = true;
  }

  // Applies doc[key] to `target` unless the CLI flag was given explicitly.
  template <typename T>
  void overlay(const CLI::App& app, const std::string& flag,
               const std::string& key, T& target) const {
    if (doc_.is_null() || !doc_.contains(key)) return;
    const CLI::Option* opt = app.get_option_no_throw(flag);
    if (opt != nullptr && opt->count() > 0) return;
    try {
      target = doc_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw bb::DataError("config key '" + key + "': " + e.what());
    }
  }

  const json& doc() const { return doc_; }

 private:
  json doc_;
  bool loaded_ = false;
};

std::string state_label(int state0, int k) {
  if (k == 4) {
    const char* names[] = {"bear", "bear rally", "bull correction", "bull"};
    return names[state0];
  }
  return state0 == 0 ? "bear" : "bull";
}

double quantile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double pos = q * double(v.size() - 1);
  std::size_t lo = std::size_t(pos);
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - double(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

std::vector<double> parse_grid(const std::string& text) {
  // either "lo:hi:step" or a comma-separated list
  std::vector<double> grid;
  if (text.find(':') != std::string::npos) {
    double lo, hi, step;
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 ||
        step <= 0.0 || hi < lo)
      throw bb::UsageError("bad grid '" + text + "' (expected lo:hi:step)");
    for (double v = lo; v <= hi + 1e-12; v += step) grid.push_back(v);
  } else {
    for (const auto& tok : bb::csv::split_line(text, ',')) {
      double v;
      if (!bb::csv::parse_double(tok, v))
        throw bb::UsageError("bad grid value '" + tok + "'");
      grid.push_back(v);
    }
  }
  return grid;
}

// realized weekly observations matching the signal dates, in order
bb::data::ReturnSeries align_realized(
    const bb::data::ReturnSeries& weekly,
    const std::vector<bb::forecast::OriginForecast>& signals) {
  bb::data::ReturnSeries out;
  for (const auto& s : signals) {
    std::size_t i = weekly.lower_bound(s.date);
    if (i >= weekly.size() || weekly[i].anchor_date != s.date)
      throw bb::DataError("signal week " + s.date.to_string() +
                          " not present in the weekly series");
    out.observations.push_back(weekly[i]);
  }
  return out;
}

void check_posterior_matches(const bb::mcmc::PosteriorSample& sample,
                             const bb::data::ReturnSeries& series,
                             bool allow_mismatch) {
  if (sample.data_hash == bb::data::series_hash(series)) return;
  if (allow_mismatch) {
    std::cerr << "warning: posterior was estimated on a different series "
                 "(--allow-mismatch given)\n";
    return;
  }
  throw bb::DataError(
      "posterior data fingerprint does not match the weekly series "
      "(use --allow-mismatch to override)");
}

// --- estimate report --------------------------------------------------------

void print_estimate_report(const bb::mcmc::PosteriorSample& sample,
                           std::size_t n_obs) {
  const int k = sample.spec.states();
  const auto& draws = sample.draws;
  std::printf("Posterior estimates: model %s, %zu observations, %zu draws\n",
              sample.spec.label().c_str(), n_obs, draws.size());
  std::printf("%-16s %9s %19s %9s %19s %9s\n", "state", "mu", "95% DI", "sigma",
              "95% DI", "mu/sigma");
  for (int j = 0; j < k; ++j) {
    std::vector<double> mu, sig, ratio;
    mu.reserve(draws.size());
    for (const auto& d : draws) {
      mu.push_back(d.params.mu[j]);
      sig.push_back(d.params.sigma[j]);
      ratio.push_back(d.params.mu[j] / d.params.sigma[j]);
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / double(v.size());
    };
    std::printf("%-16s %9.3f (%8.3f,%8.3f) %9.3f (%8.3f,%8.3f) %9.3f\n",
                state_label(j, k).c_str(), mean(mu), quantile_of(mu, 0.025),
                quantile_of(mu, 0.975), mean(sig), quantile_of(sig, 0.025),
                quantile_of(sig, 0.975), mean(ratio));
  }
  if (sample.spec.student_t()) {
    std::printf("%-16s", "dof (nu)");
    for (int j = 0; j < k; ++j) {
      std::vector<double> nu;
      for (const auto& d : draws) nu.push_back((*d.params.nu)[j]);
      double s = 0;
      for (double x : nu) s += x;
      std::printf(" %8.2f", s / double(nu.size()));
    }
    std::printf("\n");
  }

  Eigen::MatrixXd pbar = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd pibar = Eigen::VectorXd::Zero(k);
  std::size_t pi_ok = 0;
  for (const auto& d : draws) {
    pbar += d.P.p;
    try {
      pibar += bb::regime::stationary_distribution(d.P).pi;
      ++pi_ok;
    } catch (const bb::NumericalError&) {
    }
  }
  pbar /= double(draws.size());
  if (pi_ok > 0) pibar /= double(pi_ok);

  std::printf("Transition matrix (posterior means):\n");
  for (int i = 0; i < k; ++i) {
    std::printf(" ");
    for (int j = 0; j < k; ++j) std::printf(" %7.3f", pbar(i, j));
    std::printf("\n");
  }
  std::printf("Unconditional state probabilities:");
  for (int j = 0; j < k; ++j) std::printf(" %6.3f", pibar(j));
  std::printf("\n");
  if (k == 4) {
    double bull_prob = pibar(2) + pibar(3);
    std::printf("Long-run bull regime probability: %.3f\n", bull_prob);
  }
  if (sample.diagnostics.longrun_exhaustions > 0)
    std::printf("note: long-run rejection cap hit in %ld sweeps\n",
                sample.diagnostics.longrun_exhaustions);
}

// --- commands ----------------------------------------------------------------

struct GlobalArgs {
  std::string config_path;
};

int cmd_ingest(CLI::App& app, ConfigFile& cfg) {
  static std::string daily, rf, out, date_col = "Date",
                     price_col = "Adj Close", rf_date_col = "Date",
                     rf_yield_col = "Yield", anchor = "wednesday";
  app.add_option("--daily", daily, "daily price CSV (date, adjusted close)");
  app.add_option("--rf", rf, "daily risk-free yield CSV (annualized %)");
  app.add_option("--out", out, "output weekly series CSV");
  app.add_option("--date-col", date_col, "price date column name");
  app.add_option("--price-col", price_col, "price value column name");
  app.add_option("--rf-date-col", rf_date_col, "risk-free date column name");
  app.add_option("--rf-yield-col", rf_yield_col, "risk-free yield column name");
  app.add_option("--anchor", anchor, "weekly anchor day: wednesday|thursday")
      ->check(CLI::IsMember({"wednesday", "thursday"}));

  app.callback([&]() {
    cfg.ensure_loaded();
    cfg.overlay(app, "--daily", "daily", daily);
    cfg.overlay(app, "--rf", "rf", rf);
    cfg.overlay(app, "--out", "weekly", out);
    cfg.overlay(app, "--anchor", "anchor", anchor);
    if (daily.empty()) throw bb::UsageError("--daily is required");
    if (out.empty()) throw bb::UsageError("--out is required");

    bb::data::LoadStats stats;
    auto bars = bb::data::load_daily_prices(
        daily, {.date = date_col, .value = price_col}, &stats);
    std::vector<bb::data::DailyYield> yields;
    if (!rf.empty())
      yields = bb::data::load_yield_series(
          rf, {.date = rf_date_col, .value = rf_yield_col});
    auto day = anchor == "thursday" ? bb::data::AnchorDay::Thursday
                                    : bb::data::AnchorDay::Wednesday;
    auto series = bb::data::build_weekly_series(bars, yields, day);
    bb::data::save_weekly_csv(series, out);

    auto s = bb::data::summary_stats(series);
    std::printf("Weekly return statistics\n");
    std::printf("%8s %8s %14s %10s %16s\n", "N", "Mean", "Mean(RV^.5)",
                "Skewness", "Excess Kurtosis");
    std::printf("%8zu %8.3f %14.3f %10.3f %16.3f\n", s.count, s.mean,
                s.mean_rv_sqrt, s.skewness, s.excess_kurtosis);
    std::printf("daily rows read: %zu, dropped: %zu, duplicates: %zu\n",
                stats.rows_read, stats.rows_dropped, stats.duplicates);
    std::printf("wrote %s (%zu weeks, %s .. %s)\n", out.c_str(), series.size(),
                series[0].anchor_date.to_string().c_str(),
                series.observations.back().anchor_date.to_string().c_str());
  });
  return 0;
}

bb::PriorSpec load_priors(const std::string& path, const bb::ModelSpec& spec,
                          const json& config_doc) {
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw bb::DataError("cannot open priors file: " + path);
    json j;
    in >> j;
    return bb::PriorSpec::from_json(j, spec);
  }
  if (!config_doc.is_null() && config_doc.contains("priors"))
    return bb::PriorSpec::from_json(config_doc["priors"], spec);
  return bb::PriorSpec::defaults(spec);
}

int cmd_estimate(CLI::App& app, ConfigFile& cfg) {
  static std::string weekly, model = "ms4", out, params_out, priors_path;
  static int burn_in = 5000, retained = 30000, thin = 1, max_rej = 1000;
  static std::uint64_t seed = 20201125;
  app.add_option("--weekly", weekly, "weekly series CSV (from ingest)");
  app.add_option("--model", model, "ms4|ms4u|ms4t|ms2");
  app.add_option("--burn-in", burn_in, "burn-in sweeps");
  app.add_option("--retained", retained, "retained draws");
  app.add_option("--seed", seed, "master RNG seed");
  app.add_option("--thin", thin, "store every n-th draw");
  app.add_option("--max-rejections", max_rej,
                 "per-sweep cap for the long-run rejection loop");
  app.add_option("--priors", priors_path, "prior hyperparameters JSON");
  app.add_option("--out", out, "output posterior file (.bbps)");
  app.add_option("--params-out", params_out,
                 "optional JSON with posterior-mean parameters");

  app.callback([&]() {
    cfg.ensure_loaded();
    cfg.overlay(app, "--weekly", "weekly", weekly);
    cfg.overlay(app, "--model", "model", model);
    cfg.overlay(app, "--burn-in", "burn_in", burn_in);
    cfg.overlay(app, "--retained", "retained", retained);
    cfg.overlay(app, "--seed", "seed", seed);
    cfg.overlay(app, "--thin", "thin", thin);
    cfg.overlay(app, "--out", "posterior", out);
    if (weekly.empty()) throw bb::UsageError("--weekly is required");
    if (out.empty()) throw bb::UsageError("--out is required");

    auto spec = bb::ModelSpec::parse(model);
    if (!spec.is_markov_switching())
      throw bb::UsageError("estimate handles the MS variants; GARCH is fit "
                           "inside 'compare'");
    auto series = bb::data::load_weekly_csv(weekly);
    auto priors = load_priors(priors_path, spec, cfg.doc());
    bb::McmcConfig mc{.burn_in = burn_in, .retained = retained, .seed = seed,
                      .max_rejections = max_rej};
    auto sample = bb::mcmc::gibbs_estimate(series, spec, priors, mc);
    bb::mcmc::save_posterior(sample, out, thin);
    print_estimate_report(sample, series.size());

    if (!params_out.empty()) {
      const int k = spec.states();
      bb::regime::StateParams mean_params;
      mean_params.mu.assign(k, 0.0);
      mean_params.sigma.assign(k, 0.0);
      if (spec.student_t()) mean_params.nu = std::vector<double>(k, 0.0);
      Eigen::MatrixXd pbar = Eigen::MatrixXd::Zero(k, k);
      for (const auto& d : sample.draws) {
        for (int j = 0; j < k; ++j) {
          mean_params.mu[j] += d.params.mu[j];
          mean_params.sigma[j] += d.params.sigma[j];
          if (spec.student_t()) (*mean_params.nu)[j] += (*d.params.nu)[j];
        }
        pbar += d.P.p;
      }
      double n = double(sample.draws.size());
      for (int j = 0; j < k; ++j) {
        mean_params.mu[j] /= n;
        mean_params.sigma[j] /= n;
        if (spec.student_t()) (*mean_params.nu)[j] /= n;
      }
      pbar /= n;
      bb::regime::TransitionMatrix pm{pbar, spec.zero_mask()};
      std::ofstream jout(params_out);
      jout << bb::regime::to_json(mean_params, pm).dump(2) << "\n";
    }
    std::printf("wrote %s\n", out.c_str());
    if (!params_out.empty()) std::printf("wrote %s\n", params_out.c_str());
  });
  return 0;
}

int cmd_smooth(CLI::App& app, ConfigFile& cfg) {
  static std::string weekly, posterior, out;
  static bool allow_mismatch = false;
  app.add_option("--weekly", weekly, "weekly series CSV");
  app.add_option("--posterior", posterior, "posterior file from estimate");
  app.add_option("--out", out, "output smoothed probabilities CSV");
  app.add_flag("--allow-mismatch", allow_mismatch,
               "do not require the posterior to match the series fingerprint");

  app.callback([&]() {
    cfg.ensure_loaded();
    cfg.overlay(app, "--weekly", "weekly", weekly);
    cfg.overlay(app, "--posterior", "posterior", posterior);
    if (weekly.empty() || posterior.empty() || out.empty())
      throw bb::UsageError("--weekly, --posterior and --out are required");
    auto series = bb::data::load_weekly_csv(weekly);
    auto sample = bb::mcmc::load_posterior(posterior);
    check_posterior_matches(sample, series, allow_mismatch);
    if (sample.draws.empty() ||
        sample.draws.front().state_path.size() != series.size())
      throw bb::DataError("posterior path length does not match the series");
    auto sm = bb::mcmc::smoothed_state_probs(sample);
    const int k = sample.spec.states();
    bb::csv::Writer w(out);
    std::vector<std::string> head{"date"};
    for (int j = 1; j <= k; ++j) head.push_back("p_state" + std::to_string(j));
    head.push_back("bull_prob");
    w.raw_row(head);
    for (std::size_t t = 0; t < series.size(); ++t) {
      std::vector<std::string> row{series[t].anchor_date.to_string()};
      for (int j = 0; j < k; ++j)
        row.push_back(bb::csv::format_double(sm.state(Eigen::Index(t), j)));
      row.push_back(bb::csv::format_double(sm.bull(Eigen::Index(t))));
      w.raw_row(row);
    }
    std::printf("wrote %s (%zu weeks)\n", out.c_str(), series.size());
  });
  return 0;
}

int cmd_forecast(CLI::App& app, ConfigFile& cfg) {
  static std::string weekly, posterior, model = "ms4", out, density_out,
                     from_s, to_s, origin_s, priors_path;
  static int horizon = 1, burn_in = 5000, retained = 30000, warm_burn = 500,
             draw_thin = 1, jobs = 1, grid_points = 801;
  static double grid_span = 12.0;
  static std::uint64_t seed = 20201125;
  static bool cold_start = false, allow_mismatch = false;
  app.add_option("--weekly", weekly, "weekly series CSV");
  app.add_option("--posterior", posterior,
                 "posterior file (single-origin mode)");
  app.add_option("--model", model, "model for rolling mode: ms4|ms4u|ms4t|ms2");
  app.add_option("--horizon", horizon, "forecast horizon in weeks");
  app.add_option("--origin", origin_s,
                 "forecast origin date (default: last anchor)");
  app.add_option("--from", from_s, "rolling mode: first evaluation week");
  app.add_option("--to", to_s, "rolling mode: last evaluation week");
  app.add_option("--burn-in", burn_in, "burn-in sweeps (rolling)");
  app.add_option("--retained", retained, "retained draws (rolling)");
  app.add_option("--warm-burn-in", warm_burn,
                 "burn-in after the first origin when warm-starting");
  app.add_flag("--cold-start", cold_start,
               "full re-estimation at every origin");
  app.add_option("--draw-thin", draw_thin, "thin draws when forecasting");
  app.add_option("--jobs", jobs, "parallel workers (cold-start rolling)");
  app.add_option("--grid-points", grid_points, "density grid points");
  app.add_option("--grid-span", grid_span, "density grid half-width in sds");
  app.add_option("--seed", seed, "master RNG seed");
  app.add_option("--priors", priors_path, "prior hyperparameters JSON");
  app.add_option("--out", out, "output forecast CSV");
  app.add_option("--density-out", density_out,
                 "optional density surface CSV (origin, grid_point, pdf)");
  app.add_flag("--allow-mismatch", allow_mismatch,
               "do not require the posterior to match the series fingerprint");

  app.callback([&]() {
    cfg.ensure_loaded();
    cfg.overlay(app, "--weekly", "weekly", weekly);
    cfg.overlay(app, "--model", "model", model);
    cfg.overlay(app, "--seed", "seed", seed);
    cfg.overlay(app, "--jobs", "jobs", jobs);
    cfg.overlay(app, "--from", "from", from_s);
    cfg.overlay(app, "--to", "to", to_s);
    cfg.overlay(app, "--burn-in", "burn_in", burn_in);
    cfg.overlay(app, "--retained", "retained", retained);
    if (weekly.empty() || out.empty())
      throw bb::UsageError("--weekly and --out are required");
    auto series = bb::data::load_weekly_csv(weekly);

    const bool rolling_mode = !from_s.empty() || !to_s.empty();
    if (rolling_mode) {
      if (from_s.empty() || to_s.empty())
        throw bb::UsageError("rolling mode needs both --from and --to");
      auto spec = bb::ModelSpec::parse(model);
      auto priors = load_priors(priors_path, spec, cfg.doc());
      bb::McmcConfig mc{.burn_in = burn_in, .retained = retained,
                        .seed = seed};
      bb::forecast::RollingOptions opts;
      opts.warm_start = !cold_start;
      opts.warm_burn_in = warm_burn;
      opts.draw_thin = draw_thin;
      opts.jobs = jobs;
      opts.capture_density = !density_out.empty();
      opts.density_points = grid_points;
      opts.density_span_sd = grid_span;
      auto res = bb::forecast::rolling_forecast(
          series, spec, priors, mc, bb::Date::parse(from_s),
          bb::Date::parse(to_s), opts);
      for (const auto& wmsg : res.warnings)
        std::cerr << "warning: " << wmsg << "\n";
      bb::forecast::write_forecast_csv(res.origins, out);
      if (!density_out.empty())
        bb::forecast::write_density_surface_csv(res.origins, density_out);
      std::printf("cumulative log predictive likelihood (%s): %.4f over %zu "
                  "weeks\n",
                  res.model.c_str(), res.trace.total(),
                  res.trace.log_pred.size());
      std::printf("wrote %s\n", out.c_str());
      if (!density_out.empty()) std::printf("wrote %s\n", density_out.c_str());
      return;
    }

    // single-origin mode
    if (posterior.empty())
      throw bb::UsageError(
          "single-origin mode needs --posterior (or use --from/--to)");
    auto sample = bb::mcmc::load_posterior(posterior);
    check_posterior_matches(sample, series, allow_mismatch);
    bb::data::ReturnSeries history = series;
    if (!origin_s.empty()) {
      bb::Date origin = bb::Date::parse(origin_s);
      std::size_t i = series.lower_bound(origin);
      if (i >= series.size() || series[i].anchor_date != origin)
        throw bb::DataError("origin " + origin_s +
                            " is not a weekly anchor in the series");
      history = series.prefix(i + 1);
    }
    auto mixes = bb::forecast::multi_horizon_mixtures(sample, history, horizon,
                                                      draw_thin);
    const int k = sample.spec.states();
    std::vector<bb::forecast::OriginForecast> rows;
    bb::Date origin_date = history.observations.back().anchor_date;
    for (int h = 0; h < horizon; ++h) {
      const auto& mix = mixes[std::size_t(h)];
      bb::forecast::OriginForecast o;
      o.date = origin_date.plus_days(7 * (h + 1));
      o.state_probs = Eigen::VectorXd::Zero(k);
      for (std::size_t c = 0; c < mix.size(); ++c)
        o.state_probs(int(c % std::size_t(k))) += mix.w[c];
      o.bull_prob = bb::regime::regime_probability(o.state_probs);
      o.mean = mix.mean;
      o.sd = std::sqrt(mix.variance);
      o.sharpe = mix.mean / o.sd;
      for (double level : {0.01, 0.05})
        o.var_levels[level] = mix.quantile(level);
      rows.push_back(std::move(o));
    }
    bb::forecast::write_forecast_csv(rows, out);
    if (!density_out.empty()) {
      bb::forecast::GridSpec gs;
      gs.points = grid_points;
      gs.span_sd = grid_span;
      auto bundle = bb::forecast::predictive_density(sample, history, gs,
                                                     {0.01, 0.05}, 1,
                                                     draw_thin);
      bb::forecast::write_density_surface_csv(
          {{origin_date, &bundle}}, density_out);
    }
    std::printf("one-week-ahead: mean %.4f sd %.4f sharpe %.4f bull_prob "
                "%.4f\n",
                rows[0].mean, rows[0].sd, rows[0].sharpe, rows[0].bull_prob);
    std::printf("wrote %s\n", out.c_str());
    if (!density_out.empty()) std::printf("wrote %s\n", density_out.c_str());
  });
  return 0;
}

int cmd_backtest(CLI::App& app, ConfigFile& cfg) {
  static std::string weekly, signals, strategy = "s", out_prefix = "backtest";
  static double tau_b = 0.5, tau_s = 0.5, tau_s_bull = 0.5;
  app.add_option("--weekly", weekly, "weekly series CSV");
  app.add_option("--signals", signals,
                 "rolling forecast CSV with predicted state probabilities");
  app.add_option("--strategy", strategy,
                 "b|s|s-split|buy-and-hold|never-in");
  app.add_option("--tau-b", tau_b, "strategy B regime threshold");
  app.add_option("--tau-s", tau_s, "strategy S state threshold");
  app.add_option("--tau-s-bull", tau_s_bull,
                 "bull threshold for the split variant");
  app.add_option("--out-prefix", out_prefix, "output file prefix");

  app.callback([&]() {
    cfg.ensure_loaded();
    cfg.overlay(app, "--weekly", "weekly", weekly);
    cfg.overlay(app, "--signals", "signals", signals);
    if (weekly.empty() || signals.empty())
      throw bb::UsageError("--weekly and --signals are required");
    auto series = bb::data::load_weekly_csv(weekly);
    auto fx = bb::forecast::read_forecast_csv(signals);
    auto realized = align_realized(series, fx);
    bb::backtest::StrategyConfig sc;
    sc.kind = bb::backtest::parse_strategy(strategy);
    sc.tau_b = tau_b;
    sc.tau_s = tau_s;
    sc.tau_s_bull = tau_s_bull;
    auto res = bb::backtest::run_strategy(fx, realized, sc);
    bb::backtest::write_positions_csv(res, fx, out_prefix + "_positions.csv");
    bb::backtest::write_summary_csv(std::vector{res},
                                    out_prefix + "_summary.csv");
    std::printf("%-14s annualized return %8.4f  Sharpe %8.4f  trades %d\n",
                bb::backtest::strategy_name(sc.kind).c_str(),
                res.annualized_return, res.annualized_sharpe, res.trade_count);
    std::printf("wrote %s_positions.csv\nwrote %s_summary.csv\n",
                out_prefix.c_str(), out_prefix.c_str());
  });
  return 0;
}

int cmd_compare(CLI::App& app, ConfigFile& cfg) {
  static std::string weekly, models = "ms4,ms4u,ms4t,ms2,garch",
                     benchmark = "garch", out_prefix = "compare", from_s, to_s,
                     priors_path;
  static int burn_in = 5000, retained = 30000, warm_burn = 500, draw_thin = 1,
             jobs = 1;
  static std::uint64_t seed = 20201125;
  static bool cold_start = false;
  app.add_option("--weekly", weekly, "weekly series CSV");
  app.add_option("--models", models, "comma list: ms4,ms4u,ms4t,ms2,garch");
  app.add_option("--benchmark", benchmark, "benchmark model label");
  app.add_option("--from", from_s, "first evaluation week");
  app.add_option("--to", to_s, "last evaluation week");
  app.add_option("--burn-in", burn_in, "burn-in sweeps");
  app.add_option("--retained", retained, "retained draws");
  app.add_option("--warm-burn-in", warm_burn, "warm-start burn-in");
  app.add_flag("--cold-start", cold_start, "full re-estimation per origin");
  app.add_option("--draw-thin", draw_thin, "thin draws when forecasting");
  app.add_option("--jobs", jobs, "models run in parallel");
  app.add_option("--seed", seed, "master RNG seed");
  app.add_option("--priors", priors_path, "prior hyperparameters JSON");
  app.add_option("--out-prefix", out_prefix, "output file prefix");

  app.callback([&]() {
    cfg.ensure_loaded();
    cfg.overlay(app, "--weekly", "weekly", weekly);
    cfg.overlay(app, "--models", "models", models);
    cfg.overlay(app, "--benchmark", "benchmark", benchmark);
    cfg.overlay(app, "--from", "from", from_s);
    cfg.overlay(app, "--to", "to", to_s);
    cfg.overlay(app, "--burn-in", "burn_in", burn_in);
    cfg.overlay(app, "--retained", "retained", retained);
    cfg.overlay(app, "--seed", "seed", seed);
    cfg.overlay(app, "--jobs", "jobs", jobs);
    if (weekly.empty() || from_s.empty() || to_s.empty())
      throw bb::UsageError("--weekly, --from and --to are required");
    auto series = bb::data::load_weekly_csv(weekly);
    bb::Date from = bb::Date::parse(from_s), to = bb::Date::parse(to_s);

    std::vector<std::string> names;
    for (const auto& tok : bb::csv::split_line(models, ','))
      if (!tok.empty()) names.push_back(tok);
    if (names.empty()) throw bb::UsageError("no models given");

    std::vector<bb::forecast::RollingResult> results(names.size());
    bb::parallel_for(names.size(), jobs, [&](std::size_t i) {
      auto spec = bb::ModelSpec::parse(names[i]);
      std::uint64_t model_seed =
          bb::derive_seed(seed, 1000 + std::uint64_t(spec.kind));
      if (spec.kind == bb::ModelKind::Garch11) {
        results[i] = bb::garch::garch_rolling(series, from, to,
                                              bb::garch::VarianceInit::Unconditional,
                                              model_seed);
      } else {
        auto priors = load_priors(priors_path, spec, cfg.doc());
        bb::McmcConfig mc{.burn_in = burn_in, .retained = retained,
                          .seed = model_seed};
        bb::forecast::RollingOptions opts;
        opts.warm_start = !cold_start;
        opts.warm_burn_in = warm_burn;
        opts.draw_thin = draw_thin;
        results[i] = bb::forecast::rolling_forecast(series, spec, priors, mc,
                                                    from, to, opts);
      }
    });

    std::vector<bb::forecast::PredictiveLikelihoodTrace> traces;
    for (std::size_t i = 0; i < results.size(); ++i) {
      for (const auto& wmsg : results[i].warnings)
        std::cerr << "warning: " << wmsg << "\n";
      traces.push_back(results[i].trace);
      bb::forecast::write_trace_csv(
          results[i].trace, out_prefix + "_" + results[i].model + "_trace.csv");
      if (!results[i].origins.empty() &&
          results[i].origins.front().state_probs.size() > 0)
        bb::forecast::write_forecast_csv(
            results[i].origins,
            out_prefix + "_" + results[i].model + "_forecasts.csv");
    }

    std::string bench_label = bb::ModelSpec::parse(benchmark).label();
    auto bf = bb::forecast::bayes_factor_trace(traces, bench_label);

    bb::csv::Writer totals(out_prefix + "_totals.csv");
    totals.raw_row({"model", "log_predictive_likelihood", "log_bayes_factor",
                    "strong_evidence"});
    std::printf("Log-predictive likelihood over [%s, %s]\n", from_s.c_str(),
                to_s.c_str());
    std::printf("%-10s %14s %16s\n", "model", "log-PL",
                ("log BF vs " + bench_label).c_str());
    for (std::size_t i = 0; i < traces.size(); ++i) {
      std::printf("%-10s %14.4f %16.4f%s\n", traces[i].model.c_str(),
                  traces[i].total(), bf[i].final_value,
                  bf[i].strong_evidence ? "  (strong)" : "");
      totals.raw_row({traces[i].model,
                      bb::csv::format_double(traces[i].total()),
                      bb::csv::format_double(bf[i].final_value),
                      bf[i].strong_evidence ? "yes" : "no"});
    }

    bb::csv::Writer bfw(out_prefix + "_bayes_factors.csv");
    bfw.raw_row({"model", "date", "log_bf"});
    for (const auto& b : bf)
      for (std::size_t t = 0; t < b.dates.size(); ++t)
        bfw.raw_row({b.model, b.dates[t].to_string(),
                     bb::csv::format_double(b.log_bf[t])});
    std::printf("wrote %s_totals.csv and %s_bayes_factors.csv\n",
                out_prefix.c_str(), out_prefix.c_str());
  });
  return 0;
}

int cmd_sweep(CLI::App& app, ConfigFile& cfg) {
  static std::string weekly, signals, kind = "s", grid_text = "0.1:0.9:0.05",
                     out;
  static double tau_s_fixed = 0.5;
  app.add_option("--weekly", weekly, "weekly series CSV");
  app.add_option("--signals", signals, "rolling forecast CSV");
  app.add_option("--kind", kind, "s|s-split");
  app.add_option("--grid", grid_text, "thresholds: lo:hi:step or v1,v2,...");
  app.add_option("--tau-s", tau_s_fixed,
                 "fixed bear-rally threshold for the split variant");
  app.add_option("--out", out, "output sweep CSV");

  app.callback([&]() {
    cfg.ensure_loaded();
    cfg.overlay(app, "--weekly", "weekly", weekly);
    cfg.overlay(app, "--signals", "signals", signals);
    cfg.overlay(app, "--grid", "grid", grid_text);
    if (weekly.empty() || signals.empty() || out.empty())
      throw bb::UsageError("--weekly, --signals and --out are required");
    auto series = bb::data::load_weekly_csv(weekly);
    auto fx = bb::forecast::read_forecast_csv(signals);
    auto realized = align_realized(series, fx);
    auto grid = parse_grid(grid_text);
    auto skind = kind == "s-split" ? bb::backtest::StrategyKind::SSplit
                                   : bb::backtest::StrategyKind::S;
    bb::backtest::StrategyConfig base;
    base.tau_s = tau_s_fixed;
    auto curve = bb::backtest::threshold_sweep(fx, realized, skind, grid, base);
    bb::backtest::write_sweep_csv(curve, out);
    std::printf("%zu grid points; best return %.4f at threshold %.3f\n",
                curve.size(),
                std::max_element(curve.begin(), curve.end(),
                                 [](auto& a, auto& b) {
                                   return a.annualized_return <
                                          b.annualized_return;
                                 })
                    ->annualized_return,
                std::max_element(curve.begin(), curve.end(),
                                 [](auto& a, auto& b) {
                                   return a.annualized_return <
                                          b.annualized_return;
                                 })
                    ->threshold);
    std::printf("wrote %s\n", out.c_str());
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bull/bear market regime estimation, forecasting and "
               "market-timing strategies"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "print help for every subcommand");

  app.add_option("--config", g_config_path,
                 "JSON config file (CLI flags take precedence)");

  static ConfigFile cfg;

  auto* ingest = app.add_subcommand("ingest",
                                    "build the weekly return series from "
                                    "daily prices and risk-free yields");
  cmd_ingest(*ingest, cfg);
  auto* estimate = app.add_subcommand(
      "estimate", "run the Gibbs sampler and persist the posterior");
  cmd_estimate(*estimate, cfg);
  auto* smooth = app.add_subcommand(
      "smooth", "full-sample smoothed state and regime probabilities");
  cmd_smooth(*smooth, cfg);
  auto* forecastc = app.add_subcommand(
      "forecast", "out-of-sample forecasts: rolling (--from/--to) or "
                  "single-origin (--posterior, --horizon)");
  cmd_forecast(*forecastc, cfg);
  auto* backtestc = app.add_subcommand(
      "backtest", "market-timing strategy over rolling forecasts");
  cmd_backtest(*backtestc, cfg);
  auto* comparec = app.add_subcommand(
      "compare", "predictive-likelihood model comparison with Bayes factors");
  cmd_compare(*comparec, cfg);
  auto* sweepc = app.add_subcommand("sweep",
                                    "strategy return as a function of the "
                                    "signal threshold");
  cmd_sweep(*sweepc, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const bb::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const bb::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const bb::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
