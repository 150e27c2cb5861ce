#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "bullbear/csv.hpp"
#include "bullbear/errors.hpp"
#include "bullbear/market_data.hpp"
#include "bullbear/math.hpp"
#include "bullbear/regime.hpp"
#include "bullbear/rolling.hpp"

namespace bullbear::backtest {

enum class StrategyKind { B, S, SSplit, BuyAndHold, NeverIn };

inline StrategyKind parse_strategy(const std::string& name) {
  if (name == "b" || name == "B") return StrategyKind::B;
  if (name == "s" || name == "S") return StrategyKind::S;
  if (name == "s-split" || name == "S-split") return StrategyKind::SSplit;
  if (name == "buy-and-hold") return StrategyKind::BuyAndHold;
  if (name == "never-in") return StrategyKind::NeverIn;
  throw UsageError("unknown strategy '" + name +
                   "' (expected b, s, s-split, buy-and-hold, never-in)");
}

inline std::string strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::B: return "B";
    case StrategyKind::S: return "S";
    case StrategyKind::SSplit: return "S-split";
    case StrategyKind::BuyAndHold: return "buy-and-hold";
    case StrategyKind::NeverIn: return "never-in";
  }
  return "?";
}

struct StrategyConfig {
  StrategyKind kind = StrategyKind::S;
  double tau_b = 0.5;       // regime-probability threshold (strategy B)
  double tau_s = 0.5;       // state-probability threshold (strategy S; the
                            // fixed bear-rally threshold in the split variant)
  double tau_s_bull = 0.5;  // bull-state threshold in the split variant

  void validate() const {
    if (tau_b < 0.0 || tau_s < 0.0 || tau_s_bull < 0.0)
      throw UsageError("strategy thresholds must be >= 0");
  }
};

// Buy/hold the market when the signal fires, otherwise hold the risk-free
// leg. Signals condition only on one-week-ahead predicted probabilities.
inline bool in_market(const StrategyConfig& cfg,
                      const Eigen::VectorXd& state_probs) {
  const int k = int(state_probs.size());
  switch (cfg.kind) {
    case StrategyKind::BuyAndHold:
      return true;
    case StrategyKind::NeverIn:
      return false;
    case StrategyKind::B:
      return regime::regime_probability(state_probs) > cfg.tau_b;
    case StrategyKind::S: {
      double rally = (k == 4) ? state_probs(1) : 0.0;
      double bull = (k == 4) ? state_probs(3) : state_probs(1);
      return rally > cfg.tau_s || bull > cfg.tau_s;
    }
    case StrategyKind::SSplit: {
      double rally = (k == 4) ? state_probs(1) : 0.0;
      double bull = (k == 4) ? state_probs(3) : state_probs(1);
      return rally > cfg.tau_s || bull > cfg.tau_s_bull;
    }
  }
  return false;
}

struct AnnualizedStats {
  double annualized_return = 0.0;  // decimal, (52/n) * sum of weekly logs
  double annualized_sharpe = 0.0;  // excess over risk-free, sqrt(52) scaling
};

// weekly and risk_free are weekly log-returns x100; the annualized return is
// reported in decimal.
inline AnnualizedStats annualize(std::span<const double> weekly,
                                 std::span<const double> risk_free) {
  if (weekly.size() != risk_free.size())
    throw DataError("weekly/risk-free length mismatch");
  const auto n = weekly.size();
  if (n < 4) throw DataError("need at least 4 weeks to annualize");
  double sum = 0.0;
  std::vector<double> excess(n);
  for (std::size_t i = 0; i < n; ++i) {
    sum += weekly[i];
    excess[i] = weekly[i] - risk_free[i];
  }
  AnnualizedStats s;
  s.annualized_return = (52.0 / double(n)) * sum / 100.0;
  double mean_excess = 0.0;
  for (double e : excess) mean_excess += e;
  double sd = sample_stdev(excess);
  if (!(sd > 0.0))
    throw NumericalError("zero excess-return variance: Sharpe undefined");
  s.annualized_sharpe = (52.0 / double(n)) * mean_excess / (std::sqrt(52.0) * sd);
  return s;
}

struct BacktestResult {
  StrategyConfig config;
  std::vector<Date> dates;
  std::vector<int> positions;          // 1 = market, 0 = risk-free
  std::vector<double> weekly_returns;  // realized portfolio log-returns x100
  double annualized_return = 0.0;
  double annualized_sharpe = 0.0;
  int trade_count = 0;
};

// Runs one strategy over aligned forecasts and realized weeks. Week t's
// position depends only on the forecast made with data through t-1; in-market
// weeks earn the realized market return, out-of-market weeks the risk-free
// leg. No short selling, no transaction costs.
inline BacktestResult run_strategy(
    std::span<const forecast::OriginForecast> forecasts,
    const data::ReturnSeries& realized, const StrategyConfig& cfg) {
  cfg.validate();
  if (forecasts.size() != realized.size())
    throw DataError("forecast/realized week count mismatch");
  BacktestResult res;
  res.config = cfg;
  res.dates.reserve(forecasts.size());
  res.positions.reserve(forecasts.size());
  res.weekly_returns.reserve(forecasts.size());
  std::vector<double> rf(forecasts.size());
  int prev_pos = 0;
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    if (forecasts[i].date != realized[i].anchor_date)
      throw DataError("forecast date " + forecasts[i].date.to_string() +
                      " does not match realized week " +
                      realized[i].anchor_date.to_string());
    bool in = in_market(cfg, forecasts[i].state_probs);
    int pos = in ? 1 : 0;
    res.dates.push_back(forecasts[i].date);
    res.positions.push_back(pos);
    res.weekly_returns.push_back(in ? realized[i].log_return
                                    : realized[i].risk_free);
    rf[i] = realized[i].risk_free;
    if (pos != prev_pos) ++res.trade_count;
    prev_pos = pos;
  }
  double sum = 0.0;
  for (double w : res.weekly_returns) sum += w;
  res.annualized_return =
      (52.0 / double(res.weekly_returns.size())) * sum / 100.0;
  try {
    res.annualized_sharpe =
        annualize(res.weekly_returns, rf).annualized_sharpe;
  } catch (const NumericalError&) {
    // constant portfolio (e.g. a saturated threshold): Sharpe undefined
    res.annualized_sharpe = std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

struct SweepPoint {
  double threshold = 0.0;
  double annualized_return = 0.0;
  double annualized_sharpe = 0.0;
};

// One strategy run per grid threshold. For kind S the common threshold
// varies; for S-split the bear-rally threshold stays at cfg.tau_s and the
// bull threshold varies.
inline std::vector<SweepPoint> threshold_sweep(
    std::span<const forecast::OriginForecast> forecasts,
    const data::ReturnSeries& realized, StrategyKind kind,
    std::span<const double> grid, const StrategyConfig& base = {}) {
  if (kind != StrategyKind::S && kind != StrategyKind::SSplit)
    throw UsageError("threshold sweep supports strategies S and S-split");
  if (grid.empty()) throw UsageError("empty threshold grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw UsageError("threshold grid must be strictly increasing");
  std::vector<SweepPoint> out;
  out.reserve(grid.size());
  for (double tau : grid) {
    StrategyConfig cfg = base;
    cfg.kind = kind;
    if (kind == StrategyKind::S)
      cfg.tau_s = tau;
    else
      cfg.tau_s_bull = tau;
    BacktestResult r = run_strategy(forecasts, realized, cfg);
    out.push_back({tau, r.annualized_return, r.annualized_sharpe});
  }
  return out;
}

// --- CSV artifacts ----------------------------------------------------------

inline void write_positions_csv(const BacktestResult& res,
                                std::span<const forecast::OriginForecast> fx,
                                const std::string& path) {
  csv::Writer w(path);
  const int k = fx.empty() ? 0 : int(fx.front().state_probs.size());
  std::vector<std::string> head{"date"};
  for (int j = 1; j <= k; ++j) head.push_back("p_state" + std::to_string(j));
  head.insert(head.end(), {"bull_prob", "position", "realized_return"});
  w.raw_row(head);
  for (std::size_t i = 0; i < res.dates.size(); ++i) {
    std::vector<std::string> row{res.dates[i].to_string()};
    for (int j = 0; j < k; ++j)
      row.push_back(csv::format_double(fx[i].state_probs(j)));
    row.push_back(csv::format_double(fx[i].bull_prob));
    row.push_back(res.positions[i] ? "market" : "riskfree");
    row.push_back(csv::format_double(res.weekly_returns[i]));
    w.raw_row(row);
  }
}

inline void write_summary_csv(std::span<const BacktestResult> results,
                              const std::string& path) {
  csv::Writer w(path);
  w.raw_row({"strategy", "tau_b", "tau_s", "tau_s_bull", "annualized_return",
             "annualized_sharpe", "trade_count", "weeks_in_market"});
  for (const auto& r : results) {
    int in = 0;
    for (int p : r.positions) in += p;
    w.raw_row({strategy_name(r.config.kind), csv::format_double(r.config.tau_b),
               csv::format_double(r.config.tau_s),
               csv::format_double(r.config.tau_s_bull),
               csv::format_double(r.annualized_return),
               csv::format_double(r.annualized_sharpe),
               std::to_string(r.trade_count), std::to_string(in)});
  }
}

inline void write_sweep_csv(std::span<const SweepPoint> curve,
                            const std::string& path) {
  csv::Writer w(path);
  w.raw_row({"threshold", "annualized_return", "annualized_sharpe"});
  for (const auto& p : curve)
    w.raw_row({csv::format_double(p.threshold),
               csv::format_double(p.annualized_return),
               csv::format_double(p.annualized_sharpe)});
}

}  // namespace bullbear::backtest
