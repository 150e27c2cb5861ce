#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "bullbear/gibbs.hpp"
#include "bullbear/market_data.hpp"
#include "bullbear/math.hpp"

namespace bullbear::forecast {

// h-step state probability forecast for one parameter set: row k-1 holds
// filtered * P^k. Long horizons converge to the stationary distribution.
inline Eigen::MatrixXd predictive_state_probs(
    const Eigen::VectorXd& filtered, const regime::TransitionMatrix& P,
    int horizon) {
  if (horizon < 1) throw UsageError("horizon must be >= 1");
  const int k = P.states();
  if (filtered.size() != k) throw DataError("filtered vector has wrong size");
  Eigen::MatrixXd out(horizon, k);
  Eigen::VectorXd v = filtered;
  for (int h = 0; h < horizon; ++h) {
    v = P.p.transpose() * v;
    out.row(h) = v;
  }
  return out;
}

// One-step-ahead predictive distribution: an equally draw-weighted mixture of
// the per-draw state mixtures. Components keep their analytic form so the
// moments, density, cdf and quantiles never go through a grid.
struct PredictiveMixture {
  std::vector<double> w, mu, sigma;
  std::vector<double> nu;  // empty for normal components
  double mean = 0.0;
  double variance = 0.0;

  std::size_t size() const { return w.size(); }

  double logpdf(double x) const {
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) {
        terms[i] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double lf = nu.empty() ? normal_logpdf(x, mu[i], sigma[i])
                             : student_t_logpdf(x, mu[i], sigma[i], nu[i]);
      terms[i] = std::log(w[i]) + lf;
      if (terms[i] > m) m = terms[i];
    }
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
  }

  double pdf(double x) const { return std::exp(logpdf(x)); }

  double cdf(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      double c = nu.empty() ? normal_cdf(x, mu[i], sigma[i])
                            : student_t_cdf(x, mu[i], sigma[i], nu[i]);
      s += w[i] * c;
    }
    return s;
  }

  // Quantile by bisection on the analytic cdf; the returned point satisfies
  // cdf(q) = level to well under 1e-8.
  double quantile(double level) const {
    if (!(level > 0.0 && level < 1.0))
      throw UsageError("quantile level must be in (0,1)");
    double sd = std::sqrt(variance);
    double lo = mean - 15.0 * sd, hi = mean + 15.0 * sd;
    while (cdf(lo) > level) lo -= 10.0 * sd;
    while (cdf(hi) < level) hi += 10.0 * sd;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (cdf(mid) < level ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  void finalize_moments() {
    mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      mean += w[i] * mu[i];
      m2 += w[i] * (sigma[i] * sigma[i] + mu[i] * mu[i]);
    }
    variance = m2 - mean * mean;
  }
};

// Mixture of the h-step-ahead return distribution implied by a posterior
// sample and the data history through the forecast origin. Each draw
// contributes K components weighted by its filtered state vector pushed h
// steps through its transition matrix. `draw_thin` uses every n-th draw.
inline PredictiveMixture predictive_mixture(const mcmc::PosteriorSample& sample,
                                            const data::ReturnSeries& history,
                                            int horizon = 1,
                                            int draw_thin = 1) {
  if (sample.draws.empty()) throw DataError("empty posterior sample");
  if (draw_thin < 1) throw UsageError("draw_thin must be >= 1");
  const int k = sample.spec.states();
  std::vector<double> r = history.returns();

  PredictiveMixture mix;
  std::size_t used = 0;
  for (std::size_t m = 0; m < sample.draws.size(); m += std::size_t(draw_thin))
    ++used;
  mix.w.reserve(used * k);
  mix.mu.reserve(used * k);
  mix.sigma.reserve(used * k);
  if (sample.spec.student_t()) mix.nu.reserve(used * k);

  for (std::size_t m = 0; m < sample.draws.size();
       m += std::size_t(draw_thin)) {
    const auto& d = sample.draws[m];
    mcmc::FilterOutput f =
        mcmc::hamilton_filter(std::span<const double>(r), d.params, d.P);
    Eigen::VectorXd v = f.filtered.row(f.filtered.rows() - 1).transpose();
    for (int h = 0; h < horizon; ++h) v = d.P.p.transpose() * v;
    for (int j = 0; j < k; ++j) {
      mix.w.push_back(v(j) / double(used));
      mix.mu.push_back(d.params.mu[j]);
      mix.sigma.push_back(d.params.sigma[j]);
      if (d.params.nu) mix.nu.push_back((*d.params.nu)[j]);
    }
  }
  mix.finalize_moments();
  return mix;
}

// Mixtures for every horizon 1..h with one filter pass per draw.
inline std::vector<PredictiveMixture> multi_horizon_mixtures(
    const mcmc::PosteriorSample& sample, const data::ReturnSeries& history,
    int horizon, int draw_thin = 1) {
  if (sample.draws.empty()) throw DataError("empty posterior sample");
  if (horizon < 1) throw UsageError("horizon must be >= 1");
  const int k = sample.spec.states();
  std::vector<double> r = history.returns();
  std::size_t used = 0;
  for (std::size_t m = 0; m < sample.draws.size(); m += std::size_t(draw_thin))
    ++used;
  std::vector<PredictiveMixture> out(static_cast<std::size_t>(horizon));
  for (std::size_t m = 0; m < sample.draws.size();
       m += std::size_t(draw_thin)) {
    const auto& d = sample.draws[m];
    mcmc::FilterOutput f =
        mcmc::hamilton_filter(std::span<const double>(r), d.params, d.P);
    Eigen::VectorXd v = f.filtered.row(f.filtered.rows() - 1).transpose();
    for (int h = 0; h < horizon; ++h) {
      v = d.P.p.transpose() * v;
      auto& mix = out[std::size_t(h)];
      for (int j = 0; j < k; ++j) {
        mix.w.push_back(v(j) / double(used));
        mix.mu.push_back(d.params.mu[j]);
        mix.sigma.push_back(d.params.sigma[j]);
        if (d.params.nu) mix.nu.push_back((*d.params.nu)[j]);
      }
    }
  }
  for (auto& mix : out) mix.finalize_moments();
  return out;
}

struct GridSpec {
  int points = 801;
  double span_sd = 12.0;  // default grid: mean +/- span_sd * mixture sd
  std::vector<double> explicit_grid;
};

struct ForecastBundle {
  Date origin_date;
  int horizon = 1;
  Eigen::MatrixXd state_probs;  // horizon x K, averaged over draws
  Eigen::VectorXd bull_prob;    // per horizon step
  std::vector<double> grid;     // one-step-ahead density grid
  std::vector<double> pdf;
  double mean = 0.0;
  double variance = 0.0;
  double sharpe = 0.0;
  std::map<double, double> var_levels;   // level -> mixture quantile
  std::map<double, double> var_normal;   // level -> normal benchmark
  PredictiveMixture mixture;             // one-step-ahead components
};

inline double predictive_sharpe(const ForecastBundle& bundle) {
  if (!(bundle.variance > 0.0))
    throw NumericalError("predictive variance must be positive");
  return bundle.mean / std::sqrt(bundle.variance);
}

struct VarEstimate {
  double quantile = 0.0;         // mixture quantile
  double normal_quantile = 0.0;  // same-moments normal benchmark
};

inline VarEstimate value_at_risk(const PredictiveMixture& mix, double level) {
  if (!(level > 0.0 && level < 0.5))
    throw UsageError("VaR level must be in (0, 0.5)");
  VarEstimate v;
  v.quantile = mix.quantile(level);
  v.normal_quantile =
      mix.mean + std::sqrt(mix.variance) * normal_quantile(level);
  return v;
}

inline VarEstimate value_at_risk(const ForecastBundle& bundle, double level) {
  return value_at_risk(bundle.mixture, level);
}

// Full one-origin forecast: h-step state/regime probabilities, the one-step
// predictive density on a grid, analytic mixture moments, Sharpe and VaR.
inline ForecastBundle predictive_density(
    const mcmc::PosteriorSample& sample, const data::ReturnSeries& history,
    const GridSpec& grid_spec = {},
    const std::vector<double>& var_levels = {0.01, 0.05}, int horizon = 1,
    int draw_thin = 1) {
  if (history.empty()) throw DataError("empty history");
  const int k = sample.spec.states();
  std::vector<double> r = history.returns();

  ForecastBundle b;
  b.origin_date = history.observations.back().anchor_date;
  b.horizon = horizon;
  b.state_probs = Eigen::MatrixXd::Zero(horizon, k);

  std::size_t used = 0;
  for (std::size_t m = 0; m < sample.draws.size(); m += std::size_t(draw_thin))
    ++used;
  b.mixture.w.reserve(used * k);
  b.mixture.mu.reserve(used * k);
  b.mixture.sigma.reserve(used * k);
  if (sample.spec.student_t()) b.mixture.nu.reserve(used * k);

  for (std::size_t m = 0; m < sample.draws.size();
       m += std::size_t(draw_thin)) {
    const auto& d = sample.draws[m];
    mcmc::FilterOutput f =
        mcmc::hamilton_filter(std::span<const double>(r), d.params, d.P);
    Eigen::VectorXd v = f.filtered.row(f.filtered.rows() - 1).transpose();
    for (int h = 0; h < horizon; ++h) {
      v = d.P.p.transpose() * v;
      b.state_probs.row(h) += v;
      if (h == 0) {
        for (int j = 0; j < k; ++j) {
          b.mixture.w.push_back(v(j) / double(used));
          b.mixture.mu.push_back(d.params.mu[j]);
          b.mixture.sigma.push_back(d.params.sigma[j]);
          if (d.params.nu) b.mixture.nu.push_back((*d.params.nu)[j]);
        }
      }
    }
  }
  b.state_probs /= double(used);
  b.bull_prob.resize(horizon);
  for (int h = 0; h < horizon; ++h)
    b.bull_prob(h) = regime::regime_probability(b.state_probs.row(h).transpose());

  b.mixture.finalize_moments();
  b.mean = b.mixture.mean;
  b.variance = b.mixture.variance;
  b.sharpe = predictive_sharpe(b);

  double sd = std::sqrt(b.variance);
  if (!grid_spec.explicit_grid.empty()) {
    b.grid = grid_spec.explicit_grid;
  } else {
    b.grid.resize(std::size_t(grid_spec.points));
    double lo = b.mean - grid_spec.span_sd * sd;
    double hi = b.mean + grid_spec.span_sd * sd;
    for (int i = 0; i < grid_spec.points; ++i)
      b.grid[std::size_t(i)] =
          lo + (hi - lo) * double(i) / double(grid_spec.points - 1);
  }
  b.pdf.resize(b.grid.size());
  for (std::size_t i = 0; i < b.grid.size(); ++i)
    b.pdf[i] = b.mixture.pdf(b.grid[i]);
  double mass = 0.0;
  for (std::size_t i = 1; i < b.grid.size(); ++i)
    mass += 0.5 * (b.pdf[i] + b.pdf[i - 1]) * (b.grid[i] - b.grid[i - 1]);
  if (mass < 0.995) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "density grid too narrow (integrated mass %.4f); span at "
                  "least [%.4f, %.4f] required",
                  mass, b.mean - 12.0 * sd, b.mean + 12.0 * sd);
    throw DataError(msg);
  }

  for (double level : var_levels) {
    VarEstimate v = value_at_risk(b.mixture, level);
    b.var_levels[level] = v.quantile;
    b.var_normal[level] = v.normal_quantile;
  }
  return b;
}

}  // namespace bullbear::forecast
