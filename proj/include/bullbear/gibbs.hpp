#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "bullbear/ffbs.hpp"
#include "bullbear/filter.hpp"
#include "bullbear/market_data.hpp"
#include "bullbear/model.hpp"
#include "bullbear/regime.hpp"
#include "bullbear/rng.hpp"

namespace bullbear::mcmc {

struct PosteriorDraw {
  regime::StateParams params;
  regime::TransitionMatrix P;
  std::vector<std::uint8_t> state_path;  // 0-based state per week
};

struct GibbsDiagnostics {
  long longrun_rejections = 0;  // (mu, P) proposals discarded by the check
  long longrun_exhaustions = 0; // sweeps where the cap hit and the previous
                                // block values were retained
};

struct PosteriorSample {
  ModelSpec spec;
  PriorSpec priors;
  McmcConfig cfg;
  std::uint64_t data_hash = 0;
  std::vector<PosteriorDraw> draws;
  GibbsDiagnostics diagnostics;
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw NumericalError("quantile of empty vector");
  double pos = q * double(sorted.size() - 1);
  std::size_t lo = std::size_t(pos);
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - double(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

inline bool mu_sign_positive(int state, int k) {
  return (k == 4) ? (state == 1 || state == 3) : (state == 1);
}

// Deterministic restriction-satisfying start: means from sign-corrected
// sample quantiles, volatilities at the overall standard deviation, P at the
// prior mean. The halving loop nudges the inner-state means toward zero until
// the long-run inequalities hold under the initial P.
inline PosteriorDraw initial_draw(const std::vector<double>& returns,
                                  const ModelSpec& spec,
                                  const PriorSpec& priors) {
  const int k = spec.states();
  std::vector<double> sorted = returns;
  std::sort(sorted.begin(), sorted.end());
  double sd = sample_stdev(sorted);
  if (!(sd > 0.0))
    throw NumericalError("constant return series cannot initialize sampler");

  PosteriorDraw d;
  d.params.mu.resize(k);
  d.params.sigma.assign(k, sd);
  if (spec.student_t()) {
    double mid = priors.nu_grid[priors.nu_grid.size() / 2];
    d.params.nu = std::vector<double>(k, mid);
  }
  if (k == 4) {
    d.params.mu[0] = std::min(quantile_sorted(sorted, 0.05), -0.10 * sd);
    d.params.mu[1] = std::max(quantile_sorted(sorted, 0.55), 0.05 * sd);
    d.params.mu[2] = std::min(quantile_sorted(sorted, 0.45), -0.05 * sd);
    d.params.mu[3] = std::max(quantile_sorted(sorted, 0.95), 0.10 * sd);
  } else {
    d.params.mu[0] = std::min(quantile_sorted(sorted, 0.10), -0.10 * sd);
    d.params.mu[1] = std::max(quantile_sorted(sorted, 0.90), 0.10 * sd);
  }

  d.P.zero_mask = spec.zero_mask();
  d.P.p.resize(k, k);
  for (int i = 0; i < k; ++i) {
    double row = priors.row_conc.row(i).sum();
    for (int j = 0; j < k; ++j) d.P.p(i, j) = priors.row_conc(i, j) / row;
  }

  if (spec.longrun_restricted()) {
    auto pi = regime::stationary_distribution(d.P);
    for (int it = 0; it < 200; ++it) {
      bool bear_ok = regime::regime_mean(pi, d.params, regime::Regime::Bear) < 0;
      bool bull_ok = regime::regime_mean(pi, d.params, regime::Regime::Bull) > 0;
      if (bear_ok && bull_ok) break;
      if (!bear_ok) d.params.mu[1] *= 0.5;
      if (!bull_ok) d.params.mu[2] *= 0.5;
    }
  }
  return d;
}

struct StateSuffStats {
  // Per state: count, sum of omega weights, weighted sums of r and r^2
  std::vector<double> n, w_sum, wr_sum;
};

inline Eigen::MatrixXd transition_counts(const std::vector<int>& path, int k) {
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t t = 1; t < path.size(); ++t) n(path[t - 1], path[t]) += 1.0;
  return n;
}

inline regime::TransitionMatrix draw_transition(const Eigen::MatrixXd& counts,
                                                const ModelSpec& spec,
                                                const PriorSpec& priors,
                                                Rng& rng) {
  const int k = spec.states();
  regime::TransitionMatrix P;
  P.zero_mask = spec.zero_mask();
  P.p = Eigen::MatrixXd::Zero(k, k);
  std::vector<int> cells;
  std::vector<double> conc;
  for (int i = 0; i < k; ++i) {
    cells.clear();
    conc.clear();
    for (int j = 0; j < k; ++j) {
      if (priors.row_conc(i, j) > 0.0) {
        cells.push_back(j);
        conc.push_back(priors.row_conc(i, j) + counts(i, j));
      }
    }
    std::vector<double> row = rng.dirichlet(conc);
    for (std::size_t c = 0; c < cells.size(); ++c) P.p(i, cells[c]) = row[c];
  }
  return P;
}

// Conjugate normal draw for each state mean, truncated to its sign region.
// omega carries the t-variant latent scale weights (all ones for normal
// emissions); c_j = (nu_j - 2)/nu_j converts sigma^2 into the t scale.
inline std::vector<double> draw_means(const std::vector<double>& returns,
                                      const std::vector<int>& path,
                                      const regime::StateParams& cur,
                                      const std::vector<double>& omega,
                                      const PriorSpec& priors, Rng& rng) {
  const int k = cur.states();
  std::vector<double> prec(k), mean_num(k);
  for (int j = 0; j < k; ++j) {
    prec[j] = 1.0 / priors.mu_var[j];
    mean_num[j] = priors.mu_mean[j] / priors.mu_var[j];
  }
  for (std::size_t t = 0; t < returns.size(); ++t) {
    int j = path[t];
    double c = cur.nu ? ((*cur.nu)[j] - 2.0) / (*cur.nu)[j] : 1.0;
    double lam = omega[t] / (c * cur.sigma[j] * cur.sigma[j]);
    prec[j] += lam;
    mean_num[j] += lam * returns[t];
  }
  std::vector<double> mu(k);
  for (int j = 0; j < k; ++j) {
    double m = mean_num[j] / prec[j];
    double sd = std::sqrt(1.0 / prec[j]);
    mu[j] = mu_sign_positive(j, k) ? rng.truncated_normal_lower(m, sd, 0.0)
                                   : rng.truncated_normal_upper(m, sd, 0.0);
  }
  return mu;
}

inline bool longrun_ok(const regime::StateParams& params,
                       const regime::TransitionMatrix& P) {
  auto pi = regime::stationary_distribution(P);
  return regime::regime_mean(pi, params, regime::Regime::Bear) < 0.0 &&
         regime::regime_mean(pi, params, regime::Regime::Bull) > 0.0;
}

}  // namespace detail

// Gibbs sampler for the Markov-switching variants. Per sweep: FFBS states,
// Dirichlet rows of P, truncated-normal means, inverse-gamma variances, and
// for the t-variant the latent scale weights plus a griddy d.o.f. update.
// When the long-run inequalities apply, the (mu, P) block is proposed from
// its unconstrained conditionals and accepted only if the inequalities hold;
// after max_rejections failed proposals the previous block values are kept,
// which leaves the constrained posterior invariant.
inline PosteriorSample gibbs_estimate(const data::ReturnSeries& series,
                                      const ModelSpec& spec,
                                      const PriorSpec& priors,
                                      const McmcConfig& cfg,
                                      const PosteriorDraw* warm_start = nullptr) {
  if (!spec.is_markov_switching())
    throw UsageError("gibbs_estimate handles Markov-switching variants only");
  if (series.size() < 50)
    throw DataError("need at least 50 weekly observations, have " +
                    std::to_string(series.size()));
  cfg.validate();
  priors.validate(spec);
  series.validate();

  const int k = spec.states();
  const std::vector<double> r = series.returns();
  const auto t_len = r.size();

  Rng rng(cfg.seed);
  PosteriorDraw state =
      warm_start ? *warm_start : detail::initial_draw(r, spec, priors);
  if (warm_start) {
    if (state.params.states() != k || state.P.states() != k)
      throw DataError("warm start draw has wrong dimensions");
    state.P.zero_mask = spec.zero_mask();
  }

  PosteriorSample out;
  out.spec = spec;
  out.priors = priors;
  out.cfg = cfg;
  out.data_hash = data::series_hash(series);
  out.draws.reserve(cfg.retained);

  std::vector<double> omega(t_len, 1.0);
  const bool is_t = spec.student_t();
  std::vector<double> grid_logp;

  const int sweeps = cfg.burn_in + cfg.retained;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    // 1. latent states
    FilterOutput filt = hamilton_filter(std::span<const double>(r),
                                        state.params, state.P);
    std::vector<int> path = ffbs_sample(filt, state.P, rng);
    Eigen::MatrixXd counts = detail::transition_counts(path, k);

    // 2. t-variant: degrees of freedom (scale weights marginalized out),
    //    then refreshed latent scale weights
    if (is_t) {
      auto& nu = *state.params.nu;
      std::vector<double> e;  // squared standardized residuals for one state
      for (int j = 0; j < k; ++j) {
        e.clear();
        double sig = state.params.sigma[j];
        for (std::size_t t = 0; t < t_len; ++t) {
          if (path[t] != j) continue;
          double d = (r[t] - state.params.mu[j]) / sig;
          e.push_back(d * d);
        }
        grid_logp.assign(priors.nu_grid.size(), 0.0);
        for (std::size_t g = 0; g < priors.nu_grid.size(); ++g) {
          double cand = priors.nu_grid[g];
          double c0 = std::lgamma(0.5 * (cand + 1.0)) -
                      std::lgamma(0.5 * cand) -
                      0.5 * std::log(cand * M_PI) - std::log(sig) -
                      0.5 * std::log((cand - 2.0) / cand);
          double tail = 0.0;
          for (double ee : e) tail += std::log1p(ee / (cand - 2.0));
          grid_logp[g] = double(e.size()) * c0 - 0.5 * (cand + 1.0) * tail;
        }
        double m = *std::max_element(grid_logp.begin(), grid_logp.end());
        std::vector<double> w(grid_logp.size());
        for (std::size_t g = 0; g < w.size(); ++g)
          w[g] = std::exp(grid_logp[g] - m);
        nu[j] = priors.nu_grid[rng.categorical(w)];
      }
      for (std::size_t t = 0; t < t_len; ++t) {
        int j = path[t];
        double nuj = nu[j];
        double s2 = state.params.sigma[j] * state.params.sigma[j] *
                    (nuj - 2.0) / nuj;
        double eps = r[t] - state.params.mu[j];
        double shape = 0.5 * (nuj + 1.0);
        double rate = 0.5 * (nuj + eps * eps / s2);
        omega[t] = rng.gamma(shape, 1.0 / rate);
      }
    }

    // 3. transition matrix and means, jointly subject to the long-run check
    if (spec.longrun_restricted()) {
      bool accepted = false;
      for (int attempt = 0; attempt < cfg.max_rejections; ++attempt) {
        regime::TransitionMatrix p_new =
            detail::draw_transition(counts, spec, priors, rng);
        std::vector<double> mu_new =
            detail::draw_means(r, path, state.params, omega, priors, rng);
        regime::StateParams cand = state.params;
        cand.mu = mu_new;
        if (detail::longrun_ok(cand, p_new)) {
          state.P = std::move(p_new);
          state.params.mu = std::move(mu_new);
          accepted = true;
          out.diagnostics.longrun_rejections += attempt;
          break;
        }
      }
      if (!accepted) {
        out.diagnostics.longrun_rejections += cfg.max_rejections;
        ++out.diagnostics.longrun_exhaustions;
      }
    } else {
      state.P = detail::draw_transition(counts, spec, priors, rng);
      state.params.mu =
          detail::draw_means(r, path, state.params, omega, priors, rng);
    }

    // 4. variances
    for (int j = 0; j < k; ++j) {
      double c = is_t ? ((*state.params.nu)[j] - 2.0) / (*state.params.nu)[j]
                      : 1.0;
      double shape = priors.sigma2_shape[j];
      double scale = priors.sigma2_scale[j];
      for (std::size_t t = 0; t < t_len; ++t) {
        if (path[t] != j) continue;
        double eps = r[t] - state.params.mu[j];
        shape += 0.5;
        scale += 0.5 * omega[t] * eps * eps / c;
      }
      state.params.sigma[j] = std::sqrt(rng.inverse_gamma(shape, scale));
    }

    if (sweep >= cfg.burn_in) {
      PosteriorDraw rec;
      rec.params = state.params;
      rec.P = state.P;
      rec.state_path.resize(t_len);
      for (std::size_t t = 0; t < t_len; ++t)
        rec.state_path[t] = std::uint8_t(path[t]);
      out.draws.push_back(std::move(rec));
    }
  }
  return out;
}

struct SmoothedProbs {
  Eigen::MatrixXd state;  // T x K, draw frequencies of each state
  Eigen::VectorXd bull;   // T, bull-regime probability
};

inline SmoothedProbs smoothed_state_probs(const PosteriorSample& sample) {
  if (sample.draws.empty()) throw DataError("empty posterior sample");
  const auto t_len =
      static_cast<Eigen::Index>(sample.draws.front().state_path.size());
  const int k = sample.draws.front().params.states();
  SmoothedProbs out;
  out.state = Eigen::MatrixXd::Zero(t_len, k);
  for (const auto& d : sample.draws) {
    if (Eigen::Index(d.state_path.size()) != t_len)
      throw DataError("inconsistent path lengths in posterior sample");
    for (Eigen::Index t = 0; t < t_len; ++t)
      out.state(t, d.state_path[t]) += 1.0;
  }
  out.state /= double(sample.draws.size());
  out.bull.resize(t_len);
  for (Eigen::Index t = 0; t < t_len; ++t)
    out.bull(t) = regime::regime_probability(out.state.row(t).transpose());
  return out;
}

}  // namespace bullbear::mcmc
