#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "bullbear/errors.hpp"
#include "bullbear/market_data.hpp"
#include "bullbear/math.hpp"
#include "bullbear/optim.hpp"
#include "bullbear/parallel.hpp"
#include "bullbear/rng.hpp"
#include "bullbear/rolling.hpp"

namespace bullbear::garch {

struct GarchParams {
  double mu = 0.0;     // mean weekly return, %
  double omega = 0.0;  // > 0
  double alpha = 0.0;  // >= 0
  double beta = 0.0;   // >= 0, alpha + beta < 1

  bool stationary() const {
    return omega > 0.0 && alpha >= 0.0 && beta >= 0.0 && alpha + beta < 1.0;
  }

  double unconditional_variance() const { return omega / (1.0 - alpha - beta); }
};

enum class VarianceInit { Unconditional, FirstResidual };

struct GarchLoglik {
  double total = 0.0;           // Gaussian log-likelihood over t >= 2
  std::vector<double> sigma2;   // conditional variance path, one per obs
};

// sigma2_t = omega + alpha eps_{t-1}^2 + beta sigma2_{t-1}, seeded at the
// unconditional variance (or the first squared residual).
inline GarchLoglik garch_loglik(std::span<const double> returns,
                                const GarchParams& p,
                                VarianceInit init = VarianceInit::Unconditional) {
  if (!p.stationary())
    throw NumericalError("GARCH parameters violate stationarity");
  if (returns.size() < 2) throw DataError("need at least 2 observations");
  GarchLoglik out;
  out.sigma2.resize(returns.size());
  double eps0 = returns[0] - p.mu;
  out.sigma2[0] = init == VarianceInit::Unconditional
                      ? p.unconditional_variance()
                      : std::max(eps0 * eps0, 1e-12);
  for (std::size_t t = 1; t < returns.size(); ++t) {
    double eps_prev = returns[t - 1] - p.mu;
    out.sigma2[t] = p.omega + p.alpha * eps_prev * eps_prev +
                    p.beta * out.sigma2[t - 1];
    out.total += normal_logpdf(returns[t], p.mu, std::sqrt(out.sigma2[t]));
  }
  return out;
}

struct GarchFit {
  GarchParams params;
  Eigen::Matrix4d covariance;  // asymptotic, from the numerical Hessian
  double loglik = 0.0;
  int starts_used = 0;
};

namespace detail {

// Unconstrained parameterization: theta = (mu, log omega, a, b) with
// (alpha, beta) = (e^a, e^b) / (1 + e^a + e^b), keeping the stationarity
// region open.
inline GarchParams from_unconstrained(const std::vector<double>& th) {
  GarchParams p;
  p.mu = th[0];
  p.omega = std::exp(th[1]);
  double ea = std::exp(th[2]), eb = std::exp(th[3]);
  double denom = 1.0 + ea + eb;
  p.alpha = ea / denom;
  p.beta = eb / denom;
  return p;
}

inline std::vector<double> to_unconstrained(const GarchParams& p) {
  double rest = 1.0 - p.alpha - p.beta;
  double a = std::log(std::max(p.alpha, 1e-8) / rest);
  double b = std::log(std::max(p.beta, 1e-8) / rest);
  return {p.mu, std::log(p.omega), a, b};
}

}  // namespace detail

// Maximum likelihood via Nelder-Mead over the unconstrained parameters, with
// deterministic moment-based starts plus seeded jitter. Returns the estimate,
// its finite-difference covariance and the achieved log-likelihood.
inline GarchFit garch_estimate(std::span<const double> returns,
                               VarianceInit init = VarianceInit::Unconditional,
                               std::uint64_t seed = 7,
                               std::size_t min_obs = 100) {
  if (returns.size() < min_obs)
    throw DataError("need at least " + std::to_string(min_obs) +
                    " observations for GARCH estimation");
  Moments m = moments(returns);
  if (!(m.variance > 0.0))
    throw NumericalError("constant series: GARCH variance undefined");

  auto objective = [&](const std::vector<double>& th) {
    GarchParams p = detail::from_unconstrained(th);
    if (!p.stationary() || !std::isfinite(p.omega) || p.omega <= 0.0)
      return 1e10;
    double ll;
    try {
      ll = garch_loglik(returns, p, init).total;
    } catch (const std::exception&) {
      return 1e10;
    }
    return std::isfinite(ll) ? -ll : 1e10;
  };

  std::vector<GarchParams> starts;
  for (auto [a, b] : {std::pair{0.05, 0.90}, {0.10, 0.80}, {0.02, 0.55},
                      {0.20, 0.70}}) {
    GarchParams s;
    s.mu = m.mean;
    s.alpha = a;
    s.beta = b;
    s.omega = m.variance * (1.0 - a - b);
    starts.push_back(s);
  }
  Rng rng(seed);
  for (int extra = 0; extra < 3; ++extra) {
    GarchParams s = starts[0];
    s.mu = m.mean + 0.1 * std::sqrt(m.variance) * rng.normal();
    double a = 0.02 + 0.25 * rng.uniform();
    double b = 0.45 + 0.5 * rng.uniform();
    if (a + b >= 0.99) b = 0.98 - a;
    s.alpha = a;
    s.beta = b;
    s.omega = m.variance * (1.0 - a - b);
    starts.push_back(s);
  }

  GarchFit fit;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_theta;
  for (const auto& s : starts) {
    auto r = nelder_mead(objective, detail::to_unconstrained(s), 0.2, 1e-12,
                         3000);
    ++fit.starts_used;
    if (r.value < best) {
      best = r.value;
      best_theta = r.x;
    }
  }
  if (!std::isfinite(best) || best >= 1e10)
    throw NumericalError("GARCH optimization failed from every start");
  fit.params = detail::from_unconstrained(best_theta);
  fit.loglik = -best;

  // covariance = inverse numerical Hessian of -loglik in (mu, omega, alpha,
  // beta) space. Perturbations that land outside the stationarity region
  // (an MLE at the boundary, e.g. alpha ~ 0) poison the affected entries
  // with NaN rather than aborting the fit.
  auto nll = [&](const GarchParams& p) {
    if (!p.stationary()) return std::numeric_limits<double>::quiet_NaN();
    return -garch_loglik(returns, p, init).total;
  };
  auto get = [](const GarchParams& p, int i) -> double {
    switch (i) {
      case 0: return p.mu;
      case 1: return p.omega;
      case 2: return p.alpha;
      default: return p.beta;
    }
  };
  auto set = [](GarchParams p, int i, double v) {
    switch (i) {
      case 0: p.mu = v; break;
      case 1: p.omega = v; break;
      case 2: p.alpha = v; break;
      default: p.beta = v; break;
    }
    return p;
  };
  Eigen::Matrix4d hess;
  const double f0 = nll(fit.params);
  std::array<double, 4> h;
  for (int i = 0; i < 4; ++i)
    h[std::size_t(i)] = std::max(1e-5, 1e-4 * std::abs(get(fit.params, i)));
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) {
      double hi = h[std::size_t(i)], hj = h[std::size_t(j)];
      double v;
      if (i == j) {
        v = (nll(set(fit.params, i, get(fit.params, i) + hi)) - 2.0 * f0 +
             nll(set(fit.params, i, get(fit.params, i) - hi))) /
            (hi * hi);
      } else {
        auto pp = set(set(fit.params, i, get(fit.params, i) + hi), j,
                      get(fit.params, j) + hj);
        auto pm = set(set(fit.params, i, get(fit.params, i) + hi), j,
                      get(fit.params, j) - hj);
        auto mp = set(set(fit.params, i, get(fit.params, i) - hi), j,
                      get(fit.params, j) + hj);
        auto mm = set(set(fit.params, i, get(fit.params, i) - hi), j,
                      get(fit.params, j) - hj);
        v = (nll(pp) - nll(pm) - nll(mp) + nll(mm)) / (4.0 * hi * hj);
      }
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  if (hess.hasNaN()) {
    fit.covariance = Eigen::Matrix4d::Constant(
        4, 4, std::numeric_limits<double>::quiet_NaN());
    return fit;
  }
  Eigen::FullPivLU<Eigen::Matrix4d> lu(hess);
  fit.covariance = lu.isInvertible()
                       ? Eigen::Matrix4d(lu.inverse())
                       : Eigen::Matrix4d::Constant(
                             4, 4, std::numeric_limits<double>::quiet_NaN());
  return fit;
}

inline GarchFit garch_estimate(const data::ReturnSeries& series,
                               VarianceInit init = VarianceInit::Unconditional,
                               std::uint64_t seed = 7) {
  std::vector<double> r = series.returns();
  return garch_estimate(std::span<const double>(r), init, seed);
}

struct GarchForecast {
  double mean = 0.0;
  double variance = 0.0;

  double var_quantile(double level) const {
    return mean + std::sqrt(variance) * normal_quantile(level);
  }

  double log_score(double realized) const {
    return normal_logpdf(realized, mean, std::sqrt(variance));
  }
};

// One-step-ahead forecast after the last observation of `returns`.
inline GarchForecast garch_forecast(std::span<const double> returns,
                                    const GarchParams& p,
                                    VarianceInit init = VarianceInit::Unconditional) {
  GarchLoglik ll = garch_loglik(returns, p, init);
  double eps = returns.back() - p.mu;
  GarchForecast f;
  f.mean = p.mu;
  f.variance = p.omega + p.alpha * eps * eps + p.beta * ll.sigma2.back();
  return f;
}

// Rolling weekly re-fit: plug-in one-step log predictive scores over the
// evaluation window, matching the trace schema of the MS variants.
inline forecast::RollingResult garch_rolling(
    const data::ReturnSeries& series, Date from, Date to,
    VarianceInit init = VarianceInit::Unconditional, std::uint64_t seed = 7,
    int jobs = 1, const std::vector<double>& var_levels = {0.01, 0.05}) {
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

  std::vector<double> all = series.returns();
  struct Slot {
    forecast::OriginForecast origin;
    bool ok = false;
    std::string warning;
  };
  std::vector<Slot> slots(eval_ix.size());
  parallel_for(eval_ix.size(), jobs, [&](std::size_t n) {
    std::size_t e = eval_ix[n];
    std::span<const double> hist(all.data(), e);
    try {
      GarchFit fit = garch_estimate(hist, init, derive_seed(seed, n));
      GarchForecast f = garch_forecast(hist, fit.params, init);
      forecast::OriginForecast& o = slots[n].origin;
      o.date = series[e].anchor_date;
      o.mean = f.mean;
      o.sd = std::sqrt(f.variance);
      o.sharpe = f.mean / o.sd;
      for (double level : var_levels)
        o.var_levels[level] = f.var_quantile(level);
      o.logscore = f.log_score(series[e].log_return);
      slots[n].ok = true;
    } catch (const std::exception& ex) {
      slots[n].warning = "origin " + series[e].anchor_date.to_string() +
                         " skipped: " + ex.what();
    }
  });

  forecast::RollingResult out;
  out.model = "GARCH11";
  out.trace.model = "GARCH11";
  for (auto& s : slots) {
    if (!s.ok) {
      out.warnings.push_back(s.warning);
      continue;
    }
    out.origins.push_back(s.origin);
    out.trace.push(s.origin.date, s.origin.logscore);
  }
  return out;
}

}  // namespace bullbear::garch
