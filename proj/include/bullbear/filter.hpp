#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "bullbear/errors.hpp"
#include "bullbear/market_data.hpp"
#include "bullbear/math.hpp"
#include "bullbear/regime.hpp"

namespace bullbear::mcmc {

// Log emission density of one return in one state: normal, or the
// variance-normalized Student-t when d.o.f. are present.
inline double emission_logdensity(double r, const regime::StateParams& params,
                                  int state) {
  if (params.nu)
    return student_t_logpdf(r, params.mu[state], params.sigma[state],
                            (*params.nu)[state]);
  return normal_logpdf(r, params.mu[state], params.sigma[state]);
}

struct FilterOutput {
  Eigen::MatrixXd predicted;      // T x K, row t = xi_{t|t-1}
  Eigen::MatrixXd filtered;       // T x K, row t = xi_{t|t}
  Eigen::VectorXd loglik_contrib; // log p(r_t | r_{1:t-1})
  double total_loglik = 0.0;
};

// Hamilton filter with per-step normalization; stable for long series. The
// initial predicted distribution defaults to the stationary vector of P.
inline FilterOutput hamilton_filter(
    std::span<const double> returns, const regime::StateParams& params,
    const regime::TransitionMatrix& P,
    std::optional<Eigen::VectorXd> init = std::nullopt) {
  params.validate();
  const int k = params.states();
  if (P.states() != k) throw DataError("params/transition dimension mismatch");
  const auto t_len = static_cast<Eigen::Index>(returns.size());
  if (t_len == 0) throw DataError("empty return series");

  Eigen::VectorXd pred;
  if (init) {
    pred = *init;
    if (pred.size() != k) throw DataError("init distribution has wrong size");
  } else {
    pred = regime::stationary_distribution(P).pi;
  }

  FilterOutput out;
  out.predicted.resize(t_len, k);
  out.filtered.resize(t_len, k);
  out.loglik_contrib.resize(t_len);

  // Per-state emission constants, hoisted out of the time loop.
  const bool is_t = params.nu.has_value();
  std::vector<double> c0(k), half_inv_var(k), nu_val(k), inv_s2(k);
  for (int j = 0; j < k; ++j) {
    double sig = params.sigma[j];
    if (is_t) {
      double nu = (*params.nu)[j];
      double s = sig * std::sqrt((nu - 2.0) / nu);
      nu_val[j] = nu;
      inv_s2[j] = 1.0 / (s * s);
      c0[j] = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
              0.5 * std::log(nu * M_PI) - std::log(s);
    } else {
      c0[j] = -0.5 * kLogTwoPi - std::log(sig);
      half_inv_var[j] = 0.5 / (sig * sig);
    }
  }

  std::vector<double> logf(k), w(k);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    double r = returns[t];
    if (!std::isfinite(r))
      throw DataError("non-finite return at index " + std::to_string(t));
    out.predicted.row(t) = pred;

    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      double d = r - params.mu[j];
      if (is_t) {
        logf[j] = c0[j] - 0.5 * (nu_val[j] + 1.0) *
                              std::log1p(d * d * inv_s2[j] / nu_val[j]);
      } else {
        logf[j] = c0[j] - half_inv_var[j] * d * d;
      }
      if (logf[j] > m) m = logf[j];
    }
    double s = 0.0;
    for (int j = 0; j < k; ++j) {
      w[j] = pred(j) * std::exp(logf[j] - m);
      s += w[j];
    }
    if (!(s > 0.0) || !std::isfinite(s))
      throw NumericalError(
          "zero filtered likelihood at index " + std::to_string(t) +
          " (corrupt parameters)");
    for (int j = 0; j < k; ++j) out.filtered(t, j) = w[j] / s;
    out.loglik_contrib(t) = std::log(s) + m;

    if (t + 1 < t_len) pred = P.p.transpose() * out.filtered.row(t).transpose();
  }
  out.total_loglik = out.loglik_contrib.sum();
  return out;
}

inline FilterOutput hamilton_filter(
    const data::ReturnSeries& series, const regime::StateParams& params,
    const regime::TransitionMatrix& P,
    std::optional<Eigen::VectorXd> init = std::nullopt) {
  std::vector<double> r = series.returns();
  return hamilton_filter(std::span<const double>(r), params, P,
                         std::move(init));
}

}  // namespace bullbear::mcmc
