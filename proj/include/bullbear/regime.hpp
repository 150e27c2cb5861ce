#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bullbear/errors.hpp"

namespace bullbear::regime {

// State-indexed emission parameters. States follow the paper's 1-based labels
// in all I/O (1=bear, 2=bear rally, 3=bull correction, 4=bull); indices are
// 0-based in code.
struct StateParams {
  std::vector<double> mu;     // weekly % mean per state
  std::vector<double> sigma;  // weekly % volatility per state, > 0
  std::optional<std::vector<double>> nu;  // t-variant d.o.f. per state, > 2

  int states() const { return static_cast<int>(mu.size()); }

  void validate() const {
    if (mu.size() != sigma.size())
      throw DataError("mu/sigma dimension mismatch");
    if (nu && nu->size() != mu.size())
      throw DataError("nu dimension mismatch");
    for (double s : sigma)
      if (!(s > 0.0)) throw DataError("state volatility must be positive");
    if (nu)
      for (double v : *nu)
        if (!(v > 2.0)) throw DataError("degrees of freedom must exceed 2");
  }
};

using ZeroMask = std::vector<std::pair<int, int>>;

// Cells pinned to zero in the restricted 4-state chain: bear and bear-rally
// states cannot move to a bull correction, bull and bull-correction states
// cannot move to a bear rally. 0-based; paper cells (1,3),(2,3),(3,2),(4,2).
inline const ZeroMask& ms4_zero_mask() {
  static const ZeroMask mask{{0, 2}, {1, 2}, {2, 1}, {3, 1}};
  return mask;
}

struct TransitionMatrix {
  Eigen::MatrixXd p;   // K x K, row-stochastic
  ZeroMask zero_mask;  // cells fixed at exactly 0

  int states() const { return static_cast<int>(p.rows()); }

  bool masked(int i, int j) const {
    for (const auto& [a, b] : zero_mask)
      if (a == i && b == j) return true;
    return false;
  }

  void validate() const {
    if (p.rows() != p.cols()) throw DataError("transition matrix not square");
    for (int i = 0; i < p.rows(); ++i) {
      double row = 0.0;
      for (int j = 0; j < p.cols(); ++j) {
        if (p(i, j) < 0.0)
          throw DataError("negative transition probability at (" +
                          std::to_string(i + 1) + "," + std::to_string(j + 1) +
                          ")");
        row += p(i, j);
      }
      if (std::abs(row - 1.0) > 1e-12)
        throw DataError("transition row " + std::to_string(i + 1) +
                        " does not sum to 1");
    }
    for (const auto& [i, j] : zero_mask)
      if (p(i, j) != 0.0)
        throw DataError("masked cell (" + std::to_string(i + 1) + "," +
                        std::to_string(j + 1) + ") is not exactly 0");
  }
};

struct StationaryDistribution {
  Eigen::VectorXd pi;
};

// Regime aggregation: bear = 1, bull = 2, matching B_t in the paper.
enum class Regime { Bear = 1, Bull = 2 };

// K=4: states {1,2} are bear, {3,4} bull. K=2: {1} bear, {2} bull.
inline bool is_bull_state(int state0, int k) {
  if (k == 4) return state0 >= 2;
  if (k == 2) return state0 == 1;
  throw DataError("regime map defined for K in {2,4}, got K=" +
                  std::to_string(k));
}

// Unconditional state probabilities: the least-squares solution of the
// stationarity system [P' - I; 1']*pi = (0,...,0,1), i.e.
// pi = (A'A)^{-1} A' e. A singular normal matrix means the chain has no
// unique stationary vector (reducible/periodic) and is reported as an error.
inline StationaryDistribution stationary_distribution(
    const TransitionMatrix& P) {
  P.validate();
  const int k = P.states();
  Eigen::MatrixXd A(k + 1, k);
  A.topRows(k) = P.p.transpose() - Eigen::MatrixXd::Identity(k, k);
  A.bottomRows(1) = Eigen::RowVectorXd::Ones(k);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(k + 1);
  e(k) = 1.0;
  Eigen::MatrixXd ata = A.transpose() * A;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(ata);
  if (!lu.isInvertible())
    throw NumericalError(
        "no unique stationary distribution (reducible or periodic chain)");
  Eigen::VectorXd pi = lu.solve(A.transpose() * e);

  for (int i = 0; i < k; ++i) {
    if (pi(i) < -1e-9)
      throw NumericalError("stationary solve produced a negative probability");
    if (pi(i) < 0.0) pi(i) = 0.0;
  }
  pi /= pi.sum();
  double resid = (P.p.transpose() * pi - pi).cwiseAbs().maxCoeff();
  if (resid > 1e-8)
    throw NumericalError(
        "stationary solve failed to satisfy pi P = pi (residual " +
        std::to_string(resid) + ")");
  return {pi};
}

// Long-run mean of weekly returns within a regime: the pi-weighted average of
// the member-state means, normalized by the regime's probability mass.
inline double regime_mean(const StationaryDistribution& dist,
                          const StateParams& params, Regime regime) {
  params.validate();
  const int k = params.states();
  double mass = 0.0, weighted = 0.0;
  for (int i = 0; i < k; ++i) {
    if (is_bull_state(i, k) != (regime == Regime::Bull)) continue;
    mass += dist.pi(i);
    weighted += dist.pi(i) * params.mu[i];
  }
  if (!(mass > 0.0))
    throw NumericalError("regime has zero stationary probability mass");
  return weighted / mass;
}

struct IdentificationResult {
  bool pass = true;
  std::string reason;  // first violated restriction, empty when pass
};

// Checks the identification restrictions: state-mean signs, masked cells, and
// (restricted 4-state variant only) the long-run regime-mean inequalities.
// Strict inequalities, no tolerance band.
inline IdentificationResult check_identification(const StateParams& params,
                                                 const TransitionMatrix& P,
                                                 bool restricted) {
  const int k = params.states();
  for (int i = 0; i < k; ++i) {
    bool want_positive = (k == 4) ? (i == 1 || i == 3) : (i == 1);
    double m = params.mu[i];
    if (want_positive ? !(m > 0.0) : !(m < 0.0))
      return {false, "mu_" + std::to_string(i + 1) + " sign"};
  }
  for (const auto& [i, j] : P.zero_mask)
    if (P.p(i, j) != 0.0)
      return {false, "masked cell (" + std::to_string(i + 1) + "," +
                         std::to_string(j + 1) + ") nonzero"};
  if (restricted && k == 4) {
    StationaryDistribution pi;
    try {
      pi = stationary_distribution(P);
    } catch (const NumericalError&) {
      return {false, "no unique stationary distribution"};
    }
    if (!(regime_mean(pi, params, Regime::Bear) < 0.0))
      return {false, "bear long-run mean"};
    if (!(regime_mean(pi, params, Regime::Bull) > 0.0))
      return {false, "bull long-run mean"};
  }
  return {};
}

// P(bull regime) from a vector of state probabilities; the bear probability
// is exactly 1 - result.
inline double regime_probability(const Eigen::VectorXd& state_probs) {
  const int k = static_cast<int>(state_probs.size());
  double bull = 0.0;
  for (int i = 0; i < k; ++i)
    if (is_bull_state(i, k)) bull += state_probs(i);
  return bull;
}

// --- JSON (de)serialization of parameter sets ------------------------------
// Schema: { "mu": [...], "sigma": [...], "nu": [...]?, "P": [[...]],
//           "zero_mask": [[i,j], ...] } with 1-based mask cells.

inline nlohmann::json to_json(const StateParams& params,
                              const TransitionMatrix& P) {
  nlohmann::json j;
  j["mu"] = params.mu;
  j["sigma"] = params.sigma;
  if (params.nu) j["nu"] = *params.nu;
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < P.p.rows(); ++i) {
    std::vector<double> row(P.p.cols());
    for (int c = 0; c < P.p.cols(); ++c) row[c] = P.p(i, c);
    rows.push_back(std::move(row));
  }
  j["P"] = rows;
  std::vector<std::vector<int>> mask;
  for (const auto& [a, b] : P.zero_mask) mask.push_back({a + 1, b + 1});
  j["zero_mask"] = mask;
  return j;
}

inline std::pair<StateParams, TransitionMatrix> params_from_json(
    const nlohmann::json& j) {
  StateParams params;
  params.mu = j.at("mu").get<std::vector<double>>();
  params.sigma = j.at("sigma").get<std::vector<double>>();
  if (j.contains("nu") && !j["nu"].is_null())
    params.nu = j["nu"].get<std::vector<double>>();
  auto rows = j.at("P").get<std::vector<std::vector<double>>>();
  const int k = static_cast<int>(rows.size());
  TransitionMatrix P;
  P.p.resize(k, k);
  for (int i = 0; i < k; ++i) {
    if (int(rows[i].size()) != k) throw DataError("ragged P matrix in JSON");
    for (int c = 0; c < k; ++c) P.p(i, c) = rows[i][c];
  }
  if (j.contains("zero_mask"))
    for (const auto& cell : j["zero_mask"])
      P.zero_mask.push_back({cell.at(0).get<int>() - 1,
                             cell.at(1).get<int>() - 1});
  params.validate();
  P.validate();
  return {params, P};
}

}  // namespace bullbear::regime
