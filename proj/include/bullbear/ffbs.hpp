#pragma once

#include <vector>

#include "bullbear/filter.hpp"
#include "bullbear/rng.hpp"

namespace bullbear::mcmc {

// Forward-filter backward-sampling: draws a full state path from its exact
// posterior given parameters. s_T comes from the final filtered distribution;
// going backwards, s_t ~ Pr(s_t | s_{t+1}, r_{1:t}) with weights
// xi_{t|t,i} * p_{i, s_{t+1}}. Masked transition cells have p = 0 and so can
// never appear in a sampled path.
inline std::vector<int> ffbs_sample(const FilterOutput& filter,
                                    const regime::TransitionMatrix& P,
                                    Rng& rng) {
  const auto t_len = filter.filtered.rows();
  const int k = static_cast<int>(filter.filtered.cols());
  std::vector<int> path(t_len);
  std::vector<double> w(k);

  for (int j = 0; j < k; ++j) w[j] = filter.filtered(t_len - 1, j);
  path[t_len - 1] = rng.categorical(w);

  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    int next = path[t + 1];
    for (int j = 0; j < k; ++j) w[j] = filter.filtered(t, j) * P.p(j, next);
    path[t] = rng.categorical(w);
  }
  return path;
}

}  // namespace bullbear::mcmc
