#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "bullbear/errors.hpp"

namespace bullbear {

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Derivative-free simplex minimization (standard reflection/expansion/
// contraction/shrink coefficients). Deterministic given the start point.
inline NelderMeadResult nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> start, double initial_step = 0.25,
    double tol = 1e-10, int max_iter = 2000) {
  const std::size_t n = start.size();
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;

  std::vector<std::vector<double>> simplex(n + 1, start);
  for (std::size_t i = 0; i < n; ++i)
    simplex[i + 1][i] += (start[i] != 0.0 ? 0.1 * std::abs(start[i]) : 0.0) +
                         initial_step;
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);

  NelderMeadResult res;
  std::vector<std::size_t> order(n + 1);
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    res.iterations = it;
    if (std::abs(fv[order[n]] - fv[order[0]]) <
        tol * (std::abs(fv[order[0]]) + tol)) {
      res.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[order[i]][d];
    for (double& c : centroid) c /= double(n);
    const std::size_t worst = order[n];

    auto blend = [&](double coef) {
      std::vector<double> x(n);
      for (std::size_t d = 0; d < n; ++d)
        x[d] = centroid[d] + coef * (centroid[d] - simplex[worst][d]);
      return x;
    };

    std::vector<double> xr = blend(alpha);
    double fr = f(xr);
    if (fr < fv[order[0]]) {
      std::vector<double> xe = blend(gamma);
      double fe = f(xe);
      if (fe < fr) {
        simplex[worst] = std::move(xe);
        fv[worst] = fe;
      } else {
        simplex[worst] = std::move(xr);
        fv[worst] = fr;
      }
    } else if (fr < fv[order[n - 1]]) {
      simplex[worst] = std::move(xr);
      fv[worst] = fr;
    } else {
      std::vector<double> xc = blend(-rho);
      double fc = f(xc);
      if (fc < fv[worst]) {
        simplex[worst] = std::move(xc);
        fv[worst] = fc;
      } else {
        const auto& best = simplex[order[0]];
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == order[0]) continue;
          for (std::size_t d = 0; d < n; ++d)
            simplex[i][d] = best[d] + shrink * (simplex[i][d] - best[d]);
          fv[i] = f(simplex[i]);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  res.x = simplex[best];
  res.value = fv[best];
  return res;
}

}  // namespace bullbear
