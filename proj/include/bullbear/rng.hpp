#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "bullbear/errors.hpp"
#include "bullbear/math.hpp"

namespace bullbear {

// Deterministic stream derivation: every worker (forecast origin, chain,
// strategy grid point) gets its seed from the master seed and a stream id via
// splitmix64, so results do not depend on scheduling order.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s = a ^ (stream * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
  return splitmix64(s);
}

// Seeded generator with the handful of samplers the Gibbs steps need.
// All draws reduce to mt19937_64 output through fixed arithmetic, so a seed
// reproduces bit-identical streams across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1): 53 random bits.
  double uniform() {
    return double(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1); avoids exact zero for log() use.
  double uniform_pos() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  double normal() { return normal_quantile(uniform_pos()); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  // Marsaglia-Tsang; shape > 0, scale > 0.
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
      throw NumericalError("gamma sampler requires positive shape and scale");
    if (shape < 1.0) {
      double u = uniform_pos();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = uniform_pos();
      double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v)))
        return d * v * scale;
    }
  }

  // Inverse-gamma with shape a and scale b: density ~ x^{-a-1} exp(-b/x).
  double inverse_gamma(double shape, double scale) {
    return 1.0 / gamma(shape, 1.0 / scale);
  }

  // Dirichlet over the given concentrations (all > 0).
  std::vector<double> dirichlet(std::span<const double> conc) {
    std::vector<double> out(conc.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < conc.size(); ++i) {
      out[i] = gamma(conc[i], 1.0);
      sum += out[i];
    }
    if (!(sum > 0.0)) throw NumericalError("degenerate Dirichlet draw");
    for (double& v : out) v /= sum;
    return out;
  }

  // N(mean, sd) conditioned on x > lower. Plain rejection near the bulk,
  // Robert (1995) exponential rejection in the tail.
  double truncated_normal_lower(double mean, double sd, double lower) {
    double a = (lower - mean) / sd;
    double z;
    if (a < 0.45) {
      do {
        z = normal();
      } while (z <= a);
    } else {
      double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
      for (;;) {
        z = a + exponential(lambda);
        double rho = std::exp(-0.5 * (z - lambda) * (z - lambda));
        if (uniform() <= rho) break;
      }
    }
    return mean + sd * z;
  }

  // N(mean, sd) conditioned on x < upper.
  double truncated_normal_upper(double mean, double sd, double upper) {
    return -truncated_normal_lower(-mean, sd, -upper);
  }

  // Index draw from unnormalized non-negative weights.
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0) || !std::isfinite(total))
      throw NumericalError("categorical draw over zero/invalid weights");
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bullbear
