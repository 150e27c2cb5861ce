#include <gtest/gtest.h>

#include <random>

#include "bullbear/gibbs.hpp"
#include "bullbear/posterior_io.hpp"
#include "testutil.hpp"

using namespace bullbear;
using namespace bullbear::mcmc;

namespace {

data::ReturnSeries simulated_series(int t_len, unsigned seed) {
  auto params = testutil::reference_params();
  auto P = testutil::reference_transition();
  std::mt19937 gen(seed);
  return testutil::make_series(
      testutil::simulate_ms(params.mu, params.sigma, P.p, t_len, gen));
}

bool draws_identical(const PosteriorSample& a, const PosteriorSample& b) {
  if (a.draws.size() != b.draws.size()) return false;
  for (std::size_t i = 0; i < a.draws.size(); ++i) {
    const auto& da = a.draws[i];
    const auto& db = b.draws[i];
    if (da.params.mu != db.params.mu) return false;
    if (da.params.sigma != db.params.sigma) return false;
    if (da.params.nu.has_value() != db.params.nu.has_value()) return false;
    if (da.params.nu && *da.params.nu != *db.params.nu) return false;
    if (da.state_path != db.state_path) return false;
    for (int r = 0; r < da.P.p.rows(); ++r)
      for (int c = 0; c < da.P.p.cols(); ++c)
        if (da.P.p(r, c) != db.P.p(r, c)) return false;
  }
  return true;
}

}  // namespace

TEST(GibbsEstimate, TooShortSeriesIsAnError) {
  auto series = simulated_series(30, 1);
  ModelSpec spec{ModelKind::Ms4};
  auto priors = PriorSpec::defaults(spec);
  McmcConfig cfg{.burn_in = 10, .retained = 10, .seed = 1};
  EXPECT_THROW(gibbs_estimate(series, spec, priors, cfg), DataError);
}

TEST(GibbsEstimate, SameSeedIsBitIdentical) {
  auto series = simulated_series(150, 2);
  ModelSpec spec{ModelKind::Ms4};
  auto priors = PriorSpec::defaults(spec);
  McmcConfig cfg{.burn_in = 20, .retained = 40, .seed = 777};
  auto a = gibbs_estimate(series, spec, priors, cfg);
  auto b = gibbs_estimate(series, spec, priors, cfg);
  EXPECT_TRUE(draws_identical(a, b));
  cfg.seed = 778;
  auto c = gibbs_estimate(series, spec, priors, cfg);
  EXPECT_FALSE(draws_identical(a, c));
}

TEST(GibbsEstimate, EveryRetainedDrawIsIdentified) {
  auto series = simulated_series(300, 3);
  ModelSpec spec{ModelKind::Ms4};
  auto priors = PriorSpec::defaults(spec);
  McmcConfig cfg{.burn_in = 50, .retained = 200, .seed = 5};
  auto sample = gibbs_estimate(series, spec, priors, cfg);
  ASSERT_EQ(sample.draws.size(), 200u);
  for (const auto& d : sample.draws) {
    auto res = regime::check_identification(d.params, d.P, true);
    ASSERT_TRUE(res.pass) << res.reason;
    for (const auto& [i, j] : d.P.zero_mask) ASSERT_EQ(d.P.p(i, j), 0.0);
    for (std::size_t t = 1; t < d.state_path.size(); ++t)
      ASSERT_FALSE(d.P.masked(d.state_path[t - 1], d.state_path[t]));
  }
  EXPECT_EQ(sample.data_hash, data::series_hash(series));
}

TEST(GibbsEstimate, RecoversSimulationTruthLoosely) {
  auto truth = testutil::reference_params();
  auto series = simulated_series(800, 4);
  ModelSpec spec{ModelKind::Ms4};
  auto priors = PriorSpec::defaults(spec);
  McmcConfig cfg{.burn_in = 300, .retained = 1200, .seed = 12};
  auto sample = gibbs_estimate(series, spec, priors, cfg);
  for (int j = 0; j < 4; ++j) {
    std::vector<double> mu_draws, sig_draws;
    for (const auto& d : sample.draws) {
      mu_draws.push_back(d.params.mu[j]);
      sig_draws.push_back(d.params.sigma[j]);
    }
    auto mm = moments(mu_draws);
    auto ms = moments(sig_draws);
    EXPECT_NEAR(mm.mean, truth.mu[j], 4.0 * std::sqrt(mm.variance))
        << "mu state " << j + 1;
    EXPECT_NEAR(ms.mean, truth.sigma[j], 4.0 * std::sqrt(ms.variance))
        << "sigma state " << j + 1;
  }
}

TEST(GibbsEstimate, Ms2VariantRuns) {
  regime::StateParams p2;
  p2.mu = {-0.6, 0.3};
  p2.sigma = {3.0, 1.2};
  Eigen::MatrixXd P2(2, 2);
  P2 << 0.92, 0.08, 0.05, 0.95;
  std::mt19937 gen(6);
  auto series =
      testutil::make_series(testutil::simulate_ms(p2.mu, p2.sigma, P2, 400, gen));
  ModelSpec spec{ModelKind::Ms2};
  auto priors = PriorSpec::defaults(spec);
  McmcConfig cfg{.burn_in = 100, .retained = 300, .seed = 9};
  auto sample = gibbs_estimate(series, spec, priors, cfg);
  for (const auto& d : sample.draws) {
    ASSERT_LT(d.params.mu[0], 0.0);
    ASSERT_GT(d.params.mu[1], 0.0);
    ASSERT_TRUE(d.P.zero_mask.empty());
  }
}

TEST(GibbsEstimate, StudentTVariantRuns) {
  auto series = simulated_series(300, 7);
  ModelSpec spec{ModelKind::Ms4T};
  auto priors = PriorSpec::defaults(spec);
  McmcConfig cfg{.burn_in = 60, .retained = 120, .seed = 15};
  auto sample = gibbs_estimate(series, spec, priors, cfg);
  for (const auto& d : sample.draws) {
    ASSERT_TRUE(d.params.nu.has_value());
    for (double nu : *d.params.nu) {
      ASSERT_GE(nu, 3.0);
      ASSERT_LE(nu, 40.0);
    }
    auto res = regime::check_identification(d.params, d.P, true);
    ASSERT_TRUE(res.pass) << res.reason;
  }
}

TEST(GibbsEstimate, UnrestrictedVariantHasFullTransitionMatrix) {
  auto series = simulated_series(300, 8);
  ModelSpec spec{ModelKind::Ms4Unrestricted};
  auto priors = PriorSpec::defaults(spec);
  McmcConfig cfg{.burn_in = 60, .retained = 120, .seed = 21};
  auto sample = gibbs_estimate(series, spec, priors, cfg);
  bool any_offmask_positive = false;
  for (const auto& d : sample.draws) {
    ASSERT_TRUE(d.P.zero_mask.empty());
    if (d.P.p(0, 2) > 0.0 && d.P.p(2, 1) > 0.0) any_offmask_positive = true;
    // sign restrictions still identify the labels
    ASSERT_LT(d.params.mu[0], 0.0);
    ASSERT_GT(d.params.mu[1], 0.0);
    ASSERT_LT(d.params.mu[2], 0.0);
    ASSERT_GT(d.params.mu[3], 0.0);
  }
  EXPECT_TRUE(any_offmask_positive);
}

TEST(SmoothedStateProbs, SingleDrawIsIndicatorMatrix) {
  PosteriorSample sample;
  sample.spec = ModelSpec{ModelKind::Ms4};
  PosteriorDraw d;
  d.params = testutil::reference_params();
  d.P = testutil::reference_transition();
  d.state_path = {0, 1, 3, 3, 2};
  sample.draws.push_back(d);
  auto sm = smoothed_state_probs(sample);
  ASSERT_EQ(sm.state.rows(), 5);
  for (int t = 0; t < 5; ++t) {
    EXPECT_DOUBLE_EQ(sm.state.row(t).sum(), 1.0);
    EXPECT_DOUBLE_EQ(sm.state(t, d.state_path[std::size_t(t)]), 1.0);
  }
  EXPECT_DOUBLE_EQ(sm.bull(0), 0.0);
  EXPECT_DOUBLE_EQ(sm.bull(2), 1.0);
}

TEST(SmoothedStateProbs, FixedParameterDrawsConvergeToForwardBackward) {
  // build a sample by hand from FFBS paths at fixed parameters: the averaged
  // state frequencies must match the exact smoother
  auto P = testutil::reference_transition();
  auto params = testutil::reference_params();
  std::vector<double> r{1.2, -3.5, 0.4, 0.8, -0.6};
  Eigen::VectorXd init = testutil::power_iteration_stationary(P.p);
  auto filt = hamilton_filter(std::span<const double>(r), params, P, init);
  Eigen::MatrixXd smooth =
      testutil::forward_backward_smooth(r, params.mu, params.sigma, P.p, init);

  PosteriorSample sample;
  sample.spec = ModelSpec{ModelKind::Ms4};
  Rng rng(55);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    PosteriorDraw d;
    d.params = params;
    d.P = P;
    auto path = ffbs_sample(filt, P, rng);
    d.state_path.assign(path.begin(), path.end());
    sample.draws.push_back(std::move(d));
  }
  auto sm = smoothed_state_probs(sample);
  for (int t = 0; t < 5; ++t) {
    EXPECT_NEAR(sm.state.row(t).sum(), 1.0, 1e-12);
    for (int j = 0; j < 4; ++j) {
      double p = smooth(t, j);
      double se = std::sqrt(std::max(p * (1 - p), 1e-12) / double(n));
      EXPECT_NEAR(sm.state(t, j), p, 3.0 * se + 1e-12);
    }
  }
}

TEST(PosteriorIo, RoundTripIsBitExact) {
  testutil::TempDir tmp("postio");
  auto series = simulated_series(120, 9);
  ModelSpec spec{ModelKind::Ms4};
  auto priors = PriorSpec::defaults(spec);
  McmcConfig cfg{.burn_in = 10, .retained = 25, .seed = 31};
  auto sample = gibbs_estimate(series, spec, priors, cfg);
  save_posterior(sample, tmp.file("p.bbps"));
  auto back = load_posterior(tmp.file("p.bbps"));
  EXPECT_TRUE(draws_identical(sample, back));
  EXPECT_EQ(back.spec.kind, spec.kind);
  EXPECT_EQ(back.data_hash, sample.data_hash);
  EXPECT_EQ(back.cfg.seed, sample.cfg.seed);
  EXPECT_EQ(back.priors.mu_mean, sample.priors.mu_mean);
}

TEST(PosteriorIo, ThinStoresEveryNth) {
  testutil::TempDir tmp("postio");
  auto series = simulated_series(120, 10);
  ModelSpec spec{ModelKind::Ms4T};
  auto priors = PriorSpec::defaults(spec);
  McmcConfig cfg{.burn_in = 5, .retained = 20, .seed = 41};
  auto sample = gibbs_estimate(series, spec, priors, cfg);
  save_posterior(sample, tmp.file("p.bbps"), 4);
  auto back = load_posterior(tmp.file("p.bbps"));
  ASSERT_EQ(back.draws.size(), 5u);
  for (std::size_t i = 0; i < back.draws.size(); ++i) {
    EXPECT_EQ(back.draws[i].params.mu, sample.draws[4 * i].params.mu);
    EXPECT_EQ(*back.draws[i].params.nu, *sample.draws[4 * i].params.nu);
    EXPECT_EQ(back.draws[i].state_path, sample.draws[4 * i].state_path);
  }
}

TEST(PosteriorIo, RejectsGarbageFile) {
  testutil::TempDir tmp("postio");
  testutil::write_text(tmp.file("junk.bbps"), "not a posterior");
  EXPECT_THROW(load_posterior(tmp.file("junk.bbps")), DataError);
}
