#include <gtest/gtest.h>

#include <random>

#include "bullbear/forecast.hpp"
#include "bullbear/rolling.hpp"
#include "testutil.hpp"

using namespace bullbear;
using namespace bullbear::forecast;

namespace {

mcmc::PosteriorSample fixed_sample(const regime::StateParams& params,
                                   const regime::TransitionMatrix& P,
                                   ModelKind kind = ModelKind::Ms4,
                                   int copies = 1) {
  mcmc::PosteriorSample s;
  s.spec = ModelSpec{kind};
  for (int i = 0; i < copies; ++i) {
    mcmc::PosteriorDraw d;
    d.params = params;
    d.P = P;
    s.draws.push_back(d);
  }
  return s;
}

}  // namespace

TEST(PredictiveStateProbs, BasisVectorSelectsTransitionRow) {
  auto P = testutil::reference_transition();
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(4);
    e(i) = 1.0;
    auto probs = predictive_state_probs(e, P, 1);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(probs(0, j), P.p(i, j), 1e-15);
  }
}

TEST(PredictiveStateProbs, TwoStepMatchesMatrixSquare) {
  auto P = testutil::reference_transition();
  Eigen::VectorXd v(4);
  v << 0.4, 0.1, 0.3, 0.2;
  auto probs = predictive_state_probs(v, P, 2);
  Eigen::MatrixXd P2 = P.p * P.p;
  Eigen::VectorXd expect = P2.transpose() * v;
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(probs(1, j), expect(j), 1e-12);
}

TEST(PredictiveStateProbs, LongHorizonConvergesToStationary) {
  auto P = testutil::reference_transition();
  auto pi = regime::stationary_distribution(P).pi;
  // worst case over all start states: the sup distance of the h-step kernel
  // from the stationary vector
  std::vector<Eigen::MatrixXd> rows;
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(4);
    e(i) = 1.0;
    rows.push_back(predictive_state_probs(e, P, 1000));
  }
  auto dist_at = [&](int h) {
    double d = 0.0;
    for (int i = 0; i < 4; ++i)
      d = std::max(d, (rows[std::size_t(i)].row(h).transpose() - pi)
                          .cwiseAbs()
                          .maxCoeff());
    return d;
  };
  EXPECT_LT(dist_at(999), 1e-6);
  double prev = std::numeric_limits<double>::infinity();
  for (int h = 0; h < 200; ++h) {
    double d = dist_at(h);
    EXPECT_LE(d, prev + 1e-15);
    prev = d;
  }
  for (int h = 0; h < 1000; ++h)
    EXPECT_NEAR(rows[0].row(h).sum(), 1.0, 1e-10);
}

TEST(PredictiveDensity, DegenerateMixtureIsSingleNormal) {
  // both states share (mu, sigma): the mixture is N(mu, sigma^2) whatever the
  // state weights
  regime::StateParams p;
  p.mu = {0.37, 0.37};
  p.sigma = {1.21, 1.21};
  regime::TransitionMatrix P;
  P.p.resize(2, 2);
  P.p << 0.7, 0.3, 0.4, 0.6;
  auto sample = fixed_sample(p, P, ModelKind::Ms2);
  auto history = testutil::make_series({0.1, -0.2, 0.4, 0.0, 0.3});
  auto b = predictive_density(sample, history);
  EXPECT_NEAR(b.mean, 0.37, 1e-12);
  EXPECT_NEAR(b.variance, 1.21 * 1.21, 1e-12);
  for (std::size_t i = 0; i < b.grid.size(); i += 100)
    EXPECT_NEAR(b.pdf[i], normal_pdf(b.grid[i], 0.37, 1.21), 1e-12);
}

TEST(PredictiveDensity, SymmetricTwoComponentMixtureMoments) {
  PredictiveMixture mix;
  mix.w = {0.5, 0.5};
  mix.mu = {-1.0, 1.0};
  mix.sigma = {1.0, 1.0};
  mix.finalize_moments();
  EXPECT_NEAR(mix.mean, 0.0, 1e-15);
  EXPECT_NEAR(mix.variance, 2.0, 1e-15);
}

TEST(PredictiveDensity, GridMomentsMatchAnalyticMoments) {
  std::mt19937 gen(404);
  std::uniform_real_distribution<double> mu_d(-1.0, 1.0);
  std::uniform_real_distribution<double> sig_d(0.5, 4.0);
  auto P = testutil::reference_transition();
  mcmc::PosteriorSample sample;
  sample.spec = ModelSpec{ModelKind::Ms4};
  for (int m = 0; m < 50; ++m) {
    mcmc::PosteriorDraw d;
    d.P = P;
    for (int j = 0; j < 4; ++j) {
      d.params.mu.push_back(mu_d(gen));
      d.params.sigma.push_back(sig_d(gen));
    }
    sample.draws.push_back(std::move(d));
  }
  auto history = testutil::make_series({0.5, -1.0, 2.0, 0.3, -0.7, 1.1});
  auto b = predictive_density(sample, history);

  double mass = 0, mean = 0, m2 = 0;
  for (std::size_t i = 1; i < b.grid.size(); ++i) {
    double dx = b.grid[i] - b.grid[i - 1];
    mass += 0.5 * (b.pdf[i] + b.pdf[i - 1]) * dx;
    mean += 0.5 * (b.grid[i] * b.pdf[i] + b.grid[i - 1] * b.pdf[i - 1]) * dx;
    m2 += 0.5 * (b.grid[i] * b.grid[i] * b.pdf[i] +
                 b.grid[i - 1] * b.grid[i - 1] * b.pdf[i - 1]) *
          dx;
  }
  EXPECT_GE(mass, 0.997);
  EXPECT_LE(mass, 1.003);
  EXPECT_NEAR(mean, b.mean, 1e-3);
  EXPECT_NEAR(m2 - mean * mean, b.variance, 1e-3 * std::max(1.0, b.variance));
  for (double v : b.pdf) EXPECT_GE(v, 0.0);
  for (int h = 0; h < b.state_probs.rows(); ++h)
    EXPECT_NEAR(b.state_probs.row(h).sum(), 1.0, 1e-10);
}

TEST(PredictiveDensity, NarrowGridIsAnErrorNamingRequiredSpan) {
  regime::StateParams p;
  p.mu = {0.0, 0.0};
  p.sigma = {1.0, 1.0};
  regime::TransitionMatrix P;
  P.p.resize(2, 2);
  P.p << 0.5, 0.5, 0.5, 0.5;
  auto sample = fixed_sample(p, P, ModelKind::Ms2);
  auto history = testutil::make_series({0.1, -0.2, 0.4, 0.0, 0.3});
  GridSpec narrow;
  narrow.explicit_grid = {-0.5, 0.0, 0.5};
  try {
    predictive_density(sample, history, narrow);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("span at least"), std::string::npos);
  }
}

TEST(PredictiveSharpe, ReferenceBullStateRatio) {
  PredictiveMixture mix;
  mix.w = {1.0};
  mix.mu = {0.52};
  mix.sigma = {1.09};
  mix.finalize_moments();
  ForecastBundle b;
  b.mean = mix.mean;
  b.variance = mix.variance;
  EXPECT_NEAR(predictive_sharpe(b), 0.477, 0.02);
  EXPECT_NEAR(predictive_sharpe(b), 0.52 / 1.09, 1e-12);
}

TEST(PredictiveSharpe, ZeroMeanIsZero) {
  ForecastBundle b;
  b.mean = 0.0;
  b.variance = 2.0;
  EXPECT_DOUBLE_EQ(predictive_sharpe(b), 0.0);
}

TEST(PredictiveSharpe, InvariantToGridChoice) {
  regime::StateParams p;
  p.mu = {-0.4, 0.6};
  p.sigma = {2.0, 1.0};
  regime::TransitionMatrix P;
  P.p.resize(2, 2);
  P.p << 0.8, 0.2, 0.3, 0.7;
  auto sample = fixed_sample(p, P, ModelKind::Ms2);
  auto history = testutil::make_series({0.5, -1.0, 2.0, 0.3, -0.7});
  GridSpec g1;
  GridSpec g2;
  g2.points = 2001;
  g2.span_sd = 14.0;
  auto b1 = predictive_density(sample, history, g1);
  auto b2 = predictive_density(sample, history, g2);
  EXPECT_DOUBLE_EQ(b1.sharpe, b2.sharpe);
  EXPECT_DOUBLE_EQ(b1.mean, b2.mean);
}

TEST(ValueAtRisk, StandardNormalQuantiles) {
  PredictiveMixture mix;
  mix.w = {1.0};
  mix.mu = {0.0};
  mix.sigma = {1.0};
  mix.finalize_moments();
  auto v05 = value_at_risk(mix, 0.05);
  EXPECT_NEAR(v05.quantile, -1.6448536269514722, 1e-8);
  EXPECT_NEAR(v05.normal_quantile, -1.6448536269514722, 1e-10);
  auto v01 = value_at_risk(mix, 0.01);
  EXPECT_NEAR(v01.quantile, -2.3263478740408408, 1e-8);
}

TEST(ValueAtRisk, MonotoneInLevel) {
  PredictiveMixture mix;
  mix.w = {0.6, 0.4};
  mix.mu = {-0.5, 0.8};
  mix.sigma = {3.0, 1.0};
  mix.finalize_moments();
  EXPECT_LE(value_at_risk(mix, 0.01).quantile,
            value_at_risk(mix, 0.05).quantile);
}

TEST(ValueAtRisk, ScaleMixtureMatchesGridInversionOracle) {
  PredictiveMixture mix;
  mix.w = {0.5, 0.5};
  mix.mu = {0.0, 0.0};
  mix.sigma = {1.0, 5.0};
  mix.finalize_moments();
  // frozen from a fine-grid cdf-inversion oracle
  EXPECT_NEAR(value_at_risk(mix, 0.05).quantile, -6.407757829826658, 1e-4);
  EXPECT_NEAR(value_at_risk(mix, 0.01).quantile, -10.268744553159115, 1e-4);
}

TEST(ValueAtRisk, CdfAtQuantileEqualsLevel) {
  std::mt19937 gen(77);
  std::uniform_real_distribution<double> mu_d(-1.0, 1.0);
  std::uniform_real_distribution<double> sig_d(0.5, 5.0);
  std::uniform_real_distribution<double> w_d(0.1, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    PredictiveMixture mix;
    double wsum = 0;
    for (int c = 0; c < 6; ++c) {
      mix.w.push_back(w_d(gen));
      wsum += mix.w.back();
      mix.mu.push_back(mu_d(gen));
      mix.sigma.push_back(sig_d(gen));
    }
    for (double& w : mix.w) w /= wsum;
    mix.finalize_moments();
    for (double level : {0.01, 0.05, 0.25}) {
      double q = mix.quantile(level);
      EXPECT_NEAR(mix.cdf(q), level, 1e-8);
    }
  }
}

TEST(ValueAtRisk, StudentTMixtureCdfProperty) {
  PredictiveMixture mix;
  mix.w = {0.5, 0.5};
  mix.mu = {-0.2, 0.4};
  mix.sigma = {2.0, 1.0};
  mix.nu = {5.0, 12.0};
  mix.finalize_moments();
  for (double level : {0.01, 0.05}) {
    double q = mix.quantile(level);
    EXPECT_NEAR(mix.cdf(q), level, 1e-8);
  }
}

TEST(LogScore, AnalyticMatchesFineGridInterpolation) {
  regime::StateParams p;
  p.mu = {-0.4, 0.6};
  p.sigma = {2.0, 1.0};
  regime::TransitionMatrix P;
  P.p.resize(2, 2);
  P.p << 0.8, 0.2, 0.3, 0.7;
  auto sample = fixed_sample(p, P, ModelKind::Ms2);
  auto history = testutil::make_series({0.5, -1.0, 2.0, 0.3, -0.7});
  GridSpec fine;
  fine.points = 40001;
  fine.span_sd = 15.0;
  auto b = predictive_density(sample, history, fine);
  double realized = 1.234;
  // linear interpolation of the grid pdf
  auto it = std::lower_bound(b.grid.begin(), b.grid.end(), realized);
  std::size_t hi = std::size_t(it - b.grid.begin());
  double x0 = b.grid[hi - 1], x1 = b.grid[hi];
  double f = b.pdf[hi - 1] +
             (b.pdf[hi] - b.pdf[hi - 1]) * (realized - x0) / (x1 - x0);
  EXPECT_NEAR(std::log(f), b.mixture.logpdf(realized), 1e-4);
}

TEST(RollingForecast, FixedSingleStateModelGivesClosedFormScores) {
  // estimator ignores the data and returns one draw with two identical
  // states: every weekly log-score must equal the normal log-density
  const double mu = 0.1, sigma = 1.3;
  std::mt19937 gen(50);
  std::normal_distribution<double> norm(mu, sigma);
  std::vector<double> r(210);
  for (double& v : r) v = norm(gen);
  auto series = testutil::make_series(r);

  regime::StateParams p;
  p.mu = {mu, mu};
  p.sigma = {sigma, sigma};
  regime::TransitionMatrix P;
  P.p.resize(2, 2);
  P.p << 0.5, 0.5, 0.5, 0.5;
  Estimator est = [&](const data::ReturnSeries&, const mcmc::PosteriorDraw*,
                      std::uint64_t) {
    return fixed_sample(p, P, ModelKind::Ms2);
  };
  Date from = series[204].anchor_date;
  Date to = series[209].anchor_date;
  auto res = rolling_forecast_with(series, from, to, est, 1, "FIXED");
  ASSERT_EQ(res.trace.log_pred.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    double realized = series[204 + i].log_return;
    EXPECT_NEAR(res.trace.log_pred[i],
                testutil::oracle_normal_logpdf(realized, mu, sigma), 1e-12);
  }
  // cumulative is the running sum
  double acc = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    acc += res.trace.log_pred[i];
    EXPECT_DOUBLE_EQ(res.trace.cumulative[i], acc);
  }
}

TEST(RollingForecast, FrozenPosteriorRunsAreBitReproducible) {
  auto params = testutil::reference_params();
  auto P = testutil::reference_transition();
  std::mt19937 gen(51);
  auto series = testutil::make_series(
      testutil::simulate_ms(params.mu, params.sigma, P.p, 220, gen));
  ModelSpec spec{ModelKind::Ms4};
  auto priors = PriorSpec::defaults(spec);
  McmcConfig cfg{.burn_in = 0, .retained = 1, .seed = 404};
  Date from = series[217].anchor_date;
  Date to = series[219].anchor_date;
  auto a = rolling_forecast(series, spec, priors, cfg, from, to);
  auto b = rolling_forecast(series, spec, priors, cfg, from, to);
  ASSERT_EQ(a.origins.size(), b.origins.size());
  for (std::size_t i = 0; i < a.origins.size(); ++i) {
    EXPECT_EQ(a.origins[i].mean, b.origins[i].mean);
    EXPECT_EQ(a.origins[i].sd, b.origins[i].sd);
    EXPECT_EQ(a.origins[i].logscore, b.origins[i].logscore);
    EXPECT_EQ(a.origins[i].var_levels, b.origins[i].var_levels);
  }
}

TEST(RollingForecast, TooLittleHistoryIsAnError) {
  auto series = testutil::make_series(std::vector<double>(100, 0.1));
  Estimator est = [](const data::ReturnSeries&, const mcmc::PosteriorDraw*,
                     std::uint64_t) { return mcmc::PosteriorSample{}; };
  EXPECT_THROW(rolling_forecast_with(series, series[50].anchor_date,
                                     series[99].anchor_date, est, 1, "X"),
               DataError);
}

TEST(BayesFactor, BenchmarkAgainstItselfIsZero) {
  PredictiveLikelihoodTrace t;
  t.model = "MS4";
  t.push(Date(2020, 1, 8), -1.0);
  t.push(Date(2020, 1, 15), -2.0);
  auto bf = bayes_factor_trace({t}, "MS4");
  ASSERT_EQ(bf.size(), 1u);
  for (double v : bf[0].log_bf) EXPECT_DOUBLE_EQ(v, 0.0);
  EXPECT_FALSE(bf[0].strong_evidence);
}

TEST(BayesFactor, HandSummedDifferences) {
  PredictiveLikelihoodTrace a, b;
  a.model = "A";
  b.model = "B";
  std::vector<Date> dates{Date(2020, 1, 8), Date(2020, 1, 15),
                          Date(2020, 1, 22)};
  std::vector<double> la{-1.0, -2.0, -3.0}, lb{-1.5, -1.0, -4.0};
  for (int i = 0; i < 3; ++i) {
    a.push(dates[std::size_t(i)], la[std::size_t(i)]);
    b.push(dates[std::size_t(i)], lb[std::size_t(i)]);
  }
  auto bf = bayes_factor_trace({a, b}, "B");
  ASSERT_EQ(bf.size(), 2u);
  EXPECT_DOUBLE_EQ(bf[0].log_bf[0], 0.5);
  EXPECT_DOUBLE_EQ(bf[0].log_bf[1], -0.5);
  EXPECT_DOUBLE_EQ(bf[0].log_bf[2], 0.5);
  EXPECT_DOUBLE_EQ(bf[0].final_value, 0.5);
  EXPECT_FALSE(bf[0].strong_evidence);
}

TEST(BayesFactor, MismatchedWindowsAreAnError) {
  PredictiveLikelihoodTrace a, b;
  a.model = "A";
  b.model = "B";
  a.push(Date(2020, 1, 8), -1.0);
  b.push(Date(2020, 1, 15), -1.0);
  EXPECT_THROW(bayes_factor_trace({a, b}, "B"), DataError);
  EXPECT_THROW(bayes_factor_trace({a}, "NOPE"), DataError);
}

TEST(ForecastCsv, RoundTrip) {
  testutil::TempDir tmp("fccsv");
  std::vector<OriginForecast> origins;
  std::mt19937 gen(8);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Date d(2020, 1, 8);
  for (int i = 0; i < 5; ++i) {
    OriginForecast o;
    o.date = d;
    o.state_probs.resize(4);
    double s = 0;
    for (int j = 0; j < 4; ++j) {
      o.state_probs(j) = uni(gen);
      s += o.state_probs(j);
    }
    o.state_probs /= s;
    o.bull_prob = o.state_probs(2) + o.state_probs(3);
    o.mean = uni(gen);
    o.sd = 1.0 + uni(gen);
    o.sharpe = o.mean / o.sd;
    o.var_levels[0.01] = -3.0 * o.sd;
    o.var_levels[0.05] = -2.0 * o.sd;
    o.logscore = -1.5 - uni(gen);
    origins.push_back(o);
    d = d.plus_days(7);
  }
  write_forecast_csv(origins, tmp.file("f.csv"));
  auto back = read_forecast_csv(tmp.file("f.csv"));
  ASSERT_EQ(back.size(), origins.size());
  for (std::size_t i = 0; i < origins.size(); ++i) {
    EXPECT_EQ(back[i].date, origins[i].date);
    for (int j = 0; j < 4; ++j)
      EXPECT_EQ(back[i].state_probs(j), origins[i].state_probs(j));
    EXPECT_EQ(back[i].mean, origins[i].mean);
    EXPECT_EQ(back[i].var_levels, origins[i].var_levels);
    EXPECT_EQ(back[i].logscore, origins[i].logscore);
  }
}

TEST(TraceCsv, RoundTrip) {
  testutil::TempDir tmp("trcsv");
  PredictiveLikelihoodTrace t;
  t.model = "MS4";
  t.push(Date(2020, 1, 8), -1.25);
  t.push(Date(2020, 1, 15), -2.5);
  write_trace_csv(t, tmp.file("t.csv"));
  auto back = read_trace_csv(tmp.file("t.csv"));
  EXPECT_EQ(back.model, "MS4");
  ASSERT_EQ(back.log_pred.size(), 2u);
  EXPECT_EQ(back.log_pred[0], -1.25);
  EXPECT_EQ(back.cumulative[1], -3.75);
}
