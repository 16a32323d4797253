#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "nonovershoot/rng.hpp"
#include "nonovershoot/stats.hpp"

using namespace nos;

TEST(Aggregate, ConstantsHaveZeroStderr) {
  std::vector<double> v(10, 3.25);
  const auto e = stats::aggregate(v);
  EXPECT_EQ(e.value, 3.25);
  EXPECT_EQ(e.std_error, 0.0);
  EXPECT_EQ(e.n, 10u);
}

TEST(Aggregate, MeanAndVariance) {
  std::vector<double> v{1, 2, 3, 4, 5};
  const auto e = stats::aggregate(v);
  EXPECT_DOUBLE_EQ(e.value, 3.0);
  EXPECT_NEAR(e.std_error, std::sqrt(2.5 / 5.0), 1e-15);
  EXPECT_LT(e.ci_low, e.value);
  EXPECT_GT(e.ci_high, e.value);
}

TEST(Aggregate, MergeMatchesPooled) {
  auto g = rng::substream(5, 0, 0);
  std::vector<double> a, b;
  for (int i = 0; i < 1000; ++i) a.push_back(100.0 + g.uniform());
  for (int i = 0; i < 700; ++i) b.push_back(-3.0 + 2.0 * g.uniform());
  stats::MomentAccumulator ma, mb, all;
  for (double x : a) ma.add(x), all.add(x);
  for (double x : b) mb.add(x), all.add(x);
  ma.merge(mb);
  EXPECT_EQ(ma.count(), all.count());
  EXPECT_NEAR(ma.mean(), all.mean(), 1e-12 * std::fabs(all.mean()));
  EXPECT_NEAR(ma.variance(), all.variance(), 1e-10 * all.variance());
}

TEST(Aggregate, PermutationInvariant) {
  auto g = rng::substream(6, 0, 0);
  std::vector<double> v;
  for (int i = 0; i < 5000; ++i) v.push_back(std::exp(10.0 * g.uniform()));
  const auto e1 = stats::aggregate(v);
  std::reverse(v.begin(), v.end());
  std::mt19937_64 eng(1);
  std::shuffle(v.begin(), v.end(), eng);
  const auto e2 = stats::aggregate(v);
  EXPECT_NEAR(e1.value, e2.value, 1e-12 * e1.value);
}

TEST(RatioEstimate, StderrAgreesWithBootstrap) {
  auto g = rng::substream(7, 0, 0);
  const std::size_t n = 2000;
  std::vector<double> w(n), f(n), wf(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(-3.0 * g.uniform());
    f[i] = g.uniform() + w[i];
    wf[i] = w[i] * f[i];
  }
  const auto est = stats::ratio_estimate(wf, w);
  // bootstrap oracle
  std::mt19937_64 eng(11);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  stats::MomentAccumulator boot;
  for (int b = 0; b < 10000; ++b) {
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = pick(eng);
      sa += wf[k];
      sb += w[k];
    }
    boot.add(sa / sb);
  }
  EXPECT_NEAR(est.std_error, std::sqrt(boot.variance()), 0.1 * std::sqrt(boot.variance()));
}

TEST(RatioEstimate, ZeroDenominator) {
  std::vector<double> a{1, 2}, b{0, 0};
  try {
    stats::ratio_estimate(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateWeights);
  }
}

TEST(WeightedEcdf, EqualWeights) {
  const auto cdf = stats::weighted_ecdf(stats::WeightedSample::unweighted({3, 1, 2}));
  EXPECT_NEAR(cdf(1.0), 1.0 / 3, 1e-15);
  EXPECT_NEAR(cdf(2.0), 2.0 / 3, 1e-15);
  EXPECT_EQ(cdf(3.0), 1.0);
  EXPECT_EQ(cdf(0.5), 0.0);
  EXPECT_NEAR(cdf.left(2.0), 1.0 / 3, 1e-15);
}

TEST(WeightedEcdf, ZeroWeightPoint) {
  stats::WeightedSample s{{1.0, 5.0}, {1.0, 0.0}};
  const auto cdf = stats::weighted_ecdf(s);
  EXPECT_EQ(cdf(1.0), 1.0);
  EXPECT_EQ(cdf(0.9), 0.0);
}

TEST(WeightedEcdf, AllZeroWeights) {
  stats::WeightedSample s{{1.0, 2.0}, {0.0, 0.0}};
  try {
    stats::weighted_ecdf(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AllZeroWeights);
  }
}

TEST(WeightedEcdf, TotalMassIsOne) {
  stats::WeightedSample s{{0.1, 0.2, 0.3}, {0.1, 0.7, 0.3}};
  EXPECT_EQ(stats::weighted_ecdf(s).cumulative().back(), 1.0);
}

TEST(Ks, SampleAgainstOwnEcdf) {
  std::vector<double> v{0.3, 0.1, 0.7, 0.5};
  const auto cdf = stats::weighted_ecdf(stats::WeightedSample::unweighted(v));
  EXPECT_EQ(stats::ks_one_sample(v, [&](double x) { return cdf(x); }).distance, 0.0);
}

TEST(Ks, DisjointSingletons) {
  std::vector<double> a{0.0}, b{1.0};
  EXPECT_EQ(stats::ks_two_sample(a, b).distance, 1.0);
}

TEST(Ks, UniformAgainstIdentity) {
  auto g = rng::substream(8, 0, 0);
  std::vector<double> v(10000);
  for (auto& x : v) x = g.uniform();
  const auto r = stats::ks_one_sample(v, [](double x) { return std::clamp(x, 0.0, 1.0); });
  EXPECT_LT(r.distance, 1.63 / std::sqrt(10000.0));
  EXPECT_GT(r.p_value, 0.01);
}

TEST(Ks, TwoSampleSymmetric) {
  auto g = rng::substream(9, 0, 0);
  std::vector<double> a(300), b(500);
  for (auto& x : a) x = g.uniform();
  for (auto& x : b) x = g.uniform() * 1.1;
  const auto ab = stats::ks_two_sample(a, b);
  const auto ba = stats::ks_two_sample(b, a);
  EXPECT_EQ(ab.distance, ba.distance);
  EXPECT_EQ(ab.p_value, ba.p_value);
}

TEST(Ks, EqualWeightsMatchUnweighted) {
  std::vector<double> a{0.1, 0.4, 0.35, 0.8}, b{0.2, 0.5, 0.9};
  stats::WeightedSample wa{a, std::vector<double>(a.size(), 0.25)};
  stats::WeightedSample wb{b, std::vector<double>(b.size(), 3.0)};
  const auto u = stats::ks_two_sample(a, b);
  const auto w = stats::ks_two_sample(wa, wb);
  EXPECT_NEAR(u.distance, w.distance, 1e-15);
  EXPECT_NEAR(u.p_value, w.p_value, 1e-12);
}

TEST(Ks, KolmogorovCriticalValue) {
  // Q(1.628) is the 1% point of the Kolmogorov distribution.
  EXPECT_NEAR(stats::kolmogorov_q(1.6276), 0.01, 1e-4);
}
