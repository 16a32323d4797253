#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "nonovershoot/model.hpp"
#include "nonovershoot/stats.hpp"

using namespace nos;
using namespace nos::model;

namespace {

// Oracles integrate with double-exponential rules, independently of the
// library's Gauss-Kronrod path.
double half_line(const std::function<double(double)>& f) {
  boost::math::quadrature::exp_sinh<double> q;
  return q.integrate(f, 0.0, std::numeric_limits<double>::infinity());
}

double segment(const std::function<double(double)>& f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> q;
  return q.integrate(f, a, b);
}

ModelSpec pareto_spec() {
  return calibrate(0.75, 1.0, {TailVariant::PurePareto, 1.0}, {LeftVariant::Exponential, 2.0, 0.0, 0.3});
}

}  // namespace

TEST(Calibrate, AlreadyNormalizedHasZeroShift) {
  // (1-w) e^{-ln 2} + w e^{ln 2} = 1 at w = 1/3
  const auto spec = calibrate(0.5, 1.0, {TailVariant::Atom, 1.0, 0.0, std::numbers::ln2},
                              {LeftVariant::Atom, 0.0, -std::numbers::ln2, 1.0 / 3.0});
  EXPECT_NEAR(spec.shift, 0.0, 1e-15);
}

TEST(Calibrate, ParetoShiftMatchesQuadratureBisection) {
  const double alpha = 0.75, gamma = 1.0, lambda = 2.0, w = 0.3;
  const auto spec = pareto_spec();
  // E e^{-gamma Y} by the Pareto density, E e^{-gamma L} by the exponential density
  const double pos = half_line([&](double x) {
    return std::exp(-gamma * x) * alpha * std::pow(1.0 + x, -alpha - 1.0);
  });
  const double neg = half_line([&](double y) { return lambda * std::exp((gamma - lambda) * y); });
  auto norm = [&](double c) { return std::exp(-gamma * c) * ((1 - w) * pos + w * neg) - 1.0; };
  double lo = -10, hi = 10;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (norm(mid) > 0 ? lo : hi) = mid;
  }
  EXPECT_NEAR(spec.shift, 0.5 * (lo + hi), 1e-10);
  EXPECT_NEAR(tilt_normalization(spec), 1.0, 1e-10);
  EXPECT_NEAR(p_law_mgf(spec, gamma), 1.0, 1e-10);
}

TEST(Calibrate, LogPerturbedResidual) {
  const auto spec = calibrate(0.75, 1.0, {TailVariant::LogPerturbedPareto, 1.0, 0.5},
                              {LeftVariant::Exponential, 2.0, 0.0, 0.4});
  EXPECT_NEAR(tilt_normalization(spec), 1.0, 1e-10);
}

TEST(Calibrate, LatticeWeightMatchesFiniteSum) {
  const double alpha = 0.75, gamma = std::numbers::ln2;
  const auto spec = calibrate(alpha, gamma, {TailVariant::LatticePareto, 1.0}, {LeftVariant::Atom, 0.0, -1.0, 0.0},
                              1.0);
  // masses p_k = (1+(k-1))^{-a} - (1+k)^{-a} at k = 1, 2, ...
  double A = 0.0;
  for (int k = 1; k < 4000; ++k) A += std::pow(0.5, k) * (std::pow(k, -alpha) - std::pow(k + 1.0, -alpha));
  const double w_oracle = (1.0 - A) / (2.0 - A);
  EXPECT_NEAR(spec.left.weight, w_oracle, 1e-12);
  EXPECT_EQ(spec.shift, 0.0);
  double total = (1 - spec.left.weight) * A + spec.left.weight * 2.0;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(tilt_normalization(spec), 1.0, 1e-12);
}

TEST(Calibrate, LeftPartTooHeavyIsNoRoot) {
  EXPECT_THROW(calibrate(0.75, 1.0, {TailVariant::PurePareto, 1.0}, {LeftVariant::Exponential, 0.8, 0.0, 0.5}),
               NoRootError);
}

TEST(Calibrate, LatticeWithoutReachableWeightIsNoRoot) {
  // a left atom at 0 cannot pull the mixture up to 1
  try {
    calibrate(0.75, 1.0, {TailVariant::LatticePareto, 1.0}, {LeftVariant::Atom, 0.0, 0.0, 0.0}, 1.0);
    FAIL();
  } catch (const NoRootError& e) {
    EXPECT_EQ(e.lo(), 0.0);
    EXPECT_EQ(e.hi(), 1.0);
  }
}

TEST(Calibrate, GamblerLaw) {
  const double p = 0.3;
  const double gamma = std::log((1 - p) / p);
  const auto spec =
      calibrate(0.5, gamma, {TailVariant::Atom, 1.0, 0.0, 1.0}, {LeftVariant::Atom, 0.0, -1.0, 0.0}, 1.0);
  // under P* the up-step has probability 1 - p
  EXPECT_NEAR(spec.left.weight, p, 1e-14);
}

TEST(Sample, PointMassStub) {
  ModelSpec spec;
  spec.tail = {TailVariant::Atom, 1.0, 0.0, 0.5};
  auto g = rng::substream(1, 0, 0);
  IncrementSampler s(spec, Measure::Pstar);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(s(g), 0.5);
}

TEST(Sample, ParetoRunningMeanGrows) {
  const auto spec = pareto_spec();
  IncrementSampler s(spec, Measure::Pstar);
  auto g = rng::substream(2, 0, 0);
  auto block_median = [&](int block) {
    std::vector<double> means;
    for (int b = 0; b < 21; ++b) {
      double sum = 0;
      for (int i = 0; i < block; ++i) sum += std::max(0.0, s(g));
      means.push_back(sum / block);
    }
    std::nth_element(means.begin(), means.begin() + 10, means.end());
    return means[10];
  };
  const double small = block_median(1000);
  const double large = block_median(100000);
  EXPECT_GT(large, 2.0 * small);
}

TEST(Sample, PstarMatchesAnalyticCdf) {
  const auto spec = pareto_spec();
  const double c = spec.shift, w = 0.3, lambda = 2.0, alpha = 0.75;
  auto cdf = [&](double x) {
    if (x < c) return w * std::exp(lambda * (x - c));
    return w + (1 - w) * (1.0 - std::pow(1.0 + (x - c), -alpha));
  };
  IncrementSampler s(spec, Measure::Pstar);
  std::vector<double> v(100000);
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto g = rng::substream(3, rng::domain::increments, i);
    v[i] = s(g);
  }
  EXPECT_LT(stats::ks_one_sample(v, cdf).distance, 0.006);
}

TEST(Sample, PMatchesTiltedCdf) {
  const auto spec = pareto_spec();
  const double c = spec.shift, w = 0.3, lambda = 2.0, alpha = 0.75, gamma = 1.0;
  // F^(dx) = e^{-gamma x} F(dx)
  auto density = [&](double x) {
    const double f = x < c ? w * lambda * std::exp(lambda * (x - c))
                           : (1 - w) * alpha * std::pow(1.0 + (x - c), -alpha - 1.0);
    return std::exp(-gamma * x) * f;
  };
  const double left_mass = segment(density, -60.0, c);
  auto cdf = [&](double x) {
    if (x <= c) return segment(density, -60.0, x);
    return left_mass + segment(density, c, x);
  };
  IncrementSampler s(spec, Measure::P);
  std::vector<double> v(20000);
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto g = rng::substream(4, rng::domain::increments, i);
    v[i] = s(g);
  }
  EXPECT_GT(stats::ks_one_sample(v, cdf).p_value, 0.01);
}

TEST(Sample, LatticeDrawsStayOnLattice) {
  const auto spec = calibrate(0.75, std::numbers::ln2, {TailVariant::LatticePareto, 1.0},
                              {LeftVariant::Atom, 0.0, -1.0, 0.0}, 1.0);
  for (auto m : {Measure::P, Measure::Pstar}) {
    IncrementSampler s(spec, m);
    auto g = rng::substream(5, 0, 0);
    for (int i = 0; i < 10000; ++i) {
      const double x = s(g);
      ASSERT_EQ(x, std::round(x));
      ASSERT_NE(x, 0.0);
    }
  }
}

TEST(Tail, FullMassAtZero) {
  ModelSpec spec;
  spec.alpha = 0.6;
  EXPECT_EQ(tail_F(spec, 0.0), 1.0);
}

TEST(Tail, LogPerturbedQuantileInvertsSurvival) {
  const TailFamily t{TailVariant::LogPerturbedPareto, 1.0, 0.5};
  for (double u : {0.9, 0.5, 0.1, 1e-3, 1e-6}) {
    const double x = tail_quantile(t, 0.75, 1.0, u);
    EXPECT_NEAR(tail_survival(t, 0.75, 1.0, x), u, 1e-12 * u);
  }
}

TEST(Tail, LogPerturbedIsNonincreasing) {
  const TailFamily t{TailVariant::LogPerturbedPareto, 1.0, 0.5};
  double prev = 1.0;
  for (double x = 0.0; x < 1e4; x = x * 1.05 + 0.01) {
    const double s = tail_survival(t, 0.75, 1.0, x);
    ASSERT_LE(s, prev + 1e-15);
    prev = s;
  }
}

TEST(MOf, ParetoHalfClosedForm) {
  ModelSpec spec;
  spec.alpha = 0.5;
  for (double r : {0.5, 3.0, 100.0, 1e6}) {
    const double closed = 2.0 * (std::sqrt(1.0 + r) - 1.0);
    EXPECT_NEAR(m_of(spec, r), closed, 1e-12 * closed);
    const double quad = segment([](double u) { return 1.0 / std::sqrt(1.0 + u); }, 0.0, r);
    EXPECT_NEAR(m_of(spec, r), quad, 1e-10 * closed);
  }
}

TEST(MOf, KaramataLimit) {
  ModelSpec spec;
  spec.alpha = 0.5;
  const double r = 1e10;
  EXPECT_NEAR(m_of(spec, r) / (r * tail_F(spec, r)), 2.0, 1e-4);
}

TEST(MOf, LogPerturbedAndLatticeAgainstOracles) {
  const auto lp = calibrate(0.75, 1.0, {TailVariant::LogPerturbedPareto, 1.0, 0.5},
                            {LeftVariant::Exponential, 2.0, 0.0, 0.4});
  for (double r : {1.0, 10.0, 500.0}) {
    const double oracle = segment([&](double u) { return tail_F(lp, u); }, 0.0, std::min(r, lp.shift)) +
                          (r > lp.shift ? segment([&](double u) { return tail_F(lp, u); }, lp.shift, r) : 0.0);
    EXPECT_NEAR(m_of(lp, r), oracle, 1e-9 * oracle);
  }
  const auto lat = calibrate(0.75, std::numbers::ln2, {TailVariant::LatticePareto, 1.0},
                             {LeftVariant::Atom, 0.0, -1.0, 0.0}, 1.0);
  for (double r : {1.0, 2.5, 40.0}) {
    double oracle = 0.0;  // 1 - F is constant on [k, k+1)
    for (int k = 0; k < r; ++k) oracle += std::min(1.0, r - k) * tail_F(lat, k);
    EXPECT_NEAR(m_of(lat, r), oracle, 1e-12 * oracle);
  }
}

TEST(MOf, MonotoneWithBoundedIncrements) {
  const auto spec = pareto_spec();
  EXPECT_EQ(m_of(spec, 0.0), 0.0);
  auto g = rng::substream(6, 0, 0);
  for (int i = 0; i < 1000; ++i) {
    double r1 = 100.0 * g.uniform(), r2 = 100.0 * g.uniform();
    if (r1 > r2) std::swap(r1, r2);
    const double d = m_of(spec, r2) - m_of(spec, r1);
    ASSERT_GE(d, -1e-12);
    ASSERT_LE(d, (r2 - r1) * tail_F(spec, r1) + 1e-12);
  }
}

TEST(GammaOf, CalibratedRoundTrip) {
  const auto spec = pareto_spec();
  const auto g = gamma_of(spec);
  EXPECT_NEAR(g.gamma, 1.0, 1e-8);
  EXPECT_FALSE(g.degenerate);
}

TEST(GammaOf, SymmetricTwoPointIsDegenerate) {
  const auto g = gamma_of([](double l) { return std::cosh(l); });
  EXPECT_TRUE(g.degenerate);
  EXPECT_EQ(g.gamma, 0.0);
}

TEST(GammaOf, TwoPointClosedForm) {
  for (double p : {0.1, 0.3, 0.45}) {
    const auto g = gamma_of([p](double l) { return p * std::exp(l) + (1 - p) * std::exp(-l); });
    EXPECT_NEAR(g.gamma, std::log((1 - p) / p), 1e-8);
  }
}

TEST(GammaOf, AlwaysBelowOneIsUnbounded) {
  try {
    gamma_of([](double l) { return std::exp(-l); });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Unbounded);
  }
}

TEST(Centering, BalancedRateCancelsOffset) {
  const TailFamily tail{TailVariant::PurePareto, 1.0};
  const double lambda = balance_left_rate(0.75, 1.0, tail, 0.5);
  const auto spec = calibrate(0.75, 1.0, tail, {LeftVariant::Exponential, lambda, 0.0, 0.5});
  // closed form of the limit: c - w / lambda - (1-w) x0 / (1-alpha)
  EXPECT_NEAR(spec.shift - 0.5 / lambda - 0.5 / 0.25, 0.0, 1e-6);
}

TEST(Config, RoundTripIsExact) {
  auto spec = pareto_spec();
  spec.tail.x0 = 0.1 + 0.2;
  const auto text = to_config(spec);
  const auto back = parse_config(text);
  EXPECT_TRUE(back.has_shift);
  EXPECT_EQ(back.spec.alpha, spec.alpha);
  EXPECT_EQ(back.spec.gamma, spec.gamma);
  EXPECT_EQ(back.spec.shift, spec.shift);
  EXPECT_EQ(back.spec.tail.x0, spec.tail.x0);
  EXPECT_EQ(back.spec.left.lambda, spec.left.lambda);
  EXPECT_EQ(back.spec.left.weight, spec.left.weight);
  EXPECT_EQ(to_config(back.spec), text);
}

TEST(Config, LatticeKept) {
  const auto spec = calibrate(0.75, std::numbers::ln2, {TailVariant::LatticePareto, 1.0},
                              {LeftVariant::Atom, 0.0, -1.0, 0.0}, 1.0);
  const auto back = parse_config(to_config(spec));
  ASSERT_TRUE(back.spec.lattice.has_value());
  EXPECT_EQ(*back.spec.lattice, 1.0);
  EXPECT_EQ(back.spec.tail.variant, TailVariant::LatticePareto);
}

TEST(Config, MalformedNumberReportsLine) {
  try {
    parse_config("alpha = 0.7\n# comment\ngamma = 1.0x\ntail.variant = pure_pareto\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Config, UnknownKeyAndMissingEquals) {
  EXPECT_THROW(parse_config("alpha = 0.7\nbeta = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("alpha 0.7\n"), ConfigError);
  EXPECT_THROW(parse_config("alpha = 0.7\n"), ConfigError);  // missing gamma
  EXPECT_THROW(parse_config("alpha = 1.5\ngamma = 1\ntail.variant = pure_pareto\n"), ConfigError);
}
