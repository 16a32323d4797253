#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nonovershoot/asymptotics.hpp"

using namespace nos;
using namespace nos::asym;

namespace {

model::ModelSpec balanced_pareto() {
  const model::TailFamily tail{model::TailVariant::PurePareto, 1.0};
  const double lambda = model::balance_left_rate(0.75, 1.0, tail, 0.5);
  return model::calibrate(0.75, 1.0, tail, {model::LeftVariant::Exponential, lambda, 0.0, 0.5});
}

model::ModelSpec lattice_pareto() {
  return model::calibrate(0.75, std::numbers::ln2, {model::TailVariant::LatticePareto, 1.0},
                          {model::LeftVariant::Atom, 0.0, -1.0, 0.0}, 1.0);
}

model::ModelSpec log_pareto() {
  return model::calibrate(0.75, 1.0, {model::TailVariant::LogPerturbedPareto, 1.0, 0.5},
                          {model::LeftVariant::Exponential, 2.0, 0.0, 0.5});
}

walk::RunOptions single(std::uint64_t seed = 1) {
  walk::RunOptions opt;
  opt.seed = seed;
  opt.threads = 1;
  return opt;
}

}  // namespace

TEST(Ladder, ConstantStub) {
  rng::Stream g = rng::substream(1, 0, 0);
  const auto l = ladder_sample(walk::CyclicSource({0.5}), g);
  EXPECT_EQ(l.T1, 1u);
  EXPECT_EQ(l.zeta1, 0.5);
}

TEST(Ladder, CyclicStub) {
  rng::Stream g = rng::substream(1, 0, 0);
  const auto l = ladder_sample(walk::CyclicSource({-1.0, -1.0, 3.0}), g);
  EXPECT_EQ(l.T1, 3u);
  EXPECT_EQ(l.zeta1, 1.0);
}

TEST(Ladder, C0FromDeterministicLadders) {
  // every ladder is (T1, zeta) = (1, h): the lattice integral is h, so C0' = sin(pi alpha)/pi * h
  std::vector<LadderSample> l(10, LadderSample{1, 1.0});
  const auto c = c0_from_ladders(l, 0.5, std::numbers::ln2, 1.0);
  EXPECT_NEAR(c.c0.value, 1.0 / std::numbers::pi, 1e-15);
  EXPECT_TRUE(c.lattice);
  // non-lattice: (1 - e^{-gamma z}) / gamma
  const auto d = c0_from_ladders(l, 0.5, 1.0, std::nullopt);
  EXPECT_NEAR(d.c0.value, -std::expm1(-1.0) / std::numbers::pi, 1e-15);
}

TEST(Ladder, HeightTailTracksStepTail) {
  // P(zeta > x) ~ (1 - F(x)) E* T1
  const auto spec = balanced_pareto();
  const auto l = ladder_batch(walk::SpecSource(spec, model::Measure::Pstar), 100000, single());
  EXPECT_NEAR(ladder_tail_ratio(l, spec, 200.0), 1.0, 0.1);
}

TEST(Korshunov, RatioApproachesLadderConstant) {
  const auto spec = balanced_pareto();
  const auto c0 = estimate_C0(spec, 50000, single());
  const auto p = korshunov_point(spec, 1024.0, 20000, single(2));
  EXPECT_NEAR(p.ratio.value / c0.c0.value, 1.0, 0.15);
  EXPECT_NEAR(p.constant.value / (c0.c0.value * spec.gamma / (1.0 - spec.alpha)), 1.0, 0.2);
}

TEST(Korshunov, LatticeMisaligned) {
  const auto spec = lattice_pareto();
  EXPECT_NO_THROW(require_on_lattice(spec, 64.0));
  try {
    korshunov_ratio(spec, 64.5, 10, single());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LatticeMisaligned);
  }
}

TEST(Potter, ConstantPasses) {
  const auto rep = potter_check([](double) { return 3.0; }, 0.1, 1.0, 500, 1);
  EXPECT_TRUE(rep.pass);
  EXPECT_LT(rep.margin, 0.0);
}

TEST(Potter, LogPerturbedPasses) {
  const auto rep = potter_check(slowly_varying_part(log_pareto()), 0.1, 10.0, 2000, 2);
  EXPECT_TRUE(rep.pass);
}

TEST(Potter, LogarithmFailsForSmallEps) {
  // ln x grows faster than x^eps over 6 decades when eps = 0.01
  const auto rep = potter_check([](double x) { return std::log(x); }, 0.01, 2.0, 500, 3);
  EXPECT_FALSE(rep.pass);
  EXPECT_GT(rep.margin, 0.0);
  EXPECT_GT(rep.witness_x, rep.witness_y);
}

TEST(Condition2, ConstantIsTheSlopeBound) {
  const double C = condition2_constant(0.75, 0.5);
  for (double x = 0.5; x < 1.0; x += 0.01) EXPECT_LE(std::pow(x, -0.75), 1.0 + C * (1.0 - x));
  // too small a constant fails at the left end of the x range
  EXPECT_FALSE(condition2_check(balanced_pareto(), 1.0, 0.5).pass);
}

TEST(Condition2, ShippedFamiliesPass) {
  for (const auto& spec : {balanced_pareto(), lattice_pareto(), log_pareto()}) {
    const auto rep = condition2_check(spec, condition2_constant(spec.alpha, 0.5), 0.5);
    EXPECT_TRUE(rep.pass) << rep.margin << " at x=" << rep.witness_x << " y=" << rep.witness_y;
  }
}

TEST(Condition2, OscillatingTailFailsWithWitness) {
  const double C = condition2_constant(0.75, 0.5);
  const auto rep = condition2_check(oscillating_tail(0.75), C, 0.5, 1e3, 200, 200);
  EXPECT_FALSE(rep.pass);
  EXPECT_GT(rep.margin, 0.0);
  EXPECT_GE(rep.witness_x, 0.5);
  EXPECT_LT(rep.witness_x, 1.0);
  const auto tail = oscillating_tail(0.75);
  const double x = rep.witness_x, y = rep.witness_y;
  EXPECT_GT(tail(x * y) / tail(y), 1.0 + C * (1.0 - x));
}

TEST(Karamata, ShippedFamiliesPass) {
  for (const auto& spec : {balanced_pareto(), log_pareto(), lattice_pareto()}) {
    const auto rep = karamata_check(spec, {1e4, 1e5, 1e6});
    EXPECT_TRUE(rep.pass) << rep.sup_ratio.back() << " " << rep.sup_mean.back();
  }
}
