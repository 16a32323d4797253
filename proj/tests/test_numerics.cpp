#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nonovershoot/numerics.hpp"

using namespace nos;

TEST(Integrate, Polynomial) {
  EXPECT_NEAR(numerics::integrate([](double x) { return x * x; }, 0.0, 3.0), 9.0, 1e-13);
}

TEST(Integrate, InfiniteRange) {
  const double v = numerics::integrate([](double x) { return std::exp(-x); }, 0.0,
                                       std::numeric_limits<double>::infinity());
  EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(FindRoot, Cosine) {
  const double r = numerics::find_root([](double x) { return std::cos(x); }, 1.0, 2.0);
  EXPECT_NEAR(r, std::numbers::pi / 2, 1e-14);
}

TEST(FindRoot, NoSignChangeReportsBracket) {
  try {
    numerics::find_root([](double x) { return x * x + 1.0; }, -1.0, 2.0, "test");
    FAIL();
  } catch (const NoRootError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoRoot);
    EXPECT_EQ(e.lo(), -1.0);
    EXPECT_EQ(e.hi(), 2.0);
  }
}

TEST(BisectBoundary, FindsThreshold) {
  const double b = numerics::bisect_boundary([](double x) { return x <= 0.3; }, 0.0, 1.0);
  EXPECT_NEAR(b, 0.3, 1e-15);
}

TEST(CompensatedSum, RecoversSmallTerms) {
  numerics::CompensatedSum s;
  s.add(1.0);
  for (int i = 0; i < 1000000; ++i) s.add(1e-16);
  s.add(-1.0);
  EXPECT_NEAR(s.value(), 1e-10, 1e-18);  // a naive sum returns 0
}
