#pragma once

// Quadrature and scalar root finding. Integration is backed by Boost.Math's
// adaptive Gauss-Kronrod; callers remove endpoint singularities by
// substitution before handing integrands over.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "nonovershoot/error.hpp"

namespace nos::numerics {

inline constexpr double kQuadTol = 1e-13;

/// Adaptive Gauss-Kronrod (31 points) on [a,b]; b may be +infinity.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = kQuadTol,
                 unsigned max_depth = 15) {
  if (a == b) return 0.0;
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      std::forward<F>(f), a, b, max_depth, rel_tol, &err);
  if (!std::isfinite(v)) throw Error(ErrorKind::OutOfRange, "quadrature produced a non-finite value");
  return v;
}

/// Root of a function with a sign change on [lo, hi] (TOMS 748).
template <class F>
double find_root(F&& f, double lo, double hi, const std::string& what = "root") {
  const double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) throw NoRootError(what + ": no sign change", lo, hi);
  std::uintmax_t iters = 300;
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                             boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

/// Largest x in [lo, hi] with pred(x) true, assuming pred is true on an
/// initial segment. pred(lo) must hold.
template <class Pred>
double bisect_boundary(Pred&& pred, double lo, double hi, int iterations = 200) {
  for (int i = 0; i < iterations && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (pred(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

/// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  void merge(const CompensatedSum& other) {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace nos::numerics
