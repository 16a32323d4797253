#pragma once

// Monte Carlo aggregation, weighted empirical distributions and
// Kolmogorov-Smirnov distances.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "nonovershoot/error.hpp"
#include "nonovershoot/numerics.hpp"

namespace nos::stats {

/// Two-sided 99% normal quantile.
inline constexpr double kZ99 = 2.5758293035489004;

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t budget_exhausted = 0;
};

inline Estimate make_estimate(double value, double std_error, std::size_t n) {
  return Estimate{value, std_error, n, value - kZ99 * std_error, value + kZ99 * std_error, 0};
}

/// Scales value, error and interval by a positive constant.
inline Estimate scaled(Estimate e, double factor) {
  e.value *= factor;
  e.std_error *= std::fabs(factor);
  e.ci_low *= factor;
  e.ci_high *= factor;
  if (e.ci_low > e.ci_high) std::swap(e.ci_low, e.ci_high);
  return e;
}

/// Running first and second moments around a pivot (the first value seen),
/// with compensated sums. Merging is associative up to rounding.
class MomentAccumulator {
 public:
  void add(double x) {
    if (n_ == 0) pivot_ = x;
    const double d = x - pivot_;
    s1_.add(d);
    s2_.add(d * d);
    ++n_;
  }

  void merge(const MomentAccumulator& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
      *this = other;
      return;
    }
    // Re-centre the other accumulator on our pivot.
    const double shift = other.pivot_ - pivot_;
    const double o1 = other.s1_.value();
    const double o2 = other.s2_.value();
    const double on = static_cast<double>(other.n_);
    s1_.add(o1);
    s1_.add(on * shift);
    s2_.add(o2);
    s2_.add(2.0 * shift * o1);
    s2_.add(on * shift * shift);
    n_ += other.n_;
  }

  std::size_t count() const { return n_; }
  double mean() const {
    return n_ == 0 ? 0.0 : pivot_ + s1_.value() / static_cast<double>(n_);
  }
  double sum() const { return static_cast<double>(n_) * pivot_ + s1_.value(); }
  double variance() const {
    if (n_ < 2) return 0.0;
    const double n = static_cast<double>(n_);
    const double m1 = s1_.value() / n;
    const double v = (s2_.value() - n * m1 * m1) / (n - 1.0);
    return v > 0.0 ? v : 0.0;
  }

  Estimate estimate() const {
    return make_estimate(mean(), std::sqrt(variance() / static_cast<double>(std::max<std::size_t>(n_, 1))),
                         n_);
  }

 private:
  std::size_t n_ = 0;
  double pivot_ = 0.0;
  numerics::CompensatedSum s1_, s2_;
};

inline Estimate aggregate(std::span<const double> values) {
  require(values.size() >= 2, "aggregate needs at least two values");
  MomentAccumulator acc;
  for (double v : values) acc.add(v);
  return acc.estimate();
}

/// Ratio sum(a)/sum(b) with delta-method standard error. This is the
/// self-normalized importance-sampling estimator when a = w*f and b = w.
inline Estimate ratio_estimate(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, "ratio_estimate needs matched samples, n >= 2");
  numerics::CompensatedSum sa, sb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa.add(a[i]);
    sb.add(b[i]);
  }
  if (!(sb.value() > 0.0)) throw Error(ErrorKind::DegenerateWeights, "denominator sums to zero");
  const double ratio = sa.value() / sb.value();
  const double n = static_cast<double>(a.size());
  numerics::CompensatedSum resid;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - ratio * b[i];
    resid.add(d * d);
  }
  const double bbar = sb.value() / n;
  const double var = resid.value() / (n - 1.0) / (n * bbar * bbar);
  return make_estimate(ratio, std::sqrt(var), a.size());
}

struct WeightedSample {
  std::vector<double> values;
  std::vector<double> weights;

  std::size_t size() const { return values.size(); }

  static WeightedSample unweighted(std::vector<double> v) {
    WeightedSample s;
    s.weights.assign(v.size(), 1.0);
    s.values = std::move(v);
    return s;
  }

  double total_weight() const {
    numerics::CompensatedSum s;
    for (double w : weights) s.add(w);
    return s.value();
  }

  /// Kish effective sample size (sum w)^2 / sum w^2.
  double effective_size() const {
    numerics::CompensatedSum s1, s2;
    for (double w : weights) {
      s1.add(w);
      s2.add(w * w);
    }
    return s2.value() > 0.0 ? s1.value() * s1.value() / s2.value() : 0.0;
  }
};

/// Right-continuous step CDF with atoms w_i / sum(w) at the sorted values.
class StepCdf {
 public:
  StepCdf() = default;
  StepCdf(std::vector<double> support, std::vector<double> cumulative)
      : support_(std::move(support)), cum_(std::move(cumulative)) {}

  double operator()(double x) const {
    const auto it = std::upper_bound(support_.begin(), support_.end(), x);
    if (it == support_.begin()) return 0.0;
    return cum_[static_cast<std::size_t>(it - support_.begin()) - 1];
  }
  /// Left limit F(x-).
  double left(double x) const {
    const auto it = std::lower_bound(support_.begin(), support_.end(), x);
    if (it == support_.begin()) return 0.0;
    return cum_[static_cast<std::size_t>(it - support_.begin()) - 1];
  }
  const std::vector<double>& support() const { return support_; }
  const std::vector<double>& cumulative() const { return cum_; }

 private:
  std::vector<double> support_;
  std::vector<double> cum_;
};

inline StepCdf weighted_ecdf(const WeightedSample& sample) {
  require(sample.values.size() == sample.weights.size(), "values and weights differ in length");
  std::vector<std::size_t> order(sample.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return sample.values[i] < sample.values[j]; });
  numerics::CompensatedSum total;
  for (double w : sample.weights) {
    require(w >= 0.0 && std::isfinite(w), "weights must be finite and nonnegative");
    total.add(w);
  }
  if (!(total.value() > 0.0)) throw Error(ErrorKind::AllZeroWeights, "all weights are zero");

  std::vector<double> support, cum;
  numerics::CompensatedSum running;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    running.add(sample.weights[i]);
    const bool last_of_tie = k + 1 == order.size() || sample.values[order[k + 1]] != sample.values[i];
    if (last_of_tie) {
      support.push_back(sample.values[i]);
      cum.push_back(running.value() / total.value());
    }
  }
  cum.back() = 1.0;
  return StepCdf(std::move(support), std::move(cum));
}

/// Kolmogorov survival function Q(l) = 2 sum (-1)^{k-1} exp(-2 k^2 l^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-16 * std::fabs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Asymptotic p-value with the Stephens small-sample correction.
inline double ks_p_value(double distance, double effective_n) {
  if (effective_n <= 0.0) return 1.0;
  const double s = std::sqrt(effective_n);
  return kolmogorov_q((s + 0.12 + 0.11 / s) * distance);
}

struct KsResult {
  double distance = 0.0;
  double p_value = 1.0;
};

template <class Cdf>
KsResult ks_one_sample(const WeightedSample& sample, Cdf&& cdf) {
  require(sample.size() > 0, "KS needs a nonempty sample");
  const StepCdf ecdf = weighted_ecdf(sample);
  double d = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < ecdf.support().size(); ++i) {
    const double x = ecdf.support()[i];
    const double f = cdf(x);
    // left limit of a possibly discontinuous reference CDF
    const double f_left = cdf(std::nextafter(x, -std::numeric_limits<double>::infinity()));
    d = std::max({d, std::fabs(ecdf.cumulative()[i] - f), std::fabs(prev - f_left)});
    prev = ecdf.cumulative()[i];
  }
  d = std::min(d, 1.0);
  return KsResult{d, ks_p_value(d, sample.effective_size())};
}

template <class Cdf>
KsResult ks_one_sample(std::span<const double> values, Cdf&& cdf) {
  return ks_one_sample(WeightedSample::unweighted({values.begin(), values.end()}),
                       std::forward<Cdf>(cdf));
}

inline KsResult ks_two_sample(const WeightedSample& a, const WeightedSample& b) {
  require(a.size() > 0 && b.size() > 0, "KS needs nonempty samples");
  const StepCdf fa = weighted_ecdf(a);
  const StepCdf fb = weighted_ecdf(b);
  double d = 0.0;
  for (double x : fa.support()) d = std::max(d, std::fabs(fa(x) - fb(x)));
  for (double x : fb.support()) d = std::max(d, std::fabs(fa(x) - fb(x)));
  d = std::min(d, 1.0);
  const double na = a.effective_size();
  const double nb = b.effective_size();
  return KsResult{d, ks_p_value(d, na * nb / (na + nb))};
}

inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  return ks_two_sample(WeightedSample::unweighted({a.begin(), a.end()}),
                       WeightedSample::unweighted({b.begin(), b.end()}));
}

}  // namespace nos::stats
