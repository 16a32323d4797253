#pragma once

// Cadlag paths stored as jump skeletons, first passage over a level, and the
// exact clock inversion used by the time changes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

#include "nonovershoot/error.hpp"
#include "nonovershoot/numerics.hpp"

namespace nos::path {

/// Step path origin + drift * t + sum of sizes[i] over times[i] <= t.
/// The linear drift is zero for walks and only used for truncated Levy
/// processes whose small jumps are replaced by their mean.
struct JumpSkeleton {
  std::vector<double> times;
  std::vector<double> sizes;
  double origin = 0.0;
  double drift = 0.0;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }

  void push(double t, double size) {
    times.push_back(t);
    sizes.push_back(size);
  }

  /// Number of jumps with epoch <= t.
  std::size_t count_until(double t) const {
    return static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  }

  double value(double t) const {
    const std::size_t k = count_until(t);
    double v = origin;
    for (std::size_t i = 0; i < k; ++i) v += sizes[i];
    return v + drift * t;
  }

  /// Left limit at t.
  double left_limit(double t) const {
    const std::size_t k =
        static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
    double v = origin;
    for (std::size_t i = 0; i < k; ++i) v += sizes[i];
    return v + drift * t;
  }

  /// Post-jump values at each epoch.
  std::vector<double> values() const {
    std::vector<double> out(times.size());
    double v = origin;
    for (std::size_t i = 0; i < times.size(); ++i) {
      v += sizes[i];
      out[i] = v + drift * times[i];
    }
    return out;
  }

  void validate() const {
    require(times.size() == sizes.size(), "skeleton times and sizes differ in length");
    for (std::size_t i = 0; i < times.size(); ++i) {
      require(times[i] >= 0.0, "skeleton epochs must be nonnegative");
      if (i > 0) require(times[i] > times[i - 1], "skeleton epochs must be strictly increasing");
    }
  }

  /// Two-column CSV (time,value): the origin, then post-jump values.
  void write_csv(std::ostream& out) const {
    out << "time,value\n0," << origin << "\n";
    const auto v = values();
    for (std::size_t i = 0; i < times.size(); ++i) out << times[i] << "," << v[i] << "\n";
  }
};

struct Passage {
  double tau = 0.0;
  double chi = 0.0;
  bool hit = false;
  std::size_t index = 0;  // number of jumps up to and including the passage epoch
};

/// First t with value(t) >= level. Between jumps a positive drift may reach
/// the level continuously, in which case chi = 0.
inline Passage first_passage(const JumpSkeleton& sk, double level) {
  double v = sk.origin;
  double prev_t = 0.0;
  if (v >= level) return Passage{0.0, v - level, true, 0};
  for (std::size_t i = 0; i < sk.size(); ++i) {
    const double t = sk.times[i];
    if (sk.drift > 0.0) {
      const double before = v + sk.drift * t;
      if (before >= level) {
        const double tc = prev_t + (level - (v + sk.drift * prev_t)) / sk.drift;
        return Passage{std::max(tc, prev_t), 0.0, true, i};
      }
    }
    v += sk.sizes[i];
    const double after = v + sk.drift * t;
    if (after >= level) return Passage{t, after - level, true, i + 1};
    prev_t = t;
  }
  return Passage{};
}

/// Outcome of one simulated first passage. `skeleton` holds the path up to
/// the passage epoch when retention was requested.
struct PassageRecord {
  JumpSkeleton skeleton;
  double tau = 0.0;
  double chi = 0.0;
  double weight = 1.0;
  bool hit = false;
};

/// Walk path rescaled by level r: step i sits at epoch i * tail_at_r and has
/// size xi_i / r. The record's skeleton must carry the increments at epochs
/// 1, 2, ..., tau.
inline JumpSkeleton scaled_walk_path(const PassageRecord& rec, double r, double tail_at_r) {
  require(r > 0.0, "level must be positive");
  require(tail_at_r > 0.0 && tail_at_r < 1.0, "tail_at_r must lie in (0,1)");
  JumpSkeleton out;
  out.origin = rec.skeleton.origin / r;
  const std::size_t n = rec.hit ? std::min<std::size_t>(rec.skeleton.size(), static_cast<std::size_t>(rec.tau))
                                : rec.skeleton.size();
  out.times.reserve(n);
  out.sizes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push(static_cast<double>(i + 1) * tail_at_r, rec.skeleton.sizes[i] / r);
  return out;
}

/// Clock A(s) = integral over [0, s] of g, where g > 0 is piecewise
/// exponential: g(q) = exp(a_i + b_i (q - s_i)) on [s_i, s_{i+1}). The last
/// segment ends at `end`. sigma = A^{-1} and sigma_inv = A are both exact.
class TimeChange {
 public:
  struct Segment {
    double start;
    double log_level;
    double log_slope;
  };

  TimeChange(std::vector<Segment> segments, double end) : seg_(std::move(segments)), end_(end) {
    require(!seg_.empty(), "time change needs at least one segment");
    require(seg_.front().start == 0.0, "time change must start at 0");
    cum_.resize(seg_.size() + 1);
    cum_[0] = 0.0;
    numerics::CompensatedSum acc;
    for (std::size_t i = 0; i < seg_.size(); ++i) {
      const double stop = i + 1 < seg_.size() ? seg_[i + 1].start : end_;
      require(stop >= seg_[i].start, "time change segments must be ordered");
      acc.add(segment_area(seg_[i], stop - seg_[i].start));
      cum_[i + 1] = acc.value();
    }
  }

  /// Clock of a positive step function raised to `power`, on [0, end].
  static TimeChange from_steps(const JumpSkeleton& positive_path, double power, double end) {
    std::vector<Segment> seg;
    seg.push_back({0.0, power * std::log(positive_path.origin), 0.0});
    const auto v = positive_path.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      require(v[i] > 0.0, "time change needs a positive path");
      if (positive_path.times[i] == 0.0)
        seg.back().log_level = power * std::log(v[i]);
      else
        seg.push_back({positive_path.times[i], power * std::log(v[i]), 0.0});
    }
    return TimeChange(std::move(seg), end);
  }

  double total() const { return cum_.back(); }
  double end() const { return end_; }
  const std::vector<Segment>& segments() const { return seg_; }

  /// A(s) for s in [0, end].
  double sigma_inv(double s) const {
    require(s >= 0.0 && s <= end_, "sigma_inv argument outside the clock's range");
    const std::size_t i = segment_of_time(s);
    return cum_[i] + segment_area(seg_[i], s - seg_[i].start);
  }

  /// A'(s) = g(s) for s in [0, end].
  double rate(double s) const {
    require(s >= 0.0 && s <= end_, "rate argument outside the clock's range");
    const Segment& sg = seg_[segment_of_time(s)];
    return std::exp(sg.log_level + sg.log_slope * (s - sg.start));
  }

  /// inf{s : A(s) > t}; Exhausted if t >= total().
  double sigma(double t) const {
    require(t >= 0.0, "sigma needs t >= 0");
    if (t >= total()) throw Error(ErrorKind::Exhausted, "clock exhausted: extend the skeleton");
    const std::size_t i =
        static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), t) - cum_.begin()) - 1;
    const Segment& sg = seg_[i];
    const double rem = t - cum_[i];
    const double scaled = rem * std::exp(-sg.log_level);
    if (sg.log_slope == 0.0) return sg.start + scaled;
    return sg.start + std::log1p(sg.log_slope * scaled) / sg.log_slope;
  }

 private:
  static double segment_area(const Segment& sg, double d) {
    if (d <= 0.0) return 0.0;
    const double lvl = std::exp(sg.log_level);
    if (sg.log_slope == 0.0) return lvl * d;
    return lvl * std::expm1(sg.log_slope * d) / sg.log_slope;
  }

  std::size_t segment_of_time(double s) const {
    std::size_t lo = 0, hi = seg_.size();
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (seg_[mid].start <= s)
        lo = mid;
      else
        hi = mid;
    }
    return lo;
  }

  std::vector<Segment> seg_;
  std::vector<double> cum_;
  double end_;
};

}  // namespace nos::path
