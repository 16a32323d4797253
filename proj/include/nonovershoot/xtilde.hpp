#pragma once

// The non-overshooting process. ln X^ (written lnXb below) is a pure-jump Levy
// process with Levy measure alpha e^{alpha x} (1 - e^x)^{-alpha-1} dx on x < 0;
// X^ = exp(lnXb) solves X^(t) = 1 - int X^(s-) dL(s) with L-jumps 1 - e^{dlnXb};
// the clock A(s) = int_0^s X^(q)^alpha dq defines sigma = A^{-1} and
//
//   Xt(t) = 1 - X^(sigma(t)),      tau~ = A(inf).
//
// Jumps of lnXb with |x| <= delta are replaced by their mean drift.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "nonovershoot/error.hpp"
#include "nonovershoot/numerics.hpp"
#include "nonovershoot/parallel.hpp"
#include "nonovershoot/pathkit.hpp"
#include "nonovershoot/rng.hpp"

namespace nos::xtilde {

// ---------------------------------------------------------------------------
// Moments of tau~ and the jump kernel

/// I_k = integral over (0,1) of (1 - x^{alpha k}) alpha x^{alpha-1} (1-x)^{-alpha-1} dx.
inline double moment_integral(double alpha, int k) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
  require(k >= 1, "k must be positive");
  const double ak = alpha * static_cast<double>(k);
  // [0, 1/2] with x = v^{1/alpha}: integrand (1 - v^k)(1 - v^{1/alpha})^{-alpha-1}.
  auto head = [&](double v) {
    return -std::expm1(static_cast<double>(k) * std::log(v)) *
           std::pow(-std::expm1(std::log(v) / alpha), -alpha - 1.0);
  };
  const double a = numerics::integrate(head, 0.0, std::pow(0.5, alpha));
  // [1/2, 1] with 1 - x = w^{1/(1-alpha)}: the (1-x)^{-alpha} singularity cancels.
  const double p = 1.0 / (1.0 - alpha);
  auto tail = [&](double w) {
    if (w <= 0.0) return alpha * ak * p;  // limit as x -> 1
    const double one_minus_x = std::pow(w, p);
    const double lx = std::log1p(-one_minus_x);
    return -std::expm1(ak * lx) * alpha * std::exp((alpha - 1.0) * lx) * p / one_minus_x;
  };
  const double b = numerics::integrate(tail, 0.0, std::pow(0.5, 1.0 - alpha));
  return a + b;
}

/// E tau~^n = n! / (I_1 ... I_n).
inline double moment_tau(int n, double alpha) {
  require(n >= 1, "n must be positive");
  double m = 1.0;
  for (int k = 1; k <= n; ++k) m *= static_cast<double>(k) / moment_integral(alpha, k);
  return m;
}

/// Upper bound 1/(1 - c E tau~) on E exp(c tau~), valid for c E tau~ < 1.
inline double exp_moment_bound(double alpha, double c) {
  const double m = moment_tau(1, alpha);
  if (c * m >= 1.0) throw Error(ErrorKind::OutOfRange, "exp_moment_bound needs c < 1/E tau~");
  return 1.0 / (1.0 - c * m);
}

/// Jump intensity density of Xt at state y for a jump of size x.
inline double jump_kernel(double alpha, double y, double x) {
  if (!(y >= 0.0 && y < 1.0) || !(x > 0.0 && x < 1.0 - y)) return 0.0;
  return std::pow(1.0 - x / (1.0 - y), alpha - 1.0) * alpha * std::pow(x, -alpha - 1.0);
}

/// Mean jump rate of Xt at state y: alpha B(alpha, 1-alpha) (1-y)^{1-alpha}.
inline double kernel_mean_jump(double alpha, double y) {
  if (!(y >= 0.0 && y < 1.0)) return 0.0;
  const double beta = std::numbers::pi / std::sin(std::numbers::pi * alpha);
  return alpha * beta * std::pow(1.0 - y, 1.0 - alpha);
}

// ---------------------------------------------------------------------------
// Jumps of lnXb

/// Rate of lnXb jumps below -delta: (e^delta - 1)^{-alpha}.
inline double log_jump_rate(double alpha, double delta) { return std::pow(std::expm1(delta), -alpha); }

/// Mean absolute size per unit time of the lnXb jumps in [-delta, 0):
/// B(1 - e^{-delta}; 1-alpha, alpha) - delta * rate, where the incomplete
/// beta integral is taken with y = v^{1/(1-alpha)}.
inline double log_small_jump_mean(double alpha, double delta) {
  const double y0 = -std::expm1(-delta);
  const double p = 1.0 / (1.0 - alpha);
  auto f = [&](double v) { return p * std::pow(-std::expm1(p * std::log(v)), alpha - 1.0); };
  const double inc_beta = numerics::integrate(
      [&](double v) { return v <= 0.0 ? p : f(v); }, 0.0, std::pow(y0, 1.0 - alpha));
  return inc_beta - delta * log_jump_rate(alpha, delta);
}

/// A lnXb jump conditioned on |x| > delta. The L-jump y = 1 - e^x has tail
/// ((1-y)/y)^alpha, so (1-y)/y = U^{1/alpha} / (e^delta - 1) is exact.
inline double sample_log_jump(double alpha, double delta, rng::Stream& g) {
  const double q = std::exp(std::log(g.uniform()) / alpha) / std::expm1(delta);
  return -std::log1p(1.0 / q);
}

struct LogBreveOptions {
  double alpha = 0.5;
  double delta_log = 1e-4;
  bool drift_comp = true;
  /// Simulation stops once X^(T)^alpha * E tau~ * safety < tail_tol.
  double tail_tol = 1e-10;
  double safety = 10.0;
};

/// lnXb on [0, T]: the skeleton's drift is minus the small-jump mean.
struct LogBreve {
  path::JumpSkeleton skeleton;
  double alpha = 0.5;
  double horizon = 0.0;
  /// Bound on the part of tau~ beyond the horizon, in mean.
  double tail_bound = 0.0;

  double log_value_at_jump(std::size_t i, double cumulative) const {
    return cumulative + skeleton.drift * skeleton.times[i];
  }
};

/// Precomputed constants for a given (alpha, delta) pair.
class LogBreveSampler {
 public:
  explicit LogBreveSampler(const LogBreveOptions& opt) : opt_(opt) {
    require(opt.alpha > 0.0 && opt.alpha < 1.0, "alpha must lie in (0,1)");
    require(opt.delta_log > 0.0, "delta_log must be positive");
    require(opt.tail_tol > 0.0, "tail_tol must be positive");
    rate_ = log_jump_rate(opt.alpha, opt.delta_log);
    drift_ = opt.drift_comp ? -log_small_jump_mean(opt.alpha, opt.delta_log) : 0.0;
    mean_tau_ = moment_tau(1, opt.alpha);
    stop_log_ = std::log(opt.tail_tol / (opt.safety * mean_tau_)) / opt.alpha;
  }

  const LogBreveOptions& options() const { return opt_; }
  double rate() const { return rate_; }
  double drift() const { return drift_; }

  LogBreve operator()(rng::Stream& g) const {
    LogBreve out;
    out.alpha = opt_.alpha;
    out.skeleton.drift = drift_;
    double t = 0.0;
    double cum = 0.0;  // sum of jumps
    for (;;) {
      t += g.exponential(rate_);
      const double x = sample_log_jump(opt_.alpha, opt_.delta_log, g);
      cum += x;
      out.skeleton.push(t, x);
      if (cum + drift_ * t < stop_log_) break;
    }
    out.horizon = t;
    out.tail_bound = std::exp(opt_.alpha * (cum + drift_ * t)) * mean_tau_ * opt_.safety;
    return out;
  }

 private:
  LogBreveOptions opt_;
  double rate_ = 0.0;
  double drift_ = 0.0;
  double mean_tau_ = 0.0;
  double stop_log_ = 0.0;
};

inline LogBreve sample_log_breve(const LogBreveOptions& opt, rng::Stream& g) { return LogBreveSampler(opt)(g); }

// ---------------------------------------------------------------------------
// Construction of Xt

/// Xt built from a lnXb path through the exact clock.
class XTilde {
 public:
  explicit XTilde(const LogBreve& lb)
      : alpha_(lb.alpha), drift_(lb.skeleton.drift), times_(lb.skeleton.times), clock_(make_clock(lb)) {
    log_after_.resize(lb.skeleton.size());
    double cum = 0.0;
    for (std::size_t i = 0; i < lb.skeleton.size(); ++i) {
      cum += lb.skeleton.sizes[i];
      log_after_[i] = cum + drift_ * times_[i];
    }
  }

  /// tau~ up to the declared tail bound of the lnXb path.
  double tau_tilde() const { return clock_.total(); }
  const path::TimeChange& clock() const { return clock_; }

  /// lnXb(s) for s within the horizon.
  double log_breve(double s) const {
    const std::size_t k =
        static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), s) - times_.begin());
    if (k == 0) return drift_ * s;
    return log_after_[k - 1] + drift_ * (s - times_[k - 1]);
  }

  /// Xt(t); equal to 1 once the clock is spent.
  double value(double t) const {
    if (t >= clock_.total()) return 1.0;
    return -std::expm1(log_breve(clock_.sigma(t)));
  }

  /// integral over [0, t] of (1 - Xt(s))^{1-alpha} ds = integral over [0, sigma(t)] of X^(q) dq.
  double compensator_integral(double t) const {
    const double s_end = t >= clock_.total() ? times_.back() : clock_.sigma(t);
    numerics::CompensatedSum acc;
    double start = 0.0;
    double level = 0.0;  // lnXb at the start of the segment
    for (std::size_t i = 0; i <= times_.size(); ++i) {
      const double stop = i < times_.size() ? std::min(times_[i], s_end) : s_end;
      acc.add(segment_integral(level, stop - start));
      if (i == times_.size() || times_[i] >= s_end) break;
      start = times_[i];
      level = log_after_[i];
    }
    return acc.value();
  }

  /// Jump skeleton of Xt at the images A(s_i) of the lnXb jump epochs. With
  /// drift compensation the continuous increase between epochs is folded into
  /// the following jump, so values agree with value() at every epoch.
  path::JumpSkeleton skeleton() const {
    path::JumpSkeleton out;
    double prev = 0.0;
    for (std::size_t i = 0; i < times_.size(); ++i) {
      const double v = -std::expm1(log_after_[i]);
      out.push(clock_.sigma_inv(times_[i]), v - prev);
      prev = v;
    }
    return out;
  }

 private:
  static path::TimeChange make_clock(const LogBreve& lb) {
    require(!lb.skeleton.empty(), "lnXb path has no jumps");
    const double a = lb.alpha;
    const double d = lb.skeleton.drift;
    std::vector<path::TimeChange::Segment> seg;
    seg.reserve(lb.skeleton.size() + 1);
    seg.push_back({0.0, 0.0, a * d});
    double cum = 0.0;
    for (std::size_t i = 0; i < lb.skeleton.size(); ++i) {
      cum += lb.skeleton.sizes[i];
      seg.push_back({lb.skeleton.times[i], a * (cum + d * lb.skeleton.times[i]), a * d});
    }
    return path::TimeChange(std::move(seg), lb.skeleton.times.back());
  }

  /// integral over [0, len] of exp(level + drift q) dq
  double segment_integral(double level, double len) const {
    if (len <= 0.0) return 0.0;
    if (drift_ == 0.0) return std::exp(level) * len;
    return std::exp(level) * std::expm1(drift_ * len) / drift_;
  }

  double alpha_;
  double drift_;
  std::vector<double> times_;
  std::vector<double> log_after_;
  path::TimeChange clock_;
};

inline XTilde build_xtilde(const LogBreve& lb) { return XTilde(lb); }

/// tau~ with the declared tail bound.
struct TauTilde {
  double value = 0.0;
  double tail_bound = 0.0;
};

inline TauTilde tau_tilde(const LogBreve& lb) { return TauTilde{XTilde(lb).tau_tilde(), lb.tail_bound}; }

/// Largest absolute residual, over the jump epochs, of
///   X^(t) - (1 - sum X^(s-) dL(s) - int X^(s) m ds),
/// with X^ evaluated as exp of the accumulated logarithm and the right side
/// accumulated jump by jump (dL = 1 - e^{dlnXb}, m the compensating rate).
inline double doleans_residual(const LogBreve& lb) {
  const auto& sk = lb.skeleton;
  const double m = -sk.drift;
  numerics::CompensatedSum rhs;
  rhs.add(1.0);
  double prev_t = 0.0;
  double prev_log = 0.0;  // lnXb right after the previous epoch
  double cum = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < sk.size(); ++i) {
    const double dt = sk.times[i] - prev_t;
    const double before = std::exp(prev_log);
    if (m != 0.0) rhs.add(-before * -std::expm1(-m * dt));
    const double left = prev_log - m * dt;  // lnXb(s-)
    rhs.add(-std::exp(left) * -std::expm1(sk.sizes[i]));
    cum += sk.sizes[i];
    const double now = cum + sk.drift * sk.times[i];
    worst = std::max(worst, std::fabs(std::exp(now) - rhs.value()));
    prev_t = sk.times[i];
    prev_log = now;
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Batches

struct XTildeSample {
  double tau = 0.0;
  double value_at = 0.0;        // Xt(t0)
  double compensator = 0.0;     // integral of (1 - Xt)^{1-alpha} over [0, t0]
  double tail_bound = 0.0;
  std::size_t jumps = 0;
};

/// n independent replicas; t0 < 0 skips the marginal and compensator.
inline std::vector<XTildeSample> sample_xtilde_batch(const LogBreveOptions& opt, std::size_t n, double t0,
                                                     std::uint64_t seed, unsigned threads,
                                                     std::uint32_t domain = rng::domain::xtilde) {
  const LogBreveSampler sampler(opt);
  return parallel_map(n, threads, [&](std::size_t i) {
    rng::Stream g = rng::substream(seed, domain, i);
    const LogBreve lb = sampler(g);
    const XTilde xt(lb);
    XTildeSample s;
    s.tau = xt.tau_tilde();
    s.tail_bound = lb.tail_bound;
    s.jumps = lb.skeleton.size();
    if (t0 >= 0.0) {
      s.value_at = xt.value(t0);
      s.compensator = xt.compensator_integral(t0);
    }
    return s;
  });
}

}  // namespace nos::xtilde
