#pragma once

// Stable subordinator with Levy measure alpha x^{-alpha-1} dx on (0, inf):
// compound-Poisson simulation of the jumps above a cutoff, first passage over
// 1, the limiting overshoot law and the conditioning on small overshoot.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "nonovershoot/error.hpp"
#include "nonovershoot/numerics.hpp"
#include "nonovershoot/parallel.hpp"
#include "nonovershoot/pathkit.hpp"
#include "nonovershoot/rng.hpp"
#include "nonovershoot/stats.hpp"

namespace nos::stable {

struct SubordinatorConfig {
  double alpha = 0.75;
  double delta = 1e-4;
  /// Replace the jumps below delta by their mean, alpha delta^{1-alpha}/(1-alpha) per unit time.
  bool drift_comp = true;
  /// When the gap to the level falls below refine_gap cutoffs, or the drift
  /// would carry the path over the level, continue from the current state
  /// with the cutoff multiplied by refine_factor, at most this many times.
  /// Zero keeps the plain drift approximation.
  unsigned refinements = 12;
  double refine_factor = 0.1;
  double refine_gap = 100.0;

  double jump_rate() const { return jump_rate_at(delta); }
  double drift() const { return drift_at(delta); }
  double jump_rate_at(double cut) const { return std::pow(cut, -alpha); }
  double drift_at(double cut) const {
    return drift_comp ? alpha * std::pow(cut, 1.0 - alpha) / (1.0 - alpha) : 0.0;
  }

  void validate() const {
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    require(delta > 0.0, "delta must be positive");
    require(refine_factor > 0.0 && refine_factor < 1.0, "refine_factor must lie in (0,1)");
  }
};

/// Jump above a cutoff: P(J > x) = (x/cut)^{-alpha}.
inline double sample_jump(double alpha, double cut, rng::Stream& g) {
  return cut * std::exp(-std::log(g.uniform()) / alpha);
}

inline double sample_jump(const SubordinatorConfig& cfg, rng::Stream& g) {
  return sample_jump(cfg.alpha, cfg.delta, g);
}

/// First passage over level 1. A passage reached by the drift between jumps
/// (after all refinements are used) has chi = 0 exactly. A retained skeleton
/// has zero drift: the drift accrued since the previous jump is folded into
/// each recorded jump, so values agree at every epoch.
inline path::PassageRecord sample_passage(const SubordinatorConfig& cfg, rng::Stream& g, bool retain_path = false) {
  double cut = cfg.delta;
  double rate = cfg.jump_rate_at(cut);
  double d = cfg.drift_at(cut);
  unsigned level = 0;
  path::PassageRecord rec;
  double t = 0.0;
  double x = 0.0;  // value at time t
  auto refine = [&] {
    cut *= cfg.refine_factor;
    rate = cfg.jump_rate_at(cut);
    d = cfg.drift_at(cut);
    ++level;
  };
  for (;;) {
    while (level < cfg.refinements && 1.0 - x < cfg.refine_gap * cut) refine();
    const double wait = g.exponential(rate);
    if (d > 0.0 && x + d * wait >= 1.0) {
      if (level < cfg.refinements) {
        // Move to a finer cutoff from (t, x); the process is memoryless.
        refine();
        continue;
      }
      rec.tau = t + (1.0 - x) / d;
      rec.chi = 0.0;
      break;
    }
    t += wait;
    const double j = sample_jump(cfg.alpha, cut, g);
    x += j + d * wait;
    if (retain_path) rec.skeleton.push(t, j + d * wait);
    if (x >= 1.0) {
      rec.tau = t;
      rec.chi = x - 1.0;
      break;
    }
  }
  rec.hit = true;
  rec.weight = 1.0;
  return rec;
}

/// X(t) at a fixed time.
inline double sample_value(const SubordinatorConfig& cfg, double t, rng::Stream& g) {
  const double rate = cfg.jump_rate();
  double s = g.exponential(rate);
  double x = 0.0;
  while (s <= t) {
    x += sample_jump(cfg, g);
    s += g.exponential(rate);
  }
  return x + cfg.drift() * t;
}

// ---------------------------------------------------------------------------
// Limiting overshoot law

inline double overshoot_pdf(double alpha, double x) {
  if (x <= 0.0) return 0.0;
  return std::sin(std::numbers::pi * alpha) / std::numbers::pi * std::pow(x, -alpha) / (1.0 + x);
}

/// Phi_alpha(y) = (sin pi alpha / pi) * integral over [0, y] of u^{-alpha} (1+u)^{-1} du,
/// always by quadrature.
inline double phi_alpha_quadrature(double alpha, double y) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
  if (y <= 0.0) return 0.0;
  const double pre = std::sin(std::numbers::pi * alpha) / std::numbers::pi;
  const double p = 1.0 / (1.0 - alpha);
  // u = v^{1/(1-alpha)} on [0, min(y,1)] removes the singularity at 0.
  auto head = [&](double v) { return p / (1.0 + std::pow(v, p)); };
  const double lo_part = numerics::integrate(head, 0.0, std::pow(std::min(y, 1.0), 1.0 - alpha));
  if (y <= 1.0) return pre * lo_part;
  // u = 1/s and s = v^{1/alpha} on (1, y].
  const double q = 1.0 / alpha;
  auto tail = [&](double v) { return q / (1.0 + std::pow(v, q)); };
  const double v_lo = std::isfinite(y) ? std::pow(y, -alpha) : 0.0;
  const double hi_part = numerics::integrate(tail, v_lo, 1.0);
  return pre * (lo_part + hi_part);
}

/// Phi_alpha, using the arctangent form at alpha = 1/2 and otherwise the
/// regularized incomplete beta I_{y/(1+y)}(1-alpha, alpha).
inline double phi_alpha(double alpha, double y) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
  if (y <= 0.0) return 0.0;
  if (!std::isfinite(y)) return 1.0;
  if (alpha == 0.5) return 2.0 / std::numbers::pi * std::atan(std::sqrt(y));
  return boost::math::ibeta(1.0 - alpha, alpha, y / (1.0 + y));
}

inline double overshoot_cdf(double alpha, double x) { return phi_alpha(alpha, x); }

// ---------------------------------------------------------------------------
// Conditioning on small overshoot

struct ConditionedDraw {
  path::PassageRecord record;
  std::size_t attempts = 0;
};

/// Rejection sampler for the passage given chi <= epsilon.
inline ConditionedDraw sample_conditioned(const SubordinatorConfig& cfg, double epsilon, rng::Stream& g,
                                          std::size_t max_attempts, bool retain_path = false) {
  require(epsilon > 0.0, "epsilon must be positive");
  for (std::size_t a = 1; a <= max_attempts; ++a) {
    auto rec = sample_passage(cfg, g, retain_path);
    if (rec.chi <= epsilon) return ConditionedDraw{std::move(rec), a};
  }
  throw AttemptsExhaustedError(max_attempts, 0);
}

struct ConditionedBatch {
  std::vector<double> tau;
  std::vector<double> chi;
  std::size_t attempts = 0;
  stats::Estimate acceptance;
};

/// n accepted draws, one substream per draw. The acceptance rate is
/// n / attempts with a binomial standard error.
inline ConditionedBatch sample_conditioned_batch(const SubordinatorConfig& cfg, double epsilon, std::size_t n,
                                                 std::uint64_t seed, unsigned threads,
                                                 std::size_t max_attempts_each = 100'000'000) {
  cfg.validate();
  require(n >= 2, "need at least two draws");
  const auto draws = parallel_map(n, threads, [&](std::size_t i) {
    rng::Stream g = rng::substream(seed, rng::domain::conditioned, i);
    return sample_conditioned(cfg, epsilon, g, max_attempts_each);
  });
  ConditionedBatch out;
  out.tau.reserve(n);
  out.chi.reserve(n);
  for (const auto& d : draws) {
    out.tau.push_back(d.record.tau);
    out.chi.push_back(d.record.chi);
    out.attempts += d.attempts;
  }
  const double m = static_cast<double>(out.attempts);
  const double p = static_cast<double>(n) / m;
  out.acceptance = stats::make_estimate(p, std::sqrt(p * (1.0 - p) / m), out.attempts);
  return out;
}

/// Independent passages; returns (tau, chi) columns.
struct PassageBatch {
  std::vector<double> tau;
  std::vector<double> chi;
  std::size_t crept = 0;
};

inline PassageBatch sample_passage_batch(const SubordinatorConfig& cfg, std::size_t n, std::uint64_t seed,
                                         unsigned threads) {
  cfg.validate();
  const auto recs = parallel_map(n, threads, [&](std::size_t i) {
    rng::Stream g = rng::substream(seed, rng::domain::subordinator, i);
    const auto r = sample_passage(cfg, g);
    return std::pair<double, double>{r.tau, r.chi};
  });
  PassageBatch out;
  out.tau.reserve(n);
  out.chi.reserve(n);
  for (const auto& [tau, chi] : recs) {
    out.tau.push_back(tau);
    out.chi.push_back(chi);
    if (chi == 0.0) ++out.crept;
  }
  return out;
}

}  // namespace nos::stable
