#pragma once

// Random walk first passage under P and P*, and the tilted estimators built on
// it: P(tau < inf) = E* exp(-gamma S_tau), u(r) = E* exp(-gamma chi), and
// self-normalized conditional expectations given tau < inf.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nonovershoot/error.hpp"
#include "nonovershoot/model.hpp"
#include "nonovershoot/parallel.hpp"
#include "nonovershoot/pathkit.hpp"
#include "nonovershoot/rng.hpp"
#include "nonovershoot/stats.hpp"

namespace nos::walk {

/// Draws the n-th increment (n counts from 0) of a walk.
template <class S>
concept IncrementSource = requires(const S& s, rng::Stream& g, std::uint64_t n) {
  { s(g, n) } -> std::convertible_to<double>;
};

/// Increments drawn i.i.d. from a calibrated spec.
class SpecSource {
 public:
  SpecSource(const model::ModelSpec& spec, model::Measure measure) : sampler_(spec, measure) {}
  double operator()(rng::Stream& g, std::uint64_t) const { return sampler_(g); }

 private:
  model::IncrementSampler sampler_;
};

/// Deterministic increments repeated in a cycle (test stubs).
class CyclicSource {
 public:
  explicit CyclicSource(std::vector<double> cycle) : cycle_(std::move(cycle)) {
    require(!cycle_.empty(), "cyclic source needs at least one value");
  }
  double operator()(rng::Stream&, std::uint64_t n) const { return cycle_[n % cycle_.size()]; }

 private:
  std::vector<double> cycle_;
};

struct RunOptions {
  std::uint64_t seed = 1;
  unsigned threads = default_threads();
  std::uint64_t max_steps = 1'000'000'000;
  bool retain_path = false;
};

/// Runs S_n = xi_1 + ... + xi_n until S_n >= r. The record's weight is
/// exp(-gamma chi).
template <IncrementSource Src>
path::PassageRecord simulate_passage(const Src& src, double gamma, double r, rng::Stream& g,
                                     std::uint64_t max_steps = 1'000'000'000, bool retain_path = false) {
  require(r > 0.0, "level must be positive");
  path::PassageRecord rec;
  double s = 0.0;
  std::uint64_t n = 0;
  while (s < r) {
    if (n == max_steps) throw BudgetError("walk did not reach the level within max_steps", 1);
    const double xi = src(g, n);
    s += xi;
    ++n;
    if (retain_path) rec.skeleton.push(static_cast<double>(n), xi);
  }
  rec.tau = static_cast<double>(n);
  rec.chi = s - r;
  rec.weight = std::exp(-gamma * rec.chi);
  rec.hit = true;
  return rec;
}

inline path::PassageRecord simulate_passage_star(const model::ModelSpec& spec, double r, rng::Stream& g,
                                                 std::uint64_t max_steps = 1'000'000'000,
                                                 bool retain_path = false) {
  return simulate_passage(SpecSource(spec, model::Measure::Pstar), spec.gamma, r, g, max_steps, retain_path);
}

namespace detail {

/// Runs one passage per replica on its own substream and counts budget
/// overruns instead of aborting the batch.
template <IncrementSource Src, class Fn>
auto passage_map(const Src& src, double gamma, double r, std::size_t n, const RunOptions& opt, Fn&& fn) {
  using T = std::invoke_result_t<Fn&, const path::PassageRecord&>;
  struct Slot {
    T value{};
    bool exhausted = false;
  };
  auto slots = parallel_map(n, opt.threads, [&](std::size_t i) {
    rng::Stream g = rng::substream(opt.seed, rng::domain::walk, i);
    Slot slot;
    try {
      slot.value = fn(simulate_passage(src, gamma, r, g, opt.max_steps, opt.retain_path));
    } catch (const BudgetError&) {
      slot.exhausted = true;
    }
    return slot;
  });
  std::size_t exhausted = 0;
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) {
    if (s.exhausted)
      ++exhausted;
    else
      out.push_back(std::move(s.value));
  }
  if (exhausted > 0)
    throw BudgetError(std::to_string(exhausted) + " replicas exceeded max_steps", exhausted);
  return out;
}

}  // namespace detail

/// Mean of exp(-gamma S_tau) under P*; unbiased for P(tau < inf).
template <IncrementSource Src>
stats::Estimate estimate_ruin(const Src& src, double gamma, double r, std::size_t n, const RunOptions& opt = {}) {
  require(n >= 2, "need at least two replicas");
  const double base = std::exp(-gamma * r);
  const auto v = detail::passage_map(src, gamma, r, n, opt,
                                     [&](const path::PassageRecord& rec) { return base * rec.weight; });
  return stats::aggregate(v);
}

inline stats::Estimate estimate_ruin(const model::ModelSpec& spec, double r, std::size_t n,
                                     const RunOptions& opt = {}) {
  return estimate_ruin(SpecSource(spec, model::Measure::Pstar), spec.gamma, r, n, opt);
}

/// u(r) = E* exp(-gamma chi(r)), the ruin probability rescaled by exp(gamma r).
template <IncrementSource Src>
stats::Estimate u_of(const Src& src, double gamma, double level, std::size_t n, const RunOptions& opt = {}) {
  require(level > 0.0, "level must be positive");
  require(n >= 2, "need at least two replicas");
  const auto v =
      detail::passage_map(src, gamma, level, n, opt, [](const path::PassageRecord& rec) { return rec.weight; });
  return stats::aggregate(v);
}

inline stats::Estimate u_of(const model::ModelSpec& spec, double level, std::size_t n,
                            const RunOptions& opt = {}) {
  return u_of(SpecSource(spec, model::Measure::Pstar), spec.gamma, level, n, opt);
}

struct CrudeRuin {
  stats::Estimate estimate;
  /// Estimated upper bound on the missed mass P(horizon < tau < inf), from
  /// the Lundberg inequality applied at the horizon.
  double bias_bound = 0.0;
};

/// Direct simulation under P of 1{max_{n <= horizon} S_n >= r}.
inline CrudeRuin crude_ruin(const model::ModelSpec& spec, double r, std::uint64_t horizon, std::size_t n,
                            const RunOptions& opt = {}) {
  require(n >= 2, "need at least two replicas");
  const model::IncrementSampler sampler(spec, model::Measure::P);
  struct Out {
    double hit;
    double tail;
  };
  const auto outs = parallel_map(n, opt.threads, [&](std::size_t i) {
    rng::Stream g = rng::substream(opt.seed, rng::domain::crude, i);
    double s = 0.0;
    for (std::uint64_t k = 0; k < horizon; ++k) {
      s += sampler(g);
      if (s >= r) return Out{1.0, 0.0};
    }
    return Out{0.0, std::exp(-spec.gamma * (r - s))};
  });
  stats::MomentAccumulator hits, tails;
  for (const auto& o : outs) {
    hits.add(o.hit);
    tails.add(o.tail);
  }
  return CrudeRuin{hits.estimate(), tails.mean()};
}

struct ConditionalResult {
  stats::Estimate estimate;
  stats::WeightedSample sample;
  bool within_theorem_hypotheses = true;
};

/// Self-normalized estimate of E[f | tau(r) < inf] = E*[w f] / E*[w], w = exp(-gamma chi).
template <IncrementSource Src, class Fn>
ConditionalResult conditional_functional(const Src& src, double gamma, double r, Fn&& f, std::size_t n,
                                         const RunOptions& opt = {}) {
  require(n >= 2, "need at least two replicas");
  struct Pair {
    double f;
    double w;
  };
  const auto v = detail::passage_map(src, gamma, r, n, opt, [&](const path::PassageRecord& rec) {
    return Pair{static_cast<double>(f(rec)), rec.weight};
  });
  ConditionalResult out;
  std::vector<double> wf(v.size()), w(v.size());
  out.sample.values.resize(v.size());
  out.sample.weights.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    wf[i] = v[i].w * v[i].f;
    w[i] = v[i].w;
    out.sample.values[i] = v[i].f;
    out.sample.weights[i] = v[i].w;
  }
  out.estimate = stats::ratio_estimate(wf, w);
  return out;
}

/// The limit theorem for the conditioned walk is stated for alpha in (1/2, 1);
/// simulation is allowed below that but results are flagged.
inline bool within_theorem_hypotheses(const model::ModelSpec& spec) { return spec.alpha > 0.5; }

template <class Fn>
ConditionalResult conditional_functional(const model::ModelSpec& spec, double r, Fn&& f, std::size_t n,
                                         const RunOptions& opt = {}) {
  auto out = conditional_functional(SpecSource(spec, model::Measure::Pstar), spec.gamma, r, std::forward<Fn>(f),
                                    n, opt);
  out.within_theorem_hypotheses = within_theorem_hypotheses(spec);
  return out;
}

}  // namespace nos::walk
