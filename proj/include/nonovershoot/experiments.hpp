#pragma once

// Experiment drivers shared by the command-line verify suites and the
// acceptance checks. Each returns plain data; formatting is left to callers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "nonovershoot/asymptotics.hpp"
#include "nonovershoot/model.hpp"
#include "nonovershoot/pathkit.hpp"
#include "nonovershoot/stable_sim.hpp"
#include "nonovershoot/stats.hpp"
#include "nonovershoot/walk_sim.hpp"
#include "nonovershoot/xtilde.hpp"

namespace nos::experiments {

/// Calibrates a parsed config unless it already carries a shift.
inline model::ModelSpec resolve(const model::Config& cfg) {
  if (cfg.has_shift) return cfg.spec;
  const auto& s = cfg.spec;
  return model::calibrate(s.alpha, s.gamma, s.tail, s.left, s.lattice);
}

/// |integral of exp(-gamma x) F(dx) - 1| by the route independent of calibration.
inline double calibration_residual(const model::ModelSpec& spec) {
  return std::fabs(model::tilt_normalization(spec) - 1.0);
}

// ---------------------------------------------------------------------------
// Overshoot laws

struct OvershootRun {
  std::vector<double> sample;  // chi for the subordinator, chi(r)/r for the walk
  stats::KsResult ks;
  std::size_t crept = 0;
};

inline OvershootRun levy_overshoot(const stable::SubordinatorConfig& cfg, std::size_t n, std::uint64_t seed,
                                   unsigned threads) {
  auto b = stable::sample_passage_batch(cfg, n, seed, threads);
  OvershootRun out;
  out.ks = stats::ks_one_sample(b.chi, [&](double x) { return stable::overshoot_cdf(cfg.alpha, x); });
  out.crept = b.crept;
  out.sample = std::move(b.chi);
  return out;
}

inline OvershootRun walk_overshoot(const model::ModelSpec& spec, double r, std::size_t n,
                                   const walk::RunOptions& opt) {
  OvershootRun out;
  out.sample = walk::detail::passage_map(walk::SpecSource(spec, model::Measure::Pstar), spec.gamma, r, n, opt,
                                         [r](const path::PassageRecord& rec) { return rec.chi / r; });
  out.ks = stats::ks_one_sample(out.sample, [&](double x) { return stable::overshoot_cdf(spec.alpha, x); });
  return out;
}

// ---------------------------------------------------------------------------
// Moments of tau~

struct MomentRow {
  int k = 0;
  stats::Estimate empirical;
  double exact = 0.0;
  double z = 0.0;  // (empirical - exact) / stderr
};

struct XTildeMoments {
  double alpha = 0.0;
  double delta_log = 0.0;
  std::vector<MomentRow> rows;
  stats::Estimate exp_moment;  // E exp(c tau~)
  double exp_c = 0.0;
  double exp_bound = 0.0;      // 1 / (1 - c E tau~)
  std::vector<double> tau;
};

inline XTildeMoments xtilde_moments(double alpha, double delta_log, std::size_t n, std::uint64_t seed,
                                    unsigned threads, double exp_c = 0.5) {
  xtilde::LogBreveOptions opt;
  opt.alpha = alpha;
  opt.delta_log = delta_log;
  const auto s = xtilde::sample_xtilde_batch(opt, n, -1.0, seed, threads);
  XTildeMoments out;
  out.alpha = alpha;
  out.delta_log = delta_log;
  out.tau.reserve(n);
  std::vector<double> t2, ex;
  for (const auto& x : s) {
    out.tau.push_back(x.tau);
    t2.push_back(x.tau * x.tau);
    ex.push_back(std::exp(exp_c * x.tau));
  }
  for (int k : {1, 2}) {
    MomentRow row;
    row.k = k;
    row.empirical = stats::aggregate(k == 1 ? out.tau : t2);
    row.exact = xtilde::moment_tau(k, alpha);
    row.z = (row.empirical.value - row.exact) / row.empirical.std_error;
    out.rows.push_back(row);
  }
  out.exp_c = exp_c;
  out.exp_moment = stats::aggregate(ex);
  out.exp_bound = xtilde::exp_moment_bound(alpha, exp_c);
  return out;
}

/// Largest |difference| / combined stderr between the moment rows of two runs.
inline double sensitivity_z(const XTildeMoments& a, const XTildeMoments& b) {
  double z = 0.0;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const double se = std::hypot(a.rows[i].empirical.std_error, b.rows[i].empirical.std_error);
    z = std::max(z, std::fabs(a.rows[i].empirical.value - b.rows[i].empirical.value) / se);
  }
  return z;
}

struct PathwiseCheck {
  std::size_t paths = 0;
  double doleans = 0.0;        // largest Doleans residual (X^ <= 1, so absolute = relative)
  double clock_inverse = 0.0;  // largest |A(sigma(t)) - t| / max(1, t)
  /// Largest |sigma(A(s)) - s| / max(1, s) beyond the resolution floor
  /// 4 ulp(A(s)) / A'(s): a double A(s) cannot locate s more finely than that.
  double clock_forward = 0.0;
  double clock_forward_raw = 0.0;  // same without the floor
};

inline PathwiseCheck pathwise_identities(double alpha, double delta_log, std::size_t n, std::uint64_t seed,
                                         unsigned threads) {
  xtilde::LogBreveOptions opt;
  opt.alpha = alpha;
  opt.delta_log = delta_log;
  const xtilde::LogBreveSampler sampler(opt);
  struct Out {
    double doleans, inverse, forward, raw;
  };
  const auto res = parallel_map(n, threads, [&](std::size_t i) {
    rng::Stream g = rng::substream(seed, rng::domain::xtilde, i);
    const auto lb = sampler(g);
    const xtilde::XTilde xt(lb);
    const auto& c = xt.clock();
    Out o{xtilde::doleans_residual(lb), 0.0, 0.0, 0.0};
    const auto& times = lb.skeleton.times;
    const std::size_t stride = std::max<std::size_t>(1, times.size() / 64);
    for (std::size_t j = 0; j + 1 < times.size(); j += stride) {
      const double s = times[j];
      const double a = c.sigma_inv(s);
      const double err = std::fabs(c.sigma(a) - s) / std::max(1.0, s);
      const double ulp = std::nextafter(a, std::numeric_limits<double>::infinity()) - a;
      const double floor = 4.0 * ulp / c.rate(s) / std::max(1.0, s);
      o.raw = std::max(o.raw, err);
      o.forward = std::max(o.forward, std::max(0.0, err - floor));
      const double t = c.total() * static_cast<double>(j + 1) / static_cast<double>(times.size() + 1);
      o.inverse = std::max(o.inverse, std::fabs(c.sigma_inv(c.sigma(t)) - t) / std::max(1.0, t));
    }
    return o;
  });
  PathwiseCheck out;
  out.paths = n;
  for (const auto& r : res) {
    out.doleans = std::max(out.doleans, r.doleans);
    out.clock_inverse = std::max(out.clock_inverse, r.inverse);
    out.clock_forward = std::max(out.clock_forward, r.forward);
    out.clock_forward_raw = std::max(out.clock_forward_raw, r.raw);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conditioned limits

struct SmallOvershootRun {
  stats::KsResult ks;
  stats::Estimate acceptance;
  double phi = 0.0;  // Phi_alpha(epsilon)
  double z_acceptance = 0.0;
  std::vector<double> tau_conditioned;
  std::vector<double> tau_tilde;
};

/// tau given chi <= epsilon for the subordinator against tau~.
inline SmallOvershootRun small_overshoot_limit(const stable::SubordinatorConfig& cfg, double epsilon, double delta_log, std::size_t n,
                            std::uint64_t seed, unsigned threads) {
  SmallOvershootRun out;
  auto c = stable::sample_conditioned_batch(cfg, epsilon, n, seed, threads);
  out.acceptance = c.acceptance;
  out.phi = stable::phi_alpha(cfg.alpha, epsilon);
  out.z_acceptance = (c.acceptance.value - out.phi) / c.acceptance.std_error;
  out.tau_conditioned = std::move(c.tau);
  xtilde::LogBreveOptions opt;
  opt.alpha = cfg.alpha;
  opt.delta_log = delta_log;
  for (const auto& x : xtilde::sample_xtilde_batch(opt, n, -1.0, seed, threads)) out.tau_tilde.push_back(x.tau);
  out.ks = stats::ks_two_sample(out.tau_conditioned, out.tau_tilde);
  return out;
}

struct ConditionedWalkRun {
  double r = 0.0;
  double tail_at_r = 0.0;
  double t0 = 0.0;
  stats::KsResult ks_tau;
  stats::KsResult ks_marginal;
  stats::Estimate mean_tau_hat;  // weighted
  double mean_tau_tilde = 0.0;
  double ess = 0.0;
  bool within_theorem_hypotheses = true;
};

/// Weighted law of (1 - F(r)) tau(r) and of the scaled walk stopped at level 1,
/// at t0, against tau~ and Xt(t0).
inline ConditionedWalkRun conditioned_walk_limit(const model::ModelSpec& spec, double r, std::size_t n_walk, std::size_t n_tilde,
                            double delta_log, std::uint64_t seed, unsigned threads, double t0_fraction = 0.5) {
  ConditionedWalkRun out;
  out.r = r;
  out.tail_at_r = model::tail_F(spec, r);
  out.t0 = t0_fraction * xtilde::moment_tau(1, spec.alpha);
  out.within_theorem_hypotheses = walk::within_theorem_hypotheses(spec);
  walk::RunOptions opt;
  opt.seed = seed;
  opt.threads = threads;
  opt.retain_path = true;
  struct Obs {
    double tau_hat, x, w;
  };
  const double fr = out.tail_at_r, t0 = out.t0;
  const auto obs = walk::detail::passage_map(
      walk::SpecSource(spec, model::Measure::Pstar), spec.gamma, r, n_walk, opt, [&](const path::PassageRecord& rec) {
        const double tau_hat = rec.tau * fr;
        const double x = t0 >= tau_hat ? 1.0 : std::min(path::scaled_walk_path(rec, r, fr).value(t0), 1.0);
        return Obs{tau_hat, x, rec.weight};
      });
  stats::WeightedSample tau_hat, marg;
  std::vector<double> wt(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    tau_hat.values.push_back(obs[i].tau_hat);
    tau_hat.weights.push_back(obs[i].w);
    marg.values.push_back(obs[i].x);
    marg.weights.push_back(obs[i].w);
    wt[i] = obs[i].w * obs[i].tau_hat;
  }
  out.mean_tau_hat = stats::ratio_estimate(wt, tau_hat.weights);
  out.ess = tau_hat.effective_size();

  xtilde::LogBreveOptions xo;
  xo.alpha = spec.alpha;
  xo.delta_log = delta_log;
  std::vector<double> tt, xx;
  for (const auto& s : xtilde::sample_xtilde_batch(xo, n_tilde, t0, seed, threads)) {
    tt.push_back(s.tau);
    xx.push_back(s.value_at);
  }
  out.mean_tau_tilde = stats::aggregate(tt).value;
  out.ks_tau = stats::ks_two_sample(tau_hat, stats::WeightedSample::unweighted(tt));
  out.ks_marginal = stats::ks_two_sample(marg, stats::WeightedSample::unweighted(xx));
  return out;
}

// ---------------------------------------------------------------------------
// Importance sampling

struct RuinRow {
  double r = 0.0;
  stats::Estimate estimate;
  double reference = 0.0;
  double reference_se = 0.0;
  double z = 0.0;
  bool pass = false;
};

/// Simple random walk with up-probability p: ruin probability (p/(1-p))^r.
inline model::ModelSpec gambler_spec(double p) {
  return model::calibrate(0.5, std::log((1.0 - p) / p), {model::TailVariant::Atom, 1.0, 0.0, 1.0},
                          {model::LeftVariant::Atom, 0.0, -1.0, 0.0}, 1.0);
}

inline std::vector<RuinRow> gambler_check(double p, const std::vector<double>& r_list, std::size_t n,
                                          const walk::RunOptions& opt) {
  const auto spec = gambler_spec(p);
  std::vector<RuinRow> out;
  for (double r : r_list) {
    RuinRow row;
    row.r = r;
    row.estimate = walk::estimate_ruin(spec, r, n, opt);
    row.reference = std::pow(p / (1.0 - p), r);
    const double diff = std::fabs(row.estimate.value - row.reference);
    row.z = row.estimate.std_error > 0.0 ? diff / row.estimate.std_error : 0.0;
    // the P* walk never overshoots, so the estimator can have zero variance
    row.pass = diff <= 3.0 * row.estimate.std_error + 1e-12 * row.reference;
    out.push_back(row);
  }
  return out;
}

inline RuinRow crude_check(const model::ModelSpec& spec, double r, std::size_t n, std::uint64_t horizon,
                           const walk::RunOptions& opt) {
  RuinRow row;
  row.r = r;
  row.estimate = walk::estimate_ruin(spec, r, n, opt);
  walk::RunOptions crude_opt = opt;
  crude_opt.seed = opt.seed + 1;
  const auto c = walk::crude_ruin(spec, r, horizon, n, crude_opt);
  row.reference = c.estimate.value;
  row.reference_se = c.estimate.std_error;
  const double se = std::hypot(row.estimate.std_error, row.reference_se);
  const double diff = std::fabs(row.estimate.value - row.reference);
  row.z = diff / se;
  row.pass = diff <= 3.0 * se + c.bias_bound;
  return row;
}

// ---------------------------------------------------------------------------
// Korshunov constants

struct KorshunovSweep {
  std::vector<asym::KorshunovPoint> points;
  asym::C0Estimate c0;
  double c3 = 0.0;              // C0 gamma / (1 - alpha)
  double plateau_change = 0.0;  // |ratio(r_max) / ratio(r_max / 2) - 1|
  double c0_gap = 0.0;          // |ratio(r_max) / C0 - 1|
  double c3_gap = 0.0;          // |gamma m(r_max) u(r_max) / C3 - 1|
  double ruin_identity_gap = 0.0;  // |estimate_ruin exp(gamma r) / u - 1| at a level where exp(-gamma r) is normal
  bool pass = false;
};

inline KorshunovSweep korshunov_sweep(const model::ModelSpec& spec, const std::vector<double>& r_list,
                                      std::size_t n, std::size_t n_ladder, const walk::RunOptions& opt,
                                      double plateau_tol = 0.10, double c0_tol = 0.15, double c3_tol = 0.20) {
  require(r_list.size() >= 2, "korshunov sweep needs at least two levels");
  for (std::size_t i = 1; i < r_list.size(); ++i)
    require(r_list[i] == 2.0 * r_list[i - 1], "korshunov sweep levels must double");
  KorshunovSweep out;
  out.c0 = asym::estimate_C0(spec, n_ladder, opt);
  out.c3 = out.c0.c0.value * spec.gamma / (1.0 - spec.alpha);
  for (double r : r_list) out.points.push_back(asym::korshunov_point(spec, r, n, opt));
  const auto& last = out.points.back();
  const auto& prev = out.points[out.points.size() - 2];
  out.plateau_change = std::fabs(last.ratio.value / prev.ratio.value - 1.0);
  out.c0_gap = std::fabs(last.ratio.value / out.c0.c0.value - 1.0);
  out.c3_gap = std::fabs(last.constant.value / out.c3 - 1.0);
  // exp(-gamma r) underflows at large r, so the identity is checked where it is representable
  double r0 = std::min(r_list.front(), 500.0 / spec.gamma);
  if (spec.lattice) r0 = *spec.lattice * std::max(1.0, std::floor(r0 / *spec.lattice));
  const auto ruin = walk::estimate_ruin(spec, r0, std::min<std::size_t>(n, 2000), opt);
  const auto u = walk::u_of(spec, r0, std::min<std::size_t>(n, 2000), opt);
  out.ruin_identity_gap = std::fabs(ruin.value * std::exp(spec.gamma * r0) / u.value - 1.0);
  out.pass = out.plateau_change < plateau_tol && out.c0_gap <= c0_tol && out.c3_gap <= c3_tol &&
             out.ruin_identity_gap <= 1e-12;
  return out;
}

// ---------------------------------------------------------------------------
// Regular variation

struct RegularVariation {
  asym::CheckReport potter;
  asym::CheckReport condition2;
  asym::KaramataReport karamata;
  bool pass = false;
};

inline RegularVariation regular_variation(const model::ModelSpec& spec, double potter_eps = 0.1,
                                          double rho = 0.5, std::uint64_t seed = 1) {
  RegularVariation out;
  out.potter = asym::potter_check(asym::slowly_varying_part(spec), potter_eps, 10.0, 2000, seed);
  out.condition2 = asym::condition2_check(spec, asym::condition2_constant(spec.alpha, rho), rho);
  out.karamata = asym::karamata_check(spec, {1e4, 1e5, 1e6});
  out.pass = out.potter.pass && out.condition2.pass && out.karamata.pass;
  return out;
}

/// Local tail-ratio bound on the oscillating fixture; expected to fail.
inline asym::CheckReport condition2_fixture(double alpha, double rho = 0.5) {
  return asym::condition2_check(asym::oscillating_tail(alpha), asym::condition2_constant(alpha, rho), rho, 1e3, 200,
                                200);
}

}  // namespace nos::experiments
