#pragma once

// Ladder heights, the constants in the asymptotics of E* exp(-gamma chi(r)),
// and grid checks of the regular-variation hypotheses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nonovershoot/error.hpp"
#include "nonovershoot/model.hpp"
#include "nonovershoot/parallel.hpp"
#include "nonovershoot/rng.hpp"
#include "nonovershoot/stats.hpp"
#include "nonovershoot/walk_sim.hpp"

namespace nos::asym {

// ---------------------------------------------------------------------------
// Ladder variables

struct LadderSample {
  std::uint64_t T1 = 0;
  double zeta1 = 0.0;
};

/// First strict ascending ladder epoch and height under P*.
template <walk::IncrementSource Src>
LadderSample ladder_sample(const Src& src, rng::Stream& g, std::uint64_t max_steps = 1'000'000'000) {
  double s = 0.0;
  std::uint64_t n = 0;
  while (s <= 0.0) {
    if (n == max_steps) throw BudgetError("no ladder epoch within max_steps", 1);
    s += src(g, n);
    ++n;
  }
  return LadderSample{n, s};
}

inline LadderSample ladder_sample(const model::ModelSpec& spec, rng::Stream& g,
                                  std::uint64_t max_steps = 1'000'000'000) {
  return ladder_sample(walk::SpecSource(spec, model::Measure::Pstar), g, max_steps);
}

template <walk::IncrementSource Src>
std::vector<LadderSample> ladder_batch(const Src& src, std::size_t n, const walk::RunOptions& opt = {}) {
  return parallel_map(n, opt.threads, [&](std::size_t i) {
    rng::Stream g = rng::substream(opt.seed, rng::domain::ladder, i);
    return ladder_sample(src, g, opt.max_steps);
  });
}

struct C0Estimate {
  stats::Estimate c0;
  stats::Estimate mean_T1;
  bool lattice = false;
};

/// C0 = (sin pi alpha / pi) * int_0^inf e^{-gamma x} P(zeta > x) dx / E* T1, with
/// the integral taken exactly against the empirical ladder-height law:
/// E (1 - e^{-gamma zeta}) / gamma. On a lattice of span h the integral becomes
/// h * sum_{k >= 0} e^{-gamma k h} P(zeta > kh) = h E (1 - e^{-gamma zeta}) / (1 - e^{-gamma h}).
inline C0Estimate c0_from_ladders(const std::vector<LadderSample>& ladders, double alpha, double gamma,
                                  std::optional<double> lattice) {
  require(ladders.size() >= 2, "need at least two ladder samples");
  std::vector<double> a(ladders.size()), t(ladders.size());
  for (std::size_t i = 0; i < ladders.size(); ++i) {
    const double z = ladders[i].zeta1;
    if (lattice) {
      const double h = *lattice;
      a[i] = h * -std::expm1(-gamma * z) / -std::expm1(-gamma * h);
    } else {
      a[i] = -std::expm1(-gamma * z) / gamma;
    }
    t[i] = static_cast<double>(ladders[i].T1);
  }
  const double pre = std::sin(std::numbers::pi * alpha) / std::numbers::pi;
  C0Estimate out;
  out.c0 = stats::scaled(stats::ratio_estimate(a, t), pre);
  out.mean_T1 = stats::aggregate(t);
  out.lattice = lattice.has_value();
  return out;
}

inline C0Estimate estimate_C0(const model::ModelSpec& spec, std::size_t n, const walk::RunOptions& opt = {}) {
  const auto ladders = ladder_batch(walk::SpecSource(spec, model::Measure::Pstar), n, opt);
  return c0_from_ladders(ladders, spec.alpha, spec.gamma, spec.lattice);
}

/// Empirical (1 - F+(x)) / ((1 - F(x)) * mean T1).
inline double ladder_tail_ratio(const std::vector<LadderSample>& ladders, const model::ModelSpec& spec, double x) {
  std::size_t above = 0;
  double t_sum = 0.0;
  for (const auto& l : ladders) {
    if (l.zeta1 > x) ++above;
    t_sum += static_cast<double>(l.T1);
  }
  const double n = static_cast<double>(ladders.size());
  return (static_cast<double>(above) / n) / (model::tail_F(spec, x) * (t_sum / n));
}

inline void require_on_lattice(const model::ModelSpec& spec, double r) {
  if (!spec.lattice) return;
  const double k = r / *spec.lattice;
  if (std::fabs(k - std::round(k)) > 1e-9 * std::max(1.0, std::fabs(k)))
    throw Error(ErrorKind::LatticeMisaligned, "level " + model::format_double(r) + " is not a multiple of the span");
}

/// r (1 - F(r)) E* exp(-gamma chi(r)), which tends to C0.
inline stats::Estimate korshunov_ratio(const model::ModelSpec& spec, double r, std::size_t n,
                                       const walk::RunOptions& opt = {}) {
  require_on_lattice(spec, r);
  return stats::scaled(walk::u_of(spec, r, n, opt), r * model::tail_F(spec, r));
}

struct KorshunovPoint {
  double r = 0.0;
  stats::Estimate u;
  stats::Estimate ratio;     // r (1 - F(r)) u, tends to C0
  stats::Estimate constant;  // gamma m(r) u, tends to C3 = C0 gamma / (1 - alpha)
};

inline KorshunovPoint korshunov_point(const model::ModelSpec& spec, double r, std::size_t n,
                                      const walk::RunOptions& opt = {}) {
  require_on_lattice(spec, r);
  KorshunovPoint p;
  p.r = r;
  p.u = walk::u_of(spec, r, n, opt);
  p.ratio = stats::scaled(p.u, r * model::tail_F(spec, r));
  p.constant = stats::scaled(p.u, spec.gamma * model::m_of(spec, r));
  return p;
}

// ---------------------------------------------------------------------------
// Regular-variation checks

struct CheckReport {
  std::string check;
  bool pass = true;
  /// Largest violation found (negative when every probe passed).
  double margin = -std::numeric_limits<double>::infinity();
  double witness_x = 0.0;
  double witness_y = 0.0;
  std::size_t probes = 0;
};

namespace detail {
inline void record(CheckReport& rep, double violation, double x, double y) {
  ++rep.probes;
  if (violation > rep.margin) {
    rep.margin = violation;
    rep.witness_x = x;
    rep.witness_y = y;
  }
}
}  // namespace detail

/// Probes L(x)/L(y) <= (1+eps) max(x/y, y/x)^eps at log-uniform pairs in
/// [x0, x0 * 10^decades], plus the corners of that box.
inline CheckReport potter_check(const std::function<double(double)>& L, double eps, double x0, std::size_t n_probes,
                                std::uint64_t seed, double decades = 6.0) {
  require(eps > 0.0 && x0 > 0.0, "potter_check needs eps > 0 and x0 > 0");
  CheckReport rep{"potter"};
  auto probe = [&](double x, double y) {
    const double bound = (1.0 + eps) * std::pow(std::max(x / y, y / x), eps);
    detail::record(rep, L(x) / L(y) - bound, x, y);
  };
  const double hi = x0 * std::pow(10.0, decades);
  probe(x0, hi);
  probe(hi, x0);
  rng::Stream g = rng::substream(seed, rng::domain::probes, 0);
  for (std::size_t i = 0; i < n_probes; ++i) {
    const double x = x0 * std::pow(10.0, decades * g.uniform());
    const double y = x0 * std::pow(10.0, decades * g.uniform());
    probe(x, y);
  }
  rep.pass = rep.margin <= 0.0;
  return rep;
}

/// x^alpha (1 - F(x)) for a spec.
inline std::function<double(double)> slowly_varying_part(const model::ModelSpec& spec) {
  return [spec](double x) { return std::pow(x, spec.alpha) * model::tail_F(spec, x); };
}

/// C = alpha rho^{-alpha-1} bounds the slope of x^{-alpha} on (rho, 1), so a
/// Pareto-type tail meets the local tail-ratio bound with this constant.
inline double condition2_constant(double alpha, double rho) { return alpha * std::pow(rho, -alpha - 1.0); }

/// Checks (1 - F(yx)) / (1 - F(y)) <= 1 + C (1 - x) over y log-spaced in
/// [y_lo, y_lo * 10^decades] and x in (rho, 1). For a lattice tail the grid is
/// restricted to lattice points y and yx, the only levels the walk can occupy.
inline CheckReport condition2_check(const std::function<double(double)>& tail, double C, double rho, double y_lo,
                                    std::size_t ny, std::size_t nx, double decades = 6.0,
                                    std::optional<double> lattice = std::nullopt) {
  require(rho > 0.0 && rho < 1.0, "rho must lie in (0,1)");
  require(ny >= 2 && nx >= 2, "grid too small");
  CheckReport rep{"condition2"};
  for (std::size_t i = 0; i < ny; ++i) {
    double y = y_lo * std::pow(10.0, decades * static_cast<double>(i) / static_cast<double>(ny - 1));
    if (lattice) y = *lattice * std::max(1.0, std::round(y / *lattice));
    const double ty = tail(y);
    for (std::size_t j = 0; j < nx; ++j) {
      // x spaced toward 1 geometrically in 1 - x so both ends are probed
      const double frac = static_cast<double>(j) / static_cast<double>(nx - 1);
      double x = 1.0 - (1.0 - rho) * std::pow(1e-9, frac);
      if (lattice) {
        const double k = std::floor(y * x / *lattice);
        if (k * *lattice <= rho * y) continue;
        x = k * *lattice / y;
        if (x >= 1.0) continue;
      }
      detail::record(rep, tail(y * x) / ty - (1.0 + C * (1.0 - x)), x, y);
    }
  }
  rep.pass = rep.margin <= 0.0;
  return rep;
}

inline CheckReport condition2_check(const model::ModelSpec& spec, double C, double rho, double y_lo = 1e3,
                                    std::size_t ny = 200, std::size_t nx = 200) {
  return condition2_check([&](double x) { return model::tail_F(spec, x); }, C, rho, y_lo, ny, nx, 6.0,
                          spec.lattice);
}

/// Tail with an oscillating slowly varying factor, (1+x)^{-alpha} (1 + 0.5 sin(x) / ln(e+x)).
/// Regularly varying but with macroscopic relative changes over windows of
/// bounded length, so the local tail-ratio bound fails.
inline std::function<double(double)> oscillating_tail(double alpha) {
  return [alpha](double x) {
    return std::pow(1.0 + x, -alpha) * (1.0 + 0.5 * std::sin(x) / std::log(std::numbers::e + x));
  };
}

struct KaramataReport {
  std::vector<double> r;
  std::vector<double> sup_ratio;  // sup over y in [A/r, 1] of y (1 - F(ry)) / (1 - F(r))
  std::vector<double> sup_mean;   // sup over y of [int_0^y x F(r dx) / (1 - F(r))] / [y^{1-alpha}/(1-alpha)]
  bool pass = true;
};

/// Evaluates both Karamata-type quantities on a log grid of y in [A/r, 1].
/// PASS when, at the largest r, the first is within 1 + ratio_tol of 1 and the
/// second within 1 + mean_tol of its bound.
inline KaramataReport karamata_check(const model::ModelSpec& spec, const std::vector<double>& r_list,
                                     double A = 1e3, std::size_t ny = 400, double ratio_tol = 1e-3,
                                     double mean_tol = 0.05) {
  require(!r_list.empty(), "r_list is empty");
  KaramataReport rep;
  const double a = spec.alpha;
  for (double r : r_list) {
    require(r > A, "every r must exceed A");
    const double tr = model::tail_F(spec, r);
    double sup1 = 0.0, sup2 = 0.0;
    const double lo = std::log(A / r);
    for (std::size_t i = 0; i < ny; ++i) {
      const double y = std::exp(lo * (1.0 - static_cast<double>(i) / static_cast<double>(ny - 1)));
      const double try_ = model::tail_F(spec, r * y);
      sup1 = std::max(sup1, y * try_ / tr);
      // int_0^y x F(r dx) = int_0^y (F(ry) - F(rx)) dx = m(ry)/r - y (1 - F(ry))
      const double trunc = (model::m_of(spec, r * y) / r - y * try_) / tr;
      sup2 = std::max(sup2, trunc / (std::pow(y, 1.0 - a) / (1.0 - a)));
    }
    rep.r.push_back(r);
    rep.sup_ratio.push_back(sup1);
    rep.sup_mean.push_back(sup2);
  }
  rep.pass = rep.sup_ratio.back() <= 1.0 + ratio_tol && rep.sup_mean.back() <= 1.0 + mean_tol;
  return rep;
}

}  // namespace nos::asym
