#pragma once

// Increment laws for the random walk. A ModelSpec describes the tilted law F
// (the law of a step under P*) as a two-part mixture shifted by a constant:
//
//   xi = shift + Y        with probability 1 - left.weight  (Y > 0, heavy tail)
//   xi = shift + L        with probability left.weight      (L <= 0, light tail)
//
// The original law under P is F^(dx) = exp(-gamma x) F(dx). Calibration makes
// F^ a probability measure, which is the martingale identity E exp(gamma xi) = 1.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nonovershoot/error.hpp"
#include "nonovershoot/numerics.hpp"
#include "nonovershoot/rng.hpp"

namespace nos::model {

enum class TailVariant { PurePareto, LogPerturbedPareto, LatticePareto, Atom };
enum class LeftVariant { None, Exponential, Atom };

/// Positive part of F. Survival functions, with s(x) = 1 for x < 0:
///   PurePareto          (1 + x/x0)^-alpha
///   LogPerturbedPareto  (1+b) (1 + x/x0)^-alpha / (1 + b/ln(e+x))
///   LatticePareto       PurePareto rounded up to the next multiple of h
///   Atom                unit mass at `at`
struct TailFamily {
  TailVariant variant = TailVariant::PurePareto;
  double x0 = 1.0;
  double b = 0.0;
  double at = 0.0;
};

/// Nonpositive part of F: exponential density lambda e^{lambda x} on x < 0, or
/// a single atom. `weight` is its mixture weight under P*.
struct LeftFamily {
  LeftVariant variant = LeftVariant::None;
  double lambda = 0.0;
  double at = 0.0;
  double weight = 0.0;
};

struct ModelSpec {
  double alpha = 0.5;
  double gamma = 1.0;
  TailFamily tail;
  LeftFamily left;
  double shift = 0.0;
  std::optional<double> lattice;

  double span() const { return lattice.value_or(1.0); }
};

enum class Measure { P, Pstar };

// ---------------------------------------------------------------------------
// Positive part

namespace detail {

inline double pareto_survival(double alpha, double x0, double x) {
  return std::exp(-alpha * std::log1p(x / x0));
}

inline double pareto_quantile(double alpha, double x0, double u) {
  return x0 * std::expm1(-std::log(u) / alpha);
}

inline double log_perturbed_survival(double alpha, double x0, double b, double x) {
  return (1.0 + b) * pareto_survival(alpha, x0, x) / (1.0 + b / std::log(std::numbers::e + x));
}

}  // namespace detail

inline double tail_survival(const TailFamily& t, double alpha, double h, double x) {
  switch (t.variant) {
    case TailVariant::PurePareto:
      return x <= 0.0 ? 1.0 : detail::pareto_survival(alpha, t.x0, x);
    case TailVariant::LogPerturbedPareto:
      return x <= 0.0 ? 1.0 : detail::log_perturbed_survival(alpha, t.x0, t.b, x);
    case TailVariant::LatticePareto:
      return x <= 0.0 ? 1.0 : detail::pareto_survival(alpha, t.x0, h * std::floor(x / h));
    case TailVariant::Atom:
      return t.at > x ? 1.0 : 0.0;
  }
  return 0.0;
}

/// Value y with tail_survival(y) = u, u in (0,1).
inline double tail_quantile(const TailFamily& t, double alpha, double h, double u) {
  switch (t.variant) {
    case TailVariant::PurePareto:
      return detail::pareto_quantile(alpha, t.x0, u);
    case TailVariant::LogPerturbedPareto: {
      // (1+x/x0)^-a <= s(x) <= (1+b)(1+x/x0)^-a brackets the root.
      const double lo = detail::pareto_quantile(alpha, t.x0, u);
      const double hi = detail::pareto_quantile(alpha, t.x0, std::min(u / (1.0 + t.b), u));
      if (hi <= lo) return lo;
      const double lu = std::log(u);
      return numerics::find_root(
          [&](double x) { return std::log(detail::log_perturbed_survival(alpha, t.x0, t.b, x)) - lu; },
          lo, hi, "log-perturbed quantile");
    }
    case TailVariant::LatticePareto: {
      const double k = std::ceil(detail::pareto_quantile(alpha, t.x0, u) / h);
      return h * std::max(1.0, k);
    }
    case TailVariant::Atom:
      return t.at;
  }
  return 0.0;
}

/// E exp(-s Y); +infinity when s < 0 and Y is heavy-tailed.
inline double tail_laplace(const TailFamily& t, double alpha, double h, double s) {
  if (s == 0.0) return 1.0;
  switch (t.variant) {
    case TailVariant::Atom:
      return std::exp(-s * t.at);
    case TailVariant::PurePareto:
    case TailVariant::LogPerturbedPareto:
      if (s < 0.0) return std::numeric_limits<double>::infinity();
      // Quantile form: integrand is bounded on (0,1] and vanishes at 0.
      return numerics::integrate(
          [&](double u) { return u <= 0.0 ? 0.0 : std::exp(-s * tail_quantile(t, alpha, h, u)); },
          0.0, 1.0);
    case TailVariant::LatticePareto: {
      if (s < 0.0) return std::numeric_limits<double>::infinity();
      numerics::CompensatedSum acc;
      double prev = 1.0;
      for (std::int64_t k = 1; k < 100'000'000; ++k) {
        const double kh = static_cast<double>(k) * h;
        const double cur = detail::pareto_survival(alpha, t.x0, kh);
        const double disc = std::exp(-s * kh);
        acc.add(disc * (prev - cur));
        prev = cur;
        if (disc * cur < 1e-18 * acc.value()) break;
      }
      return acc.value();
    }
  }
  return 0.0;
}

/// Integral of tail_survival over [0, y], continued as y for y < 0
/// (the survival is 1 there).
inline double tail_integral(const TailFamily& t, double alpha, double h, double y) {
  if (y <= 0.0) {
    if (t.variant == TailVariant::Atom) return std::min(y, t.at) - std::min(0.0, t.at);
    return y;
  }
  switch (t.variant) {
    case TailVariant::PurePareto:
      return t.x0 * std::expm1((1.0 - alpha) * std::log1p(y / t.x0)) / (1.0 - alpha);
    case TailVariant::LogPerturbedPareto:
      return numerics::integrate(
          [&](double u) { return detail::log_perturbed_survival(alpha, t.x0, t.b, u); }, 0.0, y, 1e-12);
    case TailVariant::LatticePareto: {
      const double kmax = std::floor(y / h);
      numerics::CompensatedSum acc;
      for (double k = 0; k < kmax; k += 1.0) acc.add(h * detail::pareto_survival(alpha, t.x0, k * h));
      acc.add((y - kmax * h) * detail::pareto_survival(alpha, t.x0, kmax * h));
      return acc.value();
    }
    case TailVariant::Atom:
      return std::min(y, t.at) - std::min(0.0, t.at);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Left part

inline double left_survival(const LeftFamily& l, double y) {
  switch (l.variant) {
    case LeftVariant::None: return 0.0;
    case LeftVariant::Exponential: return y >= 0.0 ? 0.0 : -std::expm1(l.lambda * y);
    case LeftVariant::Atom: return l.at > y ? 1.0 : 0.0;
  }
  return 0.0;
}

inline double left_laplace(const LeftFamily& l, double s) {
  switch (l.variant) {
    case LeftVariant::None: return 1.0;
    case LeftVariant::Exponential:
      return s < l.lambda ? l.lambda / (l.lambda - s) : std::numeric_limits<double>::infinity();
    case LeftVariant::Atom: return std::exp(-s * l.at);
  }
  return 1.0;
}

inline double left_mean(const LeftFamily& l) {
  switch (l.variant) {
    case LeftVariant::None: return 0.0;
    case LeftVariant::Exponential: return -1.0 / l.lambda;
    case LeftVariant::Atom: return l.at;
  }
  return 0.0;
}

/// Signed integral of left_survival over [0, y].
inline double left_integral(const LeftFamily& l, double y) {
  switch (l.variant) {
    case LeftVariant::None: return 0.0;
    case LeftVariant::Exponential:
      return y >= 0.0 ? 0.0 : y - std::expm1(l.lambda * y) / l.lambda;
    case LeftVariant::Atom: return std::min(y, l.at) - std::min(0.0, l.at);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Mixture functionals

/// 1 - F(x) for the tilted law.
inline double tail_F(const ModelSpec& spec, double x) {
  const double w = spec.left.weight;
  const double y = x - spec.shift;
  return (1.0 - w) * tail_survival(spec.tail, spec.alpha, spec.span(), y) + w * left_survival(spec.left, y);
}

/// m(r) = integral over [0, r] of 1 - F(u).
inline double m_of(const ModelSpec& spec, double r) {
  const double w = spec.left.weight;
  const double c = spec.shift;
  const double h = spec.span();
  const double pos = tail_integral(spec.tail, spec.alpha, h, r - c) - tail_integral(spec.tail, spec.alpha, h, -c);
  const double neg = left_integral(spec.left, r - c) - left_integral(spec.left, -c);
  return (1.0 - w) * pos + w * neg;
}

/// The same integral for a bare tail family (no shift, no left part).
inline double m_of(const TailFamily& tail, double alpha, double r, double h = 1.0) {
  return tail_integral(tail, alpha, h, r);
}

/// E exp(lambda xi) under P, i.e. the integral of exp((lambda - gamma) x) F(dx).
inline double p_law_mgf(const ModelSpec& spec, double lambda) {
  const double s = spec.gamma - lambda;
  const double w = spec.left.weight;
  double v = 0.0;
  if (w < 1.0) v += (1.0 - w) * tail_laplace(spec.tail, spec.alpha, spec.span(), s);
  if (w > 0.0) v += w * left_laplace(spec.left, s);
  return std::exp(-s * spec.shift) * v;
}

/// Normalization of F^, evaluated by integrating the survival function in x
/// (independent of the quantile route used during calibration).
inline double tilt_normalization(const ModelSpec& spec) {
  const double g = spec.gamma;
  const double w = spec.left.weight;
  const double h = spec.span();
  double pos = 0.0;
  switch (spec.tail.variant) {
    case TailVariant::PurePareto:
    case TailVariant::LogPerturbedPareto:
      // E e^{-gY} = 1 - g * int_0^inf e^{-gx} s(x) dx
      pos = 1.0 - g * numerics::integrate(
                          [&](double x) { return std::exp(-g * x) * tail_survival(spec.tail, spec.alpha, h, x); },
                          0.0, std::numeric_limits<double>::infinity());
      break;
    default:
      pos = tail_laplace(spec.tail, spec.alpha, h, g);
  }
  return std::exp(-g * spec.shift) * ((1.0 - w) * pos + w * left_laplace(spec.left, g));
}

inline void validate(const ModelSpec& spec) {
  require(spec.alpha > 0.0 && spec.alpha < 1.0, "alpha must lie in (0,1)");
  require(spec.gamma > 0.0 && std::isfinite(spec.gamma), "gamma must be positive");
  require(spec.left.weight >= 0.0 && spec.left.weight < 1.0, "left.weight must lie in [0,1)");
  if (spec.left.weight > 0.0) require(spec.left.variant != LeftVariant::None, "left.weight > 0 needs a left family");
  if (spec.lattice) require(*spec.lattice > 0.0, "lattice span must be positive");
  const auto& t = spec.tail;
  switch (t.variant) {
    case TailVariant::PurePareto:
      require(t.x0 > 0.0, "tail.x0 must be positive");
      break;
    case TailVariant::LogPerturbedPareto:
      require(t.x0 > 0.0 && t.x0 <= std::numbers::e, "tail.x0 must lie in (0, e] for the log-perturbed tail");
      require(t.b >= 0.0 && t.b / (1.0 + t.b) <= spec.alpha, "tail.b too large: survival would not be monotone");
      break;
    case TailVariant::LatticePareto:
      require(t.x0 > 0.0, "tail.x0 must be positive");
      require(spec.lattice.has_value(), "lattice_pareto needs lattice.h");
      break;
    case TailVariant::Atom:
      break;
  }
  if (spec.left.variant == LeftVariant::Exponential && spec.left.weight > 0.0)
    require(spec.left.lambda > 0.0, "left.lambda must be positive");
  if (spec.left.variant == LeftVariant::Atom) require(spec.left.at <= 0.0, "left.at must be nonpositive");
}

/// Calibrates F so that the integral of exp(-gamma x) F(dx) equals 1. Non-lattice
/// laws are shifted; lattice laws keep their support and instead get the left
/// weight tuned.
inline ModelSpec calibrate(double alpha, double gamma, TailFamily tail, LeftFamily left,
                           std::optional<double> lattice = std::nullopt) {
  ModelSpec spec{alpha, gamma, tail, left, 0.0, lattice};
  if (lattice && left.variant != LeftVariant::None) spec.left.weight = 0.5;  // placeholder for validation
  validate(spec);
  const double h = spec.span();
  const double pos = tail_laplace(tail, alpha, h, gamma);
  const double neg = left_laplace(left, gamma);

  if (!lattice) {
    if (!std::isfinite(neg))
      throw NoRootError("left part too heavy: exp(-gamma L) not integrable (need left.lambda > gamma)", gamma,
                        left.lambda);
    const double w = left.weight;
    const double base = (1.0 - w) * pos + w * neg;
    if (!(base > 0.0) || !std::isfinite(base)) throw NoRootError("base mixture has no finite tilt", 0.0, base);
    spec.shift = std::log(base) / gamma;
    return spec;
  }

  const bool tail_on_lattice =
      tail.variant == TailVariant::LatticePareto ||
      (tail.variant == TailVariant::Atom && std::fabs(tail.at / h - std::round(tail.at / h)) < 1e-12);
  require(tail_on_lattice, "lattice calibration needs a lattice-valued tail");
  require(left.variant == LeftVariant::Atom && std::fabs(left.at / h - std::round(left.at / h)) < 1e-12,
          "lattice calibration needs a left atom on the lattice");
  // (1-w) pos + w neg = 1 is linear in w; the root lies in (0,1) iff pos < 1 < neg.
  if (!(pos < 1.0 && neg > 1.0)) throw NoRootError("mixture weight cannot reach normalization", 0.0, 1.0);
  spec.left.weight = numerics::find_root([&](double w) { return (1.0 - w) * pos + w * neg - 1.0; }, 0.0, 1.0,
                                         "lattice mixture weight");
  return spec;
}

struct TiltRate {
  double gamma = 0.0;
  bool degenerate = false;
};

/// sup{ lambda : mgf(lambda) <= 1 } by bisection; mgf is convex with mgf(0) = 1.
/// A supremum below 1e-6 is reported as the degenerate boundary 0: in double
/// precision mgf(lambda) = 1 + O(lambda^2) is indistinguishable from 1 there.
template <class Mgf>
TiltRate gamma_of(Mgf&& mgf, double cap = 1024.0) {
  auto inside = [&](double lambda) {
    const double v = mgf(lambda);
    return std::isfinite(v) && v <= 1.0;
  };
  double hi = 1.0;
  while (inside(hi)) {
    hi *= 2.0;
    if (hi > cap) throw Error(ErrorKind::Unbounded, "E exp(lambda xi) <= 1 up to the cap");
  }
  const double g = numerics::bisect_boundary(inside, 0.0, hi);
  if (g < 1e-6) return TiltRate{0.0, true};
  return TiltRate{g, false};
}

inline TiltRate gamma_of(const ModelSpec& spec) {
  return gamma_of([&](double lambda) { return p_law_mgf(spec, lambda); });
}

/// E[xi; xi <= r] - r (1-F(r)) alpha/(1-alpha): the gap between the truncated
/// mean of the scaled walk and that of its stable limit, in unscaled units.
inline double centering_offset(const ModelSpec& spec, double r) {
  const double w = spec.left.weight;
  const double c = spec.shift;
  const double h = spec.span();
  const double s = r - c;
  // E[Y; Y <= s] = int_0^s (Gbar(u) - Gbar(s)) du
  const double pos_trunc = tail_integral(spec.tail, spec.alpha, h, s) -
                           std::max(s, 0.0) * tail_survival(spec.tail, spec.alpha, h, s);
  const double tail_r = tail_F(spec, r);
  return c * (1.0 - tail_r) + (1.0 - w) * pos_trunc + w * left_mean(spec.left) -
         r * tail_r * spec.alpha / (1.0 - spec.alpha);
}

/// Left rate that makes the calibrated law's centering offset vanish at large
/// levels, for an exponential left part of the given weight.
inline double balance_left_rate(double alpha, double gamma, const TailFamily& tail, double left_weight,
                                double r_far = 1e12) {
  auto offset = [&](double lambda) {
    LeftFamily left{LeftVariant::Exponential, lambda, 0.0, left_weight};
    return centering_offset(calibrate(alpha, gamma, tail, left), r_far);
  };
  return numerics::find_root(offset, gamma * (1.0 + 1e-9), gamma * 1e4, "balanced left rate");
}

// ---------------------------------------------------------------------------
// Sampling

/// Draws single steps from F (measure Pstar) or F^ (measure P).
class IncrementSampler {
 public:
  IncrementSampler(const ModelSpec& spec, Measure measure) : spec_(spec), measure_(measure) {
    const double w = spec.left.weight;
    if (measure == Measure::Pstar) {
      left_prob_ = w;
    } else {
      const double g = spec.gamma;
      const double pos = (1.0 - w) * tail_laplace(spec.tail, spec.alpha, spec.span(), g);
      const double neg = w > 0.0 ? w * left_laplace(spec.left, g) : 0.0;
      left_prob_ = neg / (pos + neg);
    }
  }

  double operator()(rng::Stream& g) const {
    const double h = spec_.span();
    if (left_prob_ > 0.0 && g.uniform() < left_prob_) return spec_.shift + draw_left(g);
    if (measure_ == Measure::Pstar) return spec_.shift + tail_quantile(spec_.tail, spec_.alpha, h, g.uniform());
    // exp(-gamma y) <= 1 on the positive part, so plain rejection samples the tilt.
    for (;;) {
      const double y = tail_quantile(spec_.tail, spec_.alpha, h, g.uniform());
      if (g.uniform() < std::exp(-spec_.gamma * y)) return spec_.shift + y;
    }
  }

  const ModelSpec& spec() const { return spec_; }
  Measure measure() const { return measure_; }

 private:
  double draw_left(rng::Stream& g) const {
    switch (spec_.left.variant) {
      case LeftVariant::Exponential: {
        const double rate = measure_ == Measure::Pstar ? spec_.left.lambda : spec_.left.lambda - spec_.gamma;
        return std::log(g.uniform()) / rate;
      }
      case LeftVariant::Atom: return spec_.left.at;
      case LeftVariant::None: break;
    }
    return 0.0;
  }

  ModelSpec spec_;
  Measure measure_;
  double left_prob_ = 0.0;
};

inline double sample_increment(const ModelSpec& spec, Measure measure, rng::Stream& g) {
  return IncrementSampler(spec, measure)(g);
}

// ---------------------------------------------------------------------------
// Flat key-value configuration

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline const char* to_string(TailVariant v) {
  switch (v) {
    case TailVariant::PurePareto: return "pure_pareto";
    case TailVariant::LogPerturbedPareto: return "log_pareto";
    case TailVariant::LatticePareto: return "lattice_pareto";
    case TailVariant::Atom: return "atom";
  }
  return "?";
}

inline const char* to_string(LeftVariant v) {
  switch (v) {
    case LeftVariant::None: return "none";
    case LeftVariant::Exponential: return "exponential";
    case LeftVariant::Atom: return "atom";
  }
  return "?";
}

/// Parsed configuration: the spec plus whether it carries a calibrated shift.
struct Config {
  ModelSpec spec;
  bool has_shift = false;
};

inline std::string to_config(const ModelSpec& spec, bool with_shift = true) {
  std::ostringstream out;
  out << "alpha = " << format_double(spec.alpha) << "\n";
  out << "gamma = " << format_double(spec.gamma) << "\n";
  out << "tail.variant = " << to_string(spec.tail.variant) << "\n";
  out << "tail.x0 = " << format_double(spec.tail.x0) << "\n";
  out << "tail.b = " << format_double(spec.tail.b) << "\n";
  out << "tail.at = " << format_double(spec.tail.at) << "\n";
  out << "left.variant = " << to_string(spec.left.variant) << "\n";
  out << "left.lambda = " << format_double(spec.left.lambda) << "\n";
  out << "left.at = " << format_double(spec.left.at) << "\n";
  out << "left.weight = " << format_double(spec.left.weight) << "\n";
  if (spec.lattice) out << "lattice.h = " << format_double(*spec.lattice) << "\n";
  if (with_shift) out << "shift = " << format_double(spec.shift) << "\n";
  return out.str();
}

inline Config parse_config(std::istream& in) {
  Config cfg;
  std::map<std::string, bool> seen;
  std::string raw;
  std::size_t line_no = 0;
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return std::string_view{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (value.empty()) throw ConfigError(line_no, "missing value for '" + key + "'");
    if (seen[key]) throw ConfigError(line_no, "duplicate key '" + key + "'");
    seen[key] = true;

    auto number = [&] {
      double v = 0.0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc{} || res.ptr != value.data() + value.size() || !std::isfinite(v))
        throw ConfigError(line_no, "malformed number for '" + key + "'");
      return v;
    };

    auto& s = cfg.spec;
    if (key == "alpha") s.alpha = number();
    else if (key == "gamma") s.gamma = number();
    else if (key == "tail.x0") s.tail.x0 = number();
    else if (key == "tail.b") s.tail.b = number();
    else if (key == "tail.at") s.tail.at = number();
    else if (key == "left.lambda") s.left.lambda = number();
    else if (key == "left.at") s.left.at = number();
    else if (key == "left.weight") s.left.weight = number();
    else if (key == "lattice.h") s.lattice = number();
    else if (key == "shift") {
      s.shift = number();
      cfg.has_shift = true;
    } else if (key == "tail.variant") {
      if (value == "pure_pareto") s.tail.variant = TailVariant::PurePareto;
      else if (value == "log_pareto") s.tail.variant = TailVariant::LogPerturbedPareto;
      else if (value == "lattice_pareto") s.tail.variant = TailVariant::LatticePareto;
      else if (value == "atom") s.tail.variant = TailVariant::Atom;
      else throw ConfigError(line_no, "unknown tail.variant '" + std::string(value) + "'");
    } else if (key == "left.variant") {
      if (value == "none") s.left.variant = LeftVariant::None;
      else if (value == "exponential") s.left.variant = LeftVariant::Exponential;
      else if (value == "atom") s.left.variant = LeftVariant::Atom;
      else throw ConfigError(line_no, "unknown left.variant '" + std::string(value) + "'");
    } else {
      throw ConfigError(line_no, "unknown key '" + key + "'");
    }
  }
  for (const char* req : {"alpha", "gamma", "tail.variant"})
    if (!seen[req]) throw ConfigError(line_no + 1, std::string("missing required key '") + req + "'");
  try {
    validate(cfg.spec);
  } catch (const Error& e) {
    throw ConfigError(line_no, e.what());
  }
  return cfg;
}

inline Config parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace nos::model
