#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nonovershoot/experiments.hpp"

using json = nlohmann::ordered_json;
using namespace nos;

namespace {

constexpr int kOk = 0;
constexpr int kStatFail = 1;
constexpr int kNumericFail = 2;
constexpr int kUsage = 3;

struct Global {
  std::uint64_t seed = 1;
  unsigned threads = default_threads();
  std::string format = "json";
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

model::ModelSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  return experiments::resolve(model::parse_config(in));
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << std::setprecision(17);
  return out;
}

json estimate_json(const stats::Estimate& e) {
  return {{"estimate", e.value}, {"stderr", e.std_error}, {"n", e.n}, {"budget_exhausted", e.budget_exhausted}};
}

json ks_json(const stats::KsResult& k) { return {{"distance", k.distance}, {"p_value", k.p_value}}; }

json check_json(const asym::CheckReport& r) {
  return {{"check", r.check},
          {"pass", r.pass},
          {"worst_case", {{"x", r.witness_x}, {"y", r.witness_y}}},
          {"margin", r.margin},
          {"probes", r.probes}};
}

json spec_json(const model::ModelSpec& s) {
  json j = {{"alpha", s.alpha},
            {"gamma", s.gamma},
            {"tail", {{"variant", model::to_string(s.tail.variant)}, {"x0", s.tail.x0}, {"b", s.tail.b}, {"at", s.tail.at}}},
            {"left",
             {{"variant", model::to_string(s.left.variant)},
              {"lambda", s.left.lambda},
              {"at", s.left.at},
              {"weight", s.left.weight}}},
            {"shift", s.shift}};
  if (s.lattice) j["lattice_h"] = *s.lattice;
  return j;
}

/// Recognizes the simple random walk; returns its up-step probability under P.
std::optional<double> gambler_up_probability(const model::ModelSpec& s) {
  if (s.tail.variant != model::TailVariant::Atom || s.tail.at != 1.0) return std::nullopt;
  if (s.left.variant != model::LeftVariant::Atom || s.left.at != -1.0) return std::nullopt;
  if (s.shift != 0.0) return std::nullopt;
  return (1.0 - s.left.weight) * std::exp(-s.gamma);
}

void print_text(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& rows) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) print_text(v, prefix.empty() ? k : prefix + "." + k, rows);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) print_text(j[i], prefix + "[" + std::to_string(i) + "]", rows);
  } else {
    rows.emplace_back(prefix, j.is_string() ? j.get<std::string>() : j.dump());
  }
}

void emit(const json& j, const Global& g) {
  if (g.format == "text") {
    std::vector<std::pair<std::string, std::string>> rows;
    print_text(j, "", rows);
    std::size_t w = 0;
    for (const auto& r : rows) w = std::max(w, r.first.size());
    for (const auto& [k, v] : rows) std::cout << std::left << std::setw(static_cast<int>(w + 2)) << k << v << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
}

json header(const char* command, const char* anchor, const Global& g) {
  return {{"command", command}, {"anchor", anchor}, {"seed", g.seed}};
}

walk::RunOptions run_options(const Global& g) {
  walk::RunOptions o;
  o.seed = g.seed;
  o.threads = g.threads;
  return o;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::string config;
  std::string out;
  bool balance_left = false;
};

int run_calibrate(const CalibrateArgs& a, const Global& g) {
  std::ifstream in(a.config);
  if (!in) throw UsageError("cannot open config '" + a.config + "'");
  auto cfg = model::parse_config(in);
  auto& s = cfg.spec;
  if (a.balance_left) {
    if (s.left.variant != model::LeftVariant::Exponential)
      throw UsageError("--balance-left needs an exponential left part");
    s.left.lambda = model::balance_left_rate(s.alpha, s.gamma, s.tail, s.left.weight);
    cfg.has_shift = false;
  }
  const auto spec = experiments::resolve(cfg);
  const double residual = experiments::calibration_residual(spec);
  json j = header("calibrate", "tilt normalization: integral of exp(-gamma x) F(dx) = 1", g);
  j["spec"] = spec_json(spec);
  j["residual"] = residual;
  j["pass"] = residual <= 1e-10;
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    if (!out) throw UsageError("cannot write '" + a.out + "'");
    out << model::to_config(spec);
    j["spec_file"] = a.out;
  } else {
    j["spec_file_text"] = model::to_config(spec);
  }
  emit(j, g);
  return residual <= 1e-10 ? kOk : kNumericFail;
}

struct RuinArgs {
  std::string spec;
  std::vector<double> r;
  std::size_t n = 10000;
  std::optional<std::uint64_t> crude_horizon;
  std::string csv;
};

int run_ruin(const RuinArgs& a, const Global& g) {
  const auto spec = load_spec(a.spec);
  const auto opt = run_options(g);
  const auto p = gambler_up_probability(spec);
  json j = header("ruin", "ruin identity: P(tau(r) < inf) = exp(-gamma r) E* exp(-gamma chi(r))", g);
  j["spec"] = spec_json(spec);
  j["results"] = json::array();
  bool pass = true;
  std::optional<std::ofstream> csv;
  if (!a.csv.empty()) {
    csv = open_csv(a.csv);
    *csv << "r,estimate,stderr,n,budget_exhausted\n";
  }
  for (double r : a.r) {
    json row = {{"r", r}};
    if (a.crude_horizon) {
      const auto c = experiments::crude_check(spec, r, a.n, *a.crude_horizon, opt);
      row.update(estimate_json(c.estimate));
      row["crude"] = {{"estimate", c.reference}, {"stderr", c.reference_se}, {"horizon", *a.crude_horizon}};
      row["crude_agrees"] = c.pass;
      pass = pass && c.pass;
      if (csv) *csv << r << "," << c.estimate.value << "," << c.estimate.std_error << "," << c.estimate.n << ",0\n";
    } else {
      const auto e = walk::estimate_ruin(spec, r, a.n, opt);
      row.update(estimate_json(e));
      if (csv) *csv << r << "," << e.value << "," << e.std_error << "," << e.n << ",0\n";
    }
    if (p) {
      const double exact = std::pow(*p / (1.0 - *p), r);
      const double diff = std::fabs(row["estimate"].get<double>() - exact);
      const bool ok = diff <= 3.0 * row["stderr"].get<double>() + 1e-12 * exact;
      row["closed_form"] = exact;
      row["closed_form_agrees"] = ok;
      pass = pass && ok;
    }
    j["results"].push_back(row);
  }
  j["pass"] = pass;
  emit(j, g);
  return pass ? kOk : kStatFail;
}

struct OvershootArgs {
  std::string mode = "levy";
  std::optional<double> alpha;
  std::string spec;
  double r = 1000.0;
  double delta = 1e-4;
  std::size_t n = 100000;
  std::optional<double> ks_max;
  std::string csv;
};

int run_overshoot(const OvershootArgs& a, const Global& g) {
  json j = header("overshoot", "Dynkin-Lamperti overshoot law: chi(r)/r -> Phi_alpha", g);
  experiments::OvershootRun run;
  double threshold = 0.0;
  if (a.mode == "levy") {
    if (!a.alpha) throw UsageError("levy mode needs --alpha");
    stable::SubordinatorConfig cfg{*a.alpha, a.delta};
    cfg.validate();
    run = experiments::levy_overshoot(cfg, a.n, g.seed, g.threads);
    threshold = a.ks_max.value_or(0.01);
    j["alpha"] = *a.alpha;
    j["delta"] = a.delta;
    j["crept"] = run.crept;
  } else if (a.mode == "walk") {
    if (a.spec.empty()) throw UsageError("walk mode needs --spec");
    const auto spec = load_spec(a.spec);
    if (a.alpha && *a.alpha != spec.alpha) throw UsageError("--alpha differs from the spec's alpha");
    run = experiments::walk_overshoot(spec, a.r, a.n, run_options(g));
    threshold = a.ks_max.value_or(0.02);
    j["alpha"] = spec.alpha;
    j["r"] = a.r;
  } else {
    throw UsageError("--mode must be walk or levy");
  }
  j["mode"] = a.mode;
  j["n"] = run.sample.size();
  j["ks"] = ks_json(run.ks);
  j["threshold"] = threshold;
  const bool pass = run.ks.distance < threshold;
  j["pass"] = pass;
  if (!a.csv.empty()) {
    auto out = open_csv(a.csv);
    out << "replica,chi\n";
    for (std::size_t i = 0; i < run.sample.size(); ++i) out << i << "," << run.sample[i] << "\n";
  }
  emit(j, g);
  return pass ? kOk : kStatFail;
}

struct XTildeArgs {
  double alpha = 0.5;
  std::size_t n = 10000;
  double delta_log = 1e-4;
  double exp_c = 0.5;
  bool sensitivity = false;
  std::string csv;
  std::string skeleton_csv;
};

json moments_json(const experiments::XTildeMoments& m) {
  json rows = json::array();
  for (const auto& r : m.rows)
    rows.push_back({{"k", r.k},
                    {"exact", r.exact},
                    {"empirical", r.empirical.value},
                    {"stderr", r.empirical.std_error},
                    {"z", r.z}});
  return rows;
}

int run_xtilde(const XTildeArgs& a, const Global& g) {
  json j = header("xtilde", "moment formula for tau~ via Beta integrals", g);
  const auto m = experiments::xtilde_moments(a.alpha, a.delta_log, a.n, g.seed, g.threads, a.exp_c);
  j["n"] = a.n;
  j["alpha"] = a.alpha;
  j["delta_log"] = a.delta_log;
  j["moments"] = moments_json(m);
  bool pass = true;
  for (const auto& r : m.rows) pass = pass && std::fabs(r.z) <= 3.0;
  const bool exp_ok = m.exp_moment.value <= m.exp_bound + 3.0 * m.exp_moment.std_error;
  j["exp_moment"] = {{"c", m.exp_c},
                     {"empirical", m.exp_moment.value},
                     {"stderr", m.exp_moment.std_error},
                     {"bound", m.exp_bound},
                     {"within_bound", exp_ok}};
  pass = pass && exp_ok;
  if (a.sensitivity) {
    const auto h = experiments::xtilde_moments(a.alpha, a.delta_log / 2.0, a.n, g.seed, g.threads, a.exp_c);
    const double z = experiments::sensitivity_z(m, h);
    j["sensitivity"] = {{"delta_log", h.delta_log}, {"moments", moments_json(h)}, {"max_z", z}, {"pass", z < 2.0}};
    pass = pass && z < 2.0;
  }
  j["pass"] = pass;
  if (!a.csv.empty()) {
    auto out = open_csv(a.csv);
    out << "replica,tau\n";
    for (std::size_t i = 0; i < m.tau.size(); ++i) out << i << "," << m.tau[i] << "\n";
  }
  if (!a.skeleton_csv.empty()) {
    auto out = open_csv(a.skeleton_csv);
    rng::Stream s = rng::substream(g.seed, rng::domain::xtilde, 0);
    xtilde::LogBreveOptions opt;
    opt.alpha = a.alpha;
    opt.delta_log = a.delta_log;
    xtilde::XTilde(xtilde::sample_log_breve(opt, s)).skeleton().write_csv(out);
  }
  emit(j, g);
  return pass ? kOk : kStatFail;
}

struct VerifyArgs {
  std::string suite;
  std::string spec;
  std::optional<std::size_t> n;
  double alpha = 0.75;
  double r = 1000.0;
  double r_min = 1024.0;
  double r_max = 32768.0;
  std::size_t n_ladder = 100000;
  std::size_t n_tilde = 10000;
  double epsilon = 1e-3;
  double delta = 1e-4;
  double delta_log = 1e-4;
  double rho = 0.5;
  double potter_eps = 0.1;
  bool fixture = false;
};

int run_verify(const VerifyArgs& a, const Global& g) {
  const bool needs_spec = a.suite != "theorem2" && !(a.suite == "condition2" && a.fixture);
  if (needs_spec && a.spec.empty()) throw UsageError("suite '" + a.suite + "' needs a spec file");
  std::optional<model::ModelSpec> spec;
  if (needs_spec) spec = load_spec(a.spec);
  json j;
  bool pass = false;

  if (a.suite == "potter") {
    j = header("verify", "Potter bounds for the slowly varying part x^alpha (1 - F(x))", g);
    const auto rep = asym::potter_check(asym::slowly_varying_part(*spec), a.potter_eps, 10.0, 2000, g.seed);
    j["report"] = check_json(rep);
    j["eps"] = a.potter_eps;
    pass = rep.pass;
  } else if (a.suite == "condition2") {
    j = header("verify", "local tail-ratio bound: (1 - F(yx)) / (1 - F(y)) <= 1 + C (1 - x) on (rho, 1)", g);
    const double alpha = spec ? spec->alpha : a.alpha;
    const double C = asym::condition2_constant(alpha, a.rho);
    const auto rep = spec ? asym::condition2_check(*spec, C, a.rho) : experiments::condition2_fixture(alpha, a.rho);
    j["fixture"] = !spec.has_value();
    j["C"] = C;
    j["rho"] = a.rho;
    j["report"] = check_json(rep);
    pass = rep.pass;
  } else if (a.suite == "karamata") {
    j = header("verify", "Karamata theorem for the truncated first moment", g);
    const auto rep = asym::karamata_check(*spec, {1e4, 1e5, 1e6});
    j["report"] = {{"check", "karamata"},
                   {"pass", rep.pass},
                   {"r", rep.r},
                   {"sup_ratio", rep.sup_ratio},
                   {"sup_mean", rep.sup_mean}};
    pass = rep.pass;
  } else if (a.suite == "korshunov") {
    j = header("verify", "Korshunov asymptotics: r (1 - F(r)) E* exp(-gamma chi(r)) -> C0", g);
    std::vector<double> rs;
    for (double r = a.r_min; r <= a.r_max; r *= 2.0) rs.push_back(r);
    const auto k = experiments::korshunov_sweep(*spec, rs, a.n.value_or(100000), a.n_ladder, run_options(g));
    json pts = json::array();
    for (const auto& p : k.points)
      pts.push_back({{"r", p.r},
                     {"ratio", p.ratio.value},
                     {"ratio_stderr", p.ratio.std_error},
                     {"constant", p.constant.value},
                     {"constant_stderr", p.constant.std_error}});
    j["points"] = pts;
    j["c0"] = {{"estimate", k.c0.c0.value}, {"stderr", k.c0.c0.std_error}, {"lattice", k.c0.lattice}};
    j["c3"] = k.c3;
    j["plateau_change"] = k.plateau_change;
    j["c0_gap"] = k.c0_gap;
    j["c3_gap"] = k.c3_gap;
    j["ruin_identity_gap"] = k.ruin_identity_gap;
    pass = k.pass;
  } else if (a.suite == "theorem2") {
    j = header("verify", "limit of tau given chi <= epsilon for the stable subordinator: tau~", g);
    stable::SubordinatorConfig cfg{a.alpha, a.delta};
    cfg.validate();
    const auto t = experiments::small_overshoot_limit(cfg, a.epsilon, a.delta_log, a.n.value_or(5000), g.seed, g.threads);
    j["alpha"] = a.alpha;
    j["epsilon"] = a.epsilon;
    j["ks"] = ks_json(t.ks);
    j["acceptance"] = {{"estimate", t.acceptance.value},
                       {"stderr", t.acceptance.std_error},
                       {"phi_alpha", t.phi},
                       {"z", t.z_acceptance}};
    pass = t.ks.p_value > 0.01 && std::fabs(t.z_acceptance) <= 3.0;
  } else if (a.suite == "theorem3") {
    j = header("verify", "conditioned walk limit: weighted law of (1 - F(r)) tau(r) -> tau~", g);
    const auto t = experiments::conditioned_walk_limit(*spec, a.r, a.n.value_or(40000), a.n_tilde, a.delta_log, g.seed, g.threads);
    j["r"] = t.r;
    j["t0"] = t.t0;
    j["ess"] = t.ess;
    j["within_theorem_hypotheses"] = t.within_theorem_hypotheses;
    j["mean_tau_hat"] = {{"estimate", t.mean_tau_hat.value}, {"stderr", t.mean_tau_hat.std_error}};
    j["mean_tau_tilde"] = t.mean_tau_tilde;
    j["ks_tau"] = ks_json(t.ks_tau);
    j["ks_marginal"] = ks_json(t.ks_marginal);
    pass = t.ks_tau.p_value > 0.01 && t.ks_marginal.p_value > 0.01;
  } else {
    throw UsageError("unknown suite '" + a.suite + "'");
  }
  j["suite"] = a.suite;
  j["pass"] = pass;
  emit(j, g);
  return pass ? kOk : kStatFail;
}

int error_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::Config:
    case ErrorKind::LatticeMisaligned:
    case ErrorKind::OutOfRange:
      return kUsage;
    default:
      return kNumericFail;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation of random walks conditioned on small overshoot"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--seed", g.seed, "Base seed (overridden by NONOVERSHOOT_SEED)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "text"}));

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Calibrate a model config and report the residual");
  cal->add_option("config", ca.config, "Config file")->required();
  cal->add_option("--out", ca.out, "Write the calibrated spec here");
  cal->add_flag("--balance-left", ca.balance_left, "Replace left.lambda by the balanced rate");

  RuinArgs ra;
  auto* ruin = app.add_subcommand("ruin", "Estimate P(tau(r) < inf) by importance sampling");
  ruin->add_option("spec", ra.spec, "Spec file")->required();
  ruin->add_option("--r", ra.r, "Levels")->required();
  ruin->add_option("--n", ra.n, "Replicas");
  ruin->add_option("--crude-horizon", ra.crude_horizon, "Also run crude simulation up to this many steps");
  ruin->add_option("--csv", ra.csv, "CSV output for the r sweep");

  OvershootArgs oa;
  auto* ov = app.add_subcommand("overshoot", "Overshoot law against Phi_alpha");
  ov->add_option("--mode", oa.mode, "walk or levy");
  ov->add_option("--alpha", oa.alpha, "Stability index (levy mode)");
  ov->add_option("--spec", oa.spec, "Spec file (walk mode)");
  ov->add_option("--r", oa.r, "Level (walk mode)");
  ov->add_option("--delta", oa.delta, "Jump cutoff (levy mode)");
  ov->add_option("--n", oa.n, "Replicas");
  ov->add_option("--ks-max", oa.ks_max, "KS distance threshold");
  ov->add_option("--csv", oa.csv, "Sample CSV");

  XTildeArgs xa;
  auto* xt = app.add_subcommand("xtilde", "Sample tau~ and compare moments");
  xt->add_option("--alpha", xa.alpha, "Stability index");
  xt->add_option("--n", xa.n, "Replicas");
  xt->add_option("--delta-log", xa.delta_log, "Jump cutoff for lnXb");
  xt->add_option("--exp-c", xa.exp_c, "c in E exp(c tau~)");
  xt->add_flag("--sensitivity", xa.sensitivity, "Rerun with delta-log halved");
  xt->add_option("--csv", xa.csv, "tau~ samples CSV");
  xt->add_option("--skeleton-csv", xa.skeleton_csv, "Skeleton CSV of replica 0");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "Run a verification suite");
  ver->add_option("--suite", va.suite, "Suite")
      ->required()
      ->check(CLI::IsMember({"potter", "condition2", "karamata", "korshunov", "theorem2", "theorem3"}));
  ver->add_option("spec", va.spec, "Spec file");
  ver->add_option("--n", va.n, "Replicas");
  ver->add_option("--alpha", va.alpha, "Stability index (theorem2, fixture)");
  ver->add_option("--r", va.r, "Level (theorem3)");
  ver->add_option("--r-min", va.r_min, "Smallest level (korshunov)");
  ver->add_option("--r-max", va.r_max, "Largest level (korshunov)");
  ver->add_option("--n-ladder", va.n_ladder, "Ladder samples (korshunov)");
  ver->add_option("--n-tilde", va.n_tilde, "tau~ samples (theorem3)");
  ver->add_option("--epsilon", va.epsilon, "Overshoot bound (theorem2)");
  ver->add_option("--delta", va.delta, "Jump cutoff (theorem2)");
  ver->add_option("--delta-log", va.delta_log, "Jump cutoff for lnXb");
  ver->add_option("--rho", va.rho, "rho (condition2)");
  ver->add_option("--eps", va.potter_eps, "eps (potter)");
  ver->add_flag("--fixture", va.fixture, "Run condition2 on the oscillating fixture");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (const char* env = std::getenv("NONOVERSHOOT_SEED")) {
      std::uint64_t v = 0;
      const std::string s(env);
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw UsageError("NONOVERSHOOT_SEED is not an unsigned integer");
      g.seed = v;
    }
    if (*cal) return run_calibrate(ca, g);
    if (*ruin) return run_ruin(ra, g);
    if (*ov) return run_overshoot(oa, g);
    if (*xt) return run_xtilde(xa, g);
    if (*ver) return run_verify(va, g);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return error_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericFail;
  }
  return kUsage;
}
