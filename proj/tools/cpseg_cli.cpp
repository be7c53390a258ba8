// cpseg: command-line front end.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpseg/cpseg.hpp"

using json = nlohmann::ordered_json;
using namespace cpseg;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kParse = 3,
  kValidation = 4,
  kNumerical = 5,
  kDegenerate = 6,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    double v;
    if (!detail::parse_double(tok, v)) throw UsageError(std::string(what) + ": '" + tok + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string(what) + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  for (double v : parse_list(s, what)) {
    if (v != std::floor(v)) throw UsageError(std::string(what) + ": expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

InputData read_input(const std::string& path) {
  if (path == "-") return parse_input(std::cin);
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open input file '" + path + "'");
  return parse_input(f);
}

// ---- report rendering ------------------------------------------------------

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    std::ostringstream o;
    o.precision(8);
    o << v.get<double>();
    return o.str();
  }
  if (v.is_array()) {
    std::string s;
    for (const auto& e : v) s += (s.empty() ? "" : ",") + scalar_text(e);
    return s;
  }
  return v.dump();
}

bool is_table(const json& v) { return v.is_array() && !v.empty() && v.front().is_object(); }

void render_tsv(std::ostream& os, const json& obj, const std::string& prefix) {
  for (const auto& [k, v] : obj.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      render_tsv(os, v, key);
    } else if (is_table(v)) {
      os << "\n# " << key << "\n";
      std::vector<std::string> cols;
      for (const auto& [c, _] : v.front().items()) cols.push_back(c);
      for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "\t" : "") << cols[c];
      os << "\n";
      for (const auto& row : v) {
        for (std::size_t c = 0; c < cols.size(); ++c)
          os << (c ? "\t" : "") << (row.contains(cols[c]) ? scalar_text(row[cols[c]]) : "");
        os << "\n";
      }
    } else if (!(v.is_array() && v.empty() && prefix.rfind("results", 0) != 0)) {
      os << key << "\t" << scalar_text(v) << "\n";
    }
  }
}

// ---- shared option groups --------------------------------------------------

struct ScanOpts {
  std::string stat = "lr";
  int m = 0, m0 = 1, m1 = 0;
  std::string constraint;  // empty: total for Gaussian scans, per_side for the exponential-family sum
  double kappa = 0.0;
  int d = 1;
  std::string windows = "10,20,30";
  bool windows_only = false;

  void add(CLI::App* app) {
    app->add_option("--stat", stat, "lr | lr_multiscale | seq | nz | cbs | multi")->capture_default_str();
    app->add_option("--m", m, "sequence length")->required();
    app->add_option("--m0", m0, "shortest side")->capture_default_str();
    app->add_option("--m1", m1, "longest side (0 = full range)")->capture_default_str();
    app->add_option("--constraint", constraint, "per_side | total (default total; per_side with --family)");
    app->add_option("--kappa", kappa, "multiscale penalty weight (lr_multiscale)")->capture_default_str();
    app->add_option("--d", d, "dimension (cbs, multi)")->capture_default_str();
    app->add_option("--windows", windows, "NZ window sizes")->capture_default_str();
    app->add_flag("--windows-only", windows_only, "NZ sum over the listed windows only");
  }

  ScanSpec spec() const {
    ScanSpec s;
    s.m = m;
    s.m0 = m0;
    s.m1 = m1;
    s.d = d;
    s.kappa = kappa;
    if (constraint == "per_side") s.constraint = ConstraintMode::per_side;
    else if (constraint == "total" || constraint.empty()) s.constraint = ConstraintMode::total;
    else throw UsageError("--constraint must be per_side or total");
    if (stat == "lr") s.statistic = Statistic::lr;
    else if (stat == "lr_multiscale") s.statistic = Statistic::lr_multiscale;
    else if (stat == "seq") s.statistic = Statistic::seq;
    else if (stat == "nz") s.statistic = Statistic::nz;
    else if (stat == "cbs" || stat == "multi") {
      s.statistic = Statistic::cbs_multi;
      s.kappa = stat == "multi" ? 1.0 : 0.0;
      if (s.m1 == 0) s.m1 = m - 1;
    } else {
      throw UsageError("unknown --stat '" + stat + "'");
    }
    s.nz_windows = parse_int_list(windows, "--windows");
    s.nz_sum_through_max = !windows_only;
    return s;
  }

  json echo() const {
    return {{"stat", stat}, {"m", m}, {"m0", m0}, {"m1", m1}, {"constraint", constraint.empty() ? "total" : constraint},
            {"kappa", kappa}, {"d", d}, {"windows", windows}, {"windows_only", windows_only}};
  }
};

json tail_json(const TailResult& r) {
  return {{"b", r.b}, {"p", r.prob}, {"raw", r.raw}, {"method", r.method}, {"terms", r.terms_summed},
          {"clamped", r.clamped}, {"unreliable", r.unreliable}};
}

std::unique_ptr<Family> make_family(const std::string& name, double shape) {
  if (name == "gaussian") return std::make_unique<GaussianFamily>();
  if (name == "exponential") return std::make_unique<ExponentialFamily>();
  if (name == "inverse_gaussian") return std::make_unique<InverseGaussianFamily>(shape);
  if (name == "poisson") return std::make_unique<PoissonFamily>();
  if (name == "bernoulli") return std::make_unique<BernoulliFamily>();
  throw UsageError("unknown --family '" + name + "'");
}

// ---- commands --------------------------------------------------------------

struct Context {
  json config = json::object();
  json results = json::object();
  json warnings = json::array();
  std::string digest;
};

struct SegmentOpts {
  std::string input;
  std::string procedure = "lr";
  double alpha = 0.0, threshold = 0.0;
  int m0 = 1, m1 = 0;
  std::string sigma = "diff";
  double sigma_known = 1.0;
  std::string windows;
  int wbs_intervals = 5000;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  bool cumsum = false;
  bool pruned = false;
  int calibration_reps = 1000;
};

double resolve_threshold(const SegmentOpts& o, int m, Context& ctx, const std::string& label) {
  if (o.threshold > 0.0) return o.threshold;
  ScanSpec s;
  s.m = m;
  s.m0 = o.m0;
  if (o.procedure == "lr" || o.procedure == "wbs") {
    s.statistic = o.kappa > 0.0 ? Statistic::lr_multiscale : Statistic::lr;
    s.kappa = o.kappa;
    s.m1 = o.m1;
  } else if (o.procedure == "seq") {
    s.statistic = Statistic::seq;
  } else if (o.procedure == "nz") {
    s.statistic = Statistic::nz;
    if (!o.windows.empty()) {
      s.nz_windows = parse_int_list(o.windows, "--windows");
    } else {
      s.nz_windows = {std::max(1, m / 2)};
    }
  } else if (o.procedure == "cbs" || o.procedure == "multi") {
    s.statistic = Statistic::cbs_multi;
    s.kappa = o.procedure == "multi" ? 1.0 : 0.0;
    s.m1 = m - 1;
  } else {
    throw UsageError("--alpha is not available for '" + o.procedure + "'; give --threshold");
  }
  const auto r = solve_threshold(s, o.alpha);
  ctx.results["thresholds"].push_back({{"group", label}, {"m", m}, {"alpha", o.alpha}, {"b", r.b}});
  return r.b;
}

void cmd_segment(const SegmentOpts& o, Context& ctx) {
  if ((o.alpha > 0.0) == (o.threshold > 0.0) && o.procedure != "meanvar")
    throw UsageError("give exactly one of --alpha and --threshold");
  if (o.procedure == "meanvar" && o.alpha > 0.0 && o.threshold > 0.0)
    throw UsageError("give at most one of --alpha and --threshold");
  const auto data = read_input(o.input);
  ctx.digest = data.digest;
  ctx.config = {{"input", o.input}, {"procedure", o.procedure}, {"alpha", o.alpha}, {"threshold", o.threshold},
                {"m0", o.m0}, {"m1", o.m1}, {"sigma", o.sigma}, {"kappa", o.kappa}, {"seed", o.seed},
                {"pruned", o.pruned}};
  VariancePolicy pol;
  if (o.sigma == "diff") pol = VariancePolicy::diff();
  else if (o.sigma == "sample") pol = VariancePolicy::sample();
  else if (o.sigma == "known") pol = VariancePolicy::known(o.sigma_known * o.sigma_known);
  else throw UsageError("--sigma must be diff, sample or known");

  json dets = json::array(), groups = json::array(), sums = json::array();
  for (const auto& g : data.groups) {
    const int m = static_cast<int>(g.values.size());
    Sequence seq(g.values, pol);
    const auto est = estimate_sigma(seq);
    json ginfo = {{"group", g.name}, {"m", m}, {"sigma_used", seq.sigma()},
                  {"sigma_diff", est.diff_variance > 0 ? std::sqrt(est.diff_variance) : 0.0},
                  {"sigma_sample", est.sample_variance > 0 ? std::sqrt(est.sample_variance) : 0.0}};
    if (o.cumsum) {
      const auto& s = seq.sums();
      for (int t = 1; t <= m; ++t)
        sums.push_back({{"group", g.name}, {"index", t}, {"cumsum", s[t]}});
    }
    if (!(seq.sigma2() > 0.0)) {
      ctx.warnings.push_back("group '" + g.name + "': estimated sigma is 0 (constant data); no detections");
      ginfo["detections"] = 0;
      groups.push_back(ginfo);
      continue;
    }
    Segmentation seg;
    MeanVarCalibration cal;
    if (o.procedure == "meanvar") {
      MeanVarConfig mc;
      mc.threshold = o.threshold;
      mc.m1 = o.m1;
      mc.seed = o.seed;
      mc.alpha = o.alpha > 0.0 ? o.alpha : 0.05;
      mc.calibration_reps = o.calibration_reps;
      auto r = segment_meanvar(seq, mc);
      seg = std::move(r.segmentation);
      cal = r.calibration;
      if (cal.reps > 0)
        ginfo["calibration"] = {{"analytic_initial", cal.analytic_initial}, {"calibrated", cal.calibrated},
                                {"reps", cal.reps}};
    } else {
      const double b = resolve_threshold(o, m, ctx, g.name);
      if (o.procedure == "lr" || o.procedure == "seq") {
        SearchConfig cfg;
        cfg.threshold = b;
        cfg.m0 = o.m0;
        cfg.m1 = o.m1;
        cfg.kappa = o.kappa;
        cfg.speedup = o.pruned ? Speedup::pruned : Speedup::exact;
        seg = o.procedure == "lr" ? segment_lr(seq, cfg) : segment_seq(seq, cfg);
      } else if (o.procedure == "nz") {
        seg = segment_nz(seq, o.windows.empty() ? std::vector<int>{} : parse_int_list(o.windows, "--windows"), b);
      } else if (o.procedure == "cbs" || o.procedure == "multi") {
        seg = segment_cbs(seq, b, o.procedure == "multi" ? 1.0 : 0.0, 0.05, o.seed);
      } else if (o.procedure == "wbs") {
        seg = segment_wbs(seq, b, o.wbs_intervals, o.seed);
      } else {
        throw UsageError("unknown --procedure '" + o.procedure + "'");
      }
    }
    ginfo["threshold"] = seg.threshold;
    ginfo["detections"] = seg.detections.size();
    groups.push_back(ginfo);
    for (const auto& d : seg.detections) {
      json row = {{"group", g.name}, {"tau", d.j}, {"start", d.i + 1}, {"end", d.k}, {"z", d.z},
                  {"delta_hat", d.delta_hat}};
      if (!g.positions.empty()) row["position"] = g.positions[static_cast<std::size_t>(d.j - 1)];
      dets.push_back(row);
    }
  }
  ctx.results["groups"] = groups;
  ctx.results["detections"] = dets;
  if (o.cumsum) ctx.results["cumsum"] = sums;
}

void cmd_threshold(const ScanOpts& s, double alpha, Context& ctx) {
  ctx.config = s.echo();
  ctx.config["alpha"] = alpha;
  ctx.results = tail_json(solve_threshold(s.spec(), alpha));
}

struct ExpfamOpts {
  std::string family;
  double theta = 0.0, mean = 0.0, shape = 1.0;
};

void cmd_pvalue(const ScanOpts& s, const ExpfamOpts& e, double b, Context& ctx) {
  ctx.config = s.echo();
  ctx.config["b"] = b;
  if (!e.family.empty()) {
    const auto fam = make_family(e.family, e.shape);
    const double theta = e.mean != 0.0 ? fam->theta_of_mean(e.mean) : e.theta;
    ctx.config["family"] = e.family;
    ctx.config["theta"] = theta;
    ctx.config["shape"] = e.shape;
    const auto spec = s.spec();
    const auto mode = s.constraint.empty() ? ConstraintMode::per_side : spec.constraint;
    ctx.config["constraint"] = mode == ConstraintMode::total ? "total" : "per_side";
    ctx.results = tail_json(pvalue_expfam(*fam, theta, s.m, s.m0, spec.upper(), b, mode));
    return;
  }
  ctx.results = tail_json(pvalue(s.spec(), b));
}

struct ConfidenceOpts {
  std::string mode = "joint";
  std::string deltas;
  int M = 0;
  double alpha = 0.05;
  std::string input, center;
  int window = 15, max_window = 60;
  bool conservative = false;
  std::string sigma = "diff";
};

void cmd_confidence(const ConfidenceOpts& o, Context& ctx) {
  RegionMode mode;
  if (o.mode == "joint") mode = RegionMode::joint_tau_mu;
  else if (o.mode == "tau") mode = RegionMode::tau_only;
  else throw UsageError("--mode must be joint or tau");
  ctx.config = {{"mode", o.mode}, {"alpha", o.alpha}};
  if (o.input.empty()) {
    if (o.deltas.empty()) throw UsageError("give --deltas, or --input with --center");
    const auto d = parse_list(o.deltas, "--deltas");
    if (o.M > 0 && static_cast<std::size_t>(o.M) != d.size())
      throw UsageError("--M does not match the number of --deltas");
    ctx.config["deltas"] = d;
    ctx.results["b"] = region_threshold(d, o.alpha, mode);
    return;
  }
  if (o.center.empty()) throw UsageError("--input needs --center");
  const auto data = read_input(o.input);
  ctx.digest = data.digest;
  if (data.groups.size() != 1) throw UsageError("confidence regions take a single group");
  VariancePolicy pol = o.sigma == "sample" ? VariancePolicy::sample() : VariancePolicy::diff();
  if (o.sigma != "sample" && o.sigma != "diff") throw UsageError("--sigma must be diff or sample");
  Sequence seq(data.groups[0].values, pol);
  RegionSpec spec;
  spec.center = parse_int_list(o.center, "--center");
  spec.window = o.window;
  spec.max_window = o.max_window;
  spec.alpha = o.alpha;
  spec.mode = mode;
  spec.conservative_min_delta = o.conservative;
  ctx.config.update({{"input", o.input}, {"center", spec.center}, {"window", o.window},
                     {"max_window", o.max_window}, {"conservative", o.conservative}, {"sigma", o.sigma}});
  const auto reg = enumerate_region(seq, spec);
  ctx.results["center_threshold"] = reg.center_threshold;
  ctx.results["window_used"] = reg.window_used;
  ctx.results["truncated"] = reg.truncated;
  ctx.results["size"] = reg.members.size();
  json rows = json::array();
  for (const auto& r : reg.members) {
    json row = {{"taus", r.taus}, {"T", r.T_tau}, {"threshold", r.threshold}};
    if (!r.mu.empty()) {
      std::vector<double> lo, hi;
      for (const auto& iv : r.mu) lo.push_back(iv.lo), hi.push_back(iv.hi);
      row["mu_lo"] = lo;
      row["mu_hi"] = hi;
    }
    rows.push_back(row);
  }
  ctx.results["members"] = rows;
  if (reg.truncated) ctx.warnings.push_back("region reached the maximum window; it may be truncated");
}

struct PowerOpts {
  double delta = 0.0, h1 = 0.0, h2 = 0.0, b = 0.0, n0 = 0.0;
};

void cmd_power(const PowerOpts& o, Context& ctx) {
  ctx.config = {{"delta", o.delta}, {"h1", o.h1}, {"h2", o.h2}, {"b", o.b}, {"n0", o.n0}};
  if (o.n0 > 0.0) {
    if (o.h1 > 0.0 || o.h2 > 0.0) throw UsageError("--n0 excludes --h1/--h2");
    ctx.results["cbs_power"] = cbs_power(o.delta, o.n0, o.b);
    return;
  }
  PowerSpec p{o.delta, o.h1, o.h2, o.b};
  ctx.results["marginal"] = marginal_power(p);
  ctx.results["local"] = local_power(p);
}

struct SimOpts {
  std::string mode = "calibrate";
  std::string procedures = "lr";
  std::string thresholds;
  int m = 500, M = 0, m0 = 1, m1 = 0, reps = 200;
  std::uint64_t seed = 0;
  double trend_amp = 0.0, trend_freq = 0.0;
  bool trend_phase = false;
  int window = 35;
};

void cmd_simulate(const SimOpts& o, Context& ctx) {
  ctx.config = {{"mode", o.mode}, {"procedures", o.procedures}, {"thresholds", o.thresholds}, {"m", o.m},
                {"M", o.M}, {"m0", o.m0}, {"m1", o.m1}, {"reps", o.reps}, {"seed", o.seed},
                {"trend_amplitude", o.trend_amp}, {"trend_frequency", o.trend_freq},
                {"trend_random_phase", o.trend_phase}};
  std::vector<ProcedureConfig> procs;
  {
    std::stringstream ss(o.procedures);
    for (std::string p; std::getline(ss, p, ',');) procs.push_back(ProcedureConfig::m500_default(procedure_from_string(p)));
  }
  if (procs.empty()) throw UsageError("--procedures is empty");
  if (!o.thresholds.empty()) {
    const auto t = parse_list(o.thresholds, "--thresholds");
    if (t.size() != procs.size()) throw UsageError("--thresholds needs one value per procedure");
    for (std::size_t k = 0; k < t.size(); ++k) procs[k].threshold = t[k];
  }
  for (auto& p : procs) {
    p.m0 = o.m0;
    p.m1 = o.m1;
  }
  if (o.reps < 1) throw ValidationError("--reps must be >= 1");
  json cards = json::array();
  if (o.mode == "calibrate") {
    if (o.M != 0) throw UsageError("calibrate runs on pure noise; drop --M");
    auto sc = Scenario::null(o.m, o.reps, o.seed);
    sc.trend = {o.trend_amp, o.trend_freq, o.trend_phase};
    for (const auto& p : procs) {
      const auto c = run_calibration(sc, p);
      cards.push_back({{"procedure", c.label}, {"threshold", p.threshold}, {"reps", c.reps},
                       {"rate", c.rate()}, {"se", c.rate_se()}});
    }
  } else if (o.mode == "detect") {
    auto sc = Scenario::random(o.M, o.m, o.reps, o.seed);
    sc.trend = {o.trend_amp, o.trend_freq, o.trend_phase};
    const auto st = run_detection_study(sc, procs, o.window);
    for (std::size_t k = 0; k < procs.size(); ++k) {
      const auto& c = st.cards[k];
      cards.push_back({{"procedure", c.label}, {"threshold", procs[k].threshold}, {"reps", c.reps},
                       {"correct", c.correct_count}, {"under", c.under}, {"over", c.over},
                       {"located", c.located}});
    }
    ctx.results["easy"] = st.easy;
    ctx.results["impossible"] = st.impossible;
  } else {
    throw UsageError("--mode must be calibrate or detect");
  }
  ctx.results["scores"] = cards;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int emit(const std::string& command, const std::vector<std::string>& args, Context& ctx, bool as_json,
         double ms, std::ostream& out) {
  json report = {{"command", command}, {"argv", args}, {"input_digest", ctx.digest}, {"config", ctx.config},
                 {"results", ctx.results}, {"warnings", ctx.warnings}, {"timing_ms", ms}};
  if (as_json) {
    out << report.dump(2) << "\n";
  } else {
    out << "command\t" << command << "\n";
    if (!ctx.digest.empty()) out << "input_digest\t" << ctx.digest << "\n";
    render_tsv(out, ctx.config, "config");
    render_tsv(out, ctx.results, "");
    for (const auto& w : ctx.warnings) out << "warning\t" << w.get<std::string>() << "\n";
  }
  return kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"cpseg: change-point segmentation and scan-statistic calculations"};
  app.require_subcommand(1);
  app.fallthrough();
  bool as_json = false;
  std::uint64_t seed = 0;
  app.add_flag("--json", as_json, "emit a JSON report instead of TSV");
  app.add_option("--seed", seed, "seed for every stochastic step");

  SegmentOpts so;
  auto* seg = app.add_subcommand("segment", "segment a data file");
  seg->add_option("input", so.input, "data file ('-' for stdin)")->required();
  seg->add_option("--procedure", so.procedure, "lr | seq | nz | cbs | multi | wbs | meanvar")->capture_default_str();
  seg->add_option("--alpha", so.alpha, "false-positive level used to solve the threshold");
  seg->add_option("--threshold", so.threshold, "explicit threshold");
  seg->add_option("--m0", so.m0)->capture_default_str();
  seg->add_option("--m1", so.m1, "0 = unbounded")->capture_default_str();
  seg->add_option("--sigma", so.sigma, "diff | sample | known")->capture_default_str();
  seg->add_option("--sigma-value", so.sigma_known, "standard deviation when --sigma known")->capture_default_str();
  seg->add_option("--windows", so.windows, "NZ windows (default: every h)");
  seg->add_option("--kappa", so.kappa, "multiscale penalty weight (lr)")->capture_default_str();
  seg->add_option("--wbs-intervals", so.wbs_intervals)->capture_default_str();
  seg->add_option("--calibration-reps", so.calibration_reps, "meanvar threshold calibration")->capture_default_str();
  seg->add_flag("--pruned", so.pruned, "thinned search over backgrounds");
  seg->add_flag("--cumsum", so.cumsum, "include partial sums for plotting");

  ScanOpts thr_s;
  double thr_alpha = 0.05;
  auto* thr = app.add_subcommand("threshold", "solve the threshold for a false-positive level");
  thr_s.add(thr);
  thr->add_option("--alpha", thr_alpha)->capture_default_str();

  ScanOpts pv_s;
  ExpfamOpts pv_e;
  double pv_b = 0.0;
  auto* pv = app.add_subcommand("pvalue", "approximate false-positive probability at a threshold");
  pv_s.add(pv);
  pv->add_option("--b", pv_b, "threshold")->required();
  pv->add_option("--family", pv_e.family, "gaussian | exponential | inverse_gaussian (exponential-family sum)");
  pv->add_option("--theta", pv_e.theta, "natural parameter under the null");
  pv->add_option("--mean", pv_e.mean, "null mean (alternative to --theta)");
  pv->add_option("--shape", pv_e.shape, "inverse Gaussian shape")->capture_default_str();

  ConfidenceOpts co;
  auto* conf = app.add_subcommand("confidence", "confidence thresholds and regions");
  conf->add_option("--mode", co.mode, "joint | tau")->capture_default_str();
  conf->add_option("--deltas", co.deltas, "standardized mean changes, comma separated");
  conf->add_option("--M", co.M, "number of change-points (checked against --deltas)");
  conf->add_option("--alpha", co.alpha)->capture_default_str();
  conf->add_option("--input", co.input, "data file for region enumeration");
  conf->add_option("--center", co.center, "estimated change-points, comma separated");
  conf->add_option("--window", co.window)->capture_default_str();
  conf->add_option("--max-window", co.max_window)->capture_default_str();
  conf->add_option("--sigma", co.sigma, "diff | sample")->capture_default_str();
  conf->add_flag("--conservative", co.conservative, "use the smallest estimated change for every threshold");

  PowerOpts po;
  auto* pw = app.add_subcommand("power", "power approximations");
  pw->add_option("--delta", po.delta, "mean change (sd units)")->required();
  pw->add_option("--b", po.b, "threshold")->required();
  pw->add_option("--h1", po.h1, "left side length");
  pw->add_option("--h2", po.h2, "right side length");
  pw->add_option("--n0", po.n0, "pulse length (paired-change scan)");

  SimOpts sim;
  auto* sm = app.add_subcommand("simulate", "Monte Carlo calibration and detection studies");
  sm->add_option("--mode", sim.mode, "calibrate | detect")->capture_default_str();
  sm->add_option("--procedures", sim.procedures, "comma separated: lr,seq,wbs,nz,cbs,multi")->capture_default_str();
  sm->add_option("--thresholds", sim.thresholds, "one per procedure (default: alpha 0.05 thresholds for m=500)");
  sm->add_option("--m", sim.m)->capture_default_str();
  sm->add_option("--M", sim.M, "number of random change-points")->capture_default_str();
  sm->add_option("--m0", sim.m0)->capture_default_str();
  sm->add_option("--m1", sim.m1)->capture_default_str();
  sm->add_option("--reps", sim.reps)->capture_default_str();
  sm->add_option("--trend-amplitude", sim.trend_amp)->capture_default_str();
  sm->add_option("--trend-frequency", sim.trend_freq)->capture_default_str();
  sm->add_flag("--trend-random-phase", sim.trend_phase);
  sm->add_option("--match-window", sim.window)->capture_default_str();

  std::string replay_path;
  auto* rp = app.add_subcommand("replay", "re-run the command recorded in a JSON report");
  rp->add_option("report", replay_path)->required();

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));  // CLI11 wants them reversed
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kOk : kUsage;
  }

  const auto t0 = std::chrono::steady_clock::now();
  Context ctx;
  std::string command;
  try {
    if (*rp) {
      std::ifstream f(replay_path);
      if (!f) throw UsageError("cannot open report '" + replay_path + "'");
      json rep;
      try {
        rep = json::parse(f);
      } catch (const json::exception& e) {
        throw ParseError(0, std::string("report is not valid JSON: ") + e.what());
      }
      if (!rep.contains("argv")) throw ParseError(0, "report has no argv");
      auto argv = rep["argv"].get<std::vector<std::string>>();
      for (const auto& a : argv)
        if (a == "replay") throw UsageError("refusing to replay a replay");
      return run(argv, out, err);
    }
    if (*seg) {
      command = "segment";
      if (seed) so.seed = seed;
      cmd_segment(so, ctx);
    } else if (*thr) {
      command = "threshold";
      cmd_threshold(thr_s, thr_alpha, ctx);
    } else if (*pv) {
      command = "pvalue";
      cmd_pvalue(pv_s, pv_e, pv_b, ctx);
    } else if (*conf) {
      command = "confidence";
      cmd_confidence(co, ctx);
    } else if (*pw) {
      command = "power";
      cmd_power(po, ctx);
    } else if (*sm) {
      command = "simulate";
      sim.seed = seed;
      cmd_simulate(sim, ctx);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kValidation;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kValidation;
  } catch (const DegenerateInputError& e) {
    err << "degenerate input: " << e.what() << "\n";
    return kDegenerate;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return emit(command, args, ctx, as_json, ms, out);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}
