#pragma once

// Monte Carlo harness: generators, procedure runners and scoring.
// Every replicate draws from its own stream derived from (seed, rep), so a
// run is reproducible regardless of how reps are scheduled.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cpseg/error.hpp"
#include "cpseg/expfam.hpp"
#include "cpseg/segment.hpp"
#include "cpseg/stats.hpp"

namespace cpseg {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream for replicate `rep` of a run seeded with `seed`.
inline std::mt19937_64 rep_stream(std::uint64_t seed, std::uint64_t rep) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(rep + 0x5eedULL)));
}

struct TrendSpec {
  double amplitude = 0.0;
  double frequency = 0.0;
  bool random_phase = false;
};

enum class GeneratorKind { fixed_model, random_changes };

struct Scenario {
  GeneratorKind kind = GeneratorKind::fixed_model;
  // fixed_model
  SegmentModel model;
  std::vector<double> sigmas;  // per segment; empty means all 1
  // random_changes
  int M = 0;
  int m = 0;
  double jump_mean = 2.5;  // jumps are N(jump_mean * xi, jump_var), xi = +-1
  double jump_var = 0.5;
  int min_spacing = 1;
  TrendSpec trend;
  int reps = 100;
  std::uint64_t seed = 0;

  static Scenario null(int m, int reps = 100, std::uint64_t seed = 0) {
    Scenario s;
    s.model = {{}, {0.0}, m};
    s.m = m;
    s.reps = reps;
    s.seed = seed;
    return s;
  }
  static Scenario random(int M, int m, int reps = 100, std::uint64_t seed = 0) {
    Scenario s;
    s.kind = GeneratorKind::random_changes;
    s.M = M;
    s.m = m;
    s.reps = reps;
    s.seed = seed;
    return s;
  }
  int length() const { return kind == GeneratorKind::fixed_model ? model.m : m; }
};

// One replicate: the model actually used (random placement resolved) and the data.
struct Draw {
  SegmentModel model;
  std::vector<double> values;
};

namespace detail {
inline SegmentModel random_model(const Scenario& sc, std::mt19937_64& rng) {
  if (sc.M < 0 || sc.m < 2 || sc.M > sc.m - 1) throw ValidationError("random_changes: need 0 <= M < m");
  if (sc.min_spacing < 1) throw ValidationError("random_changes: min spacing must be >= 1");
  if (static_cast<long>(sc.M + 1) * sc.min_spacing > sc.m)
    throw ValidationError("random_changes: spacing infeasible for M and m");
  std::vector<int> pool(static_cast<std::size_t>(sc.m - 1));
  for (int t = 1; t < sc.m; ++t) pool[static_cast<std::size_t>(t - 1)] = t;
  std::vector<int> taus;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 100000) throw NumericalError("random_changes: could not satisfy the spacing");
    taus.clear();
    std::sample(pool.begin(), pool.end(), std::back_inserter(taus), sc.M, rng);
    std::sort(taus.begin(), taus.end());
    bool ok = true;
    int prev = 0;
    for (int t : taus) {
      ok = ok && t - prev >= sc.min_spacing;
      prev = t;
    }
    if (ok && sc.m - prev >= sc.min_spacing) break;
  }
  std::vector<double> mus{0.0};
  std::bernoulli_distribution sign(0.5);
  std::normal_distribution<double> N(0.0, std::sqrt(sc.jump_var));
  for (int k = 0; k < sc.M; ++k) mus.push_back(mus.back() + (sign(rng) ? 1.0 : -1.0) * sc.jump_mean + N(rng));
  return {std::move(taus), std::move(mus), sc.m};
}

inline double trend_phase(const TrendSpec& t, std::mt19937_64& rng) {
  if (!t.random_phase || t.amplitude == 0.0) return 0.0;
  return std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
}
}  // namespace detail

// Adds amplitude sin(frequency k + U) to the k-th mean (k is 1-based).
// With zero amplitude no extra draws happen, so the output matches the
// untrended generator exactly.
inline std::vector<double> gen_trended(const SegmentModel& model, const std::vector<double>& sigmas,
                                       const TrendSpec& trend, std::mt19937_64& rng) {
  model.validate(false);
  if (!sigmas.empty() && sigmas.size() != model.mus.size())
    throw ValidationError("gen_trended: one sigma per segment");
  for (double s : sigmas)
    if (!(s > 0.0)) throw ValidationError("gen_trended: sigmas must be > 0");
  const double U = detail::trend_phase(trend, rng);
  std::normal_distribution<double> N;
  std::vector<double> x(static_cast<std::size_t>(model.m));
  std::size_t seg = 0;
  for (int t = 1; t <= model.m; ++t) {
    while (seg < model.taus.size() && t > model.taus[seg]) ++seg;
    const double sd = sigmas.empty() ? 1.0 : sigmas[seg];
    double mean = model.mus[seg];
    if (trend.amplitude != 0.0) mean += trend.amplitude * std::sin(trend.frequency * t + U);
    x[static_cast<std::size_t>(t - 1)] = mean + sd * N(rng);
  }
  return x;
}

inline Sequence gen_trended(const SegmentModel& model, const TrendSpec& trend, std::uint64_t seed) {
  auto rng = rep_stream(seed, 0);
  return Sequence::with_known_variance(gen_trended(model, {}, trend, rng), 1.0);
}

inline Draw draw(const Scenario& sc, std::uint64_t rep) {
  auto rng = rep_stream(sc.seed, rep);
  Draw d;
  d.model = sc.kind == GeneratorKind::fixed_model ? sc.model : detail::random_model(sc, rng);
  d.values = gen_trended(d.model, sc.sigmas, sc.trend, rng);
  return d;
}

// ---------------------------------------------------------------------------

enum class Procedure { lr_min, seq, wbs, nz, cbs, multi };

inline std::string to_string(Procedure p) {
  switch (p) {
    case Procedure::lr_min: return "lr";
    case Procedure::seq: return "seq";
    case Procedure::wbs: return "wbs";
    case Procedure::nz: return "nz";
    case Procedure::cbs: return "cbs";
    case Procedure::multi: return "multi";
  }
  return "?";
}

inline Procedure procedure_from_string(const std::string& s) {
  for (auto p : {Procedure::lr_min, Procedure::seq, Procedure::wbs, Procedure::nz, Procedure::cbs, Procedure::multi})
    if (to_string(p) == s) return p;
  throw ValidationError("unknown procedure '" + s + "' (lr, seq, wbs, nz, cbs, multi)");
}

struct ProcedureConfig {
  Procedure procedure = Procedure::lr_min;
  double threshold = 0.0;
  int m0 = 1;
  int m1 = 0;
  Speedup speedup = Speedup::pruned;
  std::vector<int> nz_windows;  // empty: every window size
  int wbs_intervals = 5000;
  double endpoint_discard_fraction = 0.05;

  // Alpha 0.05 thresholds at m = 500.
  static ProcedureConfig m500_default(Procedure p) {
    ProcedureConfig c;
    c.procedure = p;
    switch (p) {
      case Procedure::lr_min: c.threshold = 4.83; break;
      case Procedure::seq: c.threshold = 4.33; break;
      case Procedure::wbs: c.threshold = 4.565; break;
      case Procedure::nz: c.threshold = 4.42; break;
      case Procedure::cbs: c.threshold = 4.36; break;
      case Procedure::multi: c.threshold = 1.57; break;
    }
    return c;
  }
};

// Sigma is taken as known (1) in simulations.
inline Segmentation run_procedure(const ProcedureConfig& pc, const Sequence& seq, std::uint64_t seed) {
  switch (pc.procedure) {
    case Procedure::lr_min:
    case Procedure::seq: {
      SearchConfig cfg;
      cfg.threshold = pc.threshold;
      cfg.m0 = pc.m0;
      cfg.m1 = pc.m1;
      cfg.speedup = pc.speedup;
      return pc.procedure == Procedure::lr_min ? segment_lr(seq, cfg) : segment_seq(seq, cfg);
    }
    case Procedure::wbs: return segment_wbs(seq, pc.threshold, pc.wbs_intervals, seed);
    case Procedure::nz: return segment_nz(seq, pc.nz_windows, pc.threshold);
    case Procedure::cbs: return segment_cbs(seq, pc.threshold, 0.0, pc.endpoint_discard_fraction, seed);
    case Procedure::multi: return segment_cbs(seq, pc.threshold, 1.0, pc.endpoint_discard_fraction, seed);
  }
  throw ValidationError("run_procedure: unknown procedure");
}

struct ScoreCard {
  std::string label;
  int reps = 0;
  int correct_count = 0;  // reps whose detected count equals the truth
  long under = 0;         // total missing detections over reps
  long over = 0;          // total surplus detections over reps
  int any_detection = 0;  // reps with at least one detection
  int located = 0;        // reps passing the location-tolerant matcher
  std::vector<std::vector<long>> detections;

  double rate() const { return reps ? static_cast<double>(any_detection) / reps : 0.0; }
  double rate_se() const {
    const double p = rate();
    return reps ? std::sqrt(p * (1.0 - p) / reps) : 0.0;
  }
  double correct_fraction() const { return reps ? static_cast<double>(correct_count) / reps : 0.0; }
};

// Each detection within w of a distinct true change-point, and counts equal.
inline bool matches_within(const std::vector<long>& found, const std::vector<int>& truth, long w) {
  if (found.size() != truth.size()) return false;
  std::vector<bool> used(truth.size(), false);
  for (long f : found) {
    long best = -1, bestd = w + 1;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const long d = std::abs(f - truth[t]);
      if (!used[t] && d < bestd) bestd = d, best = static_cast<long>(t);
    }
    if (best < 0) return false;
    used[static_cast<std::size_t>(best)] = true;
  }
  return true;
}

namespace detail {
inline void tally(ScoreCard& sc, const std::vector<long>& found, const std::vector<int>& truth, long w,
                  bool keep) {
  const long M = static_cast<long>(truth.size()), n = static_cast<long>(found.size());
  ++sc.reps;
  if (n == M) ++sc.correct_count;
  if (n < M) sc.under += M - n;
  if (n > M) sc.over += n - M;
  if (n > 0) ++sc.any_detection;
  if (matches_within(found, truth, w)) ++sc.located;
  if (keep) sc.detections.push_back(found);
}
}  // namespace detail

// Any-detection frequency of a procedure on the null scenario.
inline ScoreCard run_calibration(const Scenario& null_sc, const ProcedureConfig& pc, bool keep = false) {
  if (null_sc.kind != GeneratorKind::fixed_model || !null_sc.model.taus.empty())
    throw ValidationError("run_calibration: scenario must be a null (no change) model");
  ScoreCard sc;
  sc.label = to_string(pc.procedure);
  for (int r = 0; r < null_sc.reps; ++r) {
    const auto d = draw(null_sc, static_cast<std::uint64_t>(r));
    const auto seq = Sequence::with_known_variance(d.values, 1.0);
    detail::tally(sc, run_procedure(pc, seq, splitmix64(null_sc.seed + 7919ULL * r)).points(), {}, 0, keep);
  }
  return sc;
}

// Null false-positive frequency of a boolean scan (for the fast scan paths).
inline ScoreCard run_calibration(const Scenario& null_sc, const std::string& label,
                                 const std::function<bool(const std::vector<double>&)>& exceeds) {
  ScoreCard sc;
  sc.label = label;
  for (int r = 0; r < null_sc.reps; ++r) {
    const auto d = draw(null_sc, static_cast<std::uint64_t>(r));
    ++sc.reps;
    if (exceeds(d.values)) ++sc.any_detection;
  }
  return sc;
}

// Null false-positive frequency for an exponential-family scan on raw data.
inline ScoreCard run_calibration_family(const Family& fam, double theta, int m,
                                        const std::function<bool(const std::vector<double>&)>& exceeds,
                                        int reps, std::uint64_t seed, const std::string& label) {
  ScoreCard sc;
  sc.label = label;
  std::vector<double> x(static_cast<std::size_t>(m));
  for (int r = 0; r < reps; ++r) {
    auto rng = rep_stream(seed, static_cast<std::uint64_t>(r));
    for (auto& v : x) v = fam.sample(rng, theta);
    ++sc.reps;
    if (exceeds(x)) ++sc.any_detection;
  }
  return sc;
}

struct DetectionStudy {
  std::vector<ScoreCard> cards;  // one per procedure, same order as the input
  int easy = 0;                  // reps where every procedure got the count right
  int impossible = 0;            // reps where none did
};

inline DetectionStudy run_detection_study(const Scenario& sc, const std::vector<ProcedureConfig>& procs,
                                          long match_window = 35, bool keep = false) {
  if (procs.empty()) throw ValidationError("run_detection_study: no procedures");
  DetectionStudy out;
  for (const auto& p : procs) {
    out.cards.emplace_back();
    out.cards.back().label = to_string(p.procedure);
  }
  for (int r = 0; r < sc.reps; ++r) {
    const auto d = draw(sc, static_cast<std::uint64_t>(r));
    const auto seq = Sequence::with_known_variance(d.values, 1.0);
    int right = 0;
    for (std::size_t p = 0; p < procs.size(); ++p) {
      const auto found = run_procedure(procs[p], seq, splitmix64(sc.seed + 7919ULL * r + p)).points();
      detail::tally(out.cards[p], found, d.model.taus, match_window, keep);
      right += found.size() == d.model.taus.size();
    }
    if (right == static_cast<int>(procs.size())) ++out.easy;
    if (right == 0) ++out.impossible;
  }
  return out;
}

}  // namespace cpseg
