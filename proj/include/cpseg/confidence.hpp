#pragma once

// Likelihood-ratio confidence regions for change-points (and means) in a
// Gaussian step model with unit variance after standardization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "cpseg/error.hpp"
#include "cpseg/specialfn.hpp"
#include "cpseg/stats.hpp"

namespace cpseg {

// Inclusive bounds on each change-point during maximization.
struct TupleWindow {
  std::vector<int> lo, hi;
};

namespace detail {
inline double seg_fit(std::span<const double> s, int a, int c) {
  const double d = s[c] - s[a];
  return d * d / (2.0 * static_cast<double>(c - a));
}

inline std::vector<double> standardized_sums(const Sequence& seq) {
  const double sigma = seq.working_sigma();
  const auto raw = seq.sums().data();
  std::vector<double> s(raw.begin(), raw.end());
  for (auto& v : s) v /= sigma;
  return s;
}

inline double tuple_fit(std::span<const double> s, const std::vector<int>& taus) {
  const int m = static_cast<int>(s.size()) - 1;
  double f = 0.0;
  int prev = 0;
  for (int t : taus) {
    f += seg_fit(s, prev, t);
    prev = t;
  }
  return f + seg_fit(s, prev, m);
}
}  // namespace detail

struct BestFit {
  double value = 0.0;
  std::vector<int> taus;
};

// max over 0 < t_1 < ... < t_M < m of sum_k (S_{t_k} - S_{t_{k-1}})^2 / (2 n_k),
// by dynamic programming over the last boundary. O(M m^2).
inline BestFit best_fit(std::span<const double> s, int M, const TupleWindow* win = nullptr) {
  const int m = static_cast<int>(s.size()) - 1;
  if (M < 0) throw ValidationError("best_fit: M must be >= 0");
  if (M >= m) throw ValidationError("best_fit: need M < m");
  if (M == 0) return {detail::seg_fit(s, 0, m), {}};
  auto lo = [&](int k) { return std::max(k + 1, win ? win->lo[k] : 1); };
  auto hi = [&](int k) { return std::min(m - M + k, win ? win->hi[k] : m - 1); };
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  // F[k][t]: best fit of (0, t] with k+1 change-points, the last at t.
  std::vector<std::vector<double>> F(static_cast<std::size_t>(M),
                                     std::vector<double>(static_cast<std::size_t>(m + 1), ninf));
  std::vector<std::vector<int>> arg(F.size(), std::vector<int>(static_cast<std::size_t>(m + 1), -1));
  for (int t = lo(0); t <= hi(0); ++t) F[0][t] = detail::seg_fit(s, 0, t);
  for (int k = 1; k < M; ++k)
    for (int t = lo(k); t <= hi(k); ++t)
      for (int p = lo(k - 1); p <= std::min(hi(k - 1), t - 1); ++p) {
        if (F[k - 1][p] == ninf) continue;
        const double v = F[k - 1][p] + detail::seg_fit(s, p, t);
        if (v > F[k][t]) {
          F[k][t] = v;
          arg[k][t] = p;
        }
      }
  BestFit best{ninf, std::vector<int>(static_cast<std::size_t>(M))};
  int last = -1;
  for (int t = lo(M - 1); t <= hi(M - 1); ++t) {
    if (F[M - 1][t] == ninf) continue;
    const double v = F[M - 1][t] + detail::seg_fit(s, t, m);
    if (v > best.value) {
      best.value = v;
      last = t;
    }
  }
  if (last < 0) throw ValidationError("best_fit: window admits no ordered tuple");
  for (int k = M - 1; k >= 0; --k) {
    best.taus[static_cast<std::size_t>(k)] = last;
    last = arg[k][last];
  }
  return best;
}

// T_tau: best fit minus the fit at the hypothesized change-points.
inline double stat_T_tau(const Sequence& seq, const std::vector<int>& taus,
                         const TupleWindow* win = nullptr) {
  SegmentModel probe{taus, std::vector<double>(taus.size() + 1, 0.0), static_cast<int>(seq.size())};
  probe.validate(false);
  const auto s = detail::standardized_sums(seq);
  return best_fit(s, static_cast<int>(taus.size()), win).value - detail::tuple_fit(s, taus);
}

// T_{tau,mu}: best fit minus sum_k [mu_k (S_{tau_k} - S_{tau_{k-1}}) - mu_k^2 n_k / 2].
// Means are in the units of the data.
inline double stat_T_tau_mu(const Sequence& seq, const SegmentModel& model,
                            const TupleWindow* win = nullptr) {
  model.validate(false);
  if (model.m != static_cast<int>(seq.size()))
    throw ValidationError("stat_T_tau_mu: model length differs from the sequence");
  const double sigma = seq.working_sigma();
  const auto s = detail::standardized_sums(seq);
  double mu_term = 0.0;
  for (std::size_t k = 0; k <= model.taus.size(); ++k) {
    const int a = model.boundary(k), c = model.boundary(k + 1);
    const double mu = model.mus[k] / sigma;
    mu_term += mu * (s[c] - s[a]) - 0.5 * mu * mu * (c - a);
  }
  return best_fit(s, static_cast<int>(model.taus.size()), win).value - mu_term;
}

enum class RegionMode { joint_tau_mu, tau_only };

// b with P(sum W_k [+ chi2_{M+1}/2] > b) = alpha, nu_k = nu(|delta_k|).
// With verify set, the grid answer is cross-checked by inversion.
inline double region_threshold(const std::vector<double>& deltas, double alpha, RegionMode mode,
                               bool verify = true) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("region_threshold: alpha must be in (0,1)");
  SumWSpec spec;
  for (double d : deltas) spec.w_laws.push_back(WLaw::from_delta(d));
  spec.chi_df = mode == RegionMode::joint_tau_mu ? static_cast<int>(deltas.size()) + 1 : 0;
  if (spec.w_laws.empty() && spec.chi_df == 0)
    throw ValidationError("region_threshold: tau-only mode needs at least one change");
  const SumWDistribution dist(spec);
  const double b = dist.quantile(alpha);
  if (verify) sumw_tail(spec, b);  // throws if the two evaluators disagree
  return b;
}

struct MuInterval {
  double lo, hi;
};

struct RegionMember {
  std::vector<int> taus;
  double T_tau = 0.0;
  double threshold = 0.0;
  std::vector<MuInterval> mu;  // joint mode: per-segment bounds at these taus
};

struct RegionSpec {
  std::vector<int> center;  // point estimate
  int window = 15;
  int max_window = 60;
  double alpha = 0.05;
  RegionMode mode = RegionMode::tau_only;
  bool conservative_min_delta = false;  // one delta-hat (the smallest) for every change
};

struct ConfidenceRegion {
  std::vector<RegionMember> members;
  std::vector<double> deltas_used;  // delta-hats at the centre (data units)
  double center_threshold = 0.0;
  int window_used = 0;
  bool truncated = false;
  double max_fit = 0.0;

  bool contains(const std::vector<int>& taus) const {
    return std::any_of(members.begin(), members.end(), [&](const RegionMember& r) { return r.taus == taus; });
  }
};

namespace detail {
inline std::vector<double> segment_means(std::span<const double> s, const std::vector<int>& taus) {
  const int m = static_cast<int>(s.size()) - 1;
  std::vector<double> mu;
  int prev = 0;
  for (std::size_t k = 0; k <= taus.size(); ++k) {
    const int t = k < taus.size() ? taus[k] : m;
    mu.push_back((s[t] - s[prev]) / (t - prev));
    prev = t;
  }
  return mu;
}
inline std::vector<double> diffs(const std::vector<double>& mu) {
  std::vector<double> d;
  for (std::size_t k = 0; k + 1 < mu.size(); ++k) d.push_back(mu[k + 1] - mu[k]);
  return d;
}
}  // namespace detail

// Enumerates change-point tuples near the centre whose statistic stays below
// the (conditional) threshold. Thresholds use delta-hats at each tuple, or the
// smallest delta-hat at the centre when conservative_min_delta is set.
inline ConfidenceRegion enumerate_region(const Sequence& seq, const RegionSpec& spec) {
  const int m = static_cast<int>(seq.size());
  const int M = static_cast<int>(spec.center.size());
  if (M < 1) throw ValidationError("enumerate_region: need a point estimate with at least one change");
  SegmentModel probe{spec.center, std::vector<double>(static_cast<std::size_t>(M) + 1, 0.0), m};
  probe.validate(false);
  if (spec.window < 1 || spec.max_window < spec.window)
    throw ValidationError("enumerate_region: need 1 <= window <= max_window");
  const double sigma = seq.working_sigma();
  const auto s = detail::standardized_sums(seq);
  const double maxfit = best_fit(s, M).value;

  ConfidenceRegion out;
  out.max_fit = maxfit;
  const auto mu_c = detail::segment_means(s, spec.center);
  const auto d_c = detail::diffs(mu_c);
  for (double d : d_c) out.deltas_used.push_back(d * sigma);
  auto thr_for = [&](const std::vector<double>& d, bool verify) {
    for (double x : d)
      if (x == 0.0) throw ValidationError("enumerate_region: zero estimated change");
    return region_threshold(d, spec.alpha, spec.mode, verify);
  };
  double conservative_b = 0.0;
  if (spec.conservative_min_delta) {
    double dmin = std::numeric_limits<double>::infinity();
    for (double d : d_c) dmin = std::min(dmin, std::abs(d));
    conservative_b = thr_for(std::vector<double>(static_cast<std::size_t>(M), dmin), true);
  }
  out.center_threshold = spec.conservative_min_delta ? conservative_b : thr_for(d_c, true);
  // nu <= 1, so every threshold is below the all-nu-equal-one value.
  const double b_cap = spec.conservative_min_delta
                           ? conservative_b
                           : region_threshold(std::vector<double>(static_cast<std::size_t>(M), 1e-9),
                                              spec.alpha, spec.mode, false);

  for (int w = spec.window;; w = std::min(2 * w, spec.max_window)) {
    out.members.clear();
    out.window_used = w;
    bool edge = false;
    std::vector<int> t(static_cast<std::size_t>(M));
    std::function<void(int)> rec = [&](int k) {
      if (k == M) {
        const double T = maxfit - detail::tuple_fit(s, t);
        if (T > b_cap) return;
        const auto mu = detail::segment_means(s, t);
        double b = conservative_b;
        if (!spec.conservative_min_delta) {
          const auto d = detail::diffs(mu);
          if (std::any_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) return;
          b = thr_for(d, false);
        }
        if (T > b) return;
        RegionMember r{t, T, b, {}};
        if (spec.mode == RegionMode::joint_tau_mu) {
          int prev = 0;
          for (std::size_t q = 0; q < mu.size(); ++q) {
            const int c = q < t.size() ? t[q] : m;
            const double half = std::sqrt(2.0 * (b - T) / (c - prev));
            r.mu.push_back({(mu[q] - half) * sigma, (mu[q] + half) * sigma});
            prev = c;
          }
        }
        for (int q = 0; q < M; ++q) {
          const int c = spec.center[static_cast<std::size_t>(q)], v = t[static_cast<std::size_t>(q)];
          if ((v == c - w && v > 1) || (v == c + w && v < m - 1)) edge = true;
        }
        out.members.push_back(std::move(r));
        return;
      }
      const int c = spec.center[static_cast<std::size_t>(k)];
      const int lo = std::max({1, c - w, k == 0 ? 1 : t[static_cast<std::size_t>(k) - 1] + 1});
      const int hi = std::min(m - 1 - (M - 1 - k), c + w);
      for (int v = lo; v <= hi; ++v) {
        t[static_cast<std::size_t>(k)] = v;
        rec(k + 1);
      }
    };
    rec(0);
    if (!edge) break;
    if (w >= spec.max_window) {
      out.truncated = true;
      break;
    }
  }
  return out;
}

// Exact membership of (taus, mus) in the joint region at level alpha, with the
// threshold from the hypothesized changes.
inline bool in_joint_region(const Sequence& seq, const SegmentModel& model, double alpha) {
  model.validate();
  std::vector<double> d;
  for (double x : model.deltas()) d.push_back(x / seq.working_sigma());
  return stat_T_tau_mu(seq, model) <= region_threshold(d, alpha, RegionMode::joint_tau_mu);
}

// Monte Carlo probability that model_hyp is rejected (T_{t,xi} > b) when the
// data follow model_true with unit-variance Gaussian noise.
inline double power_vs_alternative(const SegmentModel& model_true, const SegmentModel& model_hyp,
                                   double b, int n_reps, std::uint64_t seed) {
  model_true.validate(false);
  model_hyp.validate(false);
  if (model_true.m != model_hyp.m) throw ValidationError("power_vs_alternative: lengths differ");
  if (n_reps < 1) throw ValidationError("power_vs_alternative: n_reps must be >= 1");
  const int m = model_true.m;
  const int M = static_cast<int>(model_hyp.taus.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise;
  std::vector<double> mean(static_cast<std::size_t>(m));
  for (int t = 1; t <= m; ++t) mean[static_cast<std::size_t>(t - 1)] = model_true.mean_at(t);
  double mu_fixed = 0.0;  // part of the mu-term that does not depend on the data
  for (std::size_t k = 0; k <= model_hyp.taus.size(); ++k)
    mu_fixed += 0.5 * model_hyp.mus[k] * model_hyp.mus[k] *
                (model_hyp.boundary(k + 1) - model_hyp.boundary(k));
  std::vector<double> s(static_cast<std::size_t>(m + 1));
  int rejected = 0;
  for (int r = 0; r < n_reps; ++r) {
    s[0] = 0.0;
    for (int t = 1; t <= m; ++t) s[t] = s[t - 1] + mean[t - 1] + noise(rng);
    double lin = 0.0;
    for (std::size_t k = 0; k <= model_hyp.taus.size(); ++k)
      lin += model_hyp.mus[k] * (s[model_hyp.boundary(k + 1)] - s[model_hyp.boundary(k)]);
    const double T = best_fit(s, M).value - (lin - mu_fixed);
    rejected += T > b;
  }
  return static_cast<double>(rejected) / n_reps;
}

}  // namespace cpseg
