#pragma once

// Segmentation procedures: shortest-background / largest-|Z| thresholding of
// the local statistic, the pseudo-sequential scan, symmetric-window local
// maxima (NZ), top-down paired-change search (CBS / Multi) and wild binary
// segmentation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "cpseg/error.hpp"
#include "cpseg/pvalue.hpp"
#include "cpseg/stats.hpp"

namespace cpseg {

struct Detection {
  long j = 0;
  long i = 0;
  long k = 0;
  double z = 0.0;
  double delta_hat = 0.0;
};

struct Segmentation {
  std::vector<Detection> detections;
  std::string procedure;
  double threshold = 0.0;
  double sigma_used = 1.0;

  std::vector<long> points() const {
    std::vector<long> p;
    for (const auto& d : detections) p.push_back(d.j);
    return p;
  }
};

enum class Selection { shortest_background, largest_z };
enum class Speedup { exact, pruned };
enum class SeqPick { maximizing, largest };

struct SearchConfig {
  double threshold = 0.0;
  int m0 = 1;
  int m1 = 0;  // 0: no upper bound
  ConstraintMode constraint = ConstraintMode::total;
  Selection selection = Selection::shortest_background;
  Speedup speedup = Speedup::exact;
  double kappa = 0.0;  // multiscale penalty weight for the local statistic
  Standardization standardization = Standardization::global;
  double endpoint_discard_fraction = 0.05;
  std::uint64_t seed = 0;
  SeqPick seq_pick = SeqPick::maximizing;

  void validate() const {
    if (!(threshold > 0.0)) throw ValidationError("SearchConfig: threshold must be > 0");
    if (m0 < 1) throw ValidationError("SearchConfig: m0 must be >= 1");
    if (m1 != 0 && m1 < m0) throw ValidationError("SearchConfig: m1 must be >= m0");
    if (!(endpoint_discard_fraction >= 0.0 && endpoint_discard_fraction <= 0.25))
      throw ValidationError("SearchConfig: endpoint_discard_fraction must lie in [0, 0.25]");
  }
};

inline double delta_hat(const PartialSums& s, long i, long j, long k) {
  return (s[k] - s[j]) / static_cast<double>(k - j) - (s[j] - s[i]) / static_cast<double>(j - i);
}

// Candidate k values for change-point j: j+1, then steps of max(1, [(k-j)/10]).
inline std::vector<long> pruned_k_schedule(long j, long k_max) {
  if (j >= k_max) throw ValidationError("pruned_k_schedule: need j < k_max");
  std::vector<long> ks;
  for (long k = j + 1; k <= k_max; k += std::max(1L, (k - j) / 10)) ks.push_back(k);
  return ks;
}

// Mirror image for i: j-1, then steps of max(1, [(j-i)/10]).
inline std::vector<long> pruned_i_schedule(long j, long i_min) {
  if (j <= i_min) throw ValidationError("pruned_i_schedule: need i_min < j");
  std::vector<long> is;
  for (long i = j - 1; i >= i_min; i -= std::max(1L, (j - i) / 10)) is.push_back(i);
  return is;
}

// ---------------------------------------------------------------------------
// Generic background search.

namespace detail {

struct Window {
  long lo, hi;  // admissible backgrounds satisfy lo <= i and k <= hi
};

struct BackgroundLimits {
  long m0, m1;  // m1 <= 0: unbounded
  ConstraintMode mode;

  bool ok(long u, long v) const {
    if (u < m0 || v < m0) return false;
    if (m1 <= 0) return true;
    return mode == ConstraintMode::per_side ? (u <= m1 && v <= m1) : (u + v <= m1);
  }
  long max_side() const { return m1 <= 0 ? std::numeric_limits<long>::max() : m1; }
};

// Best admissible background for j inside the window according to the
// selection rule. stat(i,j,k) returns the signed statistic, compared with b in
// absolute value. exceeds(i,j,k) is a cheap pre-filter (may simply call stat).
template <class Stat>
std::optional<Detection> best_background(long j, Window w, const BackgroundLimits& lim,
                                         Selection sel, Speedup speed, double b, Stat&& stat) {
  if (j - w.lo < lim.m0 || w.hi - j < lim.m0) return std::nullopt;
  const long side = lim.max_side();
  const long i_min = std::max(w.lo, side == std::numeric_limits<long>::max() ? w.lo : j - side);
  const long k_max = std::min(w.hi, side == std::numeric_limits<long>::max() ? w.hi : j + side);

  std::optional<Detection> best;
  auto consider = [&](long i, long k) {
    const double z = stat(i, j, k);
    if (!(std::abs(z) >= b)) return;
    if (!best) {
      best = Detection{j, i, k, z, 0.0};
      return;
    }
    const long len = k - i, blen = best->k - best->i;
    const bool better = sel == Selection::shortest_background
                            ? (len < blen || (len == blen && std::abs(z) > std::abs(best->z)))
                            : (std::abs(z) > std::abs(best->z));
    if (better) *best = Detection{j, i, k, z, 0.0};
  };

  if (speed == Speedup::pruned) {
    const auto is = pruned_i_schedule(j, i_min);
    const auto ks = pruned_k_schedule(j, k_max);
    for (long i : is)
      for (long k : ks)
        if (lim.ok(j - i, k - j)) consider(i, k);
    return best;
  }

  if (sel == Selection::largest_z) {
    for (long i = j - lim.m0; i >= i_min; --i)
      for (long k = j + lim.m0; k <= k_max; ++k)
        if (lim.ok(j - i, k - j)) consider(i, k);
    return best;
  }

  // Shortest background: walk total lengths upward, stop at the first one
  // with an exceedance.
  const long len_max = k_max - i_min;
  for (long len = 2 * lim.m0; len <= len_max; ++len) {
    for (long u = std::max(lim.m0, len - (k_max - j)); u <= std::min(len - lim.m0, j - i_min); ++u) {
      const long v = len - u;
      if (!lim.ok(u, v)) continue;
      consider(j - u, j + v);
    }
    if (best) return best;
  }
  return best;
}

// Greedy acceptance in order of the selection key, enforcing that no accepted
// background contains another accepted change-point.
template <class Stat>
std::vector<Detection> background_segmentation(long m, const BackgroundLimits& lim, Selection sel,
                                               Speedup speed, double b, Stat&& stat) {
  struct Item {
    Detection d;
    Window w;
  };
  auto worse = [sel](const Item& a, const Item& c) {  // priority_queue: "less" = lower priority
    const long la = a.d.k - a.d.i, lc = c.d.k - c.d.i;
    if (sel == Selection::shortest_background && la != lc) return la > lc;
    if (std::abs(a.d.z) != std::abs(c.d.z)) return std::abs(a.d.z) < std::abs(c.d.z);
    return a.d.j > c.d.j;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(worse)> pq(worse);
  const Window full{0, m};
  for (long j = 1; j < m; ++j)
    if (auto d = best_background(j, full, lim, sel, speed, b, stat)) pq.push({*d, full});

  std::map<long, Detection> accepted;
  while (!pq.empty()) {
    Item it = pq.top();
    pq.pop();
    const Detection& d = it.d;
    if (accepted.count(d.j)) continue;
    auto right = accepted.upper_bound(d.j);
    const Detection* c = right == accepted.end() ? nullptr : &right->second;
    const Detection* a = right == accepted.begin() ? nullptr : &std::prev(right)->second;
    if ((a && a->k > d.j) || (c && c->i < d.j)) continue;  // j sits inside an accepted background
    const Window w{a ? a->j : 0, c ? c->j : m};
    if (d.i < w.lo || d.k > w.hi) {
      if (w.lo == it.w.lo && w.hi == it.w.hi) continue;  // cannot happen; guards against looping
      if (auto r = best_background(d.j, w, lim, sel, speed, b, stat)) pq.push({*r, w});
      continue;
    }
    accepted.emplace(d.j, d);
  }
  std::vector<Detection> out;
  for (auto& [j, det] : accepted) out.push_back(det);
  return out;
}

inline BackgroundLimits limits_from(const SearchConfig& cfg) {
  return {cfg.m0, cfg.m1, cfg.constraint};
}

}  // namespace detail

// Thresholding of the local statistic with shortest-background (or
// largest-|Z|) selection and non-overlapping backgrounds.
inline Segmentation segment_lr(const Sequence& seq, const SearchConfig& cfg) {
  cfg.validate();
  const long m = static_cast<long>(seq.size());
  if (m < 3) throw ValidationError("segment_lr: need m >= 3");
  const auto& s = seq.sums();
  Segmentation out;
  out.procedure = cfg.kappa > 0.0 ? "lr_multiscale" : "lr";
  out.threshold = cfg.threshold;
  const auto lim = detail::limits_from(cfg);

  if (cfg.standardization == Standardization::global && cfg.kappa == 0.0) {
    const double sigma = seq.working_sigma();
    out.sigma_used = sigma;
    const double bs2 = cfg.threshold * cfg.threshold * sigma * sigma;
    // Squared comparison first; the signed value is only formed on exceedance.
    auto stat = [&](long i, long j, long k) {
      const double num = detail::lr_numerator(s, i, j, k);
      const double var = detail::lr_variance(i, j, k);
      if (num * num < bs2 * var) return 0.0;
      return num / std::sqrt(var) / sigma;
    };
    out.detections = detail::background_segmentation(m, lim, cfg.selection, cfg.speedup,
                                                     cfg.threshold, stat);
  } else {
    if (cfg.standardization == Standardization::global) out.sigma_used = seq.working_sigma();
    const double dm = static_cast<double>(m);
    auto stat = [&](long i, long j, long k) {
      double z;
      try {
        z = z_lr(seq, i, j, k, cfg.standardization);
      } catch (const DegenerateInputError&) {
        return 0.0;
      }
      if (cfg.kappa == 0.0) return z;
      const double pen = lr_multiscale_penalty(dm, i, j, k, cfg.kappa);
      const double a = std::abs(z) - pen;
      return a > 0.0 ? std::copysign(a, z) : 0.0;
    };
    out.detections = detail::background_segmentation(m, lim, cfg.selection, cfg.speedup,
                                                     cfg.threshold, stat);
  }
  for (auto& d : out.detections) d.delta_hat = delta_hat(s, d.i, d.j, d.k);
  return out;
}

// Pseudo-sequential procedure: anchor i at the last detection and grow k
// until max_j |Z_{i,j,k}| first reaches b.
inline Segmentation segment_seq(const Sequence& seq, const SearchConfig& cfg) {
  cfg.validate();
  const long m = static_cast<long>(seq.size());
  const auto& s = seq.sums();
  const double sigma = seq.working_sigma();
  const double b = cfg.threshold;
  Segmentation out;
  out.procedure = "seq";
  out.threshold = b;
  out.sigma_used = sigma;
  long i = 0;
  for (long k = i + 2; k <= m; ++k) {
    double zbest = 0.0;
    long jbest = -1, jlast = -1;
    double zlast = 0.0;
    for (long j = i + 1; j < k; ++j) {
      const double z = detail::lr_numerator(s, i, j, k) / std::sqrt(detail::lr_variance(i, j, k)) / sigma;
      if (std::abs(z) > std::abs(zbest)) {
        zbest = z;
        jbest = j;
      }
      if (std::abs(z) >= b) {
        jlast = j;
        zlast = z;
      }
    }
    if (std::abs(zbest) >= b) {
      const long j1 = cfg.seq_pick == SeqPick::maximizing ? jbest : jlast;
      const double z1 = cfg.seq_pick == SeqPick::maximizing ? zbest : zlast;
      out.detections.push_back({j1, i, k, z1, delta_hat(s, i, j1, k)});
      i = j1;
      k = i + 1;  // loop increment makes it i + 2
    }
  }
  return out;
}

// Symmetric-window segmentation. For each j take the smallest window h with
// |Z_{j,h}| >= b; j is a candidate when it maximizes |Z_{.,h}| over
// |t - j| < h. Candidates are accepted by increasing h, skipping any within
// the larger of the two windows of an accepted one. An empty window set
// means every h < min(j, m - j).
inline Segmentation segment_nz(const Sequence& seq, const std::vector<int>& windows, double b) {
  if (!(b > 0.0)) throw ValidationError("segment_nz: threshold must be > 0");
  for (int h : windows)
    if (h < 1) throw ValidationError("segment_nz: windows must be >= 1");
  std::vector<int> hs(windows);
  std::sort(hs.begin(), hs.end());
  hs.erase(std::unique(hs.begin(), hs.end()), hs.end());
  const long m = static_cast<long>(seq.size());
  const auto& s = seq.sums();
  const double sigma = seq.working_sigma();
  auto signed_z = [&](long j, long h) {
    return -((s[j + h] - s[j]) - (s[j] - s[j - h])) / std::sqrt(2.0 * h) / sigma;  // sign as in z_lr
  };
  struct Cand {
    long j, h;
    double z;
  };
  std::vector<Cand> cands;
  auto try_scale = [&](long j, long h) {
    const double z = std::abs(signed_z(j, h));
    if (!(z >= b)) return false;
    bool peak = true;
    for (long t = std::max(h, j - h + 1); t <= std::min(m - h, j + h - 1) && peak; ++t)
      if (t != j && std::abs(signed_z(t, h)) > z) peak = false;
    if (peak) cands.push_back({j, h, signed_z(j, h)});
    return true;
  };
  for (long j = 1; j < m; ++j) {
    const long hmax = std::min(j, m - j);
    if (hs.empty()) {
      for (long h = 1; h <= hmax; ++h)
        if (try_scale(j, h)) break;
    } else {
      for (int h : hs)
        if (h <= hmax && try_scale(j, h)) break;
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    return x.h != y.h ? x.h < y.h : std::abs(x.z) > std::abs(y.z);
  });
  Segmentation out;
  out.procedure = "nz";
  out.threshold = b;
  out.sigma_used = sigma;
  for (const auto& c : cands) {
    bool clear = true;
    for (const auto& d : out.detections)
      if (std::abs(d.j - c.j) < std::max(d.j - d.i, c.h)) clear = false;
    if (clear) out.detections.push_back({c.j, c.j - c.h, c.j + c.h, c.z, delta_hat(s, c.j - c.h, c.j, c.j + c.h)});
  }
  std::sort(out.detections.begin(), out.detections.end(),
            [](const Detection& x, const Detection& y) { return x.j < y.j; });
  return out;
}

namespace detail {
struct PairMax {
  double value = -std::numeric_limits<double>::infinity();
  long i = -1, j = -1;
};

// max over lo <= i < j <= hi, 0 < j-i < L of the paired-change statistic.
inline PairMax cbs_scan(const PartialSums& s, long lo, long hi, double sigma, double kappa,
                        double m_pen) {
  PairMax best;
  const long L = hi - lo;
  const double dL = static_cast<double>(L);
  const double mean = (s[hi] - s[lo]) / dL;
  for (long n = 1; n < L; ++n) {
    const double dn = static_cast<double>(n);
    const double sd = std::sqrt(dn * (1.0 - dn / dL)) * sigma;
    const double pen = kappa > 0.0 ? std::sqrt(2.0 * kappa * std::log(3.0 * m_pen * dL / (dn * (dL - dn)))) : 0.0;
    for (long i = lo; i + n <= hi; ++i) {
      const double z = std::abs(s[i + n] - s[i] - dn * mean) / sd - pen;
      if (z > best.value) best = {z, i, i + n};
    }
  }
  return best;
}
}  // namespace detail

// Top-down paired-change segmentation. kappa = 0 is CBS, kappa = 1 Multi
// (penalty with the full-sequence m in every subinterval).
inline Segmentation segment_cbs(const Sequence& seq, double b, double kappa,
                                double discard_fraction = 0.05, std::uint64_t seed = 0) {
  if (!(discard_fraction >= 0.0 && discard_fraction <= 0.25))
    throw ValidationError("segment_cbs: discard fraction must lie in [0, 0.25]");
  const long m = static_cast<long>(seq.size());
  const auto& s = seq.sums();
  const double sigma = seq.working_sigma();
  std::mt19937_64 rng(seed);
  std::vector<Detection> found;

  std::vector<std::pair<long, long>> stack{{0, m}};
  while (!stack.empty()) {
    auto [lo, hi] = stack.back();
    stack.pop_back();
    const long L = hi - lo;
    if (L < 2) continue;
    const auto best = detail::cbs_scan(s, lo, hi, sigma, kappa, static_cast<double>(m));
    if (!(best.value >= b)) continue;
    const double band = discard_fraction * static_cast<double>(L);
    const long di = best.i - lo, dj = hi - best.j;
    bool keep_i = di > 0 && !(static_cast<double>(di) < band);
    bool keep_j = dj > 0 && !(static_cast<double>(dj) < band);
    if (!keep_i && !keep_j) {
      // Both within the band: drop only the one nearer its end-point.
      if (di == 0) keep_j = dj > 0;
      else if (dj == 0) keep_i = true;
      else if (di < dj) keep_j = true;
      else if (dj < di) keep_i = true;
      else (rng() & 1U ? keep_i : keep_j) = true;
    }
    std::vector<long> cuts{lo};
    const double zval = best.value;
    if (keep_i) {
      cuts.push_back(best.i);
      found.push_back({best.i, lo, best.j, zval, 0.0});
    }
    if (keep_j) {
      cuts.push_back(best.j);
      found.push_back({best.j, best.i, hi, zval, 0.0});
    }
    cuts.push_back(hi);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) stack.emplace_back(cuts[c], cuts[c + 1]);
  }
  std::sort(found.begin(), found.end(), [](const Detection& a, const Detection& c) { return a.j < c.j; });
  // Report each change against its neighbours.
  for (std::size_t n = 0; n < found.size(); ++n) {
    found[n].i = n == 0 ? 0 : found[n - 1].j;
    found[n].k = n + 1 == found.size() ? m : found[n + 1].j;
    found[n].delta_hat = delta_hat(s, found[n].i, found[n].j, found[n].k);
  }
  Segmentation out;
  out.detections = std::move(found);
  out.procedure = kappa > 0.0 ? "multi" : "cbs";
  out.threshold = b;
  out.sigma_used = sigma;
  return out;
}

// Wild binary segmentation on n_intervals random backgrounds.
inline Segmentation segment_wbs(const Sequence& seq, double b, int n_intervals, std::uint64_t seed) {
  if (n_intervals < 1) throw ValidationError("segment_wbs: need at least one interval");
  const long m = static_cast<long>(seq.size());
  const auto& s = seq.sums();
  const double sigma = seq.working_sigma();
  struct Iv {
    long lo, hi, j;
    double z;
  };
  auto cusum_max = [&](long lo, long hi) {
    Iv r{lo, hi, -1, 0.0};
    for (long j = lo + 1; j < hi; ++j) {
      const double z = detail::lr_numerator(s, lo, j, hi) / std::sqrt(detail::lr_variance(lo, j, hi)) / sigma;
      if (std::abs(z) > std::abs(r.z)) {
        r.z = z;
        r.j = j;
      }
    }
    return r;
  };
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long> pick(0, m);
  std::vector<Iv> ivs;
  ivs.reserve(static_cast<std::size_t>(n_intervals));
  while (static_cast<int>(ivs.size()) < n_intervals) {
    long a = pick(rng), c = pick(rng);
    if (a > c) std::swap(a, c);
    if (c - a < 2) continue;
    ivs.push_back(cusum_max(a, c));
  }
  std::vector<Detection> found;
  std::vector<std::pair<long, long>> stack{{0, m}};
  while (!stack.empty()) {
    auto [lo, hi] = stack.back();
    stack.pop_back();
    if (hi - lo < 2) continue;
    Iv best = cusum_max(lo, hi);
    for (const auto& iv : ivs)
      if (iv.lo >= lo && iv.hi <= hi && std::abs(iv.z) > std::abs(best.z)) best = iv;
    if (!(std::abs(best.z) >= b)) continue;
    found.push_back({best.j, best.lo, best.hi, best.z, delta_hat(s, best.lo, best.j, best.hi)});
    stack.emplace_back(lo, best.j);
    stack.emplace_back(best.j, hi);
  }
  std::sort(found.begin(), found.end(), [](const Detection& a, const Detection& c) { return a.j < c.j; });
  Segmentation out;
  out.detections = std::move(found);
  out.procedure = "wbs";
  out.threshold = b;
  out.sigma_used = sigma;
  return out;
}

// ---------------------------------------------------------------------------
// Fast null scans for Monte Carlo calibration (unit variance assumed).

// True when max |Z_{i,j,k}| over the admissible backgrounds reaches b.
// Works on squared contrasts so the inner loop vectorizes.
inline bool lr_scan_exceeds(std::span<const double> S, double b, int m0, int m1,
                            ConstraintMode mode = ConstraintMode::total) {
  const long m = static_cast<long>(S.size()) - 1;
  const long side = m1 > 0 ? m1 : m;
  const double b2 = b * b;
  std::vector<double> K(static_cast<std::size_t>(m + 1));
  for (long k = 0; k <= m; ++k) K[static_cast<std::size_t>(k)] = static_cast<double>(k);
  const double* s = S.data();
  const double* kk = K.data();
  for (long j = 1; j < m; ++j) {
    const long i_min = std::max(0L, j - side);
    const double dj = static_cast<double>(j);
    for (long i = j - m0; i >= i_min; --i) {
      const double di = static_cast<double>(i);
      const double u = dj - di, A = s[j] - s[i], Si = s[i], b2u = b2 * u;
      long k_max = std::min(m, j + side);
      if (mode == ConstraintMode::total && m1 > 0) k_max = std::min(k_max, i + m1);
      double mx = -1.0;
#pragma omp simd reduction(max : mx)
      for (long k = j + m0; k <= k_max; ++k) {
        const double L = kk[k] - di;
        const double N = A * L - u * (s[k] - Si);
        const double d = N * N - b2u * L * (kk[k] - dj);
        mx = mx > d ? mx : d;
      }
      if (mx >= 0.0) return true;
    }
  }
  return false;
}

// Pseudo-sequential null scan: max_{0<j<k<=m} |Z_{0,j,k}| >= b.
inline bool seq_scan_exceeds(std::span<const double> S, double b) {
  const long m = static_cast<long>(S.size()) - 1;
  const double b2 = b * b;
  const double* s = S.data();
  for (long k = 2; k <= m; ++k) {
    const double L = static_cast<double>(k), Sk = s[k];
    double mx = -1.0;
#pragma omp simd reduction(max : mx)
    for (long j = 1; j < k; ++j) {
      const double u = static_cast<double>(j);
      const double N = s[j] * L - u * Sk;
      const double d = N * N - b2 * u * L * (L - u);
      mx = mx > d ? mx : d;
    }
    if (mx >= 0.0) return true;
  }
  return false;
}

}  // namespace cpseg
