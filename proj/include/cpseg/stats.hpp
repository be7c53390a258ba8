#pragma once

// Sequences, partial sums and the local scan statistics.
//
// Index convention: a change-point at j means the mean changes between X_j and
// X_{j+1} (1-based observations), i.e. S_j is the last partial sum of the left
// segment. Backgrounds (i, k) cover observations i+1..k.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpseg/error.hpp"

namespace cpseg {

// Prefix sums S_0 = 0, S_j = X_1 + ... + X_j, plus centred sums of squares
// used by the local-variance statistics.
class PartialSums {
 public:
  PartialSums() = default;
  explicit PartialSums(std::span<const double> x) : s_(x.size() + 1, 0.0), q_(x.size() + 1, 0.0) {
    double mean = 0.0;
    for (double v : x) mean += v;
    if (!x.empty()) mean /= static_cast<double>(x.size());
    centre_ = mean;
    for (std::size_t i = 0; i < x.size(); ++i) {
      s_[i + 1] = s_[i] + x[i];
      const double c = x[i] - centre_;
      q_[i + 1] = q_[i] + c * c;
    }
    c_.resize(x.size() + 1, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) c_[i + 1] = c_[i] + (x[i] - centre_);
  }

  std::size_t length() const { return s_.empty() ? 0 : s_.size() - 1; }
  double operator[](std::size_t j) const { return s_[j]; }
  std::span<const double> data() const { return s_; }

  double sum(std::size_t i, std::size_t k) const { return s_[k] - s_[i]; }

  // Sum of squared deviations from the segment mean over observations i+1..k.
  double centred_ss(std::size_t i, std::size_t k) const {
    const double n = static_cast<double>(k - i);
    const double d = c_[k] - c_[i];
    const double ss = (q_[k] - q_[i]) - d * d / n;
    return ss > 0.0 ? ss : 0.0;
  }

 private:
  std::vector<double> s_, q_, c_;
  double centre_ = 0.0;
};

enum class VarianceKind { known, estimate_diff, estimate_sample };

struct VariancePolicy {
  VarianceKind kind = VarianceKind::estimate_diff;
  double sigma2 = 1.0;  // used when kind == known

  static VariancePolicy known(double s2) { return {VarianceKind::known, s2}; }
  static VariancePolicy diff() { return {VarianceKind::estimate_diff, 0.0}; }
  static VariancePolicy sample() { return {VarianceKind::estimate_sample, 0.0}; }
};

// Half the mean squared difference of consecutive observations.
inline double diff_variance(std::span<const double> x) {
  if (x.size() < 2) throw ValidationError("diff_variance: need at least 2 observations");
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double d = x[i] - x[i - 1];
    acc += d * d;
  }
  return acc / (2.0 * static_cast<double>(x.size() - 1));
}

// Unbiased sample variance.
inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) throw ValidationError("sample_variance: need at least 2 observations");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(x.size() - 1);
}

class Sequence {
 public:
  Sequence() = default;
  Sequence(std::vector<double> values, VariancePolicy policy)
      : values_(std::move(values)), policy_(policy), sums_(values_) {
    switch (policy_.kind) {
      case VarianceKind::known:
        if (!(policy_.sigma2 > 0.0)) throw DomainError("Sequence: known variance must be > 0");
        sigma2_ = policy_.sigma2;
        break;
      case VarianceKind::estimate_diff:
        sigma2_ = values_.size() >= 2 ? diff_variance(values_) : 0.0;
        break;
      case VarianceKind::estimate_sample:
        sigma2_ = values_.size() >= 2 ? sample_variance(values_) : 0.0;
        break;
    }
  }

  static Sequence with_known_variance(std::vector<double> v, double s2 = 1.0) {
    return {std::move(v), VariancePolicy::known(s2)};
  }

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  const PartialSums& sums() const { return sums_; }
  const VariancePolicy& policy() const { return policy_; }
  double sigma2() const { return sigma2_; }
  double sigma() const { return std::sqrt(sigma2_); }
  // sigma used to standardize; throws on a degenerate (zero) estimate.
  double working_sigma() const {
    if (!(sigma2_ > 0.0))
      throw DegenerateInputError("Sequence: estimated variance is zero (constant data)");
    return std::sqrt(sigma2_);
  }

 private:
  std::vector<double> values_;
  VariancePolicy policy_;
  PartialSums sums_;
  double sigma2_ = 1.0;
};

// Step-function hypothesis: change-points 0 < tau_1 < ... < tau_M < m and
// segment means mu_1..mu_{M+1}.
struct SegmentModel {
  std::vector<int> taus;
  std::vector<double> mus;
  int m = 0;

  std::size_t changes() const { return taus.size(); }

  int boundary(std::size_t k) const {  // tau_0 = 0, tau_{M+1} = m
    if (k == 0) return 0;
    if (k == taus.size() + 1) return m;
    return taus[k - 1];
  }

  std::vector<double> deltas() const {
    std::vector<double> d;
    for (std::size_t k = 0; k + 1 < mus.size(); ++k) d.push_back(mus[k + 1] - mus[k]);
    return d;
  }

  // Mean of observation t (1-based).
  double mean_at(int t) const {
    std::size_t seg = 0;
    while (seg < taus.size() && t > taus[seg]) ++seg;
    return mus[seg];
  }

  void validate(bool require_distinct_means = true) const {
    if (m < 1) throw ValidationError("SegmentModel: m must be >= 1");
    if (mus.size() != taus.size() + 1)
      throw ValidationError("SegmentModel: need exactly M+1 means for M change-points");
    int prev = 0;
    for (int t : taus) {
      if (t <= prev || t >= m)
        throw ValidationError("SegmentModel: change-points must satisfy 0 < tau_1 < ... < tau_M < m");
      prev = t;
    }
    if (require_distinct_means)
      for (double d : deltas())
        if (d == 0.0) throw ValidationError("SegmentModel: adjacent means must differ");
  }
};

enum class Standardization {
  global,  // sigma from the sequence's variance policy
  local,   // maximum-likelihood variance of X_{i+1..k}
};

namespace detail {
inline void check_triple(std::size_t m, long i, long j, long k) {
  if (!(0 <= i && i < j && j < k && static_cast<std::size_t>(k) <= m))
    throw ValidationError("need 0 <= i < j < k <= m, got (" + std::to_string(i) + "," +
                          std::to_string(j) + "," + std::to_string(k) + ")");
}

// Unstandardized change-in-mean contrast and its variance factor.
inline double lr_numerator(const PartialSums& s, long i, long j, long k) {
  return s[j] - s[i] - static_cast<double>(j - i) * (s[k] - s[i]) / static_cast<double>(k - i);
}
inline double lr_variance(long i, long j, long k) {
  const double u = static_cast<double>(j - i);
  return u * (1.0 - u / static_cast<double>(k - i));
}
}  // namespace detail

// Local likelihood-ratio statistic Z_{i,j,k}, standardized.
inline double z_lr(const Sequence& seq, long i, long j, long k,
                   Standardization mode = Standardization::global) {
  detail::check_triple(seq.size(), i, j, k);
  const auto& s = seq.sums();
  double sigma;
  if (mode == Standardization::global) {
    sigma = seq.working_sigma();
  } else {
    const double v = s.centred_ss(static_cast<std::size_t>(i), static_cast<std::size_t>(k)) /
                     static_cast<double>(k - i);
    if (!(v > 0.0)) throw DegenerateInputError("z_lr: zero local variance on (i,k]");
    sigma = std::sqrt(v);
  }
  return detail::lr_numerator(s, i, j, k) / std::sqrt(detail::lr_variance(i, j, k)) / sigma;
}

// Multiscale penalty {2 kappa log[3m(k-i)/((j-i)(k-j))]}^{1/2}.
inline double lr_multiscale_penalty(double m, long i, long j, long k, double kappa) {
  if (kappa == 0.0) return 0.0;
  const double u = static_cast<double>(j - i), v = static_cast<double>(k - j);
  const double arg = 3.0 * m * (u + v) / (u * v);
  return std::sqrt(2.0 * kappa * std::log(arg));
}

// Symmetric-window statistic |(S_{j+h}-S_j) - (S_j-S_{j-h})| / (2h)^{1/2}.
inline double z_nz(const Sequence& seq, long j, long h) {
  const long m = static_cast<long>(seq.size());
  if (h < 1 || j < h || j > m - h)
    throw ValidationError("z_nz: window must satisfy 1 <= h <= j <= m - h");
  const auto& s = seq.sums();
  const double d = (s[j + h] - s[j]) - (s[j] - s[j - h]);
  return std::abs(d) / std::sqrt(2.0 * static_cast<double>(h)) / seq.working_sigma();
}

// Pair statistic for the search interval (lo, hi]: |Z_{i,j}| (kappa = 0) or
// |Z_{i,j}| minus the multiscale penalty with fixed sequence length m_penalty
// (kappa = 1). m_penalty <= 0 means the full sequence length.
inline double z_cbs(const Sequence& seq, long lo, long hi, long i, long j, int kappa,
                    double m_penalty = 0.0) {
  if (!(0 <= lo && lo <= i && i < j && j <= hi && static_cast<std::size_t>(hi) <= seq.size()))
    throw ValidationError("z_cbs: need lo <= i < j <= hi <= m");
  const long len = hi - lo;
  const long n = j - i;
  if (n >= len) throw ValidationError("z_cbs: degenerate pair (j - i equals the interval length)");
  const auto& s = seq.sums();
  const double L = static_cast<double>(len), dn = static_cast<double>(n);
  const double num = s[j] - s[i] - dn * (s[hi] - s[lo]) / L;
  const double z = std::abs(num) / std::sqrt(dn * (1.0 - dn / L)) / seq.working_sigma();
  if (kappa == 0) return z;
  const double mp = m_penalty > 0.0 ? m_penalty : static_cast<double>(seq.size());
  return z - std::sqrt(2.0 * std::log(3.0 * mp * L / (dn * (L - dn))));
}

struct SigmaEstimate {
  double diff_variance;    // preferred: robust to step changes in the mean
  double sample_variance;  // comparator, inflated by mean changes
  double sigma() const { return std::sqrt(diff_variance); }
};

inline SigmaEstimate estimate_sigma(const Sequence& seq) {
  if (seq.size() < 2) throw ValidationError("estimate_sigma: need m >= 2");
  return {diff_variance(seq.values()), sample_variance(seq.values())};
}

inline constexpr double kMeanVarDefaultC = 2.7;

// Two-dimensional (mean and variance) local statistic with small-sample
// correction c:
//   -(j-i-c/2) log s2_{i,j} - (k-j-c/2) log s2_{j,k} + (k-i-c) log s2_{i,k},
// where s2 uses the corrected denominators. Twice the log likelihood ratio
// when c = 0.
inline double z_meanvar(const Sequence& seq, long i, long j, long k, double c = kMeanVarDefaultC) {
  detail::check_triple(seq.size(), i, j, k);
  if (j - i < 2 || k - j < 2) throw ValidationError("z_meanvar: segments need at least 2 points");
  const double n1 = static_cast<double>(j - i) - 0.5 * c;
  const double n2 = static_cast<double>(k - j) - 0.5 * c;
  const double n = static_cast<double>(k - i) - c;
  if (!(n1 > 0.0 && n2 > 0.0 && n > 0.0))
    throw ValidationError("z_meanvar: correction c leaves a non-positive denominator");
  const auto& s = seq.sums();
  const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j),
             uk = static_cast<std::size_t>(k);
  const double ss1 = s.centred_ss(ui, uj), ss2 = s.centred_ss(uj, uk), ss = s.centred_ss(ui, uk);
  if (!(ss1 > 0.0 && ss2 > 0.0 && ss > 0.0))
    throw DegenerateInputError("z_meanvar: constant sub-segment (zero variance)");
  return -n1 * std::log(ss1 / n1) - n2 * std::log(ss2 / n2) + n * std::log(ss / n);
}

// Large-sample noncentrality heuristic for the mean-and-variance statistic:
//   pi(1-pi) log(1 + pi(1-pi) delta^2 + (1-pi) Delta) - (1-pi) log(1 + Delta).
inline double noncentrality_meanvar(double pi, double delta, double Delta) {
  if (!(pi > 0.0 && pi < 1.0)) throw DomainError("noncentrality_meanvar: pi must be in (0,1)");
  if (!(Delta > -1.0)) throw DomainError("noncentrality_meanvar: Delta must be > -1");
  const double q = pi * (1.0 - pi);
  return q * std::log(1.0 + q * delta * delta + (1.0 - pi) * Delta) -
         (1.0 - pi) * std::log(1.0 + Delta);
}

}  // namespace cpseg
