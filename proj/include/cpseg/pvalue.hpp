#pragma once

// Analytic false-positive approximations for the scan statistics and a
// bisection solver that inverts any of them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cpseg/error.hpp"
#include "cpseg/specialfn.hpp"

namespace cpseg {

enum class Statistic { lr, lr_multiscale, seq, nz, cbs_multi };
enum class ConstraintMode {
  per_side,  // m0 <= j-i, k-j <= m1
  total,     // m0 <= j-i, k-j and k-i <= m1
};

inline std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::lr: return "lr";
    case Statistic::lr_multiscale: return "lr_multiscale";
    case Statistic::seq: return "seq";
    case Statistic::nz: return "nz";
    case Statistic::cbs_multi: return "cbs_multi";
  }
  return "?";
}

struct ScanSpec {
  Statistic statistic = Statistic::lr;
  int m = 0;
  int m0 = 1;
  int m1 = 0;  // 0 means "m - 1" (full range)
  ConstraintMode constraint = ConstraintMode::total;
  double kappa = 0.0;                // lr_multiscale / cbs_multi
  int d = 1;                         // cbs_multi dimension
  std::vector<int> nz_windows{10, 20, 30};
  // The NZ approximation treats the maximum over every h up to the largest
  // window; set false to sum only over the listed windows.
  bool nz_sum_through_max = true;

  int upper() const { return m1 > 0 ? m1 : m - 1; }

  void validate() const {
    if (m < 3) throw ValidationError("ScanSpec: m must be >= 3");
    if (m0 < 1) throw ValidationError("ScanSpec: m0 must be >= 1");
    if (upper() < m0 || upper() > m)
      throw ValidationError("ScanSpec: need 1 <= m0 <= m1 <= m");
    if (kappa < 0.0) throw ValidationError("ScanSpec: kappa must be >= 0");
    if (d < 1) throw ValidationError("ScanSpec: d must be >= 1");
    if (statistic == Statistic::nz) {
      if (nz_windows.empty()) throw ValidationError("ScanSpec: NZ window set is empty");
      for (int h : nz_windows)
        if (h < 1 || 2 * h > m) throw ValidationError("ScanSpec: NZ window out of range");
    }
    if (statistic == Statistic::cbs_multi && upper() >= m)
      throw ValidationError("ScanSpec: CBS needs m1 < m");
  }
};

struct TailResult {
  double prob = 0.0;
  double b = 0.0;
  std::string method;
  long terms_summed = 0;
  bool clamped = false;     // raw sum exceeded 1
  bool unreliable = false;  // raw sum above 0.5: the asymptotics are doubtful there
  double raw = 0.0;
};

namespace detail {
inline TailResult finish(double raw, double b, std::string method, long terms) {
  TailResult r;
  r.raw = raw;
  r.prob = std::clamp(raw, 0.0, 1.0);
  r.clamped = raw > 1.0;
  r.unreliable = raw > 0.5;
  r.b = b;
  r.method = std::move(method);
  r.terms_summed = terms;
  return r;
}

// One (u, v) term of the two-sided approximation without the (m-u-v) weight.
inline double lr_term(double b, double u, double v) {
  const double s = u + v;
  const double pre = 0.25 * std::pow(b, 5) * normal_pdf(b);  // (1/4) b^6 f_1(b^2)
  return pre / (u * v * s) * nu(b * std::sqrt(u / (v * s))) * nu(b * std::sqrt(v / (u * s))) *
         nu(b * std::sqrt(s / (u * v)));
}

template <class F>
TailResult lr_sum(const ScanSpec& spec, double b, F&& b_of, const char* label) {
  spec.validate();
  if (!(b > 0.0)) throw DomainError("pvalue: threshold must be > 0");
  const int m = spec.m, lo = spec.m0, hi = spec.upper();
  double acc = 0.0;
  long terms = 0;
  for (int u = lo; u <= std::min(hi, m - 1); ++u) {
    double row = 0.0;
    for (int v = lo; v <= hi && u + v < m; ++v) {
      if (spec.constraint == ConstraintMode::total && u + v > hi) break;
      const double bu = b_of(u, v);
      row += static_cast<double>(m - u - v) * lr_term(bu, u, v);
      ++terms;
    }
    acc += row;
  }
  return finish(acc, b, label, terms);
}
}  // namespace detail

// Two-sided approximation for max |Z_{i,j,k}| over backgrounds allowed by spec.
inline TailResult pvalue_lr(const ScanSpec& spec, double b) {
  return detail::lr_sum(spec, b, [b](int, int) { return b; }, "lr");
}

// Same sum with the per-(u,v) threshold b + {2 kappa log[3m(u+v)/(uv)]}^{1/2}.
inline TailResult pvalue_lr_multiscale(const ScanSpec& spec, double b, double kappa) {
  if (kappa < 0.0) throw DomainError("pvalue_lr_multiscale: kappa must be >= 0");
  const double m = spec.m;
  return detail::lr_sum(
      spec, b,
      [&](int u, int v) {
        if (kappa == 0.0) return b;
        const double du = u, dv = v;
        return b + std::sqrt(2.0 * kappa * std::log(3.0 * m * (du + dv) / (du * dv)));
      },
      "lr_multiscale");
}

// Pseudo-sequential scan max_{0<j<k<=m} |Z_{0,j,k}|.
inline TailResult pvalue_seq(int m, double b) {
  if (m < 2) throw ValidationError("pvalue_seq: m must be >= 2");
  if (!(b > 0.0)) throw DomainError("pvalue_seq: threshold must be > 0");
  double acc = 0.0;
  long terms = 0;
  for (int k = 2; k <= m; ++k) {
    const double dk = k;
    double row = 0.0;
    for (int j = 1; j < k; ++j) {
      const double dj = j;
      row += nu(b * std::sqrt((dk - dj) / (dj * dk))) * nu(b * std::sqrt(dk / (dj * (dk - dj)))) /
             (dj * dj);
      ++terms;
    }
    acc += row;
  }
  return detail::finish(0.5 * b * b * b * normal_pdf(b) * acc, b, "seq", terms);
}

// Windows the NZ sum runs over for a given window set.
inline std::vector<int> nz_sum_windows(const std::vector<int>& windows, bool through_max) {
  if (!through_max) return windows;
  const int hmax = *std::max_element(windows.begin(), windows.end());
  std::vector<int> out;
  for (int h = 1; h <= hmax; ++h) out.push_back(h);
  return out;
}

// Symmetric-window scan, assuming independent j and h perturbations:
// 1.5 m b^3 phi(b) sum_h nu[b(3/h)^{1/2}] nu[b(1/h)^{1/2}] / h^2.
inline TailResult pvalue_nz(int m, const std::vector<int>& windows, double b) {
  if (windows.empty()) throw ValidationError("pvalue_nz: empty window set");
  if (!(b > 0.0)) throw DomainError("pvalue_nz: threshold must be > 0");
  double acc = 0.0;
  for (int h : windows) {
    if (h < 1) throw ValidationError("pvalue_nz: windows must be >= 1");
    const double dh = h;
    acc += nu(b * std::sqrt(3.0 / dh)) * nu(b * std::sqrt(1.0 / dh)) / (dh * dh);
  }
  return detail::finish(1.5 * m * b * b * b * normal_pdf(b) * acc, b, "nz",
                        static_cast<long>(windows.size()));
}

// Paired-change (CBS, kappa = 0) and multiscale (kappa = 1) scans of
// dimension d:
// 2 sum_n (m-n) f_d(b_n^2) b_n^4 q_n^3 / (2n(1-n/m))^2 nu^2(b_n q_n / [n(1-n/m)]^{1/2}).
inline TailResult pvalue_cbs_multi(int m, int m0, int m1, double b, double kappa, int d = 1) {
  if (m < 2 || m0 < 1 || m1 < m0 || m1 >= m)
    throw ValidationError("pvalue_cbs_multi: need 1 <= m0 <= m1 < m");
  if (d < 1) throw ValidationError("pvalue_cbs_multi: d must be >= 1");
  if (kappa < 0.0) throw DomainError("pvalue_cbs_multi: kappa must be >= 0");
  const double dm = m;
  double acc = 0.0;
  long terms = 0;
  for (int n = m0; n <= m1; ++n) {
    const double dn = n, w = dn * (1.0 - dn / dm);
    const double bn = b + (kappa > 0.0 ? std::sqrt(2.0 * kappa * std::log(3.0 * dm / w)) : 0.0);
    if (!(bn > 0.0)) throw DomainError("pvalue_cbs_multi: effective threshold must be > 0");
    const double q = 1.0 - (d - 1) / (bn * bn);
    if (!(q > 0.0))
      throw DomainError("pvalue_cbs_multi: threshold too small for dimension d (q_n <= 0)");
    const double f = chi2_pdf(bn * bn, d);
    const double v = nu(bn * q / std::sqrt(w));
    acc += (dm - dn) * f * std::pow(bn, 4) * q * q * q / (4.0 * w * w) * v * v;
    ++terms;
  }
  return detail::finish(2.0 * acc, b, kappa > 0.0 ? "multi" : "cbs", terms);
}

// Dispatch on spec.statistic.
inline TailResult pvalue(const ScanSpec& spec, double b) {
  spec.validate();
  switch (spec.statistic) {
    case Statistic::lr: return pvalue_lr(spec, b);
    case Statistic::lr_multiscale: return pvalue_lr_multiscale(spec, b, spec.kappa);
    case Statistic::seq: return pvalue_seq(spec.m, b);
    case Statistic::nz:
      return pvalue_nz(spec.m, nz_sum_windows(spec.nz_windows, spec.nz_sum_through_max), b);
    case Statistic::cbs_multi:
      return pvalue_cbs_multi(spec.m, spec.m0, std::min(spec.upper(), spec.m - 1), b, spec.kappa,
                              spec.d);
  }
  throw ValidationError("pvalue: unknown statistic");
}

// Bisection for a decreasing tail function p(b) = alpha on [lo, hi].
inline double solve_decreasing(const std::function<double(double)>& p, double alpha, double lo,
                               double hi, const std::string& what) {
  double plo = p(lo), phi = p(hi);
  if (!(plo >= alpha && phi <= alpha))
    throw NumericalError(what + ": failed to bracket alpha=" + std::to_string(alpha) +
                         " on b in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                         "] (p=" + std::to_string(plo) + ".." + std::to_string(phi) + ")");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double pm = p(mid);
    if (std::abs(pm - alpha) < 1e-7 * alpha || hi - lo < 1e-7) return mid;
    (pm > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Threshold b with p(b) = alpha for the statistic in spec.
inline TailResult solve_threshold(const ScanSpec& spec, double alpha) {
  if (!(alpha > 0.0 && alpha <= 0.5)) throw DomainError("solve_threshold: alpha must be in (0, 0.5]");
  spec.validate();
  // The multiscale statistics live on a shifted scale, so their bracket starts near 0.
  const bool shifted = (spec.statistic == Statistic::cbs_multi && spec.kappa > 0.0) ||
                       (spec.statistic == Statistic::lr_multiscale && spec.kappa > 0.0);
  double lo = shifted ? 0.05 : 1.5, hi = 12.0;
  if (spec.statistic == Statistic::cbs_multi && spec.d > 1) lo = std::sqrt(spec.d - 1.0) + 0.05;
  auto p = [&](double b) { return pvalue(spec, b).raw; };
  const double b = solve_decreasing(p, alpha, lo, hi, "solve_threshold(" + to_string(spec.statistic) + ")");
  auto r = pvalue(spec, b);
  r.method = "solve:" + r.method;
  return r;
}

}  // namespace cpseg
