#pragma once

// One-parameter exponential families: local generalized likelihood ratio,
// the overshoot constant a(theta1, theta2), the p-value sum over root pairs,
// the signed-root normal scores, and the mean-and-variance segmentation.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "cpseg/error.hpp"
#include "cpseg/pvalue.hpp"
#include "cpseg/segment.hpp"
#include "cpseg/specialfn.hpp"
#include "cpseg/stats.hpp"

namespace cpseg {

// dF_theta/du (x) = exp(theta x - psi(theta)).
class Family {
 public:
  virtual ~Family() = default;
  virtual std::string name() const = 0;
  virtual double psi(double theta) const = 0;
  virtual double psi1(double theta) const = 0;
  virtual double psi2(double theta) const = 0;
  virtual double theta_lo() const { return -std::numeric_limits<double>::infinity(); }
  virtual double theta_hi() const { return std::numeric_limits<double>::infinity(); }
  virtual double mean_lo() const { return -std::numeric_limits<double>::infinity(); }
  virtual double mean_hi() const { return std::numeric_limits<double>::infinity(); }
  virtual bool arithmetic() const { return false; }
  virtual bool has_sum_law() const { return false; }
  // P_theta(S_n <= x).
  virtual double sum_cdf(int /*n*/, double /*theta*/, double /*x*/) const {
    throw ValidationError(name() + ": no exact law for S_n");
  }
  virtual double sample(std::mt19937_64& rng, double theta) const = 0;

  bool in_domain(double theta) const { return theta > theta_lo() && theta < theta_hi(); }
  bool mean_attainable(double mu) const { return mu > mean_lo() && mu < mean_hi(); }

  // Inverse of the mean map; monotone bisection unless overridden.
  virtual double theta_of_mean(double mu) const {
    if (!mean_attainable(mu)) throw DegenerateInputError(name() + ": mean outside the attainable range");
    double lo = std::isfinite(theta_lo()) ? theta_lo() : -1.0;
    double hi = std::isfinite(theta_hi()) ? theta_hi() : 1.0;
    for (int it = 0; it < 200 && !std::isfinite(theta_lo()) && psi1(lo) > mu; ++it) lo *= 2.0;
    for (int it = 0; it < 200 && !std::isfinite(theta_hi()) && psi1(hi) < mu; ++it) hi *= 2.0;
    auto f = [&](double t) { return psi1(t) - mu; };
    boost::uintmax_t iters = 200;
    auto r = boost::math::tools::bisect(
        [&](double t) {
          if (t <= theta_lo()) return -1.0;
          if (t >= theta_hi()) return 1.0;
          return f(t);
        },
        lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (r.first + r.second);
  }

  // sup_theta (theta xbar - psi(theta)); throws outside the attainable range.
  virtual double conjugate(double xbar) const {
    const double t = theta_of_mean(xbar);
    return t * xbar - psi(t);
  }
  // Same supremum, extended to the closure of the mean range (possibly +inf).
  virtual double conjugate_limit(double xbar) const { return conjugate(xbar); }

  // Kullback-Leibler budget term theta psi'(theta) - psi(theta).
  double kl_term(double theta) const { return theta * psi1(theta) - psi(theta); }
};

class GaussianFamily final : public Family {
 public:
  std::string name() const override { return "gaussian"; }
  double psi(double t) const override { return 0.5 * t * t; }
  double psi1(double t) const override { return t; }
  double psi2(double) const override { return 1.0; }
  bool has_sum_law() const override { return true; }
  double sum_cdf(int n, double t, double x) const override {
    return normal_cdf((x - n * t) / std::sqrt(static_cast<double>(n)));
  }
  double sample(std::mt19937_64& rng, double t) const override {
    return std::normal_distribution<double>(t, 1.0)(rng);
  }
  double theta_of_mean(double mu) const override { return mu; }
  double conjugate(double x) const override { return 0.5 * x * x; }
};

// Exponential observations with rate lambda = -theta.
class ExponentialFamily final : public Family {
 public:
  std::string name() const override { return "exponential"; }
  double psi(double t) const override { return -std::log(-t); }
  double psi1(double t) const override { return -1.0 / t; }
  double psi2(double t) const override { return 1.0 / (t * t); }
  double theta_hi() const override { return 0.0; }
  double mean_lo() const override { return 0.0; }
  bool has_sum_law() const override { return true; }
  double sum_cdf(int n, double t, double x) const override {
    if (x <= 0.0) return 0.0;
    return boost::math::gamma_p(static_cast<double>(n), -t * x);
  }
  double sample(std::mt19937_64& rng, double t) const override {
    return std::exponential_distribution<double>(-t)(rng);
  }
  double theta_of_mean(double mu) const override {
    if (!(mu > 0.0)) throw DegenerateInputError("exponential: mean must be > 0");
    return -1.0 / mu;
  }
  double conjugate(double x) const override {
    if (!(x > 0.0)) throw DegenerateInputError("exponential: mean must be > 0");
    return -1.0 - std::log(x);
  }
  double conjugate_limit(double x) const override {
    return x > 0.0 ? -1.0 - std::log(x) : std::numeric_limits<double>::infinity();
  }
};

namespace detail {
// log Phi(-z) for z >= 0 without underflow.
inline double log_normal_sf(double z) {
  if (z < 30.0) return std::log(normal_sf(z));
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(z * std::sqrt(2.0 * M_PI)) + std::log(series);
}

// The textbook form multiplies exp(2 shape / mean) by a tiny normal tail and
// overflows once shape / mean is a few hundred.
inline double inverse_gaussian_cdf(double x, double mean, double shape) {
  if (x <= 0.0) return 0.0;
  const double r = std::sqrt(shape / x);
  const double first = normal_cdf(r * (x / mean - 1.0));
  const double second = std::exp(2.0 * shape / mean + log_normal_sf(r * (x / mean + 1.0)));
  return std::min(1.0, first + second);
}
}  // namespace detail

// Inverse Gaussian with fixed shape lambda; theta = -lambda / (2 mu^2).
class InverseGaussianFamily final : public Family {
 public:
  explicit InverseGaussianFamily(double shape) : lambda_(shape) {
    if (!(shape > 0.0)) throw DomainError("inverse gaussian: shape must be > 0");
  }
  std::string name() const override { return "inverse_gaussian"; }
  double shape() const { return lambda_; }
  double psi(double t) const override { return -std::sqrt(-2.0 * lambda_ * t); }
  double psi1(double t) const override { return std::sqrt(lambda_ / (-2.0 * t)); }
  double psi2(double t) const override {
    const double mu = psi1(t);
    return mu * mu * mu / lambda_;
  }
  double theta_hi() const override { return 0.0; }
  double mean_lo() const override { return 0.0; }
  bool has_sum_law() const override { return true; }
  double sum_cdf(int n, double t, double x) const override {
    if (x <= 0.0) return 0.0;
    const double dn = n;
    return detail::inverse_gaussian_cdf(x, dn * psi1(t), dn * dn * lambda_);
  }
  double sample(std::mt19937_64& rng, double t) const override {
    // Michael, Schucany and Haas transformation method.
    const double mu = psi1(t);
    const double y0 = std::normal_distribution<double>()(rng);
    const double y = y0 * y0;
    const double x = mu + mu * mu * y / (2.0 * lambda_) -
                     mu / (2.0 * lambda_) * std::sqrt(4.0 * mu * lambda_ * y + mu * mu * y * y);
    const double u = std::uniform_real_distribution<double>()(rng);
    return u <= mu / (mu + x) ? x : mu * mu / x;
  }
  double theta_of_mean(double mu) const override {
    if (!(mu > 0.0)) throw DegenerateInputError("inverse gaussian: mean must be > 0");
    return -lambda_ / (2.0 * mu * mu);
  }
  double conjugate(double x) const override {
    if (!(x > 0.0)) throw DegenerateInputError("inverse gaussian: mean must be > 0");
    return lambda_ / (2.0 * x);
  }

 private:
  double lambda_;
};

class PoissonFamily final : public Family {
 public:
  std::string name() const override { return "poisson"; }
  double psi(double t) const override { return std::exp(t); }
  double psi1(double t) const override { return std::exp(t); }
  double psi2(double t) const override { return std::exp(t); }
  double mean_lo() const override { return 0.0; }
  bool arithmetic() const override { return true; }
  bool has_sum_law() const override { return true; }
  double sum_cdf(int n, double t, double x) const override {
    if (x < 0.0) return 0.0;
    boost::math::poisson_distribution<double> d(n * std::exp(t));
    return boost::math::cdf(d, std::floor(x));
  }
  double sample(std::mt19937_64& rng, double t) const override {
    return static_cast<double>(std::poisson_distribution<long>(std::exp(t))(rng));
  }
  double theta_of_mean(double mu) const override {
    if (!(mu > 0.0)) throw DegenerateInputError("poisson: segment mean must be > 0");
    return std::log(mu);
  }
  double conjugate(double x) const override {
    if (!(x > 0.0)) throw DegenerateInputError("poisson: segment mean must be > 0");
    return x * std::log(x) - x;
  }
  double conjugate_limit(double x) const override { return x > 0.0 ? x * std::log(x) - x : 0.0; }
};

class BernoulliFamily final : public Family {
 public:
  std::string name() const override { return "bernoulli"; }
  double psi(double t) const override { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
  double psi1(double t) const override { return 1.0 / (1.0 + std::exp(-t)); }
  double psi2(double t) const override {
    const double p = psi1(t);
    return p * (1.0 - p);
  }
  double mean_lo() const override { return 0.0; }
  double mean_hi() const override { return 1.0; }
  bool arithmetic() const override { return true; }
  bool has_sum_law() const override { return true; }
  double sum_cdf(int n, double t, double x) const override {
    if (x < 0.0) return 0.0;
    if (x >= n) return 1.0;
    boost::math::binomial_distribution<double> d(n, psi1(t));
    return boost::math::cdf(d, std::floor(x));
  }
  double sample(std::mt19937_64& rng, double t) const override {
    return std::bernoulli_distribution(psi1(t))(rng) ? 1.0 : 0.0;
  }
  double theta_of_mean(double mu) const override {
    if (!(mu > 0.0 && mu < 1.0)) throw DegenerateInputError("bernoulli: segment mean must lie in (0,1)");
    return std::log(mu / (1.0 - mu));
  }
  double conjugate(double x) const override {
    if (!(x > 0.0 && x < 1.0)) throw DegenerateInputError("bernoulli: segment mean must lie in (0,1)");
    return x * std::log(x) + (1.0 - x) * std::log1p(-x);
  }
  double conjugate_limit(double x) const override {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return conjugate(x);
  }
};

// ---------------------------------------------------------------------------

// Local generalized likelihood ratio l_{i,j,k} on raw observations.
inline double glr_statistic(std::span<const double> x, const Family& fam, long i, long j, long k) {
  detail::check_triple(x.size(), i, j, k);
  auto seg = [&](long a, long c) {
    double s = 0.0;
    for (long t = a; t < c; ++t) s += x[static_cast<std::size_t>(t)];
    const double n = static_cast<double>(c - a);
    return n * fam.conjugate(s / n);
  };
  return seg(i, j) + seg(j, k) - seg(i, k);
}

struct RootPair {
  double theta1 = 0.0;  // parameter of the first n1 observations
  double theta2 = 0.0;  // parameter of the next n2 observations
  bool exists = false;
};

// Both solutions of the root system, one with theta1 < theta < theta2 and its
// mirror with theta2 < theta < theta1. If either is missing at theta the
// smallest theta' > theta where both exist is used and the contribution is
// scaled by P_theta(S_N / N >= psi'(theta')).
struct RootSolution {
  std::array<RootPair, 2> pairs;
  double theta_used = 0.0;
  bool fallback = false;
  double factor = 1.0;
};

namespace detail {
// Solves for the mean of the first block on one side of mu.
inline RootPair solve_side(const Family& fam, double theta, int n1, int n2, double b, bool below) {
  const double N = n1 + n2, mu = fam.psi1(theta);
  const double target = 0.5 * b * b;
  auto g = [&](double mu1) {
    const double mu2 = (N * mu - n1 * mu1) / n2;
    return n1 * fam.kl_term(fam.theta_of_mean(mu1)) + n2 * fam.kl_term(fam.theta_of_mean(mu2)) -
           N * fam.kl_term(theta) - target;
  };
  // mu1 range keeping both block means attainable.
  double lo = fam.mean_lo(), hi = fam.mean_hi();
  if (std::isfinite(fam.mean_hi())) lo = std::max(lo, (N * mu - n2 * fam.mean_hi()) / n1);
  if (std::isfinite(fam.mean_lo())) hi = std::min(hi, (N * mu - n2 * fam.mean_lo()) / n1);
  double near = mu, far;
  if (below) {
    if (std::isfinite(lo)) {
      far = lo + 1e-12 * std::max(1.0, std::abs(lo));
    } else {
      double step = std::sqrt(fam.psi2(theta)) * b / std::sqrt(static_cast<double>(n1));
      far = mu - step;
      for (int it = 0; it < 200 && g(far) < 0.0; ++it) step *= 2.0, far = mu - step;
    }
  } else {
    if (std::isfinite(hi)) {
      far = hi - 1e-12 * std::max(1.0, std::abs(hi));
    } else {
      double step = std::sqrt(fam.psi2(theta)) * b / std::sqrt(static_cast<double>(n1));
      far = mu + step;
      for (int it = 0; it < 200 && g(far) < 0.0; ++it) step *= 2.0, far = mu + step;
    }
  }
  if (!(far > lo - 1e-300 || !std::isfinite(lo))) return {};
  double gf;
  try {
    gf = g(far);
  } catch (const DegenerateInputError&) {
    return {};
  }
  if (!(gf > 0.0)) return {};
  boost::uintmax_t iters = 300;
  auto r = boost::math::tools::bisect(g, std::min(near, far), std::max(near, far),
                                      boost::math::tools::eps_tolerance<double>(52), iters);
  const double mu1 = 0.5 * (r.first + r.second);
  const double mu2 = (N * mu - n1 * mu1) / n2;
  return {fam.theta_of_mean(mu1), fam.theta_of_mean(mu2), true};
}
}  // namespace detail

inline RootSolution solve_root_system(const Family& fam, double theta, int n1, int n2, double b) {
  if (!fam.in_domain(theta)) throw DomainError("solve_root_system: theta outside the natural domain");
  if (n1 < 1 || n2 < 1) throw ValidationError("solve_root_system: n1, n2 must be >= 1");
  if (!(b > 0.0)) throw DomainError("solve_root_system: b must be > 0");
  auto attempt = [&](double th) {
    RootSolution s;
    s.theta_used = th;
    s.pairs[0] = detail::solve_side(fam, th, n1, n2, b, true);
    s.pairs[1] = detail::solve_side(fam, th, n1, n2, b, false);
    return s;
  };
  auto ok = [](const RootSolution& s) { return s.pairs[0].exists && s.pairs[1].exists; };
  RootSolution s = attempt(theta);
  if (ok(s)) return s;

  // Walk theta' upward until both pairs exist, then bisect the boundary.
  double lo = theta, hi = theta;
  double step = 0.05 * std::max(1.0, std::abs(theta));
  RootSolution good;
  bool found = false;
  for (int it = 0; it < 200; ++it) {
    double cand = hi + step;
    if (cand >= fam.theta_hi()) cand = 0.5 * (hi + fam.theta_hi());
    if (!(cand > hi)) break;
    RootSolution t = attempt(cand);
    if (ok(t)) {
      good = t;
      found = true;
      hi = cand;
      break;
    }
    lo = cand;
    hi = cand;
    step *= 2.0;
  }
  if (!found)
    throw NumericalError("solve_root_system: no theta' > theta with solutions (searched up to " +
                         std::to_string(hi) + ")");
  for (int it = 0; it < 100 && hi - lo > 1e-10 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    RootSolution t = attempt(mid);
    if (ok(t)) {
      good = t;
      hi = mid;
    } else {
      lo = mid;
    }
  }
  good.fallback = true;
  const int N = n1 + n2;
  const double thr = N * fam.psi1(good.theta_used);
  if (fam.has_sum_law()) {
    // P(S_N >= thr): for lattice laws include the atom at thr.
    const double below = fam.arithmetic() ? fam.sum_cdf(N, theta, std::ceil(thr) - 1.0)
                                          : fam.sum_cdf(N, theta, thr);
    good.factor = 1.0 - below;
  } else {
    throw ValidationError("solve_root_system: fallback needs the exact law of S_n");
  }
  return good;
}

struct ACoefficient {
  double value = 1.0;
  double tail_bound = 0.0;  // estimated truncation error of the exponent
  int terms = 0;
};

namespace detail {
// int_z^inf t^{-1} Phi(-t) dt
inline double log_weighted_normal_tail(double z) {
  if (z > 40.0) return 0.0;
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate([](double t) { return normal_sf(t) / t; }, z,
                              std::numeric_limits<double>::infinity());
}
}  // namespace detail

// a(theta1, theta2) = exp(-sum_n n^{-1} E_{theta2} exp(-[(theta2-theta1) S_n - n(psi(theta2)-psi(theta1))]^+)).
// By a change of measure each expectation is P_{theta2}(S_n <= c_n) + P_{theta1}(S_n > c_n)
// with c_n = n (psi(theta2) - psi(theta1)) / (theta2 - theta1).
inline ACoefficient a_coefficient(const Family& fam, double theta1, double theta2, double tol = 1e-8,
                                  int exact_terms = 400) {
  if (!(theta1 < theta2)) throw DomainError("a_coefficient: need theta1 < theta2");
  if (!fam.has_sum_law()) throw ValidationError("a_coefficient: " + fam.name() + " has no exact law for S_n");
  if (fam.arithmetic())
    throw ValidationError("a_coefficient: " + fam.name() +
                          " is arithmetic; use the signed-root normal scores instead");
  const double c1 = (fam.psi(theta2) - fam.psi(theta1)) / (theta2 - theta1);
  double sum = 0.0, prev = 0.0, last = 0.0;
  int n = 1;
  for (; n <= exact_terms; ++n) {
    const double c = n * c1;
    const double term = (fam.sum_cdf(n, theta2, c) + 1.0 - fam.sum_cdf(n, theta1, c)) / n;
    sum += term;
    prev = last;
    last = term;
    if (term < tol * sum && n > 2) break;
  }
  ACoefficient out;
  out.terms = std::min(n, exact_terms);
  if (n > exact_terms) {
    // Normal approximation for the remaining terms, summed as an integral.
    const double a2 = (fam.psi1(theta2) - c1) / std::sqrt(fam.psi2(theta2));
    const double a1 = (c1 - fam.psi1(theta1)) / std::sqrt(fam.psi2(theta1));
    const double z0 = std::sqrt(exact_terms + 0.5);
    const double tail = 2.0 * (detail::log_weighted_normal_tail(a2 * z0) + detail::log_weighted_normal_tail(a1 * z0));
    sum += tail;
    out.tail_bound = 0.1 * tail;
  } else {
    const double r = prev > 0.0 ? last / prev : 0.0;
    out.tail_bound = r < 1.0 ? last * r / (1.0 - r) : last;
  }
  out.value = std::exp(-sum);
  return out;
}

// phi(b) sum_{n1,n2} (m-n1-n2) sum_pairs a(.)a(.)a(.) / [n1(theta1-theta)^2 psi''(theta1) + n2(...)]^{1/2}.
inline TailResult pvalue_expfam(const Family& fam, double theta, int m, int m0, int m1, double b,
                                ConstraintMode mode = ConstraintMode::per_side) {
  if (m < 3 || m0 < 1 || m1 < m0) throw ValidationError("pvalue_expfam: need m >= 3, 1 <= m0 <= m1");
  if (!(b > 0.0)) throw DomainError("pvalue_expfam: b must be > 0");
  if (!fam.in_domain(theta)) throw DomainError("pvalue_expfam: theta outside the natural domain");
  auto a = [&](double x, double y) {
    return a_coefficient(fam, std::min(x, y), std::max(x, y)).value;
  };
  double acc = 0.0;
  long terms = 0;
  for (int n1 = m0; n1 <= m1; ++n1) {
    for (int n2 = m0; n2 <= m1 && n1 + n2 <= m; ++n2) {
      if (mode == ConstraintMode::total && n1 + n2 > m1) break;
      const auto sol = solve_root_system(fam, theta, n1, n2, b);
      const double th = sol.theta_used;
      double inner = 0.0;
      for (const auto& p : sol.pairs) {
        const double d1 = p.theta1 - th, d2 = p.theta2 - th;
        const double den = std::sqrt(n1 * d1 * d1 * fam.psi2(p.theta1) + n2 * d2 * d2 * fam.psi2(p.theta2));
        inner += a(p.theta1, th) * a(p.theta1, p.theta2) * a(th, p.theta2) / den;
      }
      acc += (m - n1 - n2) * inner * sol.factor;
      ++terms;
    }
  }
  return detail::finish(normal_pdf(b) * acc, b, "expfam:" + fam.name(), terms);
}

// ---------------------------------------------------------------------------
// Signed-root normal scores.

// Groups consecutive observations (group_size of them, the last group may be
// shorter) and maps each group to the signed square root of its deviance
// against the overall maximum-likelihood fit. The result has unit variance.
inline Sequence signed_root_transform(std::span<const double> x, const Family& fam, int group_size = 1) {
  if (x.empty()) throw ValidationError("signed_root_transform: empty input");
  if (group_size < 1) throw ValidationError("signed_root_transform: group size must be >= 1");
  double total = 0.0;
  for (double v : x) total += v;
  const double mean0 = total / static_cast<double>(x.size());
  const double theta0 = fam.theta_of_mean(mean0);
  const double psi0 = fam.psi(theta0);
  std::vector<double> scores;
  for (std::size_t start = 0; start < x.size(); start += static_cast<std::size_t>(group_size)) {
    const std::size_t end = std::min(x.size(), start + static_cast<std::size_t>(group_size));
    double s = 0.0;
    for (std::size_t t = start; t < end; ++t) s += x[t];
    const double n = static_cast<double>(end - start);
    const double xb = s / n;
    const double dev = 2.0 * n * (fam.conjugate_limit(xb) - (theta0 * xb - psi0));
    const double r = std::sqrt(std::max(dev, 0.0));
    scores.push_back(xb > mean0 ? r : (xb < mean0 ? -r : 0.0));
  }
  return Sequence::with_known_variance(std::move(scores), 1.0);
}

// Precomputed n K(xbar) over all segments up to a length; l_{i,j,k} is then
// G(i,j) + G(j,k) - G(i,k).
class GlrTable {
 public:
  GlrTable(std::span<const double> x, const Family& fam, long max_len)
      : m_(static_cast<long>(x.size())), L_(std::min(max_len, m_)) {
    std::vector<double> S(static_cast<std::size_t>(m_ + 1), 0.0);
    for (long t = 0; t < m_; ++t) S[t + 1] = S[t] + x[static_cast<std::size_t>(t)];
    g_.assign(static_cast<std::size_t>((m_ + 1) * (L_ + 1)), 0.0);
    for (long a = 0; a <= m_; ++a)
      for (long n = 1; n <= L_ && a + n <= m_; ++n)
        g_[idx(a, n)] = n * fam.conjugate_limit((S[a + n] - S[a]) / n);
  }
  double operator()(long a, long c) const { return g_[idx(a, c - a)]; }
  const double* row(long a) const { return &g_[idx(a, 0)]; }
  long max_len() const { return L_; }

 private:
  std::size_t idx(long a, long n) const { return static_cast<std::size_t>(a * (L_ + 1) + n); }
  long m_, L_;
  std::vector<double> g_;
};

// Null scan: max over admissible (i,j,k) of l_{i,j,k} >= b^2/2.
inline bool glr_scan_exceeds(std::span<const double> x, const Family& fam, double b, int m0, int m1,
                             ConstraintMode mode = ConstraintMode::per_side) {
  const long m = static_cast<long>(x.size());
  const long side = m1 > 0 ? m1 : m;
  const long span = mode == ConstraintMode::total && m1 > 0 ? m1 : std::min(m, 2 * side);
  const GlrTable G(x, fam, span);
  const double target = 0.5 * b * b;
  for (long j = 1; j < m; ++j) {
    const double* gj = G.row(j);
    for (long i = std::max(0L, j - side); i <= j - m0; ++i) {
      const double left = G(i, j);
      const double* gi = G.row(i);
      long k_max = std::min(m, j + side);
      k_max = std::min(k_max, i + span);
      double mx = -std::numeric_limits<double>::infinity();
#pragma omp simd reduction(max : mx)
      for (long k = j + m0; k <= k_max; ++k) {
        const double v = gj[k - j] - gi[k - i];
        mx = mx > v ? mx : v;
      }
      if (left + mx >= target) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Mean-and-variance segmentation.

struct MeanVarConfig {
  double threshold = 0.0;  // 0: calibrate by simulation
  double c = kMeanVarDefaultC;
  int m1 = 0;
  bool multiscale = false;  // subtract [4 log(3m / min(j-i, k-j))]^{1/2}
  int calibration_reps = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

struct MeanVarCalibration {
  double analytic_initial = 0.0;  // paired-change approximation with d = 2
  double calibrated = 0.0;        // empirical (1 - alpha) quantile of the null maximum
  int reps = 0;
};

namespace detail {
// Tables for z_meanvar with the c-correction on noise-free index arithmetic.
class MeanVarTable {
 public:
  MeanVarTable(std::span<const double> x, double c) : m_(static_cast<long>(x.size())), c_(c), sums_(x) {}
  double value(long i, long j, long k) const {
    const double n1 = (j - i) - 0.5 * c_, n2 = (k - j) - 0.5 * c_, n = (k - i) - c_;
    if (!(n1 > 0.0 && n2 > 0.0 && n > 0.0)) return 0.0;
    const double ss1 = sums_.centred_ss(i, j), ss2 = sums_.centred_ss(j, k), ss = sums_.centred_ss(i, k);
    if (!(ss1 > 0.0 && ss2 > 0.0 && ss > 0.0)) return 0.0;
    return -n1 * std::log(ss1 / n1) - n2 * std::log(ss2 / n2) + n * std::log(ss / n);
  }

 private:
  long m_;
  double c_;
  PartialSums sums_;
};

inline double meanvar_penalty(double m, long u, long v) {
  return std::sqrt(4.0 * std::log(3.0 * m / static_cast<double>(std::min(u, v))));
}

inline double meanvar_null_max(std::span<const double> x, const MeanVarConfig& cfg) {
  const long m = static_cast<long>(x.size());
  const MeanVarTable T(x, cfg.c);
  const long side = cfg.m1 > 0 ? cfg.m1 : m;
  double best = 0.0;
  for (long j = 2; j <= m - 2; ++j)
    for (long i = std::max(0L, j - side); i <= j - 2; ++i)
      for (long k = j + 2; k <= std::min(m, j + side); ++k) {
        double z = std::sqrt(std::max(T.value(i, j, k), 0.0));
        if (cfg.multiscale) z -= meanvar_penalty(static_cast<double>(m), j - i, k - j);
        best = std::max(best, z);
      }
  return best;
}
}  // namespace detail

// Null-calibrated threshold for the mean-and-variance statistic at length m.
inline MeanVarCalibration calibrate_meanvar(int m, const MeanVarConfig& cfg) {
  if (m < 5) throw ValidationError("calibrate_meanvar: need m >= 5");
  if (cfg.calibration_reps < 10) throw ValidationError("calibrate_meanvar: need at least 10 reps");
  MeanVarCalibration out;
  out.reps = cfg.calibration_reps;
  try {
    out.analytic_initial = solve_threshold(
        [&] {
          ScanSpec s;
          s.statistic = Statistic::cbs_multi;
          s.m = m;
          s.d = 2;
          return s;
        }(),
        cfg.alpha).b;
  } catch (const Error&) {
    out.analytic_initial = 0.0;
  }
  std::mt19937_64 rng(cfg.seed ^ 0x6d65616e766172ULL);
  std::normal_distribution<double> N;
  std::vector<double> maxima;
  std::vector<double> x(static_cast<std::size_t>(m));
  for (int r = 0; r < cfg.calibration_reps; ++r) {
    for (auto& v : x) v = N(rng);
    maxima.push_back(detail::meanvar_null_max(x, cfg));
  }
  std::sort(maxima.begin(), maxima.end());
  const auto q = static_cast<std::size_t>(std::ceil((1.0 - cfg.alpha) * maxima.size())) - 1;
  out.calibrated = maxima[std::min(q, maxima.size() - 1)];
  return out;
}

struct MeanVarResult {
  Segmentation segmentation;
  MeanVarCalibration calibration;
};

// Shortest-background thresholding of [z_meanvar]^{1/2} with non-overlapping
// backgrounds; m0 = 2.
inline MeanVarResult segment_meanvar(const Sequence& seq, const MeanVarConfig& cfg) {
  const long m = static_cast<long>(seq.size());
  if (m < 5) throw ValidationError("segment_meanvar: need m >= 5");
  MeanVarResult out;
  double b = cfg.threshold;
  if (!(b > 0.0)) {
    out.calibration = calibrate_meanvar(static_cast<int>(m), cfg);
    b = out.calibration.calibrated;
  }
  const detail::MeanVarTable T(seq.values(), cfg.c);
  const auto& s = seq.sums();
  auto stat = [&](long i, long j, long k) {
    double z = std::sqrt(std::max(T.value(i, j, k), 0.0));
    if (cfg.multiscale) z -= detail::meanvar_penalty(static_cast<double>(m), j - i, k - j);
    if (z <= 0.0) return 0.0;
    return detail::lr_numerator(s, i, j, k) < 0.0 ? -z : z;
  };
  const detail::BackgroundLimits lim{2, cfg.m1, ConstraintMode::per_side};
  auto& seg = out.segmentation;
  seg.detections = detail::background_segmentation(m, lim, Selection::shortest_background,
                                                   Speedup::exact, b, stat);
  for (auto& d : seg.detections) d.delta_hat = delta_hat(s, d.i, d.j, d.k);
  seg.procedure = "meanvar";
  seg.threshold = b;
  seg.sigma_used = 0.0;
  return out;
}

}  // namespace cpseg
