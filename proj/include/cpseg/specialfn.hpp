#pragma once

// Scalar special functions shared by the tail approximations, and the law of
// sums of overshoot variables W_k (optionally plus half a chi-square).

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "cpseg/error.hpp"

namespace cpseg {

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Upper tail 1 - Phi(x), accurate for large x.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// Random-walk overshoot correction
//   nu(x) = (Phi(y) - 1/2) / [y (y Phi(y) + phi(y))],  y = x/2,
// continuously extended by nu(0) = 1.
inline double nu(double x) {
  if (!(x >= 0.0)) throw DomainError("nu: argument must be >= 0, got " + std::to_string(x));
  if (x < 1e-6) return 1.0 - 0.5835 * x;  // slope of the closed form at 0
  const double y = 0.5 * x;
  const double Phi = normal_cdf(y);
  return (Phi - 0.5) / (y * (y * Phi + normal_pdf(y)));
}

inline double chi2_pdf(double x, int d) {
  if (d < 1) throw DomainError("chi2_pdf: degrees of freedom must be >= 1");
  if (x < 0.0) throw DomainError("chi2_pdf: x must be >= 0");
  const double k = 0.5 * d;
  if (x == 0.0) {
    if (d == 1) return std::numeric_limits<double>::infinity();
    return d == 2 ? 0.5 : 0.0;
  }
  return std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::numbers::ln2 - std::lgamma(k));
}

// Noncentral chi-square density as a Poisson(lambda/2) mixture of central
// densities. Summation runs outward from the Poisson mode and stops when a
// term falls below 1e-14 of the running sum.
inline double noncentral_chi2_pdf(double x, int d, double lambda) {
  if (d < 1) throw DomainError("noncentral_chi2_pdf: degrees of freedom must be >= 1");
  if (lambda < 0.0) throw DomainError("noncentral_chi2_pdf: noncentrality must be >= 0");
  if (x < 0.0) throw DomainError("noncentral_chi2_pdf: x must be >= 0");
  if (lambda == 0.0) return chi2_pdf(x, d);
  if (x == 0.0) return d == 1 ? std::numeric_limits<double>::infinity()
                              : (d == 2 ? 0.5 * std::exp(-0.5 * lambda) : 0.0);
  const double half = 0.5 * lambda;
  const long mode = static_cast<long>(std::floor(half));
  auto term = [&](long j) {
    const double logw = -half + j * std::log(half) - std::lgamma(j + 1.0);
    const double k = 0.5 * d + j;
    return std::exp(logw + (k - 1.0) * std::log(x) - 0.5 * x - k * std::numbers::ln2 -
                    std::lgamma(k));
  };
  double sum = term(mode);
  for (long j = mode + 1;; ++j) {
    const double t = term(j);
    sum += t;
    if (t < 1e-14 * sum && j > mode + 2) break;
    if (j > mode + 100000) break;
  }
  for (long j = mode - 1; j >= 0; --j) {
    const double t = term(j);
    sum += t;
    if (t < 1e-14 * sum) break;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Overshoot laws.

enum class WSides {
  two,  // P(W > x) = 2 nu e^{-x} - nu^2 e^{-2x}: maximum of two one-sided walks
  one,  // P(W > x) = nu e^{-x}
};

struct WLaw {
  double nu_value = 1.0;
  WSides sides = WSides::two;

  static WLaw from_delta(double delta, WSides s = WSides::two) {
    if (delta == 0.0) throw DomainError("WLaw: zero change size gives a degenerate law");
    return {nu(std::abs(delta)), s};
  }

  double atom() const {
    return sides == WSides::two ? (1.0 - nu_value) * (1.0 - nu_value) : 1.0 - nu_value;
  }
  double survival(double x) const {
    if (x < 0.0) return 1.0;
    return sides == WSides::two
               ? 2.0 * nu_value * std::exp(-x) - nu_value * nu_value * std::exp(-2.0 * x)
               : nu_value * std::exp(-x);
  }
  // E exp(i t W)
  std::complex<double> cf(double t) const {
    using C = std::complex<double>;
    const C it(0.0, t);
    if (sides == WSides::two)
      return atom() + 2.0 * nu_value / (1.0 - it) - 2.0 * nu_value * nu_value / (2.0 - it);
    return atom() + nu_value / (1.0 - it);
  }
  double mean() const {
    return sides == WSides::two ? 2.0 * nu_value - 0.5 * nu_value * nu_value : nu_value;
  }

  void validate() const {
    if (!(nu_value > 0.0 && nu_value <= 1.0))
      throw DomainError("WLaw: nu must lie in (0, 1]");
  }
};

struct SumWSpec {
  std::vector<WLaw> w_laws;
  int chi_df = 0;  // degrees of freedom of the added (1/2) chi-square; 0 for none

  void validate() const {
    if (chi_df < 0) throw DomainError("SumWSpec: chi_df must be >= 0");
    for (const auto& w : w_laws) w.validate();
  }
};

// Distribution of sum_k W_k + chi2_df / 2, tabulated once on a uniform grid
// by successive convolution of the CDF with each W law. Each W contributes
// an atom at zero plus an exponential mixture, so convolution with it is an
// O(n) recursion per exponential component (F assumed linear inside cells).
class SumWDistribution {
 public:
  explicit SumWDistribution(SumWSpec spec, double step = 1e-3) : spec_(std::move(spec)), h_(step) {
    spec_.validate();
    double mean = 0.5 * spec_.chi_df, var = 0.5 * spec_.chi_df;
    for (const auto& w : spec_.w_laws) {
      mean += w.mean();
      var += 2.0 * w.mean();  // generous: E W^2 <= 2 E W for these laws
    }
    upper_ = std::max(60.0, mean + 12.0 * std::sqrt(var) + 40.0);
    const auto n = static_cast<std::size_t>(std::ceil(upper_ / h_)) + 1;
    cdf_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) * h_;
      cdf_[i] = spec_.chi_df > 0 ? boost::math::gamma_p(0.5 * spec_.chi_df, x) : 1.0;
    }
    for (const auto& w : spec_.w_laws) convolve(w);
  }

  const SumWSpec& spec() const { return spec_; }
  double grid_upper() const { return upper_; }

  // P(X > b) from the tabulated CDF (linear interpolation).
  double tail(double b) const {
    if (b < 0.0) return 1.0;
    const double pos = b / h_;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= cdf_.size()) return 0.0;
    const double f = pos - static_cast<double>(i);
    return std::clamp(1.0 - ((1.0 - f) * cdf_[i] + f * cdf_[i + 1]), 0.0, 1.0);
  }

  // P(X > b) by Gil-Pelaez inversion of the characteristic function, applied
  // to the absolutely continuous part (the atom at 0 is handled exactly).
  double tail_by_inversion(double b) const {
    if (b < 0.0) return 1.0;
    double atom = 0.0;
    if (spec_.chi_df == 0) {
      atom = 1.0;
      for (const auto& w : spec_.w_laws) atom *= w.atom();
    }
    if (b == 0.0) return 1.0 - atom;
    auto integrand = [&](double t) {
      std::complex<double> phi = spec_.chi_df > 0
                                     ? std::pow(std::complex<double>(1.0, -t), -0.5 * spec_.chi_df)
                                     : std::complex<double>(1.0, 0.0);
      for (const auto& w : spec_.w_laws) phi *= w.cf(t);
      phi -= atom;
      return (std::exp(std::complex<double>(0.0, -t * b)) * phi).imag() / t;
    };
    auto envelope = [&](double t) {
      std::complex<double> phi = spec_.chi_df > 0
                                     ? std::pow(std::complex<double>(1.0, -t), -0.5 * spec_.chi_df)
                                     : std::complex<double>(1.0, 0.0);
      for (const auto& w : spec_.w_laws) phi *= w.cf(t);
      return std::abs(phi - atom) / t;
    };
    // Panels span half a period of exp(-i t b); successive partial sums
    // alternate around the limit, so the last two are averaged.
    const double panel = std::min(1.0, std::numbers::pi / b);
    double sum = 0.0, prev = 0.0;
    constexpr std::size_t max_panels = 400000;
    for (std::size_t k = 0; k < max_panels; ++k) {
      const double a = static_cast<double>(k) * panel;
      prev = sum;
      sum += boost::math::quadrature::gauss<double, 20>::integrate(integrand, a, a + panel);
      if (k > 8 && envelope(a + panel) < 1e-10) break;
    }
    const double integral = 0.5 * (sum + prev);
    return std::clamp(0.5 * (1.0 - atom) + integral / std::numbers::pi, 0.0, 1.0);
  }

  // Smallest b with tail(b) <= alpha (bisection on the tabulated tail).
  double quantile(double alpha) const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("SumWDistribution: alpha must be in (0,1)");
    if (tail(0.0) <= alpha) return 0.0;
    double lo = 0.0, hi = upper_;
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
      const double mid = 0.5 * (lo + hi);
      (tail(mid) > alpha ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  void convolve(const WLaw& w) {
    struct Component {
      double weight, rate;
    };
    std::vector<Component> comps;
    if (w.sides == WSides::two)
      comps = {{2.0 * w.nu_value, 1.0}, {-2.0 * w.nu_value * w.nu_value, 2.0}};
    else
      comps = {{w.nu_value, 1.0}};
    std::vector<double> out(cdf_.size());
    for (std::size_t i = 0; i < cdf_.size(); ++i) out[i] = w.atom() * cdf_[i];
    for (const auto& c : comps) {
      // C(x) = int_0^x F(s) e^{-rate (x - s)} ds
      const double e = std::exp(-c.rate * h_);
      const double w_all = (1.0 - e) / c.rate;
      const double w_hi = (h_ / c.rate - (1.0 - e) / (c.rate * c.rate)) / h_;
      const double w_lo = w_all - w_hi;
      double conv = 0.0;
      for (std::size_t i = 1; i < cdf_.size(); ++i) {
        conv = e * conv + w_lo * cdf_[i - 1] + w_hi * cdf_[i];
        out[i] += c.weight * conv;
      }
    }
    cdf_ = std::move(out);
  }

  SumWSpec spec_;
  double h_;
  double upper_ = 60.0;
  std::vector<double> cdf_;
};

// Agreement demanded between the grid and inversion evaluators.
inline constexpr double kSumWConsistencyTol = 5e-4;

// P(sum W_k + chi2_df/2 > b). Evaluated twice (grid convolution and
// characteristic-function inversion); disagreement beyond 5e-4 throws
// NumericalError. Returns the grid value.
inline double sumw_tail(const SumWSpec& spec, double b) {
  const SumWDistribution dist(spec);
  const double grid = dist.tail(b);
  const double inv = dist.tail_by_inversion(b);
  if (std::abs(grid - inv) > kSumWConsistencyTol)
    throw NumericalError("sumw_tail: grid convolution (" + std::to_string(grid) +
                         ") and inversion (" + std::to_string(inv) + ") disagree at b=" +
                         std::to_string(b));
  return grid;
}

}  // namespace cpseg
