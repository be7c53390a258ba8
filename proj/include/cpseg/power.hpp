#pragma once

// Power approximations: marginal and local power of the local-statistic
// procedure, and the power of the paired-change (CBS) scan.

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cpseg/error.hpp"
#include "cpseg/specialfn.hpp"

namespace cpseg {

// h1 = j* - i*, h2 = k* - j* (the two sides of the largest background).
struct PowerSpec {
  double delta = 0.0;
  double h1 = 1.0, h2 = 1.0;
  double b = 0.0;

  void validate() const {
    if (!(h1 >= 1.0 && h2 >= 1.0)) throw ValidationError("PowerSpec: h1, h2 must be >= 1");
    if (!(b > 0.0)) throw ValidationError("PowerSpec: threshold must be > 0");
  }
  double harmonic() const { return h1 * h2 / (h1 + h2); }
};

inline double marginal_power(const PowerSpec& p) {
  p.validate();
  return normal_sf(p.b - std::abs(p.delta) * std::sqrt(p.harmonic()));
}

namespace detail {
// 2 int_0^{b^2/2} P(sum W > b^2/2 - x) f(2x; 1, mu^2) dx after x = s^2/2:
// int_0^b P(sum W > (b^2 - s^2)/2) [phi(s - mu) + phi(s + mu)] ds.
inline double perturbation_integral(const SumWDistribution& dist, double b, double mu) {
  auto f = [&](double s) {
    return dist.tail(0.5 * (b * b - s * s)) * (normal_pdf(s - mu) + normal_pdf(s + mu));
  };
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, b, 15, 1e-6, &err);
  if (!std::isfinite(v)) throw NumericalError("power: quadrature did not converge");
  return v;
}
}  // namespace detail

// Marginal power plus the contribution of local perturbations of (i*, j*, k*).
inline double local_power(const PowerSpec& p) {
  p.validate();
  const double Delta = p.b * std::sqrt(1.0 / p.h1 + 1.0 / p.h2);
  SumWSpec spec;
  spec.w_laws = {WLaw::from_delta(Delta, WSides::two),
                 WLaw::from_delta(Delta / (1.0 + p.h1 / p.h2), WSides::one),
                 WLaw::from_delta(Delta / (1.0 + p.h2 / p.h1), WSides::one)};
  const SumWDistribution dist(spec);
  const double mu = std::abs(p.delta) * std::sqrt(p.harmonic());
  return std::clamp(marginal_power(p) + detail::perturbation_integral(dist, p.b, mu), 0.0, 1.0);
}

// Power of the paired-change scan for a pulse of n0 points and height delta.
inline double cbs_power(double delta, double n0, double b) {
  if (!(n0 >= 1.0)) throw ValidationError("cbs_power: n0 must be >= 1");
  if (!(b > 0.0)) throw ValidationError("cbs_power: threshold must be > 0");
  const double Delta = b / std::sqrt(n0);
  SumWSpec spec;
  spec.w_laws = {WLaw::from_delta(Delta), WLaw::from_delta(Delta)};
  const SumWDistribution dist(spec);
  const double mu = std::abs(delta) * std::sqrt(n0);
  return std::clamp(normal_cdf(mu - b) + detail::perturbation_integral(dist, b, mu), 0.0, 1.0);
}

}  // namespace cpseg
