#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cpseg/specialfn.hpp"

using namespace cpseg;

namespace {
// Exact overshoot constant: 2 x^-2 exp(-2 sum n^-1 Phi(-x sqrt(n) / 2)).
double nu_series(double x) {
  double s = 0.0;
  for (int n = 1; n < 200000; ++n) {
    const double t = normal_cdf(-0.5 * x * std::sqrt(static_cast<double>(n))) / n;
    s += t;
    if (t < 1e-16) break;
  }
  return 2.0 / (x * x) * std::exp(-2.0 * s);
}
}  // namespace

TEST(Normal, MatchesBoost) {
  boost::math::normal_distribution<double> N;
  for (double x : {-8.0, -3.3, -1.0, 0.0, 0.4, 2.5, 7.0}) {
    EXPECT_NEAR(normal_pdf(x), boost::math::pdf(N, x), 1e-15);
    EXPECT_NEAR(normal_cdf(x), boost::math::cdf(N, x), 1e-15);
    EXPECT_NEAR(normal_sf(x), boost::math::cdf(boost::math::complement(N, x)), 1e-15);
  }
}

TEST(Nu, LimitAtZero) {
  EXPECT_DOUBLE_EQ(nu(0.0), 1.0);
  EXPECT_NEAR(nu(1e-5), 1.0, 1e-5);
  EXPECT_NEAR(nu(1e-4), 1.0, 1e-4);
}

TEST(Nu, SmallArgumentExponentialForm) {
  // exp(-0.583 x) tracks the exact constant near 0; the closed form lags by O(x^2).
  EXPECT_NEAR(nu_series(0.1), std::exp(-0.583 * 0.1), 1e-4);
  EXPECT_NEAR(nu(0.1), std::exp(-0.583 * 0.1), 5e-3);
}

TEST(Nu, LargeArgumentAsymptote) { EXPECT_NEAR(50.0 * 50.0 * nu(50.0) / 2.0, 1.0, 0.02); }

TEST(Nu, StrictlyDecreasingInUnitInterval) {
  double prev = nu(0.0);
  for (double x = 0.01; x < 30.0; x += 0.01) {
    const double v = nu(x);
    ASSERT_LT(v, prev) << x;
    ASSERT_GT(v, 0.0);
    prev = v;
  }
}

TEST(Nu, CloseToExactSeries) {
  for (double x : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0})
    EXPECT_NEAR(nu(x) / nu_series(x), 1.0, 0.025) << x;
}

TEST(Nu, RejectsNegative) { EXPECT_THROW(nu(-0.1), DomainError); }

TEST(Chi2, OneDfIdentityWithNormal) {
  const double b = 4.71;
  EXPECT_NEAR(chi2_pdf(b * b, 1) * b, normal_pdf(b), 1e-12);
}

TEST(Chi2, MatchesBoost) {
  for (int d : {1, 2, 3, 5, 8})
    for (double x : {0.3, 1.0, 4.0, 11.0}) {
      boost::math::chi_squared_distribution<double> c(d);
      EXPECT_NEAR(chi2_pdf(x, d), boost::math::pdf(c, x), 1e-13);
    }
}

TEST(NoncentralChi2, ZeroNoncentralityReduces) {
  for (double x : {0.5, 2.0, 9.0}) EXPECT_NEAR(noncentral_chi2_pdf(x, 1, 0.0), chi2_pdf(x, 1), 1e-12);
}

TEST(NoncentralChi2, MatchesBoost) {
  for (int d : {1, 3})
    for (double lam : {0.5, 4.0, 25.0})
      for (double x : {0.2, 3.0, 15.0, 40.0}) {
        boost::math::non_central_chi_squared_distribution<double> c(d, lam);
        EXPECT_NEAR(noncentral_chi2_pdf(x, d, lam), boost::math::pdf(c, x), 1e-10);
      }
}

TEST(NoncentralChi2, IntegratesToOne) {
  // Substitute x = s^2 to remove the integrable singularity at 0.
  auto f = [](double s) { return 2.0 * s * noncentral_chi2_pdf(s * s, 1, 4.0); };
  const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 12.0, 20, 1e-12);
  EXPECT_NEAR(v, 1.0, 1e-8);
}

TEST(NoncentralChi2, DomainErrors) {
  EXPECT_THROW(noncentral_chi2_pdf(1.0, 0, 1.0), DomainError);
  EXPECT_THROW(noncentral_chi2_pdf(1.0, 1, -1.0), DomainError);
  EXPECT_THROW(chi2_pdf(-1.0, 2), DomainError);
}

TEST(WLaw, AtomAndSurvivalAtZero) {
  const WLaw w{0.6, WSides::two};
  EXPECT_NEAR(w.atom(), 0.16, 1e-15);
  EXPECT_NEAR(w.survival(0.0), 2 * 0.6 - 0.36, 1e-15);
  EXPECT_NEAR(w.atom() + w.survival(0.0), 1.0, 1e-15);
}

TEST(WLaw, SurvivalNonincreasing) {
  const WLaw w{0.9, WSides::two};
  double prev = w.survival(0.0);
  for (double x = 0.05; x < 20; x += 0.05) {
    ASSERT_LE(w.survival(x), prev);
    prev = w.survival(x);
  }
}

TEST(WLaw, SamplingOracle) {
  // Two-sided W is the larger of two independent one-sided overshoots,
  // each zero w.p. 1 - nu and otherwise standard exponential.
  const double v = 0.55;
  const WLaw w{v, WSides::two};
  std::mt19937_64 rng(7);
  std::bernoulli_distribution hit(v);
  std::exponential_distribution<double> E(1.0);
  const int n = 1000000;
  int c0 = 0, c1 = 0, c2 = 0, c4 = 0;
  for (int r = 0; r < n; ++r) {
    const double a = hit(rng) ? E(rng) : 0.0, b = hit(rng) ? E(rng) : 0.0;
    const double x = std::max(a, b);
    c0 += x > 0;
    c1 += x > 1;
    c2 += x > 2;
    c4 += x > 4;
  }
  auto check = [&](int c, double x) {
    const double p = w.survival(x), se = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(static_cast<double>(c) / n, p, 3 * se) << x;
  };
  check(c0, 0.0);
  check(c1, 1.0);
  check(c2, 2.0);
  check(c4, 4.0);
}

TEST(SumW, ChiSquareOnly) {
  SumWSpec s{{}, 2};
  EXPECT_NEAR(sumw_tail(s, 3.0), std::exp(-3.0), 1e-6);
}

TEST(SumW, MonteCarloOracle) {
  SumWSpec spec{{WLaw::from_delta(2.13), WLaw::from_delta(1.33)}, 3};
  const double b = 6.4;
  const double p = sumw_tail(spec, b);
  std::mt19937_64 rng(11);
  std::exponential_distribution<double> E(1.0);
  std::chi_squared_distribution<double> C(3);
  const int n = 1000000;
  int hits = 0;
  for (int r = 0; r < n; ++r) {
    double x = 0.5 * C(rng);
    for (const auto& w : spec.w_laws) {
      std::bernoulli_distribution hit(w.nu_value);
      const double a = hit(rng) ? E(rng) : 0.0, c = hit(rng) ? E(rng) : 0.0;
      x += std::max(a, c);
    }
    hits += x > b;
  }
  const double se = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(static_cast<double>(hits) / n, p, 3 * se);
}

TEST(SumW, GridAgreesWithInversion) {
  for (int M : {1, 3, 8})
    for (double v : {0.2, 0.5, 0.9}) {
      SumWSpec s;
      for (int k = 0; k < M; ++k) s.w_laws.push_back({v, WSides::two});
      s.chi_df = M + 1;
      const SumWDistribution d(s);
      for (double b : {0.5, 2.0, 5.0, 9.0, 14.0, 20.0})
        EXPECT_NEAR(d.tail(b), d.tail_by_inversion(b), kSumWConsistencyTol) << M << " " << v << " " << b;
    }
}

TEST(SumW, TauOnlyAgreement) {
  SumWSpec s{{WLaw{0.3, WSides::two}, WLaw{0.7, WSides::two}, WLaw{0.5, WSides::one}}, 0};
  const SumWDistribution d(s);
  for (double b : {0.1, 1.0, 3.0, 6.0}) EXPECT_NEAR(d.tail(b), d.tail_by_inversion(b), kSumWConsistencyTol);
}

TEST(SumW, DecreasingAndOneAtZero) {
  SumWSpec s{{WLaw::from_delta(1.0), WLaw::from_delta(1.0)}, 3};
  const SumWDistribution d(s);
  EXPECT_NEAR(d.tail(0.0), 1.0, 1e-9);
  double prev = 1.0;
  for (double b = 0.1; b < 20; b += 0.1) {
    ASSERT_LT(d.tail(b), prev + 1e-15);
    prev = d.tail(b);
  }
}

TEST(SumW, QuantileInvertsTail) {
  SumWSpec s{{WLaw::from_delta(1.0), WLaw::from_delta(1.0)}, 3};
  const SumWDistribution d(s);
  const double b = d.quantile(0.05);
  EXPECT_NEAR(d.tail(b), 0.05, 1e-6);
}
