#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cpseg/expfam.hpp"
#include "cpseg/pvalue.hpp"

using namespace cpseg;

namespace {
std::vector<double> sample(const Family& f, double theta, int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (auto& v : x) v = f.sample(rng, theta);
  return x;
}
}  // namespace

TEST(Families, MeanParameterRoundTrip) {
  const GaussianFamily G;
  const ExponentialFamily E;
  const InverseGaussianFamily IG(10.0);
  const PoissonFamily P;
  const BernoulliFamily B;
  for (const Family* f : std::initializer_list<const Family*>{&G, &E, &IG, &P, &B})
    for (double mu : {0.2, 0.5, 0.8}) EXPECT_NEAR(f->psi1(f->theta_of_mean(mu)), mu, 1e-9) << f->name();
}

TEST(Families, ConjugateIsSupremum) {
  const ExponentialFamily E;
  const PoissonFamily P;
  for (const Family* f : std::initializer_list<const Family*>{&E, &P})
    for (double x : {0.4, 1.3, 5.0}) {
      const double th = f->theta_of_mean(x);
      EXPECT_NEAR(f->conjugate(x), th * x - f->psi(th), 1e-10);
      EXPECT_GE(f->conjugate(x), (th + 0.1) * x - f->psi(th + 0.1));
    }
}

TEST(Families, SampleMoments) {
  const InverseGaussianFamily IG(10.0);
  const double th = IG.theta_of_mean(2.0);
  const auto x = sample(IG, th, 200000, 3);
  double m = 0, v = 0;
  for (double t : x) m += t;
  m /= x.size();
  for (double t : x) v += (t - m) * (t - m);
  v /= x.size() - 1;
  EXPECT_NEAR(m, 2.0, 0.01);
  EXPECT_NEAR(v, IG.psi2(th), 0.05 * IG.psi2(th));
}

TEST(Families, SumLawAgreesWithSimulation) {
  const InverseGaussianFamily IG(10.0);
  const double th = IG.theta_of_mean(1.0);
  std::mt19937_64 rng(5);
  int below = 0;
  const int reps = 100000;
  for (int r = 0; r < reps; ++r) {
    double s = 0;
    for (int k = 0; k < 5; ++k) s += IG.sample(rng, th);
    below += s <= 4.6;
  }
  const double p = IG.sum_cdf(5, th, 4.6);
  EXPECT_NEAR(static_cast<double>(below) / reps, p, 4 * std::sqrt(p * (1 - p) / reps));
}

TEST(Families, InverseGaussianCdfStableForLongSums) {
  const InverseGaussianFamily IG(10.0);
  const double th = IG.theta_of_mean(1.0);
  const double p = IG.sum_cdf(900, th, 900.0);
  EXPECT_TRUE(std::isfinite(p));
  EXPECT_GT(p, 0.4);
  EXPECT_LT(p, 0.6);
}

TEST(Glr, GaussianReduction) {
  const GaussianFamily G;
  const auto x = sample(G, 0.0, 60, 7);
  const auto seq = Sequence::with_known_variance(x);
  for (long i : {0L, 5L})
    for (long j : {12L, 30L})
      for (long k : {40L, 60L}) {
        const double z = z_lr(seq, i, j, k);
        EXPECT_NEAR(glr_statistic(x, G, i, j, k), 0.5 * z * z, 1e-10);
      }
}

TEST(Glr, TableMatchesDirect) {
  const PoissonFamily P;
  const auto x = sample(P, std::log(3.0), 80, 8);
  const GlrTable T(x, P, 80);
  for (long i : {0L, 10L})
    for (long j : {20L, 35L})
      for (long k : {50L, 80L})
        EXPECT_NEAR(T(i, j) + T(j, k) - T(i, k), glr_statistic(x, P, i, j, k), 1e-9);
}

TEST(Roots, GaussianClosedForm) {
  // KL between blocks is n1 n2 / (2N) (mu1 - mu2)^2 for unit variance.
  const GaussianFamily G;
  const int n1 = 20, n2 = 30;
  const double b = 4.0;
  const auto sol = solve_root_system(G, 0.0, n1, n2, b);
  ASSERT_FALSE(sol.fallback);
  const double N = n1 + n2;
  const double gap = b * std::sqrt(N / (n1 * static_cast<double>(n2)));
  for (const auto& p : sol.pairs) {
    ASSERT_TRUE(p.exists);
    EXPECT_NEAR(std::abs(p.theta2 - p.theta1), gap, 1e-8);
    EXPECT_NEAR(n1 * p.theta1 + n2 * p.theta2, 0.0, 1e-8);
  }
  EXPECT_LT(sol.pairs[0].theta1, 0.0);
  EXPECT_GT(sol.pairs[1].theta1, 0.0);
}

TEST(Roots, SatisfyKlEquation) {
  const ExponentialFamily E;
  const double th = -1.0, b = 4.7;
  for (auto [n1, n2] : {std::pair{5, 7}, {30, 12}, {60, 60}}) {
    const auto sol = solve_root_system(E, th, n1, n2, b);
    for (const auto& p : sol.pairs) {
      if (!p.exists) continue;
      const double t = sol.theta_used, N = n1 + n2;
      const double lhs = n1 * E.kl_term(p.theta1) + n2 * E.kl_term(p.theta2) - N * E.kl_term(t);
      EXPECT_NEAR(lhs, 0.5 * b * b, 1e-7);
      EXPECT_NEAR(n1 * E.psi1(p.theta1) + n2 * E.psi1(p.theta2), N * E.psi1(t), 1e-7);
    }
  }
}

TEST(ACoeff, InUnitIntervalAndGaussianFormula) {
  const GaussianFamily G;
  for (double d : {0.1, 0.5, 1.0, 2.0}) {
    const auto a = a_coefficient(G, -0.5 * d, 0.5 * d);
    EXPECT_GT(a.value, 0.0);
    EXPECT_LE(a.value, 1.0);
    // Gaussian case: exp(-2 sum n^-1 Phi(-d sqrt(n) / 2)) = (d^2 / 2) nu(d)
    EXPECT_NEAR(a.value, 0.5 * d * d * nu(d), 0.025 * a.value) << d;
  }
}

TEST(ACoeff, RejectsArithmetic) {
  const PoissonFamily P;
  EXPECT_THROW(a_coefficient(P, 0.0, 0.5), std::exception);
}

TEST(PvalueExpfam, GaussianCloseToLr) {
  const GaussianFamily G;
  ScanSpec s;
  s.m = 500;
  s.m1 = 50;
  s.constraint = ConstraintMode::per_side;
  const double g = pvalue_expfam(G, 0.0, 500, 1, 50, 4.72).prob;
  const double l = pvalue(s, 4.72).prob;
  EXPECT_NEAR(g / l, 1.0, 0.1);
}

TEST(PvalueExpfam, ExponentialRows) {
  const ExponentialFamily E;
  EXPECT_NEAR(pvalue_expfam(E, -1.0, 500, 1, 50, 4.72).prob, 0.049, 0.003);
  EXPECT_NEAR(pvalue_expfam(E, -2.0, 500, 1, 50, 4.72).prob, pvalue_expfam(E, -1.0, 500, 1, 50, 4.72).prob,
              1e-9);  // scale invariance
}

TEST(SignedRoot, BernoulliGroupsAreStandardized) {
  const BernoulliFamily B;
  const auto x = sample(B, B.theta_of_mean(0.3), 33 * 3000, 11);
  const auto s = signed_root_transform(x, B, 33);
  ASSERT_EQ(s.size(), 3000u);
  double m = 0, v = 0;
  for (double t : s.values()) m += t;
  m /= s.size();
  for (double t : s.values()) v += (t - m) * (t - m);
  v /= s.size() - 1;
  EXPECT_NEAR(m, 0.0, 0.08);
  EXPECT_NEAR(v, 1.0, 0.08);
}

TEST(SignedRoot, OddUnderReflection) {
  const GaussianFamily G;
  std::vector<double> x{-1.0, 0.3, 2.0, -0.5, 0.9, -1.7};
  std::vector<double> y;
  for (double v : x) y.push_back(-v);
  const auto a = signed_root_transform(x, G), b = signed_root_transform(y, G);
  for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(a.values()[t], -b.values()[t], 1e-12);
}

TEST(SignedRoot, Validation) {
  const GaussianFamily G;
  EXPECT_THROW(signed_root_transform(std::vector<double>{}, G), ValidationError);
  EXPECT_THROW(signed_root_transform(std::vector<double>{1.0}, G, 0), ValidationError);
}

TEST(MeanVar, DetectsVarianceChange) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> N;
  std::vector<double> x(200);
  for (int t = 0; t < 200; ++t) x[t] = (t < 100 ? 1.0 : 4.0) * N(rng);
  MeanVarConfig cfg;
  cfg.calibration_reps = 200;
  cfg.seed = 3;
  const auto res = segment_meanvar(Sequence(x, VariancePolicy::diff()), cfg);
  EXPECT_GT(res.calibration.calibrated, 0.0);
  bool near = false;
  for (const auto& d : res.segmentation.detections) near = near || std::abs(d.j - 100) <= 10;
  EXPECT_TRUE(near);
}
