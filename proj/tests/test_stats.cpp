#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cpseg/stats.hpp"

using namespace cpseg;

namespace {
std::vector<double> gaussian(std::size_t m, double sd, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, sd);
  std::vector<double> x(m);
  for (auto& v : x) v = N(rng);
  return x;
}
}  // namespace

TEST(PartialSums, SumsAndCentredSquares) {
  const std::vector<double> x{1, 2, 4, 7};
  const PartialSums s(x);
  EXPECT_EQ(s.length(), 4u);
  EXPECT_DOUBLE_EQ(s.sum(0, 4), 14.0);
  EXPECT_DOUBLE_EQ(s.sum(1, 3), 6.0);
  EXPECT_NEAR(s.centred_ss(1, 4), (2 - 13.0 / 3) * (2 - 13.0 / 3) + (4 - 13.0 / 3) * (4 - 13.0 / 3) +
                                      (7 - 13.0 / 3) * (7 - 13.0 / 3),
              1e-12);
}

TEST(ZLr, UnitStepIsMinusOne) {
  const auto seq = Sequence::with_known_variance({0, 0, 1, 1});
  EXPECT_NEAR(z_lr(seq, 0, 2, 4), -1.0, 1e-12);
}

TEST(ZLr, AntisymmetricUnderNegation) {
  auto x = gaussian(60, 1.0, 3);
  auto y = x;
  for (auto& v : y) v = -v;
  const Sequence a(x, VariancePolicy::diff()), b(y, VariancePolicy::diff());
  for (long j : {5L, 17L, 40L}) EXPECT_NEAR(z_lr(a, 2, j, 55), -z_lr(b, 2, j, 55), 1e-12);
}

TEST(ZLr, ShiftAndScaleInvariantWhenEstimated) {
  auto x = gaussian(80, 1.0, 5);
  auto y = x;
  for (auto& v : y) v = 3.0 * v + 10.0;
  const Sequence a(x, VariancePolicy::sample()), b(y, VariancePolicy::sample());
  EXPECT_NEAR(z_lr(a, 4, 30, 70), z_lr(b, 4, 30, 70), 1e-10);
  EXPECT_NEAR(z_lr(a, 4, 30, 70, Standardization::local), z_lr(b, 4, 30, 70, Standardization::local), 1e-10);
}

TEST(ZLr, NullVarianceIsOne) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> N;
  double acc = 0.0;
  const int R = 20000;
  for (int r = 0; r < R; ++r) {
    std::vector<double> x(30);
    for (auto& v : x) v = N(rng);
    const double z = z_lr(Sequence::with_known_variance(std::move(x)), 3, 11, 27);
    acc += z * z;
  }
  EXPECT_NEAR(acc / R, 1.0, 0.04);
}

TEST(ZLr, BadTriplesRejected) {
  const auto seq = Sequence::with_known_variance({0, 1, 2, 3});
  EXPECT_THROW(z_lr(seq, 2, 2, 4), ValidationError);
  EXPECT_THROW(z_lr(seq, 0, 2, 5), ValidationError);
  EXPECT_THROW(z_lr(seq, -1, 2, 4), ValidationError);
}

TEST(ZLr, ConstantDataIsDegenerate) {
  const Sequence seq(std::vector<double>(10, 2.5), VariancePolicy::diff());
  EXPECT_THROW(z_lr(seq, 0, 5, 10), DegenerateInputError);
}

TEST(ZNz, HandComputed) {
  const auto seq = Sequence::with_known_variance({0, 0, 0, 2, 2, 2});
  EXPECT_NEAR(z_nz(seq, 3, 3), 6.0 / std::sqrt(6.0), 1e-12);
  EXPECT_NEAR(z_nz(seq, 3, 1), 2.0 / std::sqrt(2.0), 1e-12);
  EXPECT_THROW(z_nz(seq, 2, 3), ValidationError);
  EXPECT_THROW(z_nz(seq, 3, 0), ValidationError);
}

TEST(ZCbs, MatchesPairContrast) {
  auto x = gaussian(50, 1.0, 12);
  const auto seq = Sequence::with_known_variance(x);
  const long lo = 5, hi = 45, i = 10, j = 22;
  double in = 0, all = 0;
  for (long t = lo; t < hi; ++t) all += x[t];
  for (long t = i; t < j; ++t) in += x[t];
  const double n = j - i, L = hi - lo;
  const double want = std::abs(in - n * all / L) / std::sqrt(n * (1 - n / L));
  EXPECT_NEAR(z_cbs(seq, lo, hi, i, j, 0), want, 1e-12);
  const double pen = std::sqrt(2 * std::log(3.0 * 50 * L / (n * (L - n))));
  EXPECT_NEAR(z_cbs(seq, lo, hi, i, j, 1), want - pen, 1e-12);
  EXPECT_THROW(z_cbs(seq, lo, hi, lo, hi, 0), ValidationError);
}

TEST(Sigma, DiffEstimatorIgnoresStep) {
  auto x = gaussian(4000, 2.0, 21);
  for (std::size_t t = 2000; t < x.size(); ++t) x[t] += 10.0;
  const Sequence seq(x, VariancePolicy::diff());
  const auto est = estimate_sigma(seq);
  EXPECT_NEAR(est.sigma(), 2.0, 0.1);
  EXPECT_GT(est.sample_variance, 20.0);  // mean shift inflates the plain estimate
}

TEST(Sigma, KnownVarianceValidated) {
  EXPECT_THROW(Sequence::with_known_variance({1, 2}, 0.0), DomainError);
  EXPECT_DOUBLE_EQ(Sequence::with_known_variance({1, 2}, 4.0).sigma(), 2.0);
}

TEST(SegmentModel, MeansAndDeltas) {
  SegmentModel mdl;
  mdl.m = 10;
  mdl.taus = {3, 7};
  mdl.mus = {0.0, 2.0, -1.0};
  mdl.validate();
  EXPECT_EQ(mdl.changes(), 2u);
  EXPECT_EQ(mdl.boundary(0), 0);
  EXPECT_EQ(mdl.boundary(3), 10);
  EXPECT_DOUBLE_EQ(mdl.mean_at(3), 0.0);
  EXPECT_DOUBLE_EQ(mdl.mean_at(4), 2.0);
  EXPECT_DOUBLE_EQ(mdl.mean_at(8), -1.0);
  const auto d = mdl.deltas();
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d[0], 2.0);
  EXPECT_DOUBLE_EQ(d[1], -3.0);
  mdl.mus[1] = 0.0;
  EXPECT_THROW(mdl.validate(), ValidationError);
}

TEST(ZMeanVar, LocationScaleInvariant) {
  auto x = gaussian(60, 1.0, 33);
  auto y = x;
  for (auto& v : y) v = 0.2 * v - 7.0;
  const Sequence a(x, VariancePolicy::diff()), b(y, VariancePolicy::diff());
  for (double c : {0.0, 2.7}) EXPECT_NEAR(z_meanvar(a, 0, 25, 60, c), z_meanvar(b, 0, 25, 60, c), 1e-9);
}

TEST(ZMeanVar, ZeroCorrectionIsTwiceLogLikelihoodRatio) {
  auto x = gaussian(40, 1.0, 34);
  for (std::size_t t = 20; t < 40; ++t) x[t] = 3.0 * x[t] + 1.0;
  const Sequence seq(x, VariancePolicy::diff());
  auto ll = [&](long a, long b) {  // maximized Gaussian log-likelihood, constants dropped
    double mu = 0, ss = 0;
    for (long t = a; t < b; ++t) mu += x[t];
    mu /= (b - a);
    for (long t = a; t < b; ++t) ss += (x[t] - mu) * (x[t] - mu);
    return -0.5 * (b - a) * std::log(ss / (b - a));
  };
  EXPECT_NEAR(z_meanvar(seq, 0, 20, 40, 0.0), 2 * (ll(0, 20) + ll(20, 40) - ll(0, 40)), 1e-9);
}

TEST(ZMeanVar, DomainChecks) {
  const auto seq = Sequence::with_known_variance({1, 2, 3, 4, 5, 6});
  EXPECT_THROW(z_meanvar(seq, 0, 1, 6), ValidationError);
  EXPECT_THROW(z_meanvar(seq, 0, 3, 6, 6.0), ValidationError);
  const auto flat = Sequence::with_known_variance({1, 1, 1, 2, 3, 4});
  EXPECT_THROW(z_meanvar(flat, 0, 3, 6), DegenerateInputError);
}

TEST(NoncentralityMeanVar, ZeroAtNull) {
  EXPECT_NEAR(noncentrality_meanvar(0.3, 0.0, 0.0), 0.0, 1e-15);
  EXPECT_GT(noncentrality_meanvar(0.5, 1.0, 0.0), 0.0);
  EXPECT_THROW(noncentrality_meanvar(1.0, 1.0, 0.0), DomainError);
  EXPECT_THROW(noncentrality_meanvar(0.5, 1.0, -1.0), DomainError);
}
