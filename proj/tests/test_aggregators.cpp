#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "byzef/aggregators.hpp"
#include "byzef/errors.hpp"

using namespace byzef;

namespace {

std::vector<DenseVector> scalars(std::initializer_list<double> xs) {
  std::vector<DenseVector> out;
  for (double x : xs) out.push_back({x});
  return out;
}

AggregatorSpec spec(AggregationRule rule, std::size_t f = 0, bool nnm = false) {
  AggregatorSpec s;
  s.rule = rule;
  s.f = f;
  s.use_nnm = nnm;
  return s;
}

std::vector<DenseVector> random_set(RngStream& rng, std::size_t n, std::size_t d) {
  std::vector<DenseVector> out(n, DenseVector(d));
  for (auto& v : out) {
    for (auto& c : v) c = rng.normal() * 3.0;
  }
  return out;
}

const AggregationRule kRules[] = {AggregationRule::Avg, AggregationRule::CWMed,
                                  AggregationRule::CWTM, AggregationRule::RFA};

}  // namespace

TEST(Aggregate, AverageExample) {
  std::vector<DenseVector> in{{1, 2}, {3, 4}};
  EXPECT_EQ(aggregate(spec(AggregationRule::Avg), in), (DenseVector{2, 3}));
}

TEST(Aggregate, IdenticalInputsAreFixedPoints) {
  const DenseVector v{0.1, -1.0 / 3.0, 7e5};
  std::vector<DenseVector> in(7, v);
  for (auto rule : kRules) {
    for (bool nnm : {false, true}) {
      EXPECT_EQ(aggregate(spec(rule, 2, nnm), in), v) << to_string(rule) << " nnm=" << nnm;
    }
  }
}

TEST(Aggregate, DimensionMismatchThrows) {
  std::vector<DenseVector> in{{1, 2}, {3}};
  EXPECT_THROW(aggregate(spec(AggregationRule::Avg), in), ArgumentError);
}

TEST(Aggregate, CwtmNeedsMoreThanTwoF) {
  auto in = scalars({1, 2, 3, 4});
  EXPECT_THROW(aggregate(spec(AggregationRule::CWTM, 2), in), ConfigError);
  EXPECT_THROW(cwtm(in, 2), ConfigError);
}

TEST(Cwmed, Examples) {
  std::vector<DenseVector> in{{1, 2}, {3, 4}, {5, 0}};
  EXPECT_EQ(cwmed(in), (DenseVector{3, 2}));
  EXPECT_EQ(cwmed(scalars({1, 3})), (DenseVector{2}));
  EXPECT_EQ(cwmed(scalars({7})), (DenseVector{7}));
}

TEST(Cwtm, Examples) {
  EXPECT_EQ(cwtm(scalars({1, 2, 3, 100}), 1), (DenseVector{2.5}));
  EXPECT_EQ(aggregate(spec(AggregationRule::CWTM, 1), scalars({1, 2, 3, 100})), (DenseVector{2.5}));
  EXPECT_EQ(cwtm(scalars({0, 0, 0, 0, 9}), 1), (DenseVector{0}));
  std::vector<DenseVector> in{{1, 2}, {3, 4}, {8, -3}};
  EXPECT_EQ(cwtm(in, 0), average(in));
}

TEST(Rfa, Examples) {
  std::vector<DenseVector> sym{{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  const auto z = rfa(sym, 8, 1e-6);
  EXPECT_NEAR(z[0], 0.0, 1e-15);
  EXPECT_NEAR(z[1], 0.0, 1e-15);

  std::vector<DenseVector> same(3, DenseVector{2.5, -1});
  EXPECT_EQ(rfa(same, 8, 1e-6), same[0]);

  const double v = rfa(scalars({0, 0, 10}), 8, 1e-6)[0];
  EXPECT_GE(v, 0.0);
  EXPECT_LE(v, 10.0);
  EXPECT_LT(v, 10.0 / 3.0);
}

TEST(Rfa, MatchesHandIteration) {
  // Independent re-implementation of the smoothed Weiszfeld loop.
  RngStream rng(8);
  const auto in = random_set(rng, 6, 3);
  DenseVector z(3, 0.0);
  for (const auto& g : in) axpy(1.0 / 6.0, g, z);
  for (int it = 0; it < 8; ++it) {
    DenseVector num(3, 0.0);
    double den = 0.0;
    for (const auto& g : in) {
      const double w = 1.0 / std::max(1e-6, std::sqrt(dist_sq(g, z)));
      axpy(w, g, num);
      den += w;
    }
    for (auto& c : num) c /= den;
    z = num;
  }
  const auto got = rfa(in, 8, 1e-6);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(got[j], z[j], 1e-12);
}

TEST(Rfa, RejectsBadParameters) {
  auto in = scalars({1, 2});
  EXPECT_THROW(rfa(in, 0, 1e-6), ArgumentError);
  EXPECT_THROW(rfa(in, 8, 0.0), ArgumentError);
  AggregatorSpec s = spec(AggregationRule::RFA);
  s.rfa_iterations = 0;
  EXPECT_THROW(s.validate(3), ConfigError);
}

TEST(Nnm, Examples) {
  const auto out = nnm_preaggregate(scalars({0, 1, 10}), 1);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0], (DenseVector{0.5}));
  EXPECT_EQ(out[1], (DenseVector{0.5}));
  EXPECT_EQ(out[2], (DenseVector{5.5}));
}

TEST(Nnm, ZeroFCollapsesToMean) {
  RngStream rng(3);
  const auto in = random_set(rng, 5, 4);
  const auto mean = average(in);
  for (const auto& o : nnm_preaggregate(in, 0)) {
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(o[j], mean[j], 1e-14);
  }
}

TEST(Nnm, IdenticalInputsUnchangedAndCountPreserved) {
  std::vector<DenseVector> in(5, DenseVector{1.1, 2.2});
  const auto out = nnm_preaggregate(in, 2);
  EXPECT_EQ(out.size(), in.size());
  for (const auto& o : out) EXPECT_EQ(o, in[0]);
  EXPECT_THROW(nnm_preaggregate(in, 5), ConfigError);
}

TEST(Nnm, TiesGoToLowerIndex) {
  // Input 1 is equidistant from 0 and 2; with one neighbour kept besides
  // itself it must pick input 0.
  const auto out = nnm_preaggregate(scalars({0, 1, 2}), 1);
  EXPECT_EQ(out[1], (DenseVector{0.5}));
}

TEST(Properties, PermutationInvarianceIsExact) {
  RngStream rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    auto in = random_set(rng, 9, 4);
    auto perm = in;
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
      std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_below(i + 1))]);
    }
    for (auto rule : kRules) {
      for (bool nnm : {false, true}) {
        const auto s = spec(rule, 2, nnm);
        EXPECT_EQ(aggregate(s, in), aggregate(s, perm)) << s.label();
      }
    }
  }
}

TEST(Properties, BoundingBox) {
  RngStream rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_set(rng, 7, 3);
    for (auto rule : {AggregationRule::CWMed, AggregationRule::CWTM, AggregationRule::RFA}) {
      const auto out = aggregate(spec(rule, 2), in);
      for (int j = 0; j < 3; ++j) {
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& g : in) {
          lo = std::min(lo, g[j]);
          hi = std::max(hi, g[j]);
        }
        EXPECT_GE(out[j], lo);
        EXPECT_LE(out[j], hi);
      }
    }
  }
}

TEST(Properties, TranslationEquivariance) {
  RngStream rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_set(rng, 8, 3);
    DenseVector c(3);
    for (auto& v : c) v = rng.normal() * 10;
    auto shifted = in;
    for (auto& g : shifted) axpy(1.0, c, g);
    for (auto rule : kRules) {
      const auto a = aggregate(spec(rule, 2), in);
      const auto b = aggregate(spec(rule, 2), shifted);
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(b[j], a[j] + c[j], 1e-10) << to_string(rule);
    }
  }
}

TEST(Certify, AverageIsUnboundedWithOneByzantine) {
  RngStream rng(1);
  const auto cert = certify_kappa(spec(AggregationRule::Avg), 3, 1, 2, 8, rng);
  EXPECT_TRUE(cert.unbounded());
  EXPECT_EQ(cert.violations, 0u);

  const std::vector<std::vector<DenseVector>> sets{scalars({0, 0, 3})};
  EXPECT_TRUE(certify_kappa_on(spec(AggregationRule::Avg), sets, 1).unbounded());
  const std::vector<std::size_t> subset{0, 1};
  const auto in = scalars({0, 0, 3});
  EXPECT_TRUE(std::isinf(robustness_ratio(in, subset, average(in))));
}

TEST(Certify, AverageWithoutByzantineIsZero) {
  RngStream rng(2);
  const auto cert = certify_kappa(spec(AggregationRule::Avg), 6, 0, 3, 40, rng);
  EXPECT_EQ(cert.kappa_hat, 0.0);
  EXPECT_EQ(cert.subsets_checked, 40u);
}

TEST(Certify, MedianFiniteOnClusteredOutliers) {
  for (double M : {10.0, 1e3, 1e6}) {
    const std::vector<std::vector<DenseVector>> sets{scalars({0, 0, 0, M, M})};
    const auto cert = certify_kappa_on(spec(AggregationRule::CWMed), sets, 2);
    EXPECT_FALSE(cert.unbounded()) << M;
    EXPECT_EQ(cert.violations, 0u);
  }
}

TEST(Certify, RobustRulesWithNnmAreFinite) {
  for (auto rule : {AggregationRule::CWMed, AggregationRule::CWTM}) {
    RngStream rng(5);
    const auto cert = certify_kappa(spec(rule, 0, true), 10, 2, 5, 200, rng);
    EXPECT_FALSE(cert.unbounded()) << to_string(rule);
    EXPECT_GT(cert.kappa_hat, 0.0);
    EXPECT_GE(cert.kappa_hat, cert.worst_subset_ratio);
    EXPECT_EQ(cert.violations, 0u);
    EXPECT_EQ(cert.subsets_checked, 200u * 45u);
  }
}

TEST(Certify, RfaWithNnmFiniteOnNonDegenerateSets) {
  RngStream rng(5);
  std::vector<std::vector<DenseVector>> sets;
  for (int t = 0; t < 100; ++t) {
    std::vector<DenseVector> g(10, DenseVector(5));
    for (auto& v : g)
      for (auto& c : v) c = rng.normal();
    for (std::size_t i = 8; i < 10; ++i)
      for (auto& c : g[i]) c += 50.0;
    sets.push_back(std::move(g));
  }
  const auto cert = certify_kappa_on(spec(AggregationRule::RFA, 0, true), sets, 2);
  EXPECT_FALSE(cert.unbounded());
  EXPECT_EQ(cert.violations, 0u);
}

TEST(Certify, TruncatedRfaIsInexactOnIdenticalMajority) {
  // Eight identical points and two outliers: the geometric median is the
  // shared point, but eight Weiszfeld iterations from the mean stop short.
  std::vector<DenseVector> g(10, DenseVector{-6.8, 0.0, 2.3, 0.5, -0.2});
  g[5] = {7.0, -3.0, 2.4, -2.3, -1.8};
  g[7] = {1.8, -1.0, -0.8, -0.4, 4.1};
  const std::vector<std::vector<DenseVector>> sets{g};
  EXPECT_TRUE(certify_kappa_on(spec(AggregationRule::RFA, 0, true), sets, 2).unbounded());
  AggregatorSpec many = spec(AggregationRule::RFA, 0, true);
  many.rfa_iterations = 100;
  EXPECT_FALSE(certify_kappa_on(many, sets, 2).unbounded());
  EXPECT_FALSE(certify_kappa_on(spec(AggregationRule::CWTM, 0, true), sets, 2).unbounded());
}

TEST(Certify, Deterministic) {
  RngStream a(9), b(9);
  const auto c1 = certify_kappa(spec(AggregationRule::CWTM, 0, true), 7, 2, 3, 30, a);
  const auto c2 = certify_kappa(spec(AggregationRule::CWTM, 0, true), 7, 2, 3, 30, b);
  EXPECT_EQ(c1.csv_row(), c2.csv_row());
}

TEST(Certify, InfeasibleEnumerationRejected) {
  RngStream rng(1);
  EXPECT_THROW(certify_kappa(spec(AggregationRule::CWMed), 21, 2, 2, 1, rng), ConfigError);
  EXPECT_THROW(certify_kappa(spec(AggregationRule::CWMed), 4, 2, 2, 1, rng), ConfigError);
  EXPECT_THROW(certify_kappa(spec(AggregationRule::CWMed), 5, 1, 2, 0, rng), ConfigError);
}

TEST(Certify, CsvRow) {
  const std::vector<std::vector<DenseVector>> sets{scalars({0, 0, 3})};
  const auto cert = certify_kappa_on(spec(AggregationRule::Avg), sets, 1);
  EXPECT_EQ(RobustnessCertificate::csv_header(), "rule,n,f,d,trials,kappa_hat,worst_subset_ratio");
  EXPECT_EQ(cert.csv_row().substr(0, 16), "avg,3,1,1,1,inf,");
}

TEST(Spec, LabelsAndParsing) {
  EXPECT_EQ(spec(AggregationRule::CWTM, 1, true).label(), "cwtm+nnm");
  for (auto rule : kRules) EXPECT_EQ(aggregation_rule_from_string(to_string(rule)), rule);
  EXPECT_THROW(aggregation_rule_from_string("krum"), ConfigError);
}
