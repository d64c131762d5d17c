#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "interfere/assign.hpp"
#include "interfere/error.hpp"

using namespace interfere;

namespace {

std::uint64_t pattern(const Bits& bits) {
  std::uint64_t k = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) k |= static_cast<std::uint64_t>(bits[i]) << i;
  return k;
}

double chi_square(const std::map<std::uint64_t, int>& counts, int draws, std::size_t cells) {
  const double expected = static_cast<double>(draws) / static_cast<double>(cells);
  double stat = 0.0;
  for (const auto& [k, c] : counts) stat += (c - expected) * (c - expected) / expected;
  stat += static_cast<double>(cells - counts.size()) * expected;
  return stat;
}

}  // namespace

TEST(DesignCounts, Symmetric) {
  const Clustering c = Clustering::contiguous_blocks(4, 2);
  const DesignCounts d = DesignCounts::symmetric(c);
  EXPECT_EQ(d.m_cr, 2u);
  EXPECT_EQ(d.n_cr, 4u);
  EXPECT_EQ(d.n_cr_t, 2u);
  EXPECT_EQ(d.m_cbr_t, 1u);
  EXPECT_NO_THROW(d.validate(8, 4));
  EXPECT_THROW(DesignCounts::symmetric(Clustering::contiguous_blocks(5, 2)), ValidationError);
  EXPECT_THROW(DesignCounts::symmetric(Clustering::contiguous_blocks(6, 2)), ValidationError);
}

TEST(DesignCounts, ValidateRejectsBrokenIdentities) {
  const Clustering c = Clustering::contiguous_blocks(4, 2);
  DesignCounts d = DesignCounts::symmetric(c);
  d.n_cr_c = 3;
  EXPECT_THROW(d.validate(8, 4), ValidationError);
  EXPECT_THROW(DesignCounts::from_split(c, 4, 2, 1), ValidationError);
}

TEST(Complete, TwoUnits) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const SimpleAssignment a = complete_randomization(2, 1, s);
    EXPECT_EQ(a.z[0] + a.z[1], 1);
  }
}

TEST(Complete, AllTreatedRejected) { EXPECT_THROW(complete_randomization(3, 3, 1), ValidationError); }

TEST(Complete, UniformLaw) {
  std::map<std::uint64_t, int> counts;
  const int draws = 100000;
  for (int s = 0; s < draws; ++s) ++counts[pattern(complete_randomization(4, 2, s).z)];
  EXPECT_EQ(counts.size(), 6u);
  EXPECT_LT(chi_square(counts, draws, 6), 20.515);
}

TEST(Bernoulli, TwoUnitsMixedOnly) {
  std::map<std::uint64_t, int> counts;
  const int draws = 20000;
  for (int s = 0; s < draws; ++s) {
    const SimpleAssignment a = bernoulli_rerandomized(2, 0.5, s);
    ASSERT_EQ(a.n_t, 1u);
    ++counts[pattern(a.z)];
  }
  EXPECT_EQ(counts.size(), 2u);
  EXPECT_LT(chi_square(counts, draws, 2), 10.83);
}

TEST(Bernoulli, NeverDegenerate) {
  for (double p : {0.02, 0.5, 0.98}) {
    for (int s = 0; s < 500; ++s) {
      const SimpleAssignment a = bernoulli_rerandomized(5, p, s);
      EXPECT_GT(a.n_t, 0u);
      EXPECT_GT(a.n_c, 0u);
      EXPECT_EQ(a.p, p);
    }
  }
  EXPECT_THROW(bernoulli_rerandomized(5, 1.0, 1), ValidationError);
}

TEST(Cluster, PurityAndCount) {
  const Clustering c = Clustering::contiguous_blocks(2, 3);
  for (int s = 0; s < 50; ++s) {
    const SimpleAssignment a = cluster_randomization(c, 1, s);
    EXPECT_EQ(a.n_t, 3u);
    for (ClusterId k = 0; k < 2; ++k)
      for (UnitId u : c.members(k)) EXPECT_EQ(a.z[u], a.z[c.members(k)[0]]);
  }
}

TEST(Cluster, UniformLaw) {
  const Clustering c = Clustering::contiguous_blocks(4, 2);
  std::map<std::uint64_t, int> counts;
  const int draws = 60000;
  for (int s = 0; s < draws; ++s) ++counts[pattern(cluster_randomization(c, 2, s).z)];
  EXPECT_EQ(counts.size(), 6u);
  EXPECT_LT(chi_square(counts, draws, 6), 20.515);
}

TEST(Hierarchical, CountContract) {
  const Clustering c = Clustering::contiguous_blocks(4, 2);
  const DesignCounts d = DesignCounts::symmetric(c);
  for (int s = 0; s < 200; ++s) {
    const HierarchicalAssignment a = hierarchical_assign(c, d, s);
    std::size_t cr_t = 0, cr = 0, cbr_t_clusters = 0;
    for (UnitId u = 0; u < 8; ++u) {
      cr += a.w[u];
      cr_t += a.w[u] && a.z[u];
    }
    for (ClusterId k = 0; k < 4; ++k) {
      const auto m = c.members(k);
      EXPECT_EQ(a.w[m[0]], a.w[m[1]]);
      EXPECT_EQ(a.omega[k], a.w[m[0]]);
      if (!a.omega[k]) {
        EXPECT_EQ(a.z[m[0]], a.z[m[1]]);
        EXPECT_EQ(a.z_cbr[k], a.z[m[0]]);
        cbr_t_clusters += a.z_cbr[k];
      }
    }
    EXPECT_EQ(cr, 4u);
    EXPECT_EQ(cr_t, 2u);
    EXPECT_EQ(cbr_t_clusters, 1u);
    EXPECT_EQ(a.counts, d);
  }
}

TEST(Hierarchical, ExhaustiveLawUniform) {
  const Clustering c = Clustering::contiguous_blocks(4, 2);
  const DesignCounts d = DesignCounts::symmetric(c);
  std::map<std::uint64_t, int> counts;
  const int draws = 72000;
  for (int s = 0; s < draws; ++s) {
    const HierarchicalAssignment a = hierarchical_assign(c, d, s);
    ++counts[pattern(a.w) | (pattern(a.z) << 8)];
  }
  EXPECT_EQ(counts.size(), 72u);
  EXPECT_LT(chi_square(counts, draws, 72), 113.58);
}

TEST(Hierarchical, BernoulliArmNeverDegenerate) {
  const Clustering c = Clustering::contiguous_blocks(4, 2);
  const DesignCounts d = DesignCounts::symmetric(c);
  bool varied = false;
  for (int s = 0; s < 500; ++s) {
    const HierarchicalAssignment a = hierarchical_assign(c, d, s, CrMechanism::bernoulli);
    EXPECT_GT(a.counts.n_cr_t, 0u);
    EXPECT_LT(a.counts.n_cr_t, a.counts.n_cr);
    varied = varied || a.counts.n_cr_t != 2;
  }
  EXPECT_TRUE(varied);
}

TEST(Hierarchical, FromUnitsRoundTrip) {
  const Clustering c = Clustering::contiguous_blocks(6, 3);
  const DesignCounts d = DesignCounts::from_split(c, 2, 3, 2);
  const HierarchicalAssignment a = hierarchical_assign(c, d, 77);
  const HierarchicalAssignment b = HierarchicalAssignment::from_units(c, a.w, a.z);
  EXPECT_EQ(b.omega, a.omega);
  EXPECT_EQ(b.z_cbr, a.z_cbr);
  EXPECT_EQ(b.counts, d);
}

TEST(Hierarchical, FromUnitsRejectsImpureCbrCluster) {
  const Clustering c = Clustering::contiguous_blocks(4, 2);
  const Bits w{1, 1, 1, 1, 0, 0, 0, 0};
  const Bits z{1, 0, 1, 0, 1, 0, 0, 0};
  EXPECT_THROW(HierarchicalAssignment::from_units(c, w, z), ValidationError);
  const Bits w_split{1, 0, 1, 1, 0, 0, 0, 0};
  EXPECT_THROW(HierarchicalAssignment::from_units(c, w_split, Bits{1, 0, 1, 0, 1, 1, 0, 0}), ValidationError);
}

TEST(Hierarchical, SubstreamsAreIndependentOfEachOther) {
  const Clustering c = Clustering::contiguous_blocks(8, 5);
  const DesignCounts d = DesignCounts::symmetric(c);
  EXPECT_EQ(hierarchical_assign(c, d, 5).z, hierarchical_assign(c, d, 5).z);
  EXPECT_NE(hierarchical_assign(c, d, 5).z, hierarchical_assign(c, d, 6).z);
}

TEST(Stratified, PerStratumCounts) {
  const Clustering c = Clustering::contiguous_blocks(8, 2);
  const Stratification s = Stratification::from_map({0, 1, 0, 1, 0, 1, 0, 1}, 2);
  for (int seed = 0; seed < 100; ++seed) {
    const StratifiedAssignment a = stratified_hierarchical_assign(c, s, {}, seed);
    ASSERT_EQ(a.strata.size(), 2u);
    for (const auto& st : a.strata) {
      std::size_t cr = 0;
      for (ClusterId local = 0; local < 4; ++local) cr += st.assignment.omega[local];
      EXPECT_EQ(cr, 2u);
      EXPECT_EQ(st.assignment.counts, DesignCounts::symmetric(st.restriction.clustering));
    }
    const StratifiedAssignment back = StratifiedAssignment::from_units(c, s, a.w, a.z);
    EXPECT_EQ(back.strata[1].assignment.omega, a.strata[1].assignment.omega);
  }
}

TEST(Stratified, StrataIndependent) {
  const Clustering c = Clustering::contiguous_blocks(8, 2);
  const Stratification s = Stratification::from_map({0, 0, 0, 0, 1, 1, 1, 1}, 2);
  const int draws = 10000;
  double sx = 0, sy = 0, sxy = 0;
  for (int seed = 0; seed < draws; ++seed) {
    const StratifiedAssignment a = stratified_hierarchical_assign(c, s, {}, seed);
    const double x = a.w[0], y = a.w[8];
    sx += x;
    sy += y;
    sxy += x * y;
  }
  const double cov = sxy / draws - (sx / draws) * (sy / draws);
  EXPECT_NEAR(cov / 0.25, 0.0, 4.0 / std::sqrt(draws));
}

TEST(Stratified, SingleStratumMatchesUnstratifiedLaw) {
  const Clustering c = Clustering::contiguous_blocks(4, 2);
  const Stratification s = Stratification::from_map({0, 0, 0, 0}, 1);
  std::map<std::uint64_t, int> counts;
  const int draws = 36000;
  for (int seed = 0; seed < draws; ++seed) {
    const StratifiedAssignment a = stratified_hierarchical_assign(c, s, {}, seed);
    ++counts[pattern(a.w) | (pattern(a.z) << 8)];
  }
  EXPECT_EQ(counts.size(), 72u);
  EXPECT_LT(chi_square(counts, draws, 72), 113.58);
}
