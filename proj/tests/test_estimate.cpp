#include <cmath>

#include <gtest/gtest.h>

#include "interfere/error.hpp"
#include "interfere/estimate.hpp"
#include "interfere/oracle.hpp"

using namespace interfere;

namespace {

// Tables shared with tests/oracle_values.py, which produced the frozen values below.
const PotentialTable kTable8{{3, -1, 4, 1, -5, 9, 2, 6}, {1, 2, -2, 0, 3, 5, -1, 2}};
const std::vector<double> kY16{2, -1, 5, 0, 3, 3, -4, 1, 7, 2, 0, -2, 6, 1, -3, 4};
const std::vector<double> kEffect16{1, 3, -2, 0, 1, 4, 2, -1, 0, 0, 3, 1, -2, 5, 1, 2};

PotentialTable table16(const std::vector<double>& effect) {
  PotentialTable t{kY16, kY16};
  for (std::size_t i = 0; i < t.y1.size(); ++i) t.y1[i] += effect[i];
  return t;
}

EnumerationSpec hierarchical_spec(const SmallDesign& d, PotentialTable t, Statistic s) {
  EnumerationSpec spec;
  spec.clustering = d.clustering;
  spec.counts = d.counts;
  spec.table = std::move(t);
  spec.statistic = s;
  return spec;
}

// Table 1 layout: 8 clusters of 2; units 0-7 in arm cr, even units treated;
// clusters 4, 5 treated and 6, 7 control in arm cbr.
struct Table1 {
  Clustering clustering = Clustering::contiguous_blocks(8, 2);
  HierarchicalAssignment assignment;
  std::vector<double> y{1, 1, 1, 1, 19, 19, 19, 19, 9.25, 9.25, 14.05, 14.05, 5.95, 5.95, 10.75, 10.75};

  Table1() {
    Bits w(16, 0), z(16, 0);
    for (int i = 0; i < 8; ++i) {
      w[i] = 1;
      z[i] = i % 2 == 0;
    }
    for (int i = 8; i < 12; ++i) z[i] = 1;
    assignment = HierarchicalAssignment::from_units(clustering, w, z);
  }
};

}  // namespace

TEST(DiffInMeans, Arithmetic) {
  EXPECT_DOUBLE_EQ(diff_in_means(std::vector<double>{2, 1, 4, 3}, Bits{1, 0, 1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(diff_in_means(std::vector<double>{5, 5, 5}, Bits{1, 0, 0}), 0.0);
  EXPECT_THROW(diff_in_means(std::vector<double>{1, 2}, Bits{1, 1}), ValidationError);
}

TEST(HorvitzThompson, Arithmetic) {
  EXPECT_DOUBLE_EQ(horvitz_thompson_cluster(std::vector<double>{4, 2}, Bits{1, 0}, 2, 4), 1.0);
  EXPECT_DOUBLE_EQ(horvitz_thompson_cluster(std::vector<double>{3, 3, 3}, Bits{1, 0, 1}, 3, 6), 0.0);
}

TEST(Delta, IdenticalOutcomesGiveZero) {
  const Table1 t;
  const std::vector<double> y(16, 7.5);
  const DeltaEstimate d = delta_statistic(t.clustering, t.assignment, y);
  EXPECT_DOUBLE_EQ(d.delta, 0.0);
  EXPECT_DOUBLE_EQ(empirical_variance_bound(t.clustering, t.assignment, y), 0.0);
}

TEST(Delta, Table1HandComputed) {
  const Table1 t;
  const DeltaEstimate d = delta_statistic(t.clustering, t.assignment, t.y);
  EXPECT_NEAR(d.tau_cr, 0.0, 1e-12);
  EXPECT_NEAR(d.tau_cbr, 3.3, 1e-12);
  EXPECT_NEAR(d.delta, -3.3, 1e-12);
  // 108/4 + 108/4 + (1/2)^2 (46.08/2 + 46.08/2)
  EXPECT_NEAR(empirical_variance_bound(t.clustering, t.assignment, t.y), 65.52, 1e-10);
}

TEST(VarianceBound, SmallBucketRejected) {
  const SmallDesign d = small_design_8();
  const HierarchicalAssignment a = hierarchical_assign(d.clustering, d.counts, 3);
  EXPECT_THROW(empirical_variance_bound(d.clustering, a, kTable8.y0), ValidationError);
}

TEST(VarianceBound, ExpectationVersusVarianceByEnumeration) {
  const SmallDesign d = small_design_16();
  const auto het = table16(kEffect16);
  const Moments var = enumerate_moments(hierarchical_spec(d, het, Statistic::estimate));
  const Moments bound = enumerate_moments(hierarchical_spec(d, het, Statistic::variance_bound));
  EXPECT_EQ(var.outcomes, 29400u);
  EXPECT_NEAR(var.variance, 9.446428571428571, 1e-10);
  EXPECT_NEAR(bound.mean, 9.60204081632653, 1e-10);

  const auto constant = table16(std::vector<double>(16, 2.0));
  EXPECT_NEAR(enumerate_moments(hierarchical_spec(d, constant, Statistic::estimate)).variance, 9.729591836734693,
              1e-10);
  EXPECT_NEAR(enumerate_moments(hierarchical_spec(d, constant, Statistic::variance_bound)).mean, 9.729591836734693,
              1e-10);
}

TEST(FisherNull, MatchesFrozenEnumeration) {
  const SmallDesign d = small_design_8();
  EXPECT_NEAR(fisher_null_variance(kTable8.y0, d.clustering, d.counts), 13.277777777777779, 1e-10);
  const PotentialTable null{kTable8.y0, kTable8.y0};
  EXPECT_NEAR(enumerate_moments(hierarchical_spec(d, null, Statistic::estimate)).variance, 13.277777777777779, 1e-10);
}

TEST(FisherNull, ConstantAndShift) {
  const SmallDesign d = small_design_16();
  EXPECT_DOUBLE_EQ(fisher_null_variance(std::vector<double>(16, 3.0), d.clustering, d.counts), 0.0);
  std::vector<double> shifted = kY16;
  for (double& v : shifted) v += 1000.0;
  EXPECT_NEAR(fisher_null_variance(shifted, d.clustering, d.counts),
              fisher_null_variance(kY16, d.clustering, d.counts), 1e-8);
}

TEST(SutvaVariance, ExactMatchesFrozenEnumeration) {
  const SmallDesign d = small_design_8();
  const SutvaVariance v = theoretical_sutva_variance(kTable8, d.clustering, d.counts);
  EXPECT_NEAR(v.exact, 17.166666666666668, 1e-10);
  EXPECT_LE(std::abs(v.exact - v.leading), v.remainder_bound + 1e-12);
  EXPECT_NEAR(v.leading, v.sigma2_cr + v.sigma2_cbr + v.arm_split_term, 1e-12);
}

TEST(SutvaVariance, ArmEstimatorVariances) {
  const SmallDesign d = small_design_8();
  const Moments cr = enumerate_moments(hierarchical_spec(d, kTable8, Statistic::tau_cr));
  const Moments cbr = enumerate_moments(hierarchical_spec(d, kTable8, Statistic::tau_cbr));
  EXPECT_NEAR(cr.mean, 1.125, 1e-12);
  EXPECT_NEAR(cbr.mean, 1.125, 1e-12);
  EXPECT_NEAR(cr.variance, 9.213541666666666, 1e-10);
  EXPECT_NEAR(cbr.variance, 4.005208333333333, 1e-10);
}

TEST(SutvaVariance, ConstantEffectDropsEffectTerms) {
  const SmallDesign d = small_design_16();
  const auto t = table16(std::vector<double>(16, 2.0));
  const VarianceComponents c = variance_components(t, d.clustering);
  EXPECT_NEAR(c.s_tc, 0.0, 1e-14);
  EXPECT_NEAR(c.s_plus_tc, 0.0, 1e-14);
  const SutvaVariance v = theoretical_sutva_variance(t, d.clustering, d.counts);
  EXPECT_NEAR(v.leading, v.sigma2_cr + v.sigma2_cbr, 1e-12);
  EXPECT_NEAR(v.exact, 9.729591836734693, 1e-10);
}

TEST(SutvaVariance, FisherCaseAgreesWithinRemainder) {
  const SmallDesign d = small_design_16();
  const PotentialTable null{kY16, kY16};
  const SutvaVariance v = theoretical_sutva_variance(null, d.clustering, d.counts);
  const double fisher = fisher_null_variance(kY16, d.clustering, d.counts);
  EXPECT_NEAR(v.exact, fisher, 1e-10);
  EXPECT_LE(std::abs(v.leading - fisher), v.remainder_bound + 1e-12);
}

TEST(Stratified, Identity) {
  const std::vector<StratumEstimate> one{{2.5, 1.5, 6}};
  const StratifiedDelta s = stratified_delta(one, 6);
  EXPECT_DOUBLE_EQ(s.delta, 2.5);
  EXPECT_DOUBLE_EQ(s.sigma_hat_sq, 1.5);
}

TEST(Stratified, TwoEqualStrata) {
  const std::vector<StratumEstimate> two{{1.0, 3.0, 4}, {-1.0, 5.0, 4}};
  const StratifiedDelta s = stratified_delta(two, 8);
  EXPECT_DOUBLE_EQ(s.delta, 0.0);
  EXPECT_DOUBLE_EQ(s.sigma_hat_sq, 2.0);
}

TEST(Stratified, WeightsSumToOne) {
  const std::vector<StratumEstimate> three{{1.0, 0.0, 2}, {1.0, 0.0, 5}, {1.0, 0.0, 7}};
  EXPECT_NEAR(stratified_delta(three, 14).delta, 1.0, 1e-15);
  EXPECT_THROW(stratified_delta(three, 15), ValidationError);
}

TEST(GaussianP, Values) {
  EXPECT_NEAR(gaussian_p_value(-3.3, 8.1), 0.6837087874007903, 1e-12);
  EXPECT_DOUBLE_EQ(gaussian_p_value(0.0, 2.0), 1.0);
  EXPECT_NEAR(gaussian_p_value(1.959964 * 3.0, 3.0), 0.05, 1e-6);
  EXPECT_THROW(gaussian_p_value(1.0, 0.0), ValidationError);
}

TEST(Chebyshev, Threshold) {
  EXPECT_EQ(chebyshev_decision(4.48, 1.0, 0.05), Decision::reject);
  EXPECT_EQ(chebyshev_decision(-4.48, 1.0, 0.05), Decision::reject);
  EXPECT_EQ(chebyshev_decision(4.47, 1.0, 0.05), Decision::fail_to_reject);
  EXPECT_EQ(chebyshev_decision(0.0, 1e-9, 0.05), Decision::fail_to_reject);
  EXPECT_THROW(chebyshev_decision(1.0, 1.0, 1.5), ValidationError);
}

TEST(Chebyshev, RejectionRateAtMostAlphaByEnumeration) {
  const SmallDesign d = small_design_16();
  for (const auto& effect : {kEffect16, std::vector<double>(16, 2.0)}) {
    EnumerationSpec s = hierarchical_spec(d, table16(effect), Statistic::chebyshev_reject);
    s.alpha = 0.2;
    EXPECT_LE(enumerate_moments(s).mean, 0.2);
  }
}

TEST(Summarize, ZeroBound) {
  const AnalysisReport zero = summarize(0.0, 0.0, 0.05, DecisionRule::chebyshev);
  EXPECT_EQ(zero.decision, Decision::fail_to_reject);
  EXPECT_DOUBLE_EQ(zero.p_gaussian, 1.0);
  const AnalysisReport sharp = summarize(0.5, 0.0, 0.05, DecisionRule::gaussian);
  EXPECT_EQ(sharp.decision, Decision::reject);
  EXPECT_FALSE(sharp.t_stat.has_value());
  EXPECT_DOUBLE_EQ(sharp.p_chebyshev, 0.0);
}

TEST(Summarize, Fields) {
  const AnalysisReport r = summarize(-3.3, 8.1 * 8.1, 0.05, DecisionRule::gaussian);
  ASSERT_TRUE(r.t_stat.has_value());
  EXPECT_NEAR(*r.t_stat, -3.3 / 8.1, 1e-12);
  EXPECT_NEAR(r.p_chebyshev, 1.0, 0.0);
  EXPECT_NEAR(r.p_gaussian, 0.6837087874007903, 1e-12);
  EXPECT_EQ(r.decision, Decision::fail_to_reject);
}

TEST(Analyze, Table1) {
  const Table1 t;
  const AnalysisReport r = analyze(t.clustering, t.assignment, t.y, 0.05, DecisionRule::gaussian);
  EXPECT_NEAR(r.delta, -3.3, 1e-12);
  EXPECT_NEAR(r.sigma_hat_sq, 65.52, 1e-10);
  EXPECT_NEAR(r.p_gaussian, 2.0 * 0.5 * std::erfc(3.3 / std::sqrt(65.52) / std::sqrt(2.0)), 1e-12);
  EXPECT_EQ(r.counts, t.assignment.counts);
}

TEST(Analyze, StratifiedWeights) {
  const Clustering c = Clustering::contiguous_blocks(16, 2);
  std::vector<std::uint32_t> map(16);
  for (int k = 0; k < 16; ++k) map[k] = k < 8 ? 0 : 1;
  const Stratification s = Stratification::from_map(map, 2);
  const StratifiedAssignment a = stratified_hierarchical_assign(c, s, {}, 12);
  std::vector<double> y(32);
  for (int i = 0; i < 32; ++i) y[i] = std::sin(1.7 * i) + (a.z[i] ? 0.5 : 0.0);
  const AnalysisReport r = analyze_stratified(c, a, y, 0.05);
  ASSERT_EQ(r.strata.size(), 2u);
  EXPECT_TRUE(r.stratified);
  EXPECT_NEAR(r.delta, 0.5 * (r.strata[0].delta + r.strata[1].delta), 1e-12);
  EXPECT_NEAR(r.sigma_hat_sq, 0.25 * (r.strata[0].sigma_hat_sq + r.strata[1].sigma_hat_sq), 1e-12);
}

TEST(LinearExpectation, MatchesFrozenEnumeration) {
  const SmallDesign d = small_design_8();
  const LinearInterferenceModel m{0.0, 1.0, 0.5, 0.0};
  EXPECT_NEAR(expected_tau_complete_linear(m, d.graph), 0.9285714285714286, 1e-12);
  EXPECT_NEAR(expected_tau_cluster_linear(m, d.graph, d.clustering), 1.1111111111111112, 1e-12);
  EXPECT_NEAR(expected_delta_linear(m, d.graph, d.clustering, d.counts).delta, -0.21296296296296297, 1e-12);
}

TEST(LinearExpectation, ClosedForms) {
  const SmallDesign d = small_design_8();
  const LinearInterferenceModel m{0.0, 1.0, 0.5, 0.0};
  const double rho = 0.4166666666666667;
  EXPECT_NEAR(expected_tau_complete_linear(m, d.graph), 1.0 - 0.5 / 7.0, 1e-12);
  EXPECT_NEAR(expected_tau_cluster_linear(m, d.graph, d.clustering), 1.0 + 0.5 * (rho * 4 - 1) / 3, 1e-12);
}

TEST(InterferenceTerms, MatchFrozenPairCounts) {
  const SmallDesign d = small_design_8();
  for (const auto& t : {interference_variance_terms(d.graph, d.clustering),
                        serial::interference_variance_terms(d.graph, d.clustering)}) {
    EXPECT_NEAR(t.a_bar, 0.18055555555555555, 1e-12);
    EXPECT_NEAR(t.b_bar, 0.5833333333333334, 1e-12);
    EXPECT_NEAR(t.c_bar, 0.2361111111111111, 1e-12);
    EXPECT_NEAR(t.d_bar, 0.0625, 1e-12);
    EXPECT_NEAR(t.e_bar, 0.020833333333333332, 1e-12);
    EXPECT_NEAR(t.f_bar, 0.1579861111111111, 1e-12);
    EXPECT_NEAR(t.g_bar, 0.15104166666666666, 1e-12);
    EXPECT_NEAR(t.rho_c, 0.4166666666666667, 1e-12);
  }
}

TEST(InterferenceTerms, SerialMatchesParallelOnSbm) {
  const SbmGraph s = generate_sbm(SbmSpec::from_target(10, 30, 0.3, 8.0, 13));
  const auto a = interference_variance_terms(s.graph, s.blocks);
  const auto b = serial::interference_variance_terms(s.graph, s.blocks);
  for (auto [x, y] : {std::pair{a.a_bar, b.a_bar}, {a.b_bar, b.b_bar}, {a.c_bar, b.c_bar}, {a.d_bar, b.d_bar},
                      {a.e_bar, b.e_bar}, {a.f_bar, b.f_bar}, {a.g_bar, b.g_bar}, {a.rho_c, b.rho_c}}) {
    EXPECT_NEAR(x, y, 1e-12);
  }
}

TEST(InterferenceApprox, Reductions) {
  const SmallDesign d = small_design_8();
  const double n = 8, m = 4;
  EXPECT_NEAR(interference_variance_approx({0.0, 2.0, 0.0, 0.0}, d.graph, d.clustering, d.counts),
              4.0 * (8.0 / n + 5.0 / (2.0 * m)), 1e-12);
  const Graph empty = Graph::from_edges(8, {});
  EXPECT_NEAR(interference_variance_approx({0.0, 1.0, 3.0, 0.0}, empty, d.clustering, d.counts),
              8.0 / n + 5.0 / (2.0 * m), 1e-12);
}

TEST(InterferenceApprox, AsymmetricUnsupported) {
  const Clustering c = Clustering::contiguous_blocks(6, 2);
  const DesignCounts counts = DesignCounts::from_split(c, 2, 2, 2);
  const Graph g = Graph::from_edges(12, {});
  EXPECT_THROW(interference_variance_approx({0.0, 1.0, 0.5, 0.0}, g, c, counts), UnsupportedError);
}
