#include <cmath>

#include <gtest/gtest.h>

#include "interfere/assign.hpp"
#include "interfere/error.hpp"
#include "interfere/graph.hpp"
#include "interfere/outcomes.hpp"
#include "interfere/rng.hpp"

using namespace interfere;

namespace {

Graph path4() {
  const std::vector<Edge> e{{0, 1}, {1, 2}, {2, 3}};
  return Graph::from_edges(4, e);
}

}  // namespace

TEST(Sutva, ElementwiseSelection) {
  const PotentialTable t{{10, 11, 12, 13}, {0, 1, 2, 3}};
  const Bits z{1, 0, 1, 0};
  const ObservedOutcomes o = realize_sutva(t, z);
  EXPECT_EQ(o.y, (std::vector<double>{10, 1, 12, 3}));
  EXPECT_TRUE(o.y_plus.empty());
  const Clustering c({0, 0, 1, 1}, 2);
  EXPECT_EQ(realize_sutva(t, z, &c).y_plus, (std::vector<double>{11, 15}));
}

TEST(Sutva, FisherNullIgnoresZ) {
  const PotentialTable t{{1, 2, 3}, {1, 2, 3}};
  EXPECT_EQ(realize_sutva(t, Bits{1, 0, 1}).y, realize_sutva(t, Bits{0, 1, 0}).y);
}

TEST(Sutva, LengthMismatch) {
  const PotentialTable t{{1, 2}, {1, 2}};
  EXPECT_THROW(realize_sutva(t, Bits{1, 0, 1}), ValidationError);
  const PotentialTable bad{{1, 2}, {1}};
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Linear, NoInterferenceNoNoise) {
  const LinearInterferenceModel m{0.5, 2.0, 0.0, 0.0};
  const ObservedOutcomes o = realize_linear(m, path4(), Bits{1, 0, 0, 1}, 9);
  EXPECT_EQ(o.y, (std::vector<double>{2.5, 0.5, 0.5, 2.5}));
}

TEST(Linear, AllNeighborsTreated) {
  const LinearInterferenceModel m{1.0, 2.0, 3.0, 0.0};
  const ObservedOutcomes o = realize_linear(m, path4(), Bits{1, 1, 1, 1}, 9);
  for (double y : o.y) EXPECT_DOUBLE_EQ(y, 6.0);
}

TEST(Linear, AllControlIsAlpha) {
  const LinearInterferenceModel m{1.5, 2.0, 3.0, 0.0};
  for (double y : realize_linear(m, path4(), Bits{0, 0, 0, 0}, 9).y) EXPECT_DOUBLE_EQ(y, 1.5);
}

TEST(Linear, PartialNeighborhood) {
  const LinearInterferenceModel m{0.0, 1.0, 0.5, 0.0};
  const ObservedOutcomes o = realize_linear(m, path4(), Bits{1, 0, 0, 0}, 1);
  EXPECT_DOUBLE_EQ(o.y[0], 1.0);
  EXPECT_DOUBLE_EQ(o.y[1], 0.25);
  EXPECT_DOUBLE_EQ(o.y[2], 0.0);
}

TEST(Linear, IsolatedUnitHasNoInterference) {
  const std::vector<Edge> e{{0, 1}};
  const Graph g = Graph::from_edges(3, e);
  const LinearInterferenceModel m{0.0, 1.0, 5.0, 0.0};
  EXPECT_DOUBLE_EQ(realize_linear(m, g, Bits{1, 1, 1}, 1).y[2], 1.0);
}

TEST(Linear, NoiseDeterministicAndFixedVariantAgrees) {
  const LinearInterferenceModel m{0.0, 1.0, 0.5, 2.0};
  const Bits z{1, 0, 1, 0};
  const auto a = realize_linear(m, path4(), z, 42);
  EXPECT_EQ(a.y, realize_linear(m, path4(), z, 42).y);
  EXPECT_NE(a.y, realize_linear(m, path4(), z, 43).y);
  const auto noise = draw_noise(4, 2.0, 42);
  EXPECT_EQ(a.y, realize_linear(m, path4(), z, noise).y);
}

TEST(Linear, NoiseMoments) {
  const auto noise = draw_noise(200000, 2.0, 3);
  double s = 0, s2 = 0;
  for (double e : noise) {
    s += e;
    s2 += e * e;
  }
  const double n = static_cast<double>(noise.size());
  EXPECT_NEAR(s / n, 0.0, 4.0 * 2.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 4.0, 0.05);
}

TEST(Linear, InvalidModel) {
  const LinearInterferenceModel m{0.0, 1.0, 0.5, -1.0};
  EXPECT_THROW(realize_linear(m, path4(), Bits{1, 0, 1, 0}, 1), ValidationError);
}

TEST(NeighborFraction, SerialMatchesParallel) {
  const SbmGraph s = generate_sbm(SbmSpec::from_target(10, 40, 0.3, 10.0, 5));
  Bits z(s.graph.num_units());
  Engine rng = make_engine(1);
  for (auto& v : z) v = rng() & 1u;
  EXPECT_EQ(treated_neighbor_fraction(s.graph, z), serial::treated_neighbor_fraction(s.graph, z));
}

TEST(TotalEffect, Table) {
  EXPECT_DOUBLE_EQ(total_treatment_effect(PotentialTable{{2, 0}, {0, 0}}), 1.0);
  EXPECT_DOUBLE_EQ(total_treatment_effect(PotentialTable{{3, 4}, {3, 4}}), 0.0);
}

TEST(TotalEffect, LinearModel) {
  const LinearInterferenceModel m{0.0, 1.0, 0.5, 0.0};
  EXPECT_DOUBLE_EQ(total_treatment_effect(m, path4()).tau, 1.5);
  const std::vector<Edge> e{{0, 1}};
  const LinearTotalEffect t = total_treatment_effect(m, Graph::from_edges(4, e));
  EXPECT_DOUBLE_EQ(t.non_isolated_fraction, 0.5);
  EXPECT_DOUBLE_EQ(t.tau, 1.25);
}

TEST(ClusterSums, Sums) {
  const Clustering c({1, 0, 1, 0}, 2);
  const std::vector<double> y{1, 2, 3, 4};
  EXPECT_EQ(cluster_sums(c, y), (std::vector<double>{6, 4}));
}
