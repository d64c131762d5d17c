#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "interfere/error.hpp"
#include "interfere/io.hpp"

using namespace interfere;
using io::Json;

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(io::format_double(2.0), "2");
  EXPECT_EQ(std::stod(io::format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(ClusteringCsv, RoundTrip) {
  const Clustering c({2, 0, 1, 0, 2, 1}, 3);
  std::stringstream ss;
  io::write_clustering_csv(ss, c);
  EXPECT_EQ(io::read_clustering_csv(ss), c);
}

TEST(ClusteringCsv, HeaderlessAndComments) {
  std::istringstream in("# comment\n1,0\n0,1\n\n");
  const Clustering c = io::read_clustering_csv(in);
  EXPECT_EQ(c.cluster_of(0), 1u);
  EXPECT_EQ(c.cluster_of(1), 0u);
}

TEST(ClusteringCsv, Errors) {
  std::istringstream dup("unit_id,cluster_id\n0,0\n0,1\n");
  EXPECT_THROW(io::read_clustering_csv(dup), Error);
  std::istringstream bad("unit_id,cluster_id\n0,0\n1,zz\n");
  try {
    io::read_clustering_csv(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream gap("0,0\n2,1\n");
  EXPECT_THROW(io::read_clustering_csv(gap), Error);
}

TEST(StrataCsv, RoundTrip) {
  const Stratification s = Stratification::from_map({1, 0, 1, 0}, 2);
  std::stringstream ss;
  io::write_strata_csv(ss, s);
  EXPECT_EQ(io::read_strata_csv(ss, 4).stratum_of, s.stratum_of);
}

TEST(AssignmentCsv, RoundTripAndErrors) {
  const Bits w{1, 1, 0, 0}, z{1, 0, 1, 1};
  std::stringstream ss;
  io::write_assignment_csv(ss, w, z);
  const io::AssignmentRows rows = io::read_assignment_csv(ss);
  EXPECT_EQ(rows.w, w);
  EXPECT_EQ(rows.z, z);
  EXPECT_EQ(rows.units, (std::vector<UnitId>{0, 1, 2, 3}));
  std::istringstream bad_arm("unit_id,arm,treatment\n0,xx,1\n");
  EXPECT_THROW(io::read_assignment_csv(bad_arm), ParseError);
  std::istringstream bad_z("unit_id,arm,treatment\n0,cr,2\n");
  EXPECT_THROW(io::read_assignment_csv(bad_z), ParseError);
}

TEST(AssignmentCsv, SparseSorted) {
  std::istringstream in("unit_id,arm,treatment\n7,cbr,0\n3,cr,1\n");
  const io::AssignmentRows rows = io::read_assignment_csv(in);
  EXPECT_EQ(rows.units, (std::vector<UnitId>{3, 7}));
  EXPECT_EQ(rows.w, (Bits{1, 0}));
}

TEST(OutcomesCsv, RoundTripAndMissing) {
  const std::vector<double> y{1.5, -2.25, 1e-300};
  std::stringstream ss;
  io::write_outcomes_csv(ss, y);
  EXPECT_EQ(io::read_outcomes_csv(ss, 3), y);
  std::istringstream partial("unit_id,y\n0,1\n");
  try {
    io::read_outcomes_csv(partial, 3);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
  std::istringstream partial2("unit_id,y\n2,5\n");
  const std::vector<UnitId> need{2};
  EXPECT_EQ(io::read_outcomes_csv(partial2, 3, need)[2], 5.0);
}

TEST(PotentialCsv, RoundTrip) {
  const PotentialTable t{{1.0, 2.5}, {0.0, -1.0}};
  std::stringstream ss;
  io::write_potential_csv(ss, t);
  const PotentialTable back = io::read_potential_csv(ss);
  EXPECT_EQ(back.y1, t.y1);
  EXPECT_EQ(back.y0, t.y0);
}

TEST(EdgeList, RoundTripKeepsIsolatedUnits) {
  const std::vector<Edge> e{{0, 3}, {1, 2}};
  const Graph g = Graph::from_edges(6, e);
  std::stringstream ss;
  io::write_edge_list(ss, g);
  const Graph back = parse_edge_list(ss);
  EXPECT_EQ(back.num_units(), 6u);
  EXPECT_EQ(back.edges(), g.edges());
}

TEST(Covariates, Read) {
  std::istringstream in("cluster_id,age,income\n1,3,4\n0,1,2\n");
  const auto rows = io::read_cluster_covariates_csv(in, 2);
  EXPECT_EQ(rows[0], (std::vector<double>{1, 2}));
  EXPECT_EQ(rows[1], (std::vector<double>{3, 4}));
  std::istringstream missing("cluster_id,age\n0,1\n");
  EXPECT_THROW(io::read_cluster_covariates_csv(missing, 2), Error);
}

TEST(Json, DesignCountsRoundTrip) {
  const DesignCounts d = DesignCounts::symmetric(Clustering::contiguous_blocks(8, 3));
  EXPECT_EQ(io::design_counts_from_json(io::to_json(d)), d);
}

TEST(Json, SbmSpecRoundTrip) {
  const SbmSpec s{4, 25, 0.3, 0.01, 99};
  const SbmSpec back = io::sbm_spec_from_json(io::to_json(s));
  EXPECT_EQ(back.num_blocks, 4u);
  EXPECT_EQ(back.block_size, 25u);
  EXPECT_EQ(back.p_intra, 0.3);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_THROW(io::sbm_spec_from_json(Json{{"num_blocks", 2}}), Error);
}

TEST(Json, SimConfigRoundTrip) {
  const Json fixture = Json::parse(io::read_file(std::filesystem::path(INTERFERE_FIXTURES) / "fig1b_desk.json"));
  const SimConfig c = io::sim_config_from_json(fixture);
  EXPECT_EQ(c.seed, 20160602u);
  EXPECT_EQ(c.settings.size(), 3u);
  EXPECT_EQ(io::to_json(io::sim_config_from_json(io::to_json(c))).dump(), io::to_json(c).dump());
}

TEST(Json, SimConfigRejectsUnknownAndSeedless) {
  EXPECT_THROW(io::sim_config_from_json(Json{{"seed", 1}, {"bogus", 2}}), ValidationError);
  EXPECT_THROW(io::sim_config_from_json(Json{{"study", "power"}}), ValidationError);
  EXPECT_THROW(io::sim_config_from_json(Json{{"seed", 1}, {"study", "nope"}}), Error);
}

TEST(Json, AnalysisReportFields) {
  const AnalysisReport r = summarize(-3.3, 65.61, 0.05, DecisionRule::gaussian);
  const Json j = io::to_json(r);
  EXPECT_DOUBLE_EQ(j.at("delta").get<double>(), -3.3);
  EXPECT_TRUE(j.contains("p_gaussian"));
  EXPECT_TRUE(j.contains("decision"));
}

TEST(Study, Names) {
  for (StudyType s : {StudyType::ratio, StudyType::power, StudyType::type1})
    EXPECT_EQ(io::parse_study(io::study_name(s)), s);
  EXPECT_THROW(io::parse_study("other"), Error);
}

TEST(Files, WriteAndRead) {
  const auto dir = std::filesystem::temp_directory_path() / "interfere_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "x.txt";
  io::write_file(path, "hello\n");
  EXPECT_EQ(io::read_file(path), "hello\n");
  EXPECT_THROW(io::read_file(dir / "missing.txt"), Error);
  std::filesystem::remove_all(dir);
}

TEST(Manifest, DigestAndOptionalTimestamp) {
  EXPECT_EQ(io::fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(io::fnv1a_hex("a"), "af63dc4c8601ec8c");
  io::RunManifest m;
  m.command = "analyze";
  m.config_digest = io::fnv1a_hex("{}");
  const Json j = io::to_json(m);
  EXPECT_FALSE(j.contains("timestamp"));
  m.timestamp = "2020-01-01T00:00:00Z";
  EXPECT_TRUE(io::to_json(m).contains("timestamp"));
}
