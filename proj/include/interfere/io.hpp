#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "interfere/assign.hpp"
#include "interfere/clustering.hpp"
#include "interfere/estimate.hpp"
#include "interfere/graph.hpp"
#include "interfere/oracle.hpp"
#include "interfere/outcomes.hpp"
#include "interfere/partition.hpp"
#include "interfere/sim.hpp"

namespace interfere::io {

using Json = nlohmann::ordered_json;

/// Shortest decimal that round-trips the double.
std::string format_double(double v);

// CSV files. Readers accept an optional header row, blank lines and `#`
// comments, and throw ParseError with the line number on malformed rows.

/// `unit_id,cluster_id`
void write_clustering_csv(std::ostream& out, const Clustering& clustering);
Clustering read_clustering_csv(std::istream& in);

/// `cluster_id,stratum_id`
void write_strata_csv(std::ostream& out, const Stratification& strata);
Stratification read_strata_csv(std::istream& in, std::size_t num_clusters);

/// Rows sorted by unit id. May cover a subset of units (subsampled designs).
struct AssignmentRows {
  std::vector<UnitId> units;
  Bits w;  // 1 = arm cr
  Bits z;
};

/// `unit_id,arm,treatment` with arm `cr` or `cbr`.
void write_assignment_csv(std::ostream& out, std::span<const std::uint8_t> w, std::span<const std::uint8_t> z);
AssignmentRows read_assignment_csv(std::istream& in);

/// Header `cluster_id,<name>,...`, one row per cluster 0..M-1.
std::vector<std::vector<double>> read_cluster_covariates_csv(std::istream& in, std::size_t num_clusters);

/// `unit_id,y`
void write_outcomes_csv(std::ostream& out, std::span<const double> y);
/// Throws ValidationError listing required unit ids without an outcome. An
/// empty `required` means every unit in [0, num_units); other units default to 0.
std::vector<double> read_outcomes_csv(std::istream& in, std::size_t num_units,
                                      std::span<const UnitId> required = {});

/// `unit_id,y1,y0`
void write_potential_csv(std::ostream& out, const PotentialTable& table);
PotentialTable read_potential_csv(std::istream& in);

/// Edge list with an `N=` header.
void write_edge_list(std::ostream& out, const Graph& graph);

// JSON mappings.
Json to_json(const ClusteringMetrics& m);
Json to_json(const DesignCounts& c);
DesignCounts design_counts_from_json(const Json& j);
Json to_json(const AnalysisReport& r);
Json to_json(const SbmSpec& s);
SbmSpec sbm_spec_from_json(const Json& j);
Json to_json(const Moments& m);
Json to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const Json& j);
/// Wall-clock columns only when `timing` is set, so default output is reproducible.
Json to_json(const SimReport& r, bool timing = false);
void write_sim_csv(std::ostream& out, const SimReport& r, bool timing = false);

std::string study_name(StudyType s);
StudyType parse_study(std::string_view s);

// Files and provenance.
std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::vector<std::string> artifacts;
  std::optional<std::string> timestamp;  // set only on request
};

Json to_json(const RunManifest& m);

}  // namespace interfere::io
