#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "interfere/clustering.hpp"
#include "interfere/graph.hpp"

namespace interfere {

struct ClusteringMetrics {
  double rho_c = 0.0;                   // mean over units of |N_i ∩ C(i)|/|N_i|, isolated -> 0
  double internal_edge_fraction = 0.0;  // edges with both endpoints in one cluster
  double balance_ratio = 1.0;           // max size / min size
  std::size_t isolated_units = 0;
  std::size_t internal_edges = 0;
  std::size_t total_edges = 0;
};

/// OpenMP kernel over units.
ClusteringMetrics clustering_metrics(const Graph& graph, const Clustering& clustering);

namespace serial {
/// Single-threaded reference for clustering_metrics.
ClusteringMetrics clustering_metrics(const Graph& graph, const Clustering& clustering);
}  // namespace serial

struct LdgOptions {
  std::size_t num_clusters = 0;
  double leniency = 0.0;        // allowed overshoot of N/M as a fraction
  std::size_t iterations = 1;   // streaming passes, the first one included
  std::uint64_t seed = 0;
};

struct LdgResult {
  Clustering clustering;
  std::size_t capacity = 0;
  std::vector<double> pass_internal_edge_fraction;  // one entry per pass
  std::size_t selected_pass = 0;                    // 0-based pass returned
};

/// Restreaming Linear Deterministic Greedy. Each pass visits units in a
/// seed-shuffled order and places unit i in the non-full cluster c maximizing
/// |N_i ∩ c| * (1 - size(c)/capacity), where neighbor labels are those of the
/// current pass when already placed and of the previous pass otherwise.
/// Ties go to the smaller cluster, then the lower id. The pass with the most
/// internal edges is returned (latest pass on ties).
LdgResult ldg_restream(const Graph& graph, const LdgOptions& options);

/// Moves units from oversized to undersized clusters until every cluster has
/// N/M units. Units with the fewest neighbors in their own cluster move first,
/// each to the deficit cluster holding most of its neighbors.
/// Throws ValidationError when N is not a multiple of M.
Clustering rebalance(const Graph& graph, const Clustering& clustering);

/// rho_C / sqrt(sigma_hat_sq); larger favors power.
double design_score(const ClusteringMetrics& metrics, double sigma_hat_sq);

struct ClusterFeatures {
  std::vector<std::size_t> internal_edges;
  std::vector<std::size_t> boundary_edges;
  std::vector<std::vector<double>> covariates;  // one row per cluster, may be empty rows

  std::size_t num_clusters() const noexcept { return internal_edges.size(); }
};

/// Edge counts per cluster, plus optional per-cluster covariate rows.
ClusterFeatures cluster_features(const Graph& graph, const Clustering& clustering,
                                 std::vector<std::vector<double>> covariates = {});

/// Per-cluster means of per-unit covariate columns.
std::vector<std::vector<double>> cluster_means(const Clustering& clustering,
                                               std::span<const std::vector<double>> unit_covariates);

struct Stratification {
  std::size_t num_strata = 0;
  std::vector<std::uint32_t> stratum_of;           // cluster -> stratum
  std::vector<std::size_t> strata_sizes;           // clusters per stratum
  std::vector<std::vector<ClusterId>> members;     // stratum -> sorted clusters

  static Stratification from_map(std::vector<std::uint32_t> stratum_of, std::size_t num_strata);
};

/// Sort-and-chunk stratifier: every feature column (edge counts, then
/// covariates) is z-scored, the scores are summed into one composite, clusters
/// are sorted by it (seeded tie-break) and cut into L contiguous strata whose
/// sizes differ by at most one, larger strata first.
Stratification stratify_clusters(const ClusterFeatures& features, std::size_t num_strata,
                                 std::uint64_t seed);

/// round(fraction * M) distinct clusters drawn uniformly, returned sorted.
std::vector<ClusterId> subsample_clusters(const Clustering& clustering, double fraction,
                                          std::uint64_t seed);

}  // namespace interfere
