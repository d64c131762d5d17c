#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "interfere/clustering.hpp"

namespace interfere {

using Edge = std::pair<UnitId, UnitId>;

/// Immutable undirected simple graph in compressed adjacency form.
/// Neighbor lists are sorted, symmetric, free of self-loops and duplicates.
class Graph {
 public:
  Graph() = default;

  /// Builds from an edge list; duplicates (in either orientation) collapse.
  /// Throws ValidationError on self-loops or ids >= num_units.
  static Graph from_edges(std::size_t num_units, std::span<const Edge> edges);

  std::size_t num_units() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_edges() const noexcept { return adjacency_.size() / 2; }
  std::span<const UnitId> neighbors(UnitId unit) const noexcept {
    return {adjacency_.data() + offsets_[unit], adjacency_.data() + offsets_[unit + 1]};
  }
  std::size_t degree(UnitId unit) const noexcept { return offsets_[unit + 1] - offsets_[unit]; }

  /// Each undirected edge once, as (low, high), in ascending order.
  std::vector<Edge> edges() const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<UnitId> adjacency_;
};

/// Parses the edge-list text format: one `a b` or `a,b` pair per line,
/// `#` comment lines, optional `N=<int>` header fixing the unit count.
Graph parse_edge_list(std::istream& in);
Graph load_edge_list(const std::filesystem::path& path);

/// Stochastic block model with equal-size blocks.
struct SbmSpec {
  std::size_t num_blocks = 0;
  std::size_t block_size = 0;
  double p_intra = 0.0;
  double p_inter = 0.0;
  std::uint64_t seed = 0;

  std::size_t num_units() const noexcept { return num_blocks * block_size; }
  void validate() const;

  /// Probabilities whose expected within-block neighbor fraction is
  /// `target_rho` at expected degree `mean_degree`.
  static SbmSpec from_target(std::size_t num_blocks, std::size_t block_size, double target_rho,
                             double mean_degree, std::uint64_t seed);
};

struct SbmGraph {
  Graph graph;
  Clustering blocks;
};

/// Each unordered pair is an edge independently with p_intra (same block) or
/// p_inter. Deterministic given the seed. Throws SizeError when the pair count
/// is beyond what can be enumerated.
SbmGraph generate_sbm(const SbmSpec& spec);

/// |N_i ∩ C(i)| / |N_i|, or 0 for an isolated unit.
double neighborhood_fraction_in_cluster(const Graph& graph, const Clustering& clustering, UnitId unit);

}  // namespace interfere
