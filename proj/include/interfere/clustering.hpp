#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace interfere {

using UnitId = std::uint32_t;
using ClusterId = std::uint32_t;

/// Surjective map from units onto clusters 0..M-1. Every cluster is non-empty.
/// Members of each cluster are kept sorted by unit id.
class Clustering {
 public:
  Clustering() = default;
  /// Throws ValidationError if an id is out of range or a cluster is empty.
  Clustering(std::vector<ClusterId> assignment, std::size_t num_clusters);

  /// Units [j*size, (j+1)*size) form cluster j.
  static Clustering contiguous_blocks(std::size_t num_blocks, std::size_t block_size);

  std::size_t num_units() const noexcept { return assignment_.size(); }
  std::size_t num_clusters() const noexcept { return sizes_.size(); }
  ClusterId cluster_of(UnitId unit) const { return assignment_.at(unit); }
  std::span<const ClusterId> assignment() const noexcept { return assignment_; }
  std::span<const std::size_t> sizes() const noexcept { return sizes_; }
  std::span<const UnitId> members(ClusterId cluster) const;

  bool is_balanced() const noexcept;
  /// Common cluster size N/M. Throws ValidationError when unbalanced.
  std::size_t cluster_size() const;

  struct Restriction;
  /// Sub-clustering over the units of `clusters` (renumbered in the given order).
  Restriction restrict_to(std::span<const ClusterId> clusters) const;

  bool operator==(const Clustering& other) const noexcept { return assignment_ == other.assignment_; }

 private:
  std::vector<ClusterId> assignment_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<UnitId> members_;
};

struct Clustering::Restriction {
  Clustering clustering;
  std::vector<UnitId> units;          // local unit -> original unit
  std::vector<ClusterId> clusters;    // local cluster -> original cluster
};

}  // namespace interfere
