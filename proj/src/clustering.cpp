#include "interfere/clustering.hpp"

#include <algorithm>
#include <string>

#include "interfere/error.hpp"

namespace interfere {

Clustering::Clustering(std::vector<ClusterId> assignment, std::size_t num_clusters)
    : assignment_(std::move(assignment)), sizes_(num_clusters, 0) {
  if (num_clusters == 0) throw ValidationError("clustering needs at least one cluster");
  for (std::size_t i = 0; i < assignment_.size(); ++i) {
    if (assignment_[i] >= num_clusters) {
      throw ValidationError("unit " + std::to_string(i) + " has cluster id " +
                            std::to_string(assignment_[i]) + " >= " + std::to_string(num_clusters));
    }
    ++sizes_[assignment_[i]];
  }
  for (std::size_t c = 0; c < num_clusters; ++c) {
    if (sizes_[c] == 0) throw ValidationError("cluster " + std::to_string(c) + " is empty");
  }
  offsets_.assign(num_clusters + 1, 0);
  for (std::size_t c = 0; c < num_clusters; ++c) offsets_[c + 1] = offsets_[c] + sizes_[c];
  members_.resize(assignment_.size());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t i = 0; i < assignment_.size(); ++i) {
    members_[cursor[assignment_[i]]++] = static_cast<UnitId>(i);
  }
}

Clustering Clustering::contiguous_blocks(std::size_t num_blocks, std::size_t block_size) {
  if (num_blocks == 0 || block_size == 0) throw ValidationError("blocks must be non-empty");
  std::vector<ClusterId> a(num_blocks * block_size);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<ClusterId>(i / block_size);
  return Clustering(std::move(a), num_blocks);
}

std::span<const UnitId> Clustering::members(ClusterId cluster) const {
  if (cluster >= num_clusters()) throw ValidationError("cluster id out of range");
  return {members_.data() + offsets_[cluster], members_.data() + offsets_[cluster + 1]};
}

bool Clustering::is_balanced() const noexcept {
  return std::adjacent_find(sizes_.begin(), sizes_.end(), std::not_equal_to<>()) == sizes_.end();
}

std::size_t Clustering::cluster_size() const {
  if (sizes_.empty()) throw ValidationError("empty clustering");
  if (!is_balanced()) {
    const auto [lo, hi] = std::minmax_element(sizes_.begin(), sizes_.end());
    throw ValidationError("clustering is unbalanced (sizes range " + std::to_string(*lo) + ".." +
                          std::to_string(*hi) + "); equal cluster sizes are required");
  }
  return sizes_.front();
}

Clustering::Restriction Clustering::restrict_to(std::span<const ClusterId> clusters) const {
  Restriction r;
  std::vector<ClusterId> local;
  std::vector<bool> seen(num_clusters(), false);
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const ClusterId c = clusters[k];
    if (c >= num_clusters()) throw ValidationError("cluster id out of range");
    if (seen[c]) throw ValidationError("cluster " + std::to_string(c) + " listed twice");
    seen[c] = true;
    for (UnitId u : members(c)) {
      r.units.push_back(u);
      local.push_back(static_cast<ClusterId>(k));
    }
  }
  r.clusters.assign(clusters.begin(), clusters.end());
  r.clustering = Clustering(std::move(local), clusters.size());
  return r;
}

}  // namespace interfere
