#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "interfere/clustering.hpp"
#include "interfere/partition.hpp"

namespace interfere {

using Bits = std::vector<std::uint8_t>;

/// Arm and bucket sizes of the hierarchical design.
struct DesignCounts {
  std::size_t n_cr = 0, n_cbr = 0;      // units per arm
  std::size_t m_cr = 0, m_cbr = 0;      // clusters per arm
  std::size_t n_cr_t = 0, n_cr_c = 0;   // treated / control units in arm cr
  std::size_t m_cbr_t = 0, m_cbr_c = 0; // treated / control clusters in arm cbr

  /// Half the clusters to each arm, half of each arm treated. Throws
  /// ValidationError when M, n_cr or m_cbr is odd.
  static DesignCounts symmetric(const Clustering& clustering);
  /// Remaining counts follow from the balanced clustering.
  static DesignCounts from_split(const Clustering& clustering, std::size_t m_cr, std::size_t n_cr_t,
                                 std::size_t m_cbr_t);

  /// Checks every identity and the balance n_cr/m_cr = n_cbr/m_cbr = N/M.
  void validate(std::size_t num_units, std::size_t num_clusters) const;

  bool operator==(const DesignCounts&) const = default;
};

struct SimpleAssignment {
  Bits z;
  std::size_t n_t = 0;
  std::size_t n_c = 0;
  std::optional<double> p;  // set for Bernoulli draws
};

/// Uniform over all C(N, n_t) assignments.
SimpleAssignment complete_randomization(std::size_t num_units, std::size_t n_treated, std::uint64_t seed);

/// i.i.d. Bernoulli(p), redrawn while all units share one bucket.
SimpleAssignment bernoulli_rerandomized(std::size_t num_units, double p, std::uint64_t seed);

/// Uniform over C(M, m_t) cluster assignments, expanded to units.
SimpleAssignment cluster_randomization(const Clustering& clustering, std::size_t m_treated, std::uint64_t seed);

enum class CrMechanism { complete, bernoulli };

/// W/omega = 1 marks arm cr. z_cbr is the cluster-level treatment, meaningful
/// for arm-cbr clusters only (0 elsewhere). `counts` hold the realized sizes.
struct HierarchicalAssignment {
  Bits omega;
  Bits w;
  Bits z_cbr;
  Bits z;
  DesignCounts counts;
  std::uint64_t seed = 0;
  CrMechanism mechanism = CrMechanism::complete;

  /// Rebuilds and validates an assignment from unit-level arm and treatment
  /// vectors (e.g. read from CSV).
  static HierarchicalAssignment from_units(const Clustering& clustering, Bits w, Bits z);
};

/// Two-level design: clusters to arms uniformly, then complete (or
/// re-randomized Bernoulli) randomization of units in arm cr and cluster
/// randomization in arm cbr, each from an independent substream of `seed`.
HierarchicalAssignment hierarchical_assign(const Clustering& clustering, const DesignCounts& counts,
                                           std::uint64_t seed, CrMechanism mechanism = CrMechanism::complete);

struct StratumAssignment {
  std::uint32_t stratum = 0;
  Clustering::Restriction restriction;     // stratum-local clustering and id maps
  HierarchicalAssignment assignment;       // over stratum-local units
};

struct StratifiedAssignment {
  std::vector<StratumAssignment> strata;
  Bits w;  // global unit vectors
  Bits z;

  /// Rebuilds per-stratum assignments from global unit vectors.
  static StratifiedAssignment from_units(const Clustering& clustering, const Stratification& strata, Bits w, Bits z);
};

/// Independent hierarchical draws per stratum. Empty `counts` means the
/// symmetric design in every stratum.
StratifiedAssignment stratified_hierarchical_assign(const Clustering& clustering, const Stratification& strata,
                                                    std::span<const DesignCounts> counts, std::uint64_t seed,
                                                    CrMechanism mechanism = CrMechanism::complete);

}  // namespace interfere
