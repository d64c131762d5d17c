#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "interfere/assign.hpp"
#include "interfere/clustering.hpp"
#include "interfere/estimate.hpp"
#include "interfere/graph.hpp"
#include "interfere/outcomes.hpp"

namespace interfere {

enum class DesignKind {
  complete,      // C(N, n_treated) unit assignments
  cluster,       // C(M, n_treated) cluster assignments
  hierarchical,  // C(M, m_cr) C(n_cr, n_cr_t) C(m_cbr, m_cbr_t)
};

enum class Statistic {
  estimate,          // difference in means (complete), Horvitz-Thompson (cluster), Delta (hierarchical)
  tau_cr,            // hierarchical only
  tau_cbr,           // hierarchical only
  variance_bound,    // hierarchical only
  chebyshev_reject,  // hierarchical only, 0/1 indicator at `alpha`
};

/// Outcomes come either from a SUTVA table or from the noise-free linear model on `graph`.
struct EnumerationSpec {
  Clustering clustering;
  DesignKind design = DesignKind::hierarchical;
  DesignCounts counts;         // hierarchical
  std::size_t n_treated = 0;   // complete: units, cluster: clusters
  Statistic statistic = Statistic::estimate;
  double alpha = 0.05;
  std::optional<PotentialTable> table;
  std::optional<LinearInterferenceModel> model;
  std::optional<Graph> graph;
  std::uint64_t cap = 10'000'000;
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // population variance over the equally weighted outcomes
  std::uint64_t outcomes = 0;
};

/// Closed-form product of binomial coefficients. Saturates at UINT64_MAX.
std::uint64_t outcome_count(const EnumerationSpec& spec);

/// Exact first two moments over the uniform design law. Outer combinations are
/// sharded across OpenMP threads and per-shard accumulators merged in index order.
/// Throws SizeError naming the required count when it exceeds `cap`.
Moments enumerate_moments(const EnumerationSpec& spec);

namespace serial {
/// Single accumulator over all outcomes in lexicographic order.
Moments enumerate_moments(const EnumerationSpec& spec);
}  // namespace serial

/// E(1/eta_t) for eta_t ~ Binomial(n, p) conditioned on 1 <= eta_t <= n-1.
double binomial_negative_moment(std::size_t n, double p);

struct BernoulliGap {
  double var_br = 0.0;
  double var_cr = 0.0;
  double gap = 0.0;    // var_br - var_cr
  double bound = 0.0;  // 5 (S_t / n_t^2 + S_c / n_c^2)
  bool within_bound = false;
};

/// Exact variances of the difference in means under re-randomized Bernoulli(n_t/N)
/// and complete randomization with n_t treated, by enumerating all 2^N vectors.
/// Requires N <= 20 and p^N + (1-p)^N <= N^-2.
BernoulliGap bernoulli_vs_cr_variance_gap(const PotentialTable& table, std::size_t n_treated);

struct SmallDesign {
  Graph graph;
  Clustering clustering;
  DesignCounts counts;
};

/// 8 units in 4 pairs, ring plus two chords; symmetric counts (72 outcomes).
SmallDesign small_design_8();

/// 16 units in 8 pairs, circulant graph (offsets 1 and 5); symmetric counts
/// (29400 outcomes), large enough for every bucket of the variance bound.
SmallDesign small_design_16();

}  // namespace interfere
