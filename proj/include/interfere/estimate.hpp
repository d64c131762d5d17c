#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "interfere/assign.hpp"
#include "interfere/clustering.hpp"
#include "interfere/graph.hpp"
#include "interfere/outcomes.hpp"

namespace interfere {

/// Difference in means of y between z = 1 and z = 0.
double diff_in_means(std::span<const double> y, std::span<const std::uint8_t> z);

/// (M/N) * (mean treated cluster sum - mean control cluster sum).
double horvitz_thompson_cluster(std::span<const double> y_plus, std::span<const std::uint8_t> z_clusters,
                                std::size_t num_clusters, std::size_t num_units);

struct DeltaEstimate {
  double tau_cr = 0.0;   // difference in means over arm-cr units
  double tau_cbr = 0.0;  // Horvitz-Thompson over arm-cbr clusters, scale m_cbr/n_cbr
  double delta = 0.0;    // tau_cr - tau_cbr
};

DeltaEstimate delta_statistic(const Clustering& clustering, const HierarchicalAssignment& assignment,
                              std::span<const double> y);

/// S_cr,t/n_cr,t + S_cr,c/n_cr,c + (m_cbr/n_cbr)^2 (S+_cbr,t/m_cbr,t + S+_cbr,c/m_cbr,c)
/// with sample variances over the four buckets. Each bucket needs >= 2 members.
double empirical_variance_bound(const Clustering& clustering, const HierarchicalAssignment& assignment,
                                std::span<const double> y);

/// Exact var(Delta) over the hierarchical design when Y_i(1) = Y_i(0) = y_i:
///   n_cr/(n_cr,t n_cr,c) * [n_cr/(n_cr-1) (N-1)/N S - m_cbr/(N(n_cr-1)) S+]
///   + (m_cbr/n_cbr)^2 m_cbr/(m_cbr,t m_cbr,c) S+
/// with S = sigma^2(y), S+ = sigma^2(Y+).
double fisher_null_variance(std::span<const double> y, const Clustering& clustering, const DesignCounts& counts);

/// Sample variances (n - 1 denominators) of Y(1), Y(0), Y(1) - Y(0) and of
/// their cluster sums.
struct VarianceComponents {
  double s_t = 0.0, s_c = 0.0, s_tc = 0.0;
  double s_plus_t = 0.0, s_plus_c = 0.0, s_plus_tc = 0.0;
};

VarianceComponents variance_components(const PotentialTable& table, const Clustering& clustering);

/// var(Delta) under no interference, split into the leading terms
/// sigma2_cr + sigma2_cbr + M/(n_cr n_cbr) S+_tc and a remainder that depends on
/// how arm cr samples whole clusters. `remainder_bound` is an explicit bound on
/// |remainder| computed from the table; `exact = leading + remainder`.
struct SutvaVariance {
  double sigma2_cr = 0.0;
  double sigma2_cbr = 0.0;
  double arm_split_term = 0.0;
  double leading = 0.0;
  double remainder = 0.0;
  double remainder_bound = 0.0;
  double exact = 0.0;
};

SutvaVariance theoretical_sutva_variance(const PotentialTable& table, const Clustering& clustering,
                                         const DesignCounts& counts);

struct StratumEstimate {
  double delta = 0.0;
  double sigma_hat_sq = 0.0;
  std::size_t num_clusters = 0;
};

struct StratifiedDelta {
  double delta = 0.0;         // sum_s (M(s)/M) Delta(s)
  double sigma_hat_sq = 0.0;  // sum_s (M(s)/M)^2 sigma_hat^2(s)
};

/// Throws ValidationError when the strata do not account for all `total_clusters`.
StratifiedDelta stratified_delta(std::span<const StratumEstimate> strata, std::size_t total_clusters);

/// Two-tailed standard-normal p-value of |delta| / sigma. Throws when sigma <= 0.
double gaussian_p_value(double delta, double sigma);

enum class Decision { reject, fail_to_reject };
enum class DecisionRule { chebyshev, gaussian };

/// Reject iff |delta| >= alpha^(-1/2) sqrt(sigma_hat_sq). The rejection rate under
/// no interference is at most alpha whenever sigma_hat_sq bounds var(Delta).
Decision chebyshev_decision(double delta, double sigma_hat_sq, double alpha);

struct AnalysisReport {
  double tau_cr = 0.0;
  double tau_cbr = 0.0;
  double delta = 0.0;
  double sigma_hat_sq = 0.0;
  std::optional<double> t_stat;  // empty when sigma_hat_sq = 0 and delta != 0
  double p_chebyshev = 1.0;      // min(1, 1/T^2)
  double p_gaussian = 1.0;
  double alpha = 0.05;
  DecisionRule rule = DecisionRule::chebyshev;
  Decision decision = Decision::fail_to_reject;
  bool stratified = false;
  DesignCounts counts;                  // unstratified designs only
  std::vector<StratumEstimate> strata;  // stratified designs only
};

/// Inferential fields from (delta, sigma_hat_sq). A zero bound rejects iff delta != 0.
AnalysisReport summarize(double delta, double sigma_hat_sq, double alpha, DecisionRule rule);

AnalysisReport analyze(const Clustering& clustering, const HierarchicalAssignment& assignment,
                       std::span<const double> y, double alpha, DecisionRule rule = DecisionRule::chebyshev);

AnalysisReport analyze_stratified(const Clustering& clustering, const StratifiedAssignment& assignment,
                                  std::span<const double> y, double alpha,
                                  DecisionRule rule = DecisionRule::chebyshev);

/// Exact E(tau_cr), E(tau_cbr), E(Delta) over the hierarchical design (complete
/// randomization in arm cr) under the linear interference model.
struct LinearDeltaExpectation {
  double tau_cr = 0.0;
  double tau_cbr = 0.0;
  double delta = 0.0;
};

LinearDeltaExpectation expected_delta_linear(const LinearInterferenceModel& model, const Graph& graph,
                                             const Clustering& clustering, const DesignCounts& counts);

/// Exact E(difference in means) under complete randomization of all N units,
/// linear model: beta - gamma f/(N-1), f the non-isolated fraction.
double expected_tau_complete_linear(const LinearInterferenceModel& model, const Graph& graph);

/// Exact E(Horvitz-Thompson) under cluster randomization of all M clusters,
/// linear model: beta + gamma N^-1 sum over non-isolated i of (rho_i M - 1)/(M - 1).
/// With no isolated units this is beta + gamma (rho_C M - 1)/(M - 1).
double expected_tau_cluster_linear(const LinearInterferenceModel& model, const Graph& graph,
                                   const Clustering& clustering);

/// Neighborhood-pair statistics entering the approximate variance of Delta
/// under the linear model. Pairs (p, q) are ordered and include p = q.
struct InterferenceVarianceTerms {
  double a_bar = 0.0;  // both in N_i ∩ C(i)
  double b_bar = 0.0;  // in N_i, different clusters
  double c_bar = 0.0;  // in N_i \ C(i), same cluster
  double d_bar = 0.0;  // same-cluster (i, j): one inside, one outside C(i, j)
  double e_bar = 0.0;  // same-cluster (i, j): both inside C(i, j)
  double f_bar = 0.0;  // cross-cluster (i, j): p, q in C(i) ∪ C(j), different clusters
  double g_bar = 0.0;  // N^-2 sum_{i != j} 1/(|N_i| |N_j|)
  double rho_c = 0.0;
};

/// OpenMP kernel via per-unit cluster counts.
InterferenceVarianceTerms interference_variance_terms(const Graph& graph, const Clustering& clustering);

namespace serial {
/// Reference by direct pair enumeration over units and neighborhoods. O(N^2 d^2).
InterferenceVarianceTerms interference_variance_terms(const Graph& graph, const Clustering& clustering);
}  // namespace serial

/// beta^2 (8/N + 5/(2M)) - beta gamma rho_C
///   + gamma^2 (8 A/N + 6 B/N + 9 C/N + G + F - rho_C^2).
/// Only defined for the symmetric design (equal arms, half treated in each);
/// throws UnsupportedError otherwise.
double interference_variance_approx(const LinearInterferenceModel& model, const Graph& graph,
                                    const Clustering& clustering, const DesignCounts& counts);

}  // namespace interfere
