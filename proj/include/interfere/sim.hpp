#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "interfere/assign.hpp"
#include "interfere/clustering.hpp"
#include "interfere/estimate.hpp"
#include "interfere/graph.hpp"
#include "interfere/outcomes.hpp"

namespace interfere {

enum class StudyType { ratio, power, type1 };
enum class ClusteringSource { blocks, ldg };
enum class TableKind { constant_effect, heterogeneous, constant_y };

/// SUTVA table generator: Y(0)_i = cluster_sd * u_C(i) + unit_sd * e_i,
/// Y(1)_i = Y(0)_i + tau (+ effect_sd * f_i when heterogeneous), all draws
/// standard normal from the table substream. constant_y sets every outcome to tau.
struct TableSpec {
  TableKind kind = TableKind::constant_effect;
  double tau = 1.0;
  double unit_sd = 1.0;
  double cluster_sd = 0.0;
  double effect_sd = 1.0;
};

PotentialTable make_table(const TableSpec& spec, const Clustering& clustering, std::uint64_t seed);

/// One SBM setting of the power study: target rho_C at the configured mean
/// degree, or explicit probabilities.
struct SbmSetting {
  std::optional<double> target_rho;
  std::optional<double> p_intra;
  std::optional<double> p_inter;
};

struct SimConfig {
  StudyType study = StudyType::power;
  std::uint64_t seed = 0;
  std::size_t replications = 2000;
  double alpha = 0.05;
  DecisionRule rule = DecisionRule::chebyshev;

  // Design. Zero overrides mean the symmetric default.
  std::size_t m_cr = 0, n_cr_t = 0, m_cbr_t = 0;

  // Power study.
  std::size_t num_blocks = 40;
  std::size_t block_size = 100;
  double mean_degree = 20.0;
  std::vector<SbmSetting> settings;
  ClusteringSource clustering = ClusteringSource::blocks;
  double leniency = 0.0;
  std::size_t ldg_iterations = 3;
  double model_alpha = 0.0;
  double beta = 1.0;
  std::vector<double> gamma_grid;
  double noise_sd = 1.0;
  bool regenerate_graph = false;  // new graph per replication
  bool resample_noise = false;    // new noise per replication

  // Ratio and type-I studies: clusters of `units_per_cluster`, one setting per count.
  std::vector<std::size_t> cluster_counts;
  std::size_t units_per_cluster = 20;
  TableSpec table;

  void validate() const;
};

struct SimRow {
  std::string setting;
  double gamma = 0.0;
  double rho_c = 0.0;
  std::size_t num_clusters = 0;
  std::size_t num_units = 0;
  std::size_t replications = 0;
  double rejection_rate = 0.0;  // configured rule
  double rejection_se = 0.0;
  double chebyshev_rate = 0.0;
  double gaussian_rate = 0.0;
  double mean_delta = 0.0;
  double delta_se = 0.0;
  double var_delta = 0.0;  // Monte Carlo sample variance of Delta
  double mean_sigma_hat_sq = 0.0;
  double expected_delta = 0.0;        // exact E(Delta), power study
  std::optional<double> approx_variance;  // power study, symmetric design
  double reference_variance = 0.0;    // exact var(Delta), ratio study
  double ratio_mean = 0.0;
  double ratio_se = 0.0;
  double ratio_q10 = 0.0;
  double ratio_q90 = 0.0;
  double ratio_in_band = 0.0;  // fraction of ratios in (0.95, 1.05)
  double wall_seconds = 0.0;   // excluded from reproducible outputs
};

struct PropertyCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct SimReport {
  StudyType study = StudyType::power;
  std::uint64_t seed = 0;
  std::vector<SimRow> rows;
  std::vector<PropertyCheck> checks;

  bool all_passed() const noexcept;
};

/// sigma_hat^2 / var(Delta) over R hierarchical draws per cluster count, with
/// var(Delta) exact for the generated table. Throws ValidationError when it is 0.
SimReport run_ratio_study(const SimConfig& cfg);

/// Rejection rate per (SBM setting, gamma). Assignments are shared across the
/// gamma grid within a setting; noise is fixed per setting unless resampled.
SimReport run_power_study(const SimConfig& cfg);

/// Chebyshev and Gaussian rejection rates under a SUTVA table.
SimReport run_type1_study(const SimConfig& cfg);

SimReport run_study(const SimConfig& cfg);

/// sqrt(r (1 - r) / R).
double binomial_se(double rate, std::size_t replications);

}  // namespace interfere
