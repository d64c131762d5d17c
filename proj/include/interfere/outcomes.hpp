#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "interfere/clustering.hpp"
#include "interfere/graph.hpp"

namespace interfere {

/// Potential outcomes under no interference: Y_i(1), Y_i(0).
struct PotentialTable {
  std::vector<double> y1;
  std::vector<double> y0;

  std::size_t num_units() const noexcept { return y1.size(); }
  void validate() const;
};

/// Y_i(Z) = alpha + beta Z_i + gamma rho_i(Z) + eps_i, eps_i ~ N(0, noise_sd^2),
/// rho_i(Z) the treated fraction of i's neighbors (0 when isolated).
struct LinearInterferenceModel {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double noise_sd = 0.0;

  void validate() const;
};

struct ObservedOutcomes {
  std::vector<double> y;
  std::vector<double> y_plus;  // per-cluster sums, empty without a clustering
};

/// rho_i(Z) for every unit. OpenMP over units.
std::vector<double> treated_neighbor_fraction(const Graph& graph, std::span<const std::uint8_t> z);

namespace serial {
std::vector<double> treated_neighbor_fraction(const Graph& graph, std::span<const std::uint8_t> z);
}  // namespace serial

std::vector<double> cluster_sums(const Clustering& clustering, std::span<const double> y);

ObservedOutcomes realize_sutva(const PotentialTable& table, std::span<const std::uint8_t> z,
                               const Clustering* clustering = nullptr);

/// Noise drawn from `seed`; noise_sd = 0 gives exact outcomes.
ObservedOutcomes realize_linear(const LinearInterferenceModel& model, const Graph& graph,
                                std::span<const std::uint8_t> z, std::uint64_t seed,
                                const Clustering* clustering = nullptr);

/// Same model with a caller-fixed noise vector (eps_i held fixed across
/// assignments, as for fixed potential outcomes).
ObservedOutcomes realize_linear(const LinearInterferenceModel& model, const Graph& graph,
                                std::span<const std::uint8_t> z, std::span<const double> noise,
                                const Clustering* clustering = nullptr);

/// eps_i ~ N(0, sd^2) from the noise substream of `seed`.
std::vector<double> draw_noise(std::size_t num_units, double sd, std::uint64_t seed);

double total_treatment_effect(const PotentialTable& table);

struct LinearTotalEffect {
  double tau = 0.0;                    // beta + gamma * non_isolated_fraction
  double non_isolated_fraction = 1.0;  // isolated units receive no interference
};

LinearTotalEffect total_treatment_effect(const LinearInterferenceModel& model, const Graph& graph);

}  // namespace interfere
