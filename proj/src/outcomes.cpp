#include "interfere/outcomes.hpp"

#include <cmath>
#include <string>

#include "interfere/error.hpp"
#include "interfere/rng.hpp"
#include "interfere/stats.hpp"

namespace interfere {

void PotentialTable::validate() const {
  if (y1.size() != y0.size()) throw ValidationError("potential table columns differ in length");
  if (y1.empty()) throw ValidationError("potential table is empty");
  for (std::size_t i = 0; i < y1.size(); ++i) {
    if (!std::isfinite(y1[i]) || !std::isfinite(y0[i])) {
      throw ValidationError("non-finite potential outcome for unit " + std::to_string(i));
    }
  }
}

void LinearInterferenceModel::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma)) {
    throw ValidationError("linear model coefficients must be finite");
  }
  if (!std::isfinite(noise_sd) || noise_sd < 0.0) throw ValidationError("noise_sd must be >= 0");
}

namespace {

void require_length(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw ValidationError(std::string(what) + " has length " + std::to_string(got) + ", expected " +
                          std::to_string(expected));
  }
}

}  // namespace

std::vector<double> treated_neighbor_fraction(const Graph& graph, std::span<const std::uint8_t> z) {
  require_length(graph.num_units(), z.size(), "assignment");
  std::vector<double> rho(graph.num_units(), 0.0);
  const auto n = static_cast<std::int64_t>(graph.num_units());
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n; ++s) {
    const auto nbrs = graph.neighbors(static_cast<UnitId>(s));
    if (nbrs.empty()) continue;
    std::size_t treated = 0;
    for (UnitId v : nbrs) treated += z[v];
    rho[s] = static_cast<double>(treated) / static_cast<double>(nbrs.size());
  }
  return rho;
}

namespace serial {

std::vector<double> treated_neighbor_fraction(const Graph& graph, std::span<const std::uint8_t> z) {
  require_length(graph.num_units(), z.size(), "assignment");
  std::vector<double> rho(graph.num_units(), 0.0);
  for (UnitId i = 0; i < graph.num_units(); ++i) {
    const auto nbrs = graph.neighbors(i);
    if (nbrs.empty()) continue;
    double treated = 0.0;
    for (UnitId v : nbrs) treated += z[v];
    rho[i] = treated / static_cast<double>(nbrs.size());
  }
  return rho;
}

}  // namespace serial

std::vector<double> cluster_sums(const Clustering& clustering, std::span<const double> y) {
  require_length(clustering.num_units(), y.size(), "outcome vector");
  std::vector<double> sums(clustering.num_clusters(), 0.0);
  for (ClusterId c = 0; c < clustering.num_clusters(); ++c) {
    stats::CompensatedSum s;
    for (UnitId u : clustering.members(c)) s.add(y[u]);
    sums[c] = s.value();
  }
  return sums;
}

ObservedOutcomes realize_sutva(const PotentialTable& table, std::span<const std::uint8_t> z,
                               const Clustering* clustering) {
  table.validate();
  require_length(table.num_units(), z.size(), "assignment");
  ObservedOutcomes out;
  out.y.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out.y[i] = z[i] ? table.y1[i] : table.y0[i];
  if (clustering) out.y_plus = cluster_sums(*clustering, out.y);
  return out;
}

std::vector<double> draw_noise(std::size_t num_units, double sd, std::uint64_t seed) {
  std::vector<double> eps(num_units, 0.0);
  if (sd == 0.0) return eps;
  Engine rng = make_engine(seed, Stream::noise);
  std::normal_distribution<double> normal(0.0, sd);
  for (double& e : eps) e = normal(rng);
  return eps;
}

ObservedOutcomes realize_linear(const LinearInterferenceModel& model, const Graph& graph,
                                std::span<const std::uint8_t> z, std::span<const double> noise,
                                const Clustering* clustering) {
  model.validate();
  require_length(graph.num_units(), noise.size(), "noise vector");
  const auto rho = treated_neighbor_fraction(graph, z);
  ObservedOutcomes out;
  out.y.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out.y[i] = model.alpha + model.beta * z[i] + model.gamma * rho[i] + noise[i];
  }
  if (clustering) out.y_plus = cluster_sums(*clustering, out.y);
  return out;
}

ObservedOutcomes realize_linear(const LinearInterferenceModel& model, const Graph& graph,
                                std::span<const std::uint8_t> z, std::uint64_t seed, const Clustering* clustering) {
  model.validate();
  const auto eps = draw_noise(graph.num_units(), model.noise_sd, seed);
  return realize_linear(model, graph, z, eps, clustering);
}

double total_treatment_effect(const PotentialTable& table) {
  table.validate();
  stats::CompensatedSum s;
  for (std::size_t i = 0; i < table.num_units(); ++i) s.add(table.y1[i] - table.y0[i]);
  return s.value() / static_cast<double>(table.num_units());
}

LinearTotalEffect total_treatment_effect(const LinearInterferenceModel& model, const Graph& graph) {
  model.validate();
  std::size_t connected = 0;
  for (UnitId i = 0; i < graph.num_units(); ++i) connected += graph.degree(i) > 0;
  LinearTotalEffect t;
  t.non_isolated_fraction = static_cast<double>(connected) / static_cast<double>(graph.num_units());
  t.tau = model.beta + model.gamma * t.non_isolated_fraction;
  return t;
}

}  // namespace interfere
