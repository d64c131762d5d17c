#include "interfere/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "interfere/error.hpp"
#include "interfere/rng.hpp"
#include "interfere/stats.hpp"

namespace interfere {

namespace {

void require_cover(const Graph& graph, const Clustering& clustering) {
  if (graph.num_units() != clustering.num_units()) {
    throw ValidationError("clustering covers " + std::to_string(clustering.num_units()) +
                          " units but the graph has " + std::to_string(graph.num_units()));
  }
}

double balance_ratio(const Clustering& c) {
  const auto sizes = c.sizes();
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

std::size_t count_internal_edges(const Graph& graph, std::span<const ClusterId> labels) {
  std::size_t internal = 0;
  for (UnitId i = 0; i < graph.num_units(); ++i) {
    for (UnitId j : graph.neighbors(i)) {
      if (i < j && labels[i] == labels[j]) ++internal;
    }
  }
  return internal;
}

}  // namespace

ClusteringMetrics clustering_metrics(const Graph& graph, const Clustering& clustering) {
  require_cover(graph, clustering);
  const auto n = static_cast<std::int64_t>(graph.num_units());
  std::vector<double> fraction(graph.num_units(), 0.0);
  std::size_t isolated = 0;
  std::size_t internal_arcs = 0;
  const auto labels = clustering.assignment();
#pragma omp parallel for schedule(static) reduction(+ : isolated, internal_arcs)
  for (std::int64_t s = 0; s < n; ++s) {
    const auto i = static_cast<UnitId>(s);
    const auto nbrs = graph.neighbors(i);
    if (nbrs.empty()) {
      ++isolated;
      continue;
    }
    std::size_t inside = 0;
    for (UnitId v : nbrs) inside += labels[v] == labels[i];
    internal_arcs += inside;
    fraction[i] = static_cast<double>(inside) / static_cast<double>(nbrs.size());
  }
  ClusteringMetrics m;
  m.rho_c = stats::mean(fraction);
  m.isolated_units = isolated;
  m.internal_edges = internal_arcs / 2;
  m.total_edges = graph.num_edges();
  m.internal_edge_fraction =
      m.total_edges == 0 ? 1.0 : static_cast<double>(m.internal_edges) / static_cast<double>(m.total_edges);
  m.balance_ratio = balance_ratio(clustering);
  return m;
}

namespace serial {

ClusteringMetrics clustering_metrics(const Graph& graph, const Clustering& clustering) {
  require_cover(graph, clustering);
  ClusteringMetrics m;
  stats::CompensatedSum rho;
  for (UnitId i = 0; i < graph.num_units(); ++i) {
    if (graph.degree(i) == 0) ++m.isolated_units;
    rho.add(neighborhood_fraction_in_cluster(graph, clustering, i));
  }
  m.rho_c = rho.value() / static_cast<double>(graph.num_units());
  for (const auto& [a, b] : graph.edges()) {
    m.internal_edges += clustering.cluster_of(a) == clustering.cluster_of(b);
  }
  m.total_edges = graph.num_edges();
  m.internal_edge_fraction =
      m.total_edges == 0 ? 1.0 : static_cast<double>(m.internal_edges) / static_cast<double>(m.total_edges);
  m.balance_ratio = balance_ratio(clustering);
  return m;
}

}  // namespace serial

LdgResult ldg_restream(const Graph& graph, const LdgOptions& options) {
  const std::size_t n = graph.num_units();
  const std::size_t m = options.num_clusters;
  if (m == 0) throw ValidationError("number of clusters must be positive");
  if (m > n) throw ValidationError("cannot form " + std::to_string(m) + " clusters from " + std::to_string(n) + " units");
  if (!std::isfinite(options.leniency) || options.leniency < 0.0) throw ValidationError("leniency must be >= 0");
  if (options.iterations == 0) throw ValidationError("at least one streaming pass is required");

  const double exact = static_cast<double>(n) * (1.0 + options.leniency) / static_cast<double>(m);
  const auto capacity = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  if (capacity * m < n) {
    throw InfeasibleError("capacity " + std::to_string(capacity) + " x " + std::to_string(m) +
                          " clusters cannot hold " + std::to_string(n) + " units");
  }

  constexpr ClusterId kUnplaced = static_cast<ClusterId>(-1);
  std::vector<ClusterId> previous(n, kUnplaced);
  std::vector<ClusterId> current(n, kUnplaced);
  std::vector<ClusterId> best;
  std::size_t best_internal = 0;
  LdgResult result;
  result.capacity = capacity;

  std::vector<UnitId> order(n);
  std::vector<std::size_t> sizes(m);
  std::vector<std::size_t> counts(m, 0);
  std::vector<ClusterId> touched;

  for (std::size_t pass = 0; pass < options.iterations; ++pass) {
    std::iota(order.begin(), order.end(), UnitId{0});
    Engine rng = make_engine(options.seed, Stream::shuffle, pass);
    std::shuffle(order.begin(), order.end(), rng);
    std::fill(current.begin(), current.end(), kUnplaced);
    std::fill(sizes.begin(), sizes.end(), 0);

    for (UnitId u : order) {
      touched.clear();
      for (UnitId v : graph.neighbors(u)) {
        const ClusterId label = current[v] != kUnplaced ? current[v] : previous[v];
        if (label == kUnplaced) continue;
        if (counts[label]++ == 0) touched.push_back(label);
      }
      // Zero-count candidate: the smallest non-full cluster, lowest id first.
      ClusterId choice = kUnplaced;
      double choice_score = 0.0;
      for (ClusterId c = 0; c < m; ++c) {
        if (sizes[c] < capacity && (choice == kUnplaced || sizes[c] < sizes[choice])) choice = c;
      }
      for (ClusterId c : touched) {
        if (sizes[c] >= capacity) continue;
        const double score =
            static_cast<double>(counts[c]) * (1.0 - static_cast<double>(sizes[c]) / static_cast<double>(capacity));
        const bool better = score > choice_score ||
                            (score == choice_score &&
                             (sizes[c] < sizes[choice] || (sizes[c] == sizes[choice] && c < choice)));
        if (better) {
          choice = c;
          choice_score = score;
        }
      }
      for (ClusterId c : touched) counts[c] = 0;
      current[u] = choice;
      ++sizes[choice];
    }

    const std::size_t internal = count_internal_edges(graph, current);
    result.pass_internal_edge_fraction.push_back(
        graph.num_edges() == 0 ? 1.0 : static_cast<double>(internal) / static_cast<double>(graph.num_edges()));
    if (pass == 0 || internal >= best_internal) {
      best = current;
      best_internal = internal;
      result.selected_pass = pass;
    }
    previous.swap(current);
  }

  std::vector<std::size_t> best_sizes(m, 0);
  for (ClusterId c : best) ++best_sizes[c];
  for (std::size_t c = 0; c < m; ++c) {
    if (best_sizes[c] == 0) {
      throw InfeasibleError("streaming left cluster " + std::to_string(c) +
                            " empty; lower the leniency or the cluster count");
    }
  }
  result.clustering = Clustering(std::move(best), m);
  return result;
}

Clustering rebalance(const Graph& graph, const Clustering& clustering) {
  require_cover(graph, clustering);
  const std::size_t n = clustering.num_units();
  const std::size_t m = clustering.num_clusters();
  if (n % m != 0) {
    throw ValidationError("cannot balance " + std::to_string(n) + " units into " + std::to_string(m) +
                          " equal clusters");
  }
  const std::size_t target = n / m;
  std::vector<ClusterId> labels(clustering.assignment().begin(), clustering.assignment().end());
  std::vector<std::size_t> sizes(clustering.sizes().begin(), clustering.sizes().end());
  std::vector<std::size_t> counts(m, 0);

  for (ClusterId src = 0; src < m; ++src) {
    while (sizes[src] > target) {
      // Least-attached member of the oversized cluster leaves first.
      UnitId mover = 0;
      std::size_t fewest = static_cast<std::size_t>(-1);
      for (UnitId u = 0; u < n; ++u) {
        if (labels[u] != src) continue;
        std::size_t inside = 0;
        for (UnitId v : graph.neighbors(u)) inside += labels[v] == src;
        if (inside < fewest) {
          fewest = inside;
          mover = u;
        }
      }
      for (UnitId v : graph.neighbors(mover)) ++counts[labels[v]];
      ClusterId dest = static_cast<ClusterId>(-1);
      for (ClusterId c = 0; c < m; ++c) {
        if (sizes[c] >= target) continue;
        if (dest == static_cast<ClusterId>(-1) || counts[c] > counts[dest]) dest = c;
      }
      std::fill(counts.begin(), counts.end(), 0);
      labels[mover] = dest;
      --sizes[src];
      ++sizes[dest];
    }
  }
  return Clustering(std::move(labels), m);
}

double design_score(const ClusteringMetrics& metrics, double sigma_hat_sq) {
  if (!std::isfinite(sigma_hat_sq) || sigma_hat_sq <= 0.0) {
    throw ValidationError("design score needs a positive variance bound");
  }
  return metrics.rho_c / std::sqrt(sigma_hat_sq);
}

ClusterFeatures cluster_features(const Graph& graph, const Clustering& clustering,
                                 std::vector<std::vector<double>> covariates) {
  require_cover(graph, clustering);
  const std::size_t m = clustering.num_clusters();
  if (!covariates.empty() && covariates.size() != m) {
    throw ValidationError("covariates need one row per cluster");
  }
  ClusterFeatures f;
  f.internal_edges.assign(m, 0);
  f.boundary_edges.assign(m, 0);
  for (const auto& [a, b] : graph.edges()) {
    const ClusterId ca = clustering.cluster_of(a);
    const ClusterId cb = clustering.cluster_of(b);
    if (ca == cb) {
      ++f.internal_edges[ca];
    } else {
      ++f.boundary_edges[ca];
      ++f.boundary_edges[cb];
    }
  }
  f.covariates = covariates.empty() ? std::vector<std::vector<double>>(m) : std::move(covariates);
  return f;
}

std::vector<std::vector<double>> cluster_means(const Clustering& clustering,
                                               std::span<const std::vector<double>> unit_covariates) {
  if (unit_covariates.size() != clustering.num_units()) {
    throw ValidationError("unit covariates need one row per unit");
  }
  const std::size_t width = unit_covariates.empty() ? 0 : unit_covariates.front().size();
  std::vector<std::vector<double>> out(clustering.num_clusters(), std::vector<double>(width, 0.0));
  for (std::size_t i = 0; i < unit_covariates.size(); ++i) {
    if (unit_covariates[i].size() != width) throw ValidationError("ragged covariate rows");
    auto& row = out[clustering.cluster_of(static_cast<UnitId>(i))];
    for (std::size_t k = 0; k < width; ++k) row[k] += unit_covariates[i][k];
  }
  for (ClusterId c = 0; c < clustering.num_clusters(); ++c) {
    for (double& v : out[c]) v /= static_cast<double>(clustering.sizes()[c]);
  }
  return out;
}

Stratification Stratification::from_map(std::vector<std::uint32_t> stratum_of, std::size_t num_strata) {
  Stratification s;
  s.num_strata = num_strata;
  s.strata_sizes.assign(num_strata, 0);
  s.members.assign(num_strata, {});
  for (std::size_t c = 0; c < stratum_of.size(); ++c) {
    if (stratum_of[c] >= num_strata) throw ValidationError("stratum id out of range for cluster " + std::to_string(c));
    ++s.strata_sizes[stratum_of[c]];
    s.members[stratum_of[c]].push_back(static_cast<ClusterId>(c));
  }
  for (std::size_t k = 0; k < num_strata; ++k) {
    if (s.strata_sizes[k] == 0) throw ValidationError("stratum " + std::to_string(k) + " is empty");
  }
  s.stratum_of = std::move(stratum_of);
  return s;
}

Stratification stratify_clusters(const ClusterFeatures& features, std::size_t num_strata, std::uint64_t seed) {
  const std::size_t m = features.num_clusters();
  if (num_strata == 0) throw ValidationError("need at least one stratum");
  if (m < 2 * num_strata) {
    throw ValidationError("stratifying " + std::to_string(m) + " clusters into " + std::to_string(num_strata) +
                          " strata leaves a stratum with fewer than 2 clusters");
  }
  if (features.boundary_edges.size() != m || features.covariates.size() != m) {
    throw ValidationError("cluster features have inconsistent lengths");
  }
  const std::size_t width = features.covariates.front().size();
  std::vector<std::vector<double>> columns;
  columns.emplace_back(features.internal_edges.begin(), features.internal_edges.end());
  columns.emplace_back(features.boundary_edges.begin(), features.boundary_edges.end());
  for (std::size_t k = 0; k < width; ++k) {
    std::vector<double> col(m);
    for (std::size_t c = 0; c < m; ++c) {
      if (features.covariates[c].size() != width) throw ValidationError("ragged covariate rows");
      col[c] = features.covariates[c][k];
      if (!std::isfinite(col[c])) throw ValidationError("non-finite covariate for cluster " + std::to_string(c));
    }
    columns.push_back(std::move(col));
  }

  std::vector<double> composite(m, 0.0);
  for (const auto& col : columns) {
    const double mu = stats::mean(col);
    const double sd = std::sqrt(stats::sample_variance(col));
    if (sd == 0.0) continue;
    for (std::size_t c = 0; c < m; ++c) composite[c] += (col[c] - mu) / sd;
  }

  Engine rng = make_engine(seed, Stream::tie_break);
  std::vector<std::uint64_t> key(m);
  for (auto& k : key) k = rng();
  std::vector<ClusterId> order(m);
  std::iota(order.begin(), order.end(), ClusterId{0});
  std::sort(order.begin(), order.end(), [&](ClusterId a, ClusterId b) {
    if (composite[a] != composite[b]) return composite[a] < composite[b];
    if (key[a] != key[b]) return key[a] < key[b];
    return a < b;
  });

  std::vector<std::uint32_t> stratum_of(m);
  const std::size_t base = m / num_strata;
  const std::size_t extra = m % num_strata;
  std::size_t pos = 0;
  for (std::size_t s = 0; s < num_strata; ++s) {
    const std::size_t size = base + (s < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) stratum_of[order[pos++]] = static_cast<std::uint32_t>(s);
  }
  return Stratification::from_map(std::move(stratum_of), num_strata);
}

std::vector<ClusterId> subsample_clusters(const Clustering& clustering, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("subsample fraction must lie in (0,1]");
  const std::size_t m = clustering.num_clusters();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(m)));
  if (count < 2) {
    throw ValidationError("subsampling keeps " + std::to_string(count) + " clusters; at least 2 are required");
  }
  std::vector<ClusterId> ids(m);
  std::iota(ids.begin(), ids.end(), ClusterId{0});
  Engine rng = make_engine(seed, Stream::subsample);
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, m - 1);
    std::swap(ids[k], ids[pick(rng)]);
  }
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace interfere
