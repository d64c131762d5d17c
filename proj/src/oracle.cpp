#include "interfere/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <vector>

#include "interfere/error.hpp"
#include "interfere/stats.hpp"

namespace interfere {

namespace {

__extension__ using u128 = unsigned __int128;

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  u128 r = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    r = r * (n - i) / (i + 1);
    if (r > kSaturated) return kSaturated;
  }
  return static_cast<std::uint64_t>(r);
}

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  const u128 r = static_cast<u128>(a) * b;
  return r > kSaturated ? kSaturated : static_cast<std::uint64_t>(r);
}

// Lexicographic successor of a k-subset of {0..n-1}; false after the last one.
bool next_combination(std::vector<std::size_t>& idx, std::size_t n) {
  const std::size_t k = idx.size();
  std::size_t i = k;
  while (i > 0) {
    --i;
    if (idx[i] < n - k + i) {
      ++idx[i];
      for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

// k-subset of {0..n-1} with lexicographic rank `rank`.
std::vector<std::size_t> unrank_combination(std::size_t n, std::size_t k, std::uint64_t rank) {
  std::vector<std::size_t> idx(k);
  std::size_t x = 0;
  for (std::size_t pos = 0; pos < k; ++pos) {
    while (true) {
      const std::uint64_t below = binomial(n - x - 1, k - pos - 1);
      if (rank < below) break;
      rank -= below;
      ++x;
    }
    idx[pos] = x++;
  }
  return idx;
}

std::vector<std::size_t> first_combination(std::size_t k) {
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  return idx;
}

void validate_spec(const EnumerationSpec& spec) {
  const std::size_t n = spec.clustering.num_units();
  const std::size_t m = spec.clustering.num_clusters();
  if (spec.table.has_value() == spec.model.has_value()) {
    throw ValidationError("enumeration needs exactly one outcome source: a table or a linear model");
  }
  if (spec.table) {
    spec.table->validate();
    if (spec.table->num_units() != n) throw ValidationError("potential table does not match the clustering");
  } else {
    spec.model->validate();
    if (!spec.graph || spec.graph->num_units() != n) {
      throw ValidationError("linear model enumeration needs a graph over the clustering's units");
    }
  }
  switch (spec.design) {
    case DesignKind::complete:
      if (spec.n_treated < 1 || spec.n_treated >= n) throw ValidationError("complete design needs 1 <= n_t <= N-1");
      break;
    case DesignKind::cluster:
      if (spec.n_treated < 1 || spec.n_treated >= m) throw ValidationError("cluster design needs 1 <= m_t <= M-1");
      break;
    case DesignKind::hierarchical:
      spec.clustering.cluster_size();
      spec.counts.validate(n, m);
      break;
  }
  if (spec.design != DesignKind::hierarchical && spec.statistic != Statistic::estimate) {
    throw ValidationError("arm statistics are defined for the hierarchical design only");
  }
  if (spec.statistic == Statistic::chebyshev_reject && !(spec.alpha > 0.0 && spec.alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0,1)");
  }
}

// Outer combination space that is sharded: units (complete), clusters
// (cluster) or the arm-cr clusters (hierarchical).
struct Outer {
  std::size_t n = 0;
  std::size_t k = 0;
};

Outer outer_space(const EnumerationSpec& spec) {
  switch (spec.design) {
    case DesignKind::complete: return {spec.clustering.num_units(), spec.n_treated};
    case DesignKind::cluster: return {spec.clustering.num_clusters(), spec.n_treated};
    case DesignKind::hierarchical: return {spec.clustering.num_clusters(), spec.counts.m_cr};
  }
  return {};
}

class Evaluator {
 public:
  explicit Evaluator(const EnumerationSpec& spec) : spec_(spec), y_(spec.clustering.num_units()) {}

  double operator()(const Bits& z, const HierarchicalAssignment* h) {
    fill_outcomes(z);
    const Clustering& c = spec_.clustering;
    switch (spec_.design) {
      case DesignKind::complete:
        return diff_in_means(y_, z);
      case DesignKind::cluster: {
        Bits zc(c.num_clusters());
        for (ClusterId j = 0; j < c.num_clusters(); ++j) zc[j] = z[c.members(j).front()];
        return horvitz_thompson_cluster(cluster_sums(c, y_), zc, c.num_clusters(), c.num_units());
      }
      case DesignKind::hierarchical:
        break;
    }
    switch (spec_.statistic) {
      case Statistic::estimate: return delta_statistic(c, *h, y_).delta;
      case Statistic::tau_cr: return delta_statistic(c, *h, y_).tau_cr;
      case Statistic::tau_cbr: return delta_statistic(c, *h, y_).tau_cbr;
      case Statistic::variance_bound: return empirical_variance_bound(c, *h, y_);
      case Statistic::chebyshev_reject: {
        const double d = delta_statistic(c, *h, y_).delta;
        const double v = empirical_variance_bound(c, *h, y_);
        return summarize(d, v, spec_.alpha, DecisionRule::chebyshev).decision == Decision::reject ? 1.0 : 0.0;
      }
    }
    return 0.0;
  }

 private:
  void fill_outcomes(const Bits& z) {
    if (spec_.table) {
      for (std::size_t i = 0; i < y_.size(); ++i) y_[i] = z[i] ? spec_.table->y1[i] : spec_.table->y0[i];
      return;
    }
    const auto& mdl = *spec_.model;
    const auto rho = serial::treated_neighbor_fraction(*spec_.graph, z);
    for (std::size_t i = 0; i < y_.size(); ++i) {
      y_[i] = mdl.alpha + mdl.beta * z[i] + mdl.gamma * rho[i];
    }
  }

  const EnumerationSpec& spec_;
  std::vector<double> y_;
};

// Visits every outcome whose outer combination is `outer`, in lexicographic order.
void visit_inner(const EnumerationSpec& spec, const std::vector<std::size_t>& outer, Evaluator& eval,
                 stats::RunningMoments& acc) {
  const Clustering& c = spec.clustering;
  const std::size_t n = c.num_units();
  if (spec.design == DesignKind::complete) {
    Bits z(n, 0);
    for (std::size_t i : outer) z[i] = 1;
    acc.add(eval(z, nullptr));
    return;
  }
  if (spec.design == DesignKind::cluster) {
    Bits z(n, 0);
    for (std::size_t j : outer) {
      for (UnitId u : c.members(static_cast<ClusterId>(j))) z[u] = 1;
    }
    acc.add(eval(z, nullptr));
    return;
  }

  HierarchicalAssignment h;
  h.counts = spec.counts;
  h.omega.assign(c.num_clusters(), 0);
  h.z_cbr.assign(c.num_clusters(), 0);
  h.w.assign(n, 0);
  for (std::size_t j : outer) h.omega[j] = 1;
  std::vector<UnitId> cr_units;
  std::vector<ClusterId> cbr_clusters;
  for (ClusterId j = 0; j < c.num_clusters(); ++j) {
    if (h.omega[j]) {
      for (UnitId u : c.members(j)) {
        h.w[u] = 1;
        cr_units.push_back(u);
      }
    } else {
      cbr_clusters.push_back(j);
    }
  }
  std::sort(cr_units.begin(), cr_units.end());

  auto unit_pick = first_combination(spec.counts.n_cr_t);
  do {
    auto cluster_pick = first_combination(spec.counts.m_cbr_t);
    do {
      h.z.assign(n, 0);
      std::fill(h.z_cbr.begin(), h.z_cbr.end(), 0);
      for (std::size_t a : unit_pick) h.z[cr_units[a]] = 1;
      for (std::size_t b : cluster_pick) {
        const ClusterId j = cbr_clusters[b];
        h.z_cbr[j] = 1;
        for (UnitId u : c.members(j)) h.z[u] = 1;
      }
      acc.add(eval(h.z, &h));
    } while (next_combination(cluster_pick, cbr_clusters.size()));
  } while (next_combination(unit_pick, cr_units.size()));
}

void check_cap(const EnumerationSpec& spec, std::uint64_t count) {
  if (count > spec.cap) {
    throw SizeError("enumeration needs " + (count == kSaturated ? std::string("more than 2^64") : std::to_string(count)) +
                    " outcomes, cap is " + std::to_string(spec.cap));
  }
}

Moments to_moments(const stats::RunningMoments& acc) {
  return {acc.mean(), acc.population_variance(), acc.count()};
}

}  // namespace

std::uint64_t outcome_count(const EnumerationSpec& spec) {
  const std::size_t n = spec.clustering.num_units();
  const std::size_t m = spec.clustering.num_clusters();
  switch (spec.design) {
    case DesignKind::complete: return binomial(n, spec.n_treated);
    case DesignKind::cluster: return binomial(m, spec.n_treated);
    case DesignKind::hierarchical:
      return saturating_mul(saturating_mul(binomial(m, spec.counts.m_cr), binomial(spec.counts.n_cr, spec.counts.n_cr_t)),
                            binomial(spec.counts.m_cbr, spec.counts.m_cbr_t));
  }
  return 0;
}

Moments enumerate_moments(const EnumerationSpec& spec) {
  validate_spec(spec);
  check_cap(spec, outcome_count(spec));
  const Outer outer = outer_space(spec);
  const std::uint64_t total = binomial(outer.n, outer.k);
  const std::uint64_t shards = std::min<std::uint64_t>(total, 256);
  std::vector<stats::RunningMoments> partial(shards);
  std::vector<std::exception_ptr> errors(shards);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t s = 0; s < static_cast<std::int64_t>(shards); ++s) {
    try {
      const std::uint64_t begin = total * static_cast<std::uint64_t>(s) / shards;
      const std::uint64_t end = total * static_cast<std::uint64_t>(s + 1) / shards;
      Evaluator eval(spec);
      auto combo = unrank_combination(outer.n, outer.k, begin);
      for (std::uint64_t r = begin; r < end; ++r) {
        visit_inner(spec, combo, eval, partial[s]);
        next_combination(combo, outer.n);
      }
    } catch (...) {
      errors[s] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  stats::RunningMoments acc;
  for (const auto& p : partial) acc.merge(p);
  return to_moments(acc);
}

namespace serial {

Moments enumerate_moments(const EnumerationSpec& spec) {
  validate_spec(spec);
  check_cap(spec, outcome_count(spec));
  const Outer outer = outer_space(spec);
  Evaluator eval(spec);
  stats::RunningMoments acc;
  auto combo = first_combination(outer.k);
  do {
    visit_inner(spec, combo, eval, acc);
  } while (next_combination(combo, outer.n));
  return to_moments(acc);
}

}  // namespace serial

double binomial_negative_moment(std::size_t n, double p) {
  if (n < 2) throw ValidationError("negative moment needs n >= 2");
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("negative moment needs 0 < p < 1");
  const double nd = static_cast<double>(n);
  const double norm = 1.0 - std::pow(p, nd) - std::pow(1.0 - p, nd);
  stats::CompensatedSum acc;
  for (std::size_t k = 1; k < n; ++k) {
    const double kd = static_cast<double>(k);
    const double log_pmf = std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) +
                           kd * std::log(p) + (nd - kd) * std::log1p(-p);
    acc.add(std::exp(log_pmf) / kd);
  }
  return acc.value() / norm;
}

BernoulliGap bernoulli_vs_cr_variance_gap(const PotentialTable& table, std::size_t n_treated) {
  table.validate();
  const std::size_t n = table.num_units();
  if (n > 20) throw SizeError("Bernoulli enumeration supports N <= 20, got " + std::to_string(n));
  if (n_treated < 1 || n_treated >= n) throw ValidationError("needs 1 <= n_t <= N-1");
  const double nd = static_cast<double>(n);
  const double p = static_cast<double>(n_treated) / nd;
  const double degenerate = std::pow(p, nd) + std::pow(1.0 - p, nd);
  if (degenerate > 1.0 / (nd * nd)) {
    throw ValidationError("hypothesis p^N + (1-p)^N <= N^-2 fails: " + std::to_string(degenerate) + " > " +
                          std::to_string(1.0 / (nd * nd)));
  }
  const double norm = 1.0 - degenerate;
  std::vector<double> weight(n + 1, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    weight[k] = std::pow(p, static_cast<double>(k)) * std::pow(1.0 - p, nd - static_cast<double>(k)) / norm;
  }

  const std::uint32_t last = (std::uint32_t{1} << n) - 1;
  std::vector<double> y(n);
  Bits z(n);
  const auto estimate = [&](std::uint32_t mask) {
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = (mask >> i) & 1U;
      y[i] = z[i] ? table.y1[i] : table.y0[i];
    }
    return diff_in_means(y, z);
  };

  // Two passes: means, then centered second moments.
  stats::CompensatedSum br_mean, cr_mean;
  std::uint64_t cr_count = 0;
  for (std::uint32_t mask = 1; mask < last; ++mask) {
    const auto k = static_cast<std::size_t>(std::popcount(mask));
    const double t = estimate(mask);
    br_mean.add(weight[k] * t);
    if (k == n_treated) {
      cr_mean.add(t);
      ++cr_count;
    }
  }
  const double mu_br = br_mean.value();
  const double mu_cr = cr_mean.value() / static_cast<double>(cr_count);
  stats::CompensatedSum br_var, cr_var;
  for (std::uint32_t mask = 1; mask < last; ++mask) {
    const auto k = static_cast<std::size_t>(std::popcount(mask));
    const double t = estimate(mask);
    br_var.add(weight[k] * (t - mu_br) * (t - mu_br));
    if (k == n_treated) cr_var.add((t - mu_cr) * (t - mu_cr));
  }

  BernoulliGap g;
  g.var_br = br_var.value();
  g.var_cr = cr_var.value() / static_cast<double>(cr_count);
  g.gap = g.var_br - g.var_cr;
  const double nt = static_cast<double>(n_treated);
  const double nc = nd - nt;
  g.bound = 5.0 * (stats::sample_variance(table.y1) / (nt * nt) + stats::sample_variance(table.y0) / (nc * nc));
  g.within_bound = std::abs(g.gap) <= g.bound;
  return g;
}

SmallDesign small_design_8() {
  const std::vector<Edge> edges{{0, 1}, {2, 3}, {4, 5}, {6, 7}, {1, 2}, {3, 4}, {5, 6}, {7, 0}, {0, 4}, {2, 6}};
  SmallDesign d{Graph::from_edges(8, edges), Clustering::contiguous_blocks(4, 2), {}};
  d.counts = DesignCounts::symmetric(d.clustering);
  return d;
}

SmallDesign small_design_16() {
  std::vector<Edge> edges;
  for (UnitId i = 0; i < 16; ++i) {
    edges.emplace_back(i, (i + 1) % 16);
    edges.emplace_back(i, (i + 5) % 16);
  }
  SmallDesign d{Graph::from_edges(16, edges), Clustering::contiguous_blocks(8, 2), {}};
  d.counts = DesignCounts::symmetric(d.clustering);
  return d;
}

}  // namespace interfere
