#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "interfere/error.hpp"
#include "interfere/estimate.hpp"
#include "interfere/stats.hpp"

namespace interfere {

namespace {

void check_inputs(const Graph& graph, const Clustering& clustering) {
  if (graph.num_units() != clustering.num_units()) {
    throw ValidationError("graph has " + std::to_string(graph.num_units()) + " units, clustering has " +
                          std::to_string(clustering.num_units()));
  }
}

// (cluster, |N_i ∩ cluster|) for every cluster touched by N_i, ascending.
using ClusterCounts = std::vector<std::pair<ClusterId, std::size_t>>;

ClusterCounts neighbor_cluster_counts(const Graph& graph, const Clustering& clustering, UnitId i) {
  std::vector<ClusterId> labels;
  labels.reserve(graph.degree(i));
  for (UnitId v : graph.neighbors(i)) labels.push_back(clustering.cluster_of(v));
  std::sort(labels.begin(), labels.end());
  ClusterCounts out;
  for (std::size_t a = 0; a < labels.size();) {
    std::size_t b = a;
    while (b < labels.size() && labels[b] == labels[a]) ++b;
    out.emplace_back(labels[a], b - a);
    a = b;
  }
  return out;
}

constexpr std::size_t kMaxDenseClusters = std::size_t{1} << 13;
constexpr std::size_t kMaxNaiveUnits = 4096;

}  // namespace

InterferenceVarianceTerms interference_variance_terms(const Graph& graph, const Clustering& clustering) {
  check_inputs(graph, clustering);
  const std::size_t n = clustering.num_units();
  const std::size_t m = clustering.num_clusters();
  if (m > kMaxDenseClusters) {
    throw SizeError("interference variance terms support at most " + std::to_string(kMaxDenseClusters) +
                    " clusters");
  }
  const auto ni = static_cast<std::int64_t>(n);
  const auto mi = static_cast<std::int64_t>(m);

  // Per-unit terms: A_i, B_i, C_i, 1/d_i and the own-cluster fraction.
  std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), inv(n, 0.0), own(n, 0.0);
  std::vector<ClusterCounts> counts(n);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t s = 0; s < ni; ++s) {
    const auto i = static_cast<UnitId>(s);
    counts[s] = neighbor_cluster_counts(graph, clustering, i);
    const double d = static_cast<double>(graph.degree(i));
    if (d == 0.0) continue;
    const ClusterId home = clustering.cluster_of(i);
    double sq = 0.0, own_sq = 0.0;
    for (const auto& [cl, cnt] : counts[s]) {
      const double p = static_cast<double>(cnt) / d;
      sq += p * p;
      if (cl == home) {
        own_sq = p * p;
        own[s] = p;
      }
    }
    a[s] = own_sq;
    b[s] = 1.0 - sq;
    c[s] = sq - own_sq;
    inv[s] = 1.0 / d;
  }

  // t[x*m + y] = sum over units i in cluster x of |N_i ∩ y| / d_i.
  // Per-cluster D and E sums use P_i = own fraction and Q_i = 1 - P_i (0 if isolated).
  std::vector<double> t(m * m, 0.0), d_sum(m, 0.0), e_sum(m, 0.0);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t x = 0; x < mi; ++x) {
    double* row = t.data() + static_cast<std::size_t>(x) * m;
    double sp = 0.0, sq = 0.0, spp = 0.0, spq = 0.0;
    for (UnitId i : clustering.members(static_cast<ClusterId>(x))) {
      for (const auto& [cl, cnt] : counts[i]) row[cl] += static_cast<double>(cnt) * inv[i];
      const double p = own[i];
      const double q = inv[i] == 0.0 ? 0.0 : 1.0 - p;
      sp += p;
      sq += q;
      spp += p * p;
      spq += p * q;
    }
    e_sum[x] = sp * sp - spp;
    d_sum[x] = 2.0 * (sp * sq - spq);
  }

  // sum_{x != y} (T[y][x] T[x][y] + T[x][x] T[y][y]) = tr(T^2) + tr(T)^2 - 2 sum_x T[x][x]^2.
  std::vector<double> cross(m, 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t x = 0; x < mi; ++x) {
    double acc = 0.0;
    for (std::size_t y = 0; y < m; ++y) acc += t[x * m + y] * t[y * m + x];
    cross[x] = acc;
  }
  stats::CompensatedSum tr_sq, tr, diag_sq;
  for (std::size_t x = 0; x < m; ++x) {
    tr_sq.add(cross[x]);
    tr.add(t[x * m + x]);
    diag_sq.add(t[x * m + x] * t[x * m + x]);
  }

  stats::CompensatedSum inv_sum, inv_sq;
  for (double v : inv) {
    inv_sum.add(v);
    inv_sq.add(v * v);
  }

  const double nn = static_cast<double>(n) * static_cast<double>(n);
  InterferenceVarianceTerms r;
  r.a_bar = stats::mean(a);
  r.b_bar = stats::mean(b);
  r.c_bar = stats::mean(c);
  r.rho_c = stats::mean(own);
  r.d_bar = stats::mean(d_sum) * static_cast<double>(m) / nn;
  r.e_bar = stats::mean(e_sum) * static_cast<double>(m) / nn;
  r.f_bar = (tr_sq.value() + tr.value() * tr.value() - 2.0 * diag_sq.value()) / nn;
  r.g_bar = (inv_sum.value() * inv_sum.value() - inv_sq.value()) / nn;
  return r;
}

namespace serial {

InterferenceVarianceTerms interference_variance_terms(const Graph& graph, const Clustering& clustering) {
  check_inputs(graph, clustering);
  const std::size_t n = clustering.num_units();
  if (n > kMaxNaiveUnits) {
    throw SizeError("pair enumeration supports at most " + std::to_string(kMaxNaiveUnits) + " units");
  }
  const auto cl = [&](UnitId u) { return clustering.cluster_of(u); };
  const auto deg = [&](UnitId u) { return static_cast<double>(graph.degree(u)); };

  stats::CompensatedSum a, b, c, d, e, f, g, rho;
  for (UnitId i = 0; i < n; ++i) {
    const auto ni = graph.neighbors(i);
    if (ni.empty()) continue;
    const double di = deg(i);
    std::size_t in = 0;
    for (UnitId p : ni) in += cl(p) == cl(i);
    rho.add(static_cast<double>(in) / di);
    std::size_t both_in = 0, split = 0, same_out = 0;
    for (UnitId p : ni) {
      for (UnitId q : ni) {
        if (cl(p) != cl(q)) {
          ++split;
        } else if (cl(p) == cl(i)) {
          ++both_in;
        } else {
          ++same_out;
        }
      }
    }
    a.add(static_cast<double>(both_in) / (di * di));
    b.add(static_cast<double>(split) / (di * di));
    c.add(static_cast<double>(same_out) / (di * di));

    for (UnitId j = 0; j < n; ++j) {
      const auto nj = graph.neighbors(j);
      if (j == i || nj.empty()) continue;
      const double w = 1.0 / (di * deg(j));
      g.add(w);
      const ClusterId ci = cl(i), cj = cl(j);
      std::size_t d_pairs = 0, e_pairs = 0, f_pairs = 0;
      for (UnitId p : nj) {
        for (UnitId q : ni) {
          if (ci == cj) {
            const bool p_in = cl(p) == ci, q_in = cl(q) == ci;
            d_pairs += p_in != q_in;
            e_pairs += p_in && q_in;
          } else {
            const bool p_ok = cl(p) == ci || cl(p) == cj;
            const bool q_ok = cl(q) == ci || cl(q) == cj;
            f_pairs += p_ok && q_ok && cl(p) != cl(q);
          }
        }
      }
      d.add(static_cast<double>(d_pairs) * w);
      e.add(static_cast<double>(e_pairs) * w);
      f.add(static_cast<double>(f_pairs) * w);
    }
  }
  const double nd = static_cast<double>(n);
  InterferenceVarianceTerms r;
  r.a_bar = a.value() / nd;
  r.b_bar = b.value() / nd;
  r.c_bar = c.value() / nd;
  r.d_bar = d.value() / (nd * nd);
  r.e_bar = e.value() / (nd * nd);
  r.f_bar = f.value() / (nd * nd);
  r.g_bar = g.value() / (nd * nd);
  r.rho_c = rho.value() / nd;
  return r;
}

}  // namespace serial

}  // namespace interfere
