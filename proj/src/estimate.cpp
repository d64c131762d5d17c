#include "interfere/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "interfere/error.hpp"
#include "interfere/stats.hpp"

namespace interfere {

namespace {

std::string str(std::size_t v) { return std::to_string(v); }

void require_length(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw ValidationError(std::string(what) + " has length " + str(got) + ", expected " + str(expected));
  }
}

void require_finite(std::span<const double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw ValidationError("non-finite outcome for unit " + str(i));
  }
}

// Outcomes split into the four buckets of the hierarchical design.
struct Buckets {
  std::vector<double> cr_t, cr_c;     // unit outcomes in arm cr
  std::vector<double> cbr_t, cbr_c;   // cluster sums in arm cbr
  std::size_t n_cbr = 0;
  std::size_t m_cbr = 0;
};

Buckets split(const Clustering& clustering, const HierarchicalAssignment& h, std::span<const double> y) {
  const std::size_t n = clustering.num_units();
  require_length(n, y.size(), "outcome vector");
  require_length(n, h.w.size(), "arm vector");
  require_length(n, h.z.size(), "treatment vector");
  require_length(clustering.num_clusters(), h.omega.size(), "cluster arm vector");
  require_finite(y);

  Buckets b;
  for (std::size_t i = 0; i < n; ++i) {
    if (h.w[i]) (h.z[i] ? b.cr_t : b.cr_c).push_back(y[i]);
  }
  const auto sums = cluster_sums(clustering, y);
  for (ClusterId c = 0; c < clustering.num_clusters(); ++c) {
    if (h.omega[c]) continue;
    ++b.m_cbr;
    b.n_cbr += clustering.sizes()[c];
    const UnitId first = clustering.members(c).front();
    (h.z[first] ? b.cbr_t : b.cbr_c).push_back(sums[c]);
  }
  return b;
}

double cbr_scale(const Buckets& b) { return static_cast<double>(b.m_cbr) / static_cast<double>(b.n_cbr); }

}  // namespace

double diff_in_means(std::span<const double> y, std::span<const std::uint8_t> z) {
  require_length(y.size(), z.size(), "treatment vector");
  stats::CompensatedSum st, sc;
  std::size_t nt = 0, nc = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (z[i]) {
      st.add(y[i]);
      ++nt;
    } else {
      sc.add(y[i]);
      ++nc;
    }
  }
  if (nt == 0 || nc == 0) throw ValidationError("difference in means needs treated and control units");
  return st.value() / static_cast<double>(nt) - sc.value() / static_cast<double>(nc);
}

double horvitz_thompson_cluster(std::span<const double> y_plus, std::span<const std::uint8_t> z_clusters,
                                std::size_t num_clusters, std::size_t num_units) {
  require_length(num_clusters, y_plus.size(), "cluster sums");
  if (num_units == 0) throw ValidationError("Horvitz-Thompson estimator needs N >= 1");
  return static_cast<double>(num_clusters) / static_cast<double>(num_units) * diff_in_means(y_plus, z_clusters);
}

DeltaEstimate delta_statistic(const Clustering& clustering, const HierarchicalAssignment& assignment,
                              std::span<const double> y) {
  const Buckets b = split(clustering, assignment, y);
  if (b.cr_t.empty() || b.cr_c.empty()) throw ValidationError("arm cr needs treated and control units");
  if (b.cbr_t.empty() || b.cbr_c.empty()) throw ValidationError("arm cbr needs treated and control clusters");
  DeltaEstimate d;
  d.tau_cr = stats::mean(b.cr_t) - stats::mean(b.cr_c);
  d.tau_cbr = cbr_scale(b) * (stats::mean(b.cbr_t) - stats::mean(b.cbr_c));
  d.delta = d.tau_cr - d.tau_cbr;
  return d;
}

double empirical_variance_bound(const Clustering& clustering, const HierarchicalAssignment& assignment,
                                std::span<const double> y) {
  const Buckets b = split(clustering, assignment, y);
  const auto need_two = [](const std::vector<double>& v, const char* name) {
    if (v.size() < 2) throw ValidationError(std::string(name) + " needs at least 2 members for a variance");
  };
  need_two(b.cr_t, "treated bucket of arm cr");
  need_two(b.cr_c, "control bucket of arm cr");
  need_two(b.cbr_t, "treated bucket of arm cbr");
  need_two(b.cbr_c, "control bucket of arm cbr");
  const double s = cbr_scale(b);
  return stats::sample_variance(b.cr_t) / static_cast<double>(b.cr_t.size()) +
         stats::sample_variance(b.cr_c) / static_cast<double>(b.cr_c.size()) +
         s * s *
             (stats::sample_variance(b.cbr_t) / static_cast<double>(b.cbr_t.size()) +
              stats::sample_variance(b.cbr_c) / static_cast<double>(b.cbr_c.size()));
}

namespace {

struct DesignReals {
  double n, m, k, n_cr, n_cbr, m_cr, m_cbr, n_cr_t, n_cr_c, m_cbr_t, m_cbr_c;
};

DesignReals reals(const Clustering& clustering, const DesignCounts& counts) {
  const std::size_t k = clustering.cluster_size();
  counts.validate(clustering.num_units(), clustering.num_clusters());
  if (counts.n_cr < 2) throw ValidationError("arm cr needs at least 2 units");
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  return {d(clustering.num_units()), d(clustering.num_clusters()), d(k), d(counts.n_cr), d(counts.n_cbr),
          d(counts.m_cr), d(counts.m_cbr), d(counts.n_cr_t), d(counts.n_cr_c), d(counts.m_cbr_t),
          d(counts.m_cbr_c)};
}

// E over the arm split of the arm-cr sample variance, given population S and S+.
double expected_cr_variance(const DesignReals& d, double s, double s_plus) {
  return d.n_cr / (d.n_cr - 1.0) * (d.n - 1.0) / d.n * s - d.m_cbr / (d.n * (d.n_cr - 1.0)) * s_plus;
}

}  // namespace

double fisher_null_variance(std::span<const double> y, const Clustering& clustering, const DesignCounts& counts) {
  require_length(clustering.num_units(), y.size(), "outcome vector");
  require_finite(y);
  const DesignReals d = reals(clustering, counts);
  const double s = stats::sample_variance(y);
  const auto sums = cluster_sums(clustering, y);
  const double s_plus = stats::sample_variance(sums);
  const double scale = d.m_cbr / d.n_cbr;
  return d.n_cr / (d.n_cr_t * d.n_cr_c) * expected_cr_variance(d, s, s_plus) +
         scale * scale * d.m_cbr / (d.m_cbr_t * d.m_cbr_c) * s_plus;
}

VarianceComponents variance_components(const PotentialTable& table, const Clustering& clustering) {
  table.validate();
  require_length(clustering.num_units(), table.num_units(), "potential table");
  std::vector<double> diff(table.num_units());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = table.y1[i] - table.y0[i];
  VarianceComponents v;
  v.s_t = stats::sample_variance(table.y1);
  v.s_c = stats::sample_variance(table.y0);
  v.s_tc = stats::sample_variance(diff);
  v.s_plus_t = stats::sample_variance(cluster_sums(clustering, table.y1));
  v.s_plus_c = stats::sample_variance(cluster_sums(clustering, table.y0));
  v.s_plus_tc = stats::sample_variance(cluster_sums(clustering, diff));
  return v;
}

SutvaVariance theoretical_sutva_variance(const PotentialTable& table, const Clustering& clustering,
                                         const DesignCounts& counts) {
  const DesignReals d = reals(clustering, counts);
  const VarianceComponents v = variance_components(table, clustering);
  const double scale = d.m_cbr / d.n_cbr;

  SutvaVariance r;
  r.sigma2_cr = v.s_t / d.n_cr_t + v.s_c / d.n_cr_c - v.s_tc / d.n_cr;
  r.sigma2_cbr = scale * scale * (v.s_plus_t / d.m_cbr_t + v.s_plus_c / d.m_cbr_c - v.s_plus_tc / d.m_cbr);
  r.arm_split_term = d.m / (d.n_cr * d.n_cbr) * v.s_plus_tc;
  r.leading = r.sigma2_cr + r.sigma2_cbr + r.arm_split_term;

  // E S_cr,x - S_x = m_cbr / (N (n_cr - 1)) (k S_x - S+_x) for each column x.
  const double g = d.m_cbr / (d.n * (d.n_cr - 1.0));
  const double coef[3] = {1.0 / d.n_cr_t, 1.0 / d.n_cr_c, -1.0 / d.n_cr};
  const double s[3] = {v.s_t, v.s_c, v.s_tc};
  const double sp[3] = {v.s_plus_t, v.s_plus_c, v.s_plus_tc};
  for (int x = 0; x < 3; ++x) {
    r.remainder += coef[x] * g * (d.k * s[x] - sp[x]);
    r.remainder_bound += std::abs(coef[x]) * g * (d.k * s[x] + sp[x]);
  }
  r.exact = r.leading + r.remainder;
  return r;
}

StratifiedDelta stratified_delta(std::span<const StratumEstimate> strata, std::size_t total_clusters) {
  std::size_t seen = 0;
  for (const auto& s : strata) seen += s.num_clusters;
  if (strata.empty() || seen != total_clusters) {
    throw ValidationError("strata cover " + str(seen) + " clusters, expected " + str(total_clusters));
  }
  stats::CompensatedSum delta, var;
  for (const auto& s : strata) {
    const double w = static_cast<double>(s.num_clusters) / static_cast<double>(total_clusters);
    delta.add(w * s.delta);
    var.add(w * w * s.sigma_hat_sq);
  }
  return {delta.value(), var.value()};
}

double gaussian_p_value(double delta, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("gaussian p-value needs sigma > 0");
  if (!std::isfinite(delta)) throw ValidationError("gaussian p-value needs a finite delta");
  return std::erfc(std::abs(delta) / (sigma * std::sqrt(2.0)));
}

Decision chebyshev_decision(double delta, double sigma_hat_sq, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  if (!(sigma_hat_sq > 0.0)) throw ValidationError("Chebyshev rule needs a positive variance bound");
  return std::abs(delta) >= std::sqrt(sigma_hat_sq / alpha) ? Decision::reject : Decision::fail_to_reject;
}

AnalysisReport summarize(double delta, double sigma_hat_sq, double alpha, DecisionRule rule) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  if (!(sigma_hat_sq >= 0.0)) throw ValidationError("variance bound must be >= 0");
  AnalysisReport r;
  r.delta = delta;
  r.sigma_hat_sq = sigma_hat_sq;
  r.alpha = alpha;
  r.rule = rule;
  if (sigma_hat_sq == 0.0) {
    // Degenerate bound: any nonzero contrast is outside every Chebyshev interval.
    if (delta == 0.0) {
      r.t_stat = 0.0;
    }
    r.p_chebyshev = r.p_gaussian = delta == 0.0 ? 1.0 : 0.0;
    r.decision = delta == 0.0 ? Decision::fail_to_reject : Decision::reject;
    return r;
  }
  const double sigma = std::sqrt(sigma_hat_sq);
  const double t = delta / sigma;
  r.t_stat = t;
  r.p_chebyshev = t == 0.0 ? 1.0 : std::min(1.0, 1.0 / (t * t));
  r.p_gaussian = gaussian_p_value(delta, sigma);
  r.decision = rule == DecisionRule::chebyshev ? chebyshev_decision(delta, sigma_hat_sq, alpha)
                                               : (r.p_gaussian <= alpha ? Decision::reject : Decision::fail_to_reject);
  return r;
}

AnalysisReport analyze(const Clustering& clustering, const HierarchicalAssignment& assignment,
                       std::span<const double> y, double alpha, DecisionRule rule) {
  const DeltaEstimate d = delta_statistic(clustering, assignment, y);
  AnalysisReport r = summarize(d.delta, empirical_variance_bound(clustering, assignment, y), alpha, rule);
  r.tau_cr = d.tau_cr;
  r.tau_cbr = d.tau_cbr;
  r.counts = assignment.counts;
  return r;
}

AnalysisReport analyze_stratified(const Clustering& clustering, const StratifiedAssignment& assignment,
                                  std::span<const double> y, double alpha, DecisionRule rule) {
  require_length(clustering.num_units(), y.size(), "outcome vector");
  std::vector<StratumEstimate> per;
  per.reserve(assignment.strata.size());
  stats::CompensatedSum tau_cr, tau_cbr;
  const double m = static_cast<double>(clustering.num_clusters());
  for (const auto& s : assignment.strata) {
    std::vector<double> local(s.restriction.units.size());
    for (std::size_t i = 0; i < local.size(); ++i) local[i] = y[s.restriction.units[i]];
    const auto& sub = s.restriction.clustering;
    StratumEstimate e;
    DeltaEstimate d;
    try {
      d = delta_statistic(sub, s.assignment, local);
      e.sigma_hat_sq = empirical_variance_bound(sub, s.assignment, local);
    } catch (const ValidationError& ex) {
      throw ValidationError("stratum " + str(s.stratum) + ": " + ex.what());
    }
    e.delta = d.delta;
    e.num_clusters = sub.num_clusters();
    const double w = static_cast<double>(e.num_clusters) / m;
    tau_cr.add(w * d.tau_cr);
    tau_cbr.add(w * d.tau_cbr);
    per.push_back(e);
  }
  const StratifiedDelta agg = stratified_delta(per, clustering.num_clusters());
  AnalysisReport r = summarize(agg.delta, agg.sigma_hat_sq, alpha, rule);
  r.tau_cr = tau_cr.value();
  r.tau_cbr = tau_cbr.value();
  r.stratified = true;
  r.strata = std::move(per);
  return r;
}

LinearDeltaExpectation expected_delta_linear(const LinearInterferenceModel& model, const Graph& graph,
                                             const Clustering& clustering, const DesignCounts& counts) {
  model.validate();
  require_length(clustering.num_units(), graph.num_units(), "graph");
  const DesignReals d = reals(clustering, counts);
  if (counts.m_cr < 1 || counts.m_cbr < 1) throw ValidationError("both arms need clusters");

  // For unit i with d_i neighbors, n_in of them in C(i), the contrast
  // E[Y_i | Z_i = 1, arm] - E[Y_i | Z_i = 0, arm] is beta plus gamma/d_i times
  // the shift in the expected treated-neighbor count.
  stats::CompensatedSum cr, cbr;
  for (UnitId i = 0; i < graph.num_units(); ++i) {
    const auto nbrs = graph.neighbors(i);
    double shift_cr = 0.0, shift_cbr = 0.0;
    if (!nbrs.empty()) {
      const ClusterId own = clustering.cluster_of(i);
      const double deg = static_cast<double>(nbrs.size());
      const double in = static_cast<double>(
          std::count_if(nbrs.begin(), nbrs.end(), [&](UnitId v) { return clustering.cluster_of(v) == own; }));
      const double out = deg - in;
      shift_cr = -(in + out * (d.m_cr - 1.0) / (d.m - 1.0)) / (d.n_cr - 1.0) / deg;
      shift_cbr = (in - out / (d.m - 1.0)) / deg;
    }
    cr.add(model.beta + model.gamma * shift_cr);
    cbr.add(model.beta + model.gamma * shift_cbr);
  }
  LinearDeltaExpectation e;
  e.tau_cr = cr.value() / d.n;
  e.tau_cbr = cbr.value() / d.n;
  e.delta = e.tau_cr - e.tau_cbr;
  return e;
}

double expected_tau_complete_linear(const LinearInterferenceModel& model, const Graph& graph) {
  model.validate();
  const double n = static_cast<double>(graph.num_units());
  if (graph.num_units() < 2) throw ValidationError("complete randomization needs N >= 2");
  const double f = total_treatment_effect(model, graph).non_isolated_fraction;
  return model.beta - model.gamma * f / (n - 1.0);
}

double expected_tau_cluster_linear(const LinearInterferenceModel& model, const Graph& graph,
                                   const Clustering& clustering) {
  model.validate();
  require_length(clustering.num_units(), graph.num_units(), "graph");
  const double m = static_cast<double>(clustering.num_clusters());
  if (clustering.num_clusters() < 2) throw ValidationError("cluster randomization needs M >= 2");
  stats::CompensatedSum acc;
  for (UnitId i = 0; i < graph.num_units(); ++i) {
    if (graph.degree(i) == 0) continue;
    acc.add((neighborhood_fraction_in_cluster(graph, clustering, i) * m - 1.0) / (m - 1.0));
  }
  return model.beta + model.gamma * acc.value() / static_cast<double>(graph.num_units());
}

double interference_variance_approx(const LinearInterferenceModel& model, const Graph& graph,
                                    const Clustering& clustering, const DesignCounts& counts) {
  model.validate();
  counts.validate(clustering.num_units(), clustering.num_clusters());
  if (counts.m_cr != counts.m_cbr || 2 * counts.n_cr_t != counts.n_cr || 2 * counts.m_cbr_t != counts.m_cbr) {
    throw UnsupportedError("approximate interference variance is defined for the symmetric design only");
  }
  const InterferenceVarianceTerms t = interference_variance_terms(graph, clustering);
  const double n = static_cast<double>(clustering.num_units());
  const double m = static_cast<double>(clustering.num_clusters());
  const double b = model.beta, g = model.gamma;
  return b * b * (8.0 / n + 5.0 / (2.0 * m)) - b * g * t.rho_c +
         g * g * (8.0 * t.a_bar / n + 6.0 * t.b_bar / n + 9.0 * t.c_bar / n + t.g_bar + t.f_bar -
                  t.rho_c * t.rho_c);
}

}  // namespace interfere
