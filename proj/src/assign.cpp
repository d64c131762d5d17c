#include "interfere/assign.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "interfere/error.hpp"
#include "interfere/rng.hpp"

namespace interfere {

namespace {

// First `k` entries of a partial Fisher-Yates shuffle: a uniform k-subset.
template <class T>
void choose_prefix(std::vector<T>& items, std::size_t k, Engine& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, items.size() - 1);
    std::swap(items[i], items[pick(rng)]);
  }
}

std::string str(std::size_t v) { return std::to_string(v); }

}  // namespace

DesignCounts DesignCounts::symmetric(const Clustering& clustering) {
  const std::size_t m = clustering.num_clusters();
  const std::size_t k = clustering.cluster_size();
  if (m % 2 != 0) throw ValidationError("symmetric design needs an even number of clusters, got " + str(m));
  const std::size_t half = m / 2;
  if ((half * k) % 2 != 0) {
    throw ValidationError("arm cr holds " + str(half * k) + " units, which cannot be split evenly");
  }
  if (half % 2 != 0) {
    throw ValidationError("arm cbr holds " + str(half) + " clusters, which cannot be split evenly");
  }
  return from_split(clustering, half, half * k / 2, half / 2);
}

DesignCounts DesignCounts::from_split(const Clustering& clustering, std::size_t m_cr, std::size_t n_cr_t,
                                      std::size_t m_cbr_t) {
  const std::size_t k = clustering.cluster_size();
  const std::size_t m = clustering.num_clusters();
  if (m_cr == 0 || m_cr >= m) throw ValidationError("m_cr must lie in [1, M-1]");
  DesignCounts d;
  d.m_cr = m_cr;
  d.m_cbr = m - m_cr;
  d.n_cr = m_cr * k;
  d.n_cbr = d.m_cbr * k;
  d.n_cr_t = n_cr_t;
  d.n_cr_c = d.n_cr >= n_cr_t ? d.n_cr - n_cr_t : 0;
  d.m_cbr_t = m_cbr_t;
  d.m_cbr_c = d.m_cbr >= m_cbr_t ? d.m_cbr - m_cbr_t : 0;
  d.validate(clustering.num_units(), m);
  return d;
}

void DesignCounts::validate(std::size_t num_units, std::size_t num_clusters) const {
  const auto positive = {n_cr, n_cbr, m_cr, m_cbr, n_cr_t, n_cr_c, m_cbr_t, m_cbr_c};
  if (std::any_of(positive.begin(), positive.end(), [](std::size_t v) { return v == 0; })) {
    throw ValidationError("every design count must be at least 1");
  }
  if (n_cr + n_cbr != num_units) throw ValidationError("n_cr + n_cbr must equal N");
  if (m_cr + m_cbr != num_clusters) throw ValidationError("m_cr + m_cbr must equal M");
  if (n_cr_t + n_cr_c != n_cr) throw ValidationError("n_cr_t + n_cr_c must equal n_cr");
  if (m_cbr_t + m_cbr_c != m_cbr) throw ValidationError("m_cbr_t + m_cbr_c must equal m_cbr");
  if (n_cr * num_clusters != m_cr * num_units || n_cbr * num_clusters != m_cbr * num_units) {
    throw ValidationError("arm sizes are inconsistent with equal cluster sizes N/M");
  }
}

SimpleAssignment complete_randomization(std::size_t num_units, std::size_t n_treated, std::uint64_t seed) {
  if (num_units < 2 || n_treated < 1 || n_treated >= num_units) {
    throw ValidationError("complete randomization needs 1 <= n_t <= N-1 (N=" + str(num_units) +
                          ", n_t=" + str(n_treated) + ")");
  }
  std::vector<std::size_t> units(num_units);
  std::iota(units.begin(), units.end(), std::size_t{0});
  Engine rng = make_engine(seed);
  choose_prefix(units, n_treated, rng);
  SimpleAssignment a;
  a.z.assign(num_units, 0);
  for (std::size_t k = 0; k < n_treated; ++k) a.z[units[k]] = 1;
  a.n_t = n_treated;
  a.n_c = num_units - n_treated;
  return a;
}

SimpleAssignment bernoulli_rerandomized(std::size_t num_units, double p, std::uint64_t seed) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("Bernoulli probability must lie in (0,1)");
  if (num_units < 2) throw ValidationError("Bernoulli re-randomization needs N >= 2");
  Engine rng = make_engine(seed);
  std::bernoulli_distribution coin(p);
  SimpleAssignment a;
  a.z.assign(num_units, 0);
  a.p = p;
  do {
    a.n_t = 0;
    for (auto& bit : a.z) {
      bit = coin(rng) ? 1 : 0;
      a.n_t += bit;
    }
  } while (a.n_t == 0 || a.n_t == num_units);
  a.n_c = num_units - a.n_t;
  return a;
}

SimpleAssignment cluster_randomization(const Clustering& clustering, std::size_t m_treated, std::uint64_t seed) {
  const std::size_t m = clustering.num_clusters();
  if (m_treated < 1 || m_treated >= m) {
    throw ValidationError("cluster randomization needs 1 <= m_t <= M-1 (M=" + str(m) + ", m_t=" + str(m_treated) + ")");
  }
  std::vector<ClusterId> ids(m);
  std::iota(ids.begin(), ids.end(), ClusterId{0});
  Engine rng = make_engine(seed);
  choose_prefix(ids, m_treated, rng);
  Bits treated(m, 0);
  for (std::size_t k = 0; k < m_treated; ++k) treated[ids[k]] = 1;
  SimpleAssignment a;
  a.z.resize(clustering.num_units());
  for (std::size_t i = 0; i < a.z.size(); ++i) {
    a.z[i] = treated[clustering.cluster_of(static_cast<UnitId>(i))];
    a.n_t += a.z[i];
  }
  a.n_c = a.z.size() - a.n_t;
  return a;
}

HierarchicalAssignment hierarchical_assign(const Clustering& clustering, const DesignCounts& counts,
                                           std::uint64_t seed, CrMechanism mechanism) {
  clustering.cluster_size();  // throws when unbalanced
  counts.validate(clustering.num_units(), clustering.num_clusters());
  const std::size_t m = clustering.num_clusters();
  const std::size_t n = clustering.num_units();

  HierarchicalAssignment h;
  h.seed = seed;
  h.mechanism = mechanism;
  h.counts = counts;

  std::vector<ClusterId> ids(m);
  std::iota(ids.begin(), ids.end(), ClusterId{0});
  Engine arm_rng = make_engine(seed, Stream::arm_split);
  choose_prefix(ids, counts.m_cr, arm_rng);
  h.omega.assign(m, 0);
  for (std::size_t k = 0; k < counts.m_cr; ++k) h.omega[ids[k]] = 1;

  h.w.resize(n);
  std::vector<UnitId> cr_units;
  std::vector<ClusterId> cbr_clusters;
  for (UnitId i = 0; i < n; ++i) {
    h.w[i] = h.omega[clustering.cluster_of(i)];
    if (h.w[i]) cr_units.push_back(i);
  }
  for (ClusterId c = 0; c < m; ++c) {
    if (!h.omega[c]) cbr_clusters.push_back(c);
  }

  h.z.assign(n, 0);
  const auto cr_seed = substream(seed, Stream::cr_arm);
  const SimpleAssignment cr =
      mechanism == CrMechanism::complete
          ? complete_randomization(cr_units.size(), counts.n_cr_t, cr_seed)
          : bernoulli_rerandomized(cr_units.size(),
                                   static_cast<double>(counts.n_cr_t) / static_cast<double>(counts.n_cr), cr_seed);
  for (std::size_t k = 0; k < cr_units.size(); ++k) h.z[cr_units[k]] = cr.z[k];
  h.counts.n_cr_t = cr.n_t;
  h.counts.n_cr_c = cr.n_c;

  Engine cbr_rng = make_engine(seed, Stream::cbr_arm);
  choose_prefix(cbr_clusters, counts.m_cbr_t, cbr_rng);
  h.z_cbr.assign(m, 0);
  for (std::size_t k = 0; k < counts.m_cbr_t; ++k) {
    const ClusterId c = cbr_clusters[k];
    h.z_cbr[c] = 1;
    for (UnitId u : clustering.members(c)) h.z[u] = 1;
  }
  return h;
}

HierarchicalAssignment HierarchicalAssignment::from_units(const Clustering& clustering, Bits w, Bits z) {
  const std::size_t n = clustering.num_units();
  const std::size_t m = clustering.num_clusters();
  if (w.size() != n || z.size() != n) throw ValidationError("arm and treatment vectors must cover every unit");
  const std::size_t k = clustering.cluster_size();
  HierarchicalAssignment h;
  h.omega.assign(m, 0);
  h.z_cbr.assign(m, 0);
  for (ClusterId c = 0; c < m; ++c) {
    const auto members = clustering.members(c);
    const std::uint8_t arm = w[members.front()] ? 1 : 0;
    const std::uint8_t treat = z[members.front()] ? 1 : 0;
    for (UnitId u : members) {
      if ((w[u] ? 1 : 0) != arm) throw ValidationError("cluster " + str(c) + " is split across arms");
      if (!arm && (z[u] ? 1 : 0) != treat) {
        throw ValidationError("arm-cbr cluster " + str(c) + " mixes treated and control units");
      }
    }
    h.omega[c] = arm;
    if (!arm) h.z_cbr[c] = treat;
  }
  DesignCounts& d = h.counts;
  for (ClusterId c = 0; c < m; ++c) {
    if (h.omega[c]) {
      ++d.m_cr;
    } else {
      ++d.m_cbr;
      d.m_cbr_t += h.z_cbr[c];
    }
  }
  d.m_cbr_c = d.m_cbr - d.m_cbr_t;
  d.n_cr = d.m_cr * k;
  d.n_cbr = d.m_cbr * k;
  for (UnitId i = 0; i < n; ++i) {
    w[i] = w[i] ? 1 : 0;
    z[i] = z[i] ? 1 : 0;
    if (w[i]) d.n_cr_t += z[i];
  }
  d.n_cr_c = d.n_cr - d.n_cr_t;
  d.validate(n, m);
  h.w = std::move(w);
  h.z = std::move(z);
  return h;
}

StratifiedAssignment stratified_hierarchical_assign(const Clustering& clustering, const Stratification& strata,
                                                    std::span<const DesignCounts> counts, std::uint64_t seed,
                                                    CrMechanism mechanism) {
  if (strata.stratum_of.size() != clustering.num_clusters()) {
    throw ValidationError("stratification does not cover every cluster");
  }
  if (!counts.empty() && counts.size() != strata.num_strata) {
    throw ValidationError("need one set of design counts per stratum");
  }
  clustering.cluster_size();
  StratifiedAssignment out;
  out.w.assign(clustering.num_units(), 0);
  out.z.assign(clustering.num_units(), 0);
  for (std::uint32_t s = 0; s < strata.num_strata; ++s) {
    StratumAssignment sa;
    sa.stratum = s;
    sa.restriction = clustering.restrict_to(strata.members[s]);
    try {
      const DesignCounts d = counts.empty() ? DesignCounts::symmetric(sa.restriction.clustering) : counts[s];
      sa.assignment = hierarchical_assign(sa.restriction.clustering, d, substream(seed, Stream::stratum, s), mechanism);
    } catch (const ValidationError& e) {
      throw ValidationError("stratum " + std::to_string(s) + ": " + e.what());
    }
    for (std::size_t k = 0; k < sa.restriction.units.size(); ++k) {
      out.w[sa.restriction.units[k]] = sa.assignment.w[k];
      out.z[sa.restriction.units[k]] = sa.assignment.z[k];
    }
    out.strata.push_back(std::move(sa));
  }
  return out;
}

StratifiedAssignment StratifiedAssignment::from_units(const Clustering& clustering, const Stratification& strata,
                                                      Bits w, Bits z) {
  if (strata.stratum_of.size() != clustering.num_clusters()) {
    throw ValidationError("stratification does not cover every cluster");
  }
  if (w.size() != clustering.num_units() || z.size() != clustering.num_units()) {
    throw ValidationError("arm and treatment vectors must cover every unit");
  }
  StratifiedAssignment out;
  for (std::uint32_t s = 0; s < strata.num_strata; ++s) {
    StratumAssignment sa;
    sa.stratum = s;
    sa.restriction = clustering.restrict_to(strata.members[s]);
    Bits lw(sa.restriction.units.size()), lz(sa.restriction.units.size());
    for (std::size_t k = 0; k < lw.size(); ++k) {
      lw[k] = w[sa.restriction.units[k]];
      lz[k] = z[sa.restriction.units[k]];
    }
    try {
      sa.assignment = HierarchicalAssignment::from_units(sa.restriction.clustering, std::move(lw), std::move(lz));
    } catch (const ValidationError& e) {
      throw ValidationError("stratum " + std::to_string(s) + ": " + e.what());
    }
    out.strata.push_back(std::move(sa));
  }
  out.w = std::move(w);
  out.z = std::move(z);
  return out;
}

}  // namespace interfere
