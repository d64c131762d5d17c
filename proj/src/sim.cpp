#include "interfere/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <random>
#include <string>

#include "interfere/error.hpp"
#include "interfere/partition.hpp"
#include "interfere/rng.hpp"
#include "interfere/stats.hpp"

namespace interfere {

namespace {

std::string str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Runs fn(r) for r in [0, n) across threads; rethrows the lowest-index failure.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(n); ++r) {
    try {
      fn(static_cast<std::size_t>(r));
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

DesignCounts design_counts(const SimConfig& cfg, const Clustering& clustering) {
  if (cfg.m_cr == 0 && cfg.n_cr_t == 0 && cfg.m_cbr_t == 0) return DesignCounts::symmetric(clustering);
  return DesignCounts::from_split(clustering, cfg.m_cr, cfg.n_cr_t, cfg.m_cbr_t);
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t setting, std::size_t r) {
  return substream(substream(master, Stream::replication, setting), Stream::replication, r);
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct RateSummary {
  double rate = 0.0;
  double se = 0.0;
};

RateSummary rate_of(const std::vector<std::uint8_t>& hits) {
  std::size_t k = 0;
  for (auto h : hits) k += h;
  const double r = static_cast<double>(k) / static_cast<double>(hits.size());
  return {r, binomial_se(r, hits.size())};
}

// Fills the Delta / sigma_hat^2 / rejection columns of a row.
void summarize_draws(SimRow& row, const std::vector<double>& delta, const std::vector<double>& sigma,
                     const std::vector<std::uint8_t>& cheb, const std::vector<std::uint8_t>& gauss,
                     DecisionRule rule) {
  stats::RunningMoments d, s;
  for (double x : delta) d.add(x);
  for (double x : sigma) s.add(x);
  row.replications = delta.size();
  row.mean_delta = d.mean();
  row.var_delta = d.sample_variance();
  row.delta_se = std::sqrt(row.var_delta / static_cast<double>(delta.size()));
  row.mean_sigma_hat_sq = s.mean();
  row.chebyshev_rate = rate_of(cheb).rate;
  row.gaussian_rate = rate_of(gauss).rate;
  const auto chosen = rate_of(rule == DecisionRule::chebyshev ? cheb : gauss);
  row.rejection_rate = chosen.rate;
  row.rejection_se = chosen.se;
}

struct Draw {
  double delta = 0.0;
  double sigma = 0.0;
  std::uint8_t cheb = 0;
  std::uint8_t gauss = 0;
};

Draw analyze_draw(const Clustering& c, const HierarchicalAssignment& h, std::span<const double> y, double alpha) {
  const DeltaEstimate d = delta_statistic(c, h, y);
  const double v = empirical_variance_bound(c, h, y);
  const AnalysisReport cheb = summarize(d.delta, v, alpha, DecisionRule::chebyshev);
  Draw out;
  out.delta = d.delta;
  out.sigma = v;
  out.cheb = cheb.decision == Decision::reject;
  out.gauss = cheb.p_gaussian <= alpha;
  return out;
}

void unpack(const std::vector<Draw>& draws, std::vector<double>& delta, std::vector<double>& sigma,
            std::vector<std::uint8_t>& cheb, std::vector<std::uint8_t>& gauss) {
  const std::size_t n = draws.size();
  delta.resize(n);
  sigma.resize(n);
  cheb.resize(n);
  gauss.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    delta[r] = draws[r].delta;
    sigma[r] = draws[r].sigma;
    cheb[r] = draws[r].cheb;
    gauss[r] = draws[r].gauss;
  }
}

double type1_ceiling(double alpha, std::size_t replications) {
  return alpha + 3.0 * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(replications));
}

SbmSpec sbm_for(const SimConfig& cfg, const SbmSetting& s, std::uint64_t seed) {
  if (s.target_rho) return SbmSpec::from_target(cfg.num_blocks, cfg.block_size, *s.target_rho, cfg.mean_degree, seed);
  SbmSpec spec{cfg.num_blocks, cfg.block_size, *s.p_intra, *s.p_inter, seed};
  spec.validate();
  return spec;
}

std::string setting_label(const SbmSetting& s) {
  if (s.target_rho) return "rho=" + str(*s.target_rho);
  return "p=" + str(*s.p_intra) + "/" + str(*s.p_inter);
}

Clustering clustering_for(const SimConfig& cfg, const SbmGraph& sbm, std::uint64_t seed) {
  if (cfg.clustering == ClusteringSource::blocks) return sbm.blocks;
  LdgOptions opt;
  opt.num_clusters = cfg.num_blocks;
  opt.leniency = cfg.leniency;
  opt.iterations = cfg.ldg_iterations;
  opt.seed = seed;
  Clustering c = ldg_restream(sbm.graph, opt).clustering;
  return c.is_balanced() ? c : rebalance(sbm.graph, c);
}

}  // namespace

double binomial_se(double rate, std::size_t replications) {
  if (replications == 0) return 0.0;
  return std::sqrt(rate * (1.0 - rate) / static_cast<double>(replications));
}

bool SimReport::all_passed() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.passed; });
}

void SimConfig::validate() const {
  if (replications < 1) throw ValidationError("replications must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  for (double v : {model_alpha, beta, noise_sd, mean_degree, leniency, table.tau, table.unit_sd, table.cluster_sd,
                   table.effect_sd}) {
    if (!std::isfinite(v)) throw ValidationError("simulation parameters must be finite");
  }
  if (noise_sd < 0.0) throw ValidationError("noise_sd must be >= 0");
  if (table.unit_sd < 0.0 || table.cluster_sd < 0.0 || table.effect_sd < 0.0) {
    throw ValidationError("table standard deviations must be >= 0");
  }
  if (study == StudyType::power) {
    if (gamma_grid.empty()) throw ValidationError("power study needs a non-empty gamma grid");
    for (double g : gamma_grid) {
      if (!std::isfinite(g)) throw ValidationError("gamma grid must be finite");
    }
    if (settings.empty()) throw ValidationError("power study needs at least one SBM setting");
    for (const auto& s : settings) {
      if (!s.target_rho && !(s.p_intra && s.p_inter)) {
        throw ValidationError("each SBM setting needs target_rho or both p_intra and p_inter");
      }
    }
    if (ldg_iterations < 1) throw ValidationError("ldg_iterations must be >= 1");
  } else {
    if (cluster_counts.empty()) throw ValidationError("study needs at least one cluster count");
    if (units_per_cluster < 1) throw ValidationError("units_per_cluster must be >= 1");
  }
}

PotentialTable make_table(const TableSpec& spec, const Clustering& clustering, std::uint64_t seed) {
  const std::size_t n = clustering.num_units();
  PotentialTable t;
  t.y0.assign(n, spec.tau);
  t.y1.assign(n, spec.tau);
  if (spec.kind == TableKind::constant_y) return t;
  Engine rng = make_engine(seed, Stream::table);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> cluster_shift(clustering.num_clusters());
  for (auto& u : cluster_shift) u = spec.cluster_sd * normal(rng);
  for (std::size_t i = 0; i < n; ++i) {
    t.y0[i] = cluster_shift[clustering.cluster_of(static_cast<UnitId>(i))] + spec.unit_sd * normal(rng);
    t.y1[i] = t.y0[i] + spec.tau;
  }
  if (spec.kind == TableKind::heterogeneous) {
    for (std::size_t i = 0; i < n; ++i) t.y1[i] += spec.effect_sd * normal(rng);
  }
  return t;
}

SimReport run_ratio_study(const SimConfig& cfg) {
  cfg.validate();
  SimReport report;
  report.study = StudyType::ratio;
  report.seed = cfg.seed;
  for (std::size_t s = 0; s < cfg.cluster_counts.size(); ++s) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t m = cfg.cluster_counts[s];
    const Clustering c = Clustering::contiguous_blocks(m, cfg.units_per_cluster);
    const PotentialTable table = make_table(cfg.table, c, substream(cfg.seed, Stream::table, s));
    const DesignCounts counts = design_counts(cfg, c);
    const double reference = theoretical_sutva_variance(table, c, counts).exact;
    if (!(reference > 0.0)) {
      throw ValidationError("reference variance of Delta is 0 for M=" + std::to_string(m) + "; ratio undefined");
    }

    std::vector<Draw> draws(cfg.replications);
    parallel_for(cfg.replications, [&](std::size_t r) {
      const auto h = hierarchical_assign(c, counts, replication_seed(cfg.seed, s, r));
      const auto obs = realize_sutva(table, h.z);
      draws[r] = analyze_draw(c, h, obs.y, cfg.alpha);
    });

    SimRow row;
    row.setting = "M=" + std::to_string(m);
    row.num_clusters = m;
    row.num_units = c.num_units();
    row.reference_variance = reference;
    std::vector<double> delta, sigma;
    std::vector<std::uint8_t> cheb, gauss;
    unpack(draws, delta, sigma, cheb, gauss);
    summarize_draws(row, delta, sigma, cheb, gauss, cfg.rule);

    std::vector<double> ratio(sigma.size());
    std::size_t in_band = 0;
    stats::RunningMoments rm;
    for (std::size_t r = 0; r < ratio.size(); ++r) {
      ratio[r] = sigma[r] / reference;
      rm.add(ratio[r]);
      in_band += ratio[r] > 0.95 && ratio[r] < 1.05;
    }
    row.ratio_mean = rm.mean();
    row.ratio_se = std::sqrt(rm.sample_variance() / static_cast<double>(ratio.size()));
    std::sort(ratio.begin(), ratio.end());
    row.ratio_q10 = stats::nearest_rank(ratio, 0.10);
    row.ratio_q90 = stats::nearest_rank(ratio, 0.90);
    row.ratio_in_band = static_cast<double>(in_band) / static_cast<double>(ratio.size());
    row.wall_seconds = elapsed(start);

    PropertyCheck check;
    check.name = "conservative bound " + row.setting;
    check.passed = row.ratio_mean >= 1.0 - 4.0 * row.ratio_se;
    check.detail = "mean ratio " + str(row.ratio_mean) + " >= 1 - 4*" + str(row.ratio_se);
    report.checks.push_back(check);
    report.rows.push_back(std::move(row));
  }
  return report;
}

SimReport run_type1_study(const SimConfig& cfg) {
  cfg.validate();
  SimReport report;
  report.study = StudyType::type1;
  report.seed = cfg.seed;
  for (std::size_t s = 0; s < cfg.cluster_counts.size(); ++s) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t m = cfg.cluster_counts[s];
    const Clustering c = Clustering::contiguous_blocks(m, cfg.units_per_cluster);
    const PotentialTable table = make_table(cfg.table, c, substream(cfg.seed, Stream::table, s));
    const DesignCounts counts = design_counts(cfg, c);

    std::vector<Draw> draws(cfg.replications);
    parallel_for(cfg.replications, [&](std::size_t r) {
      const auto h = hierarchical_assign(c, counts, replication_seed(cfg.seed, s, r));
      const auto obs = realize_sutva(table, h.z);
      draws[r] = analyze_draw(c, h, obs.y, cfg.alpha);
    });

    SimRow row;
    row.setting = "M=" + std::to_string(m);
    row.num_clusters = m;
    row.num_units = c.num_units();
    std::vector<double> delta, sigma;
    std::vector<std::uint8_t> cheb, gauss;
    unpack(draws, delta, sigma, cheb, gauss);
    summarize_draws(row, delta, sigma, cheb, gauss, cfg.rule);
    row.wall_seconds = elapsed(start);

    const double ceiling = type1_ceiling(cfg.alpha, cfg.replications);
    PropertyCheck check;
    check.name = "chebyshev type I " + row.setting;
    check.passed = row.chebyshev_rate <= ceiling;
    check.detail = "rate " + str(row.chebyshev_rate) + " <= " + str(ceiling);
    report.checks.push_back(check);
    report.rows.push_back(std::move(row));
  }
  return report;
}

SimReport run_power_study(const SimConfig& cfg) {
  cfg.validate();
  SimReport report;
  report.study = StudyType::power;
  report.seed = cfg.seed;
  const std::size_t reps = cfg.replications;
  const std::size_t ng = cfg.gamma_grid.size();

  struct SettingRows {
    double rho_c;
    std::vector<SimRow> rows;
  };
  std::vector<SettingRows> per_setting;

  for (std::size_t s = 0; s < cfg.settings.size(); ++s) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t graph_seed = substream(cfg.seed, Stream::graph, s);
    const std::uint64_t noise_seed = substream(cfg.seed, Stream::noise, s);
    const SbmGraph sbm = generate_sbm(sbm_for(cfg, cfg.settings[s], graph_seed));
    const Clustering c = clustering_for(cfg, sbm, substream(graph_seed, Stream::shuffle));
    const DesignCounts counts = design_counts(cfg, c);
    const std::size_t n = c.num_units();
    const std::vector<double> fixed_noise = draw_noise(n, cfg.noise_sd, noise_seed);

    // draws[g * reps + r]
    std::vector<Draw> draws(ng * reps);
    std::vector<double> rho_per_rep(reps, 0.0);
    parallel_for(reps, [&](std::size_t r) {
      SbmGraph local;
      const Graph* g = &sbm.graph;
      const Clustering* cl = &c;
      Clustering local_c;
      if (cfg.regenerate_graph) {
        local = generate_sbm(sbm_for(cfg, cfg.settings[s], substream(graph_seed, Stream::graph, r + 1)));
        local_c = clustering_for(cfg, local, substream(graph_seed, Stream::shuffle, r + 1));
        g = &local.graph;
        cl = &local_c;
        rho_per_rep[r] = serial::clustering_metrics(*g, *cl).rho_c;
      }
      const auto h = hierarchical_assign(*cl, counts, replication_seed(cfg.seed, s, r));
      const auto rho = serial::treated_neighbor_fraction(*g, h.z);
      std::vector<double> noise;
      if (cfg.resample_noise) noise = draw_noise(n, cfg.noise_sd, substream(noise_seed, Stream::noise, r + 1));
      const std::vector<double>& eps = cfg.resample_noise ? noise : fixed_noise;
      std::vector<double> y(n);
      for (std::size_t gi = 0; gi < ng; ++gi) {
        const double gamma = cfg.gamma_grid[gi];
        for (std::size_t i = 0; i < n; ++i) y[i] = cfg.model_alpha + cfg.beta * h.z[i] + gamma * rho[i] + eps[i];
        draws[gi * reps + r] = analyze_draw(*cl, h, y, cfg.alpha);
      }
    });

    double rho_c = clustering_metrics(sbm.graph, c).rho_c;
    if (cfg.regenerate_graph) rho_c = stats::mean(rho_per_rep);
    const bool symmetric = counts.m_cr == counts.m_cbr && 2 * counts.n_cr_t == counts.n_cr &&
                           2 * counts.m_cbr_t == counts.m_cbr;
    std::optional<InterferenceVarianceTerms> terms;
    if (symmetric) terms = interference_variance_terms(sbm.graph, c);
    const double wall = elapsed(start);

    SettingRows block{rho_c, {}};
    for (std::size_t gi = 0; gi < ng; ++gi) {
      const double gamma = cfg.gamma_grid[gi];
      SimRow row;
      row.setting = setting_label(cfg.settings[s]);
      row.gamma = gamma;
      row.rho_c = rho_c;
      row.num_clusters = c.num_clusters();
      row.num_units = n;
      std::vector<Draw> slice(draws.begin() + static_cast<std::ptrdiff_t>(gi * reps),
                              draws.begin() + static_cast<std::ptrdiff_t>((gi + 1) * reps));
      std::vector<double> delta, sigma;
      std::vector<std::uint8_t> cheb, gauss;
      unpack(slice, delta, sigma, cheb, gauss);
      summarize_draws(row, delta, sigma, cheb, gauss, cfg.rule);
      LinearInterferenceModel model{cfg.model_alpha, cfg.beta, gamma, cfg.noise_sd};
      row.expected_delta = expected_delta_linear(model, sbm.graph, c, counts).delta;
      if (terms) row.approx_variance = interference_variance_approx(model, sbm.graph, c, counts);
      row.wall_seconds = wall / static_cast<double>(ng);
      block.rows.push_back(std::move(row));
    }
    per_setting.push_back(std::move(block));
  }

  // Properties: type I control at gamma = 0, monotonicity in gamma and in rho_C.
  const double ceiling = type1_ceiling(cfg.alpha, reps);
  for (const auto& block : per_setting) {
    for (std::size_t gi = 0; gi < ng; ++gi) {
      const SimRow& row = block.rows[gi];
      if (row.gamma == 0.0) {
        report.checks.push_back({"type I at gamma=0 " + row.setting, row.rejection_rate <= ceiling,
                                 "rate " + str(row.rejection_rate) + " <= " + str(ceiling)});
      }
    }
    std::vector<std::size_t> order(ng);
    for (std::size_t i = 0; i < ng; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cfg.gamma_grid[a] < cfg.gamma_grid[b]; });
    for (std::size_t k = 0; k + 1 < ng; ++k) {
      const SimRow& lo = block.rows[order[k]];
      const SimRow& hi = block.rows[order[k + 1]];
      const double tol = 2.0 * std::hypot(lo.rejection_se, hi.rejection_se);
      report.checks.push_back({"power monotone in gamma " + lo.setting + " gamma " + str(lo.gamma) + "->" +
                                   str(hi.gamma),
                               hi.rejection_rate >= lo.rejection_rate - tol,
                               str(lo.rejection_rate) + " -> " + str(hi.rejection_rate) + ", tolerance " + str(tol)});
    }
  }
  std::vector<std::size_t> by_rho(per_setting.size());
  for (std::size_t i = 0; i < by_rho.size(); ++i) by_rho[i] = i;
  std::stable_sort(by_rho.begin(), by_rho.end(),
                   [&](std::size_t a, std::size_t b) { return per_setting[a].rho_c < per_setting[b].rho_c; });
  for (std::size_t gi = 0; gi < ng; ++gi) {
    if (!(cfg.gamma_grid[gi] > 0.0)) continue;
    for (std::size_t k = 0; k + 1 < by_rho.size(); ++k) {
      const SimRow& lo = per_setting[by_rho[k]].rows[gi];
      const SimRow& hi = per_setting[by_rho[k + 1]].rows[gi];
      const double tol = 2.0 * std::hypot(lo.rejection_se, hi.rejection_se);
      report.checks.push_back({"power monotone in rho_C at gamma " + str(lo.gamma) + " " + lo.setting + "->" +
                                   hi.setting,
                               hi.rejection_rate >= lo.rejection_rate - tol,
                               str(lo.rejection_rate) + " -> " + str(hi.rejection_rate) + ", tolerance " + str(tol)});
    }
  }
  for (auto& block : per_setting) {
    for (auto& row : block.rows) report.rows.push_back(std::move(row));
  }
  return report;
}

SimReport run_study(const SimConfig& cfg) {
  switch (cfg.study) {
    case StudyType::ratio: return run_ratio_study(cfg);
    case StudyType::power: return run_power_study(cfg);
    case StudyType::type1: return run_type1_study(cfg);
  }
  throw ValidationError("unknown study type");
}

}  // namespace interfere
