// interfere: clustering, hierarchical assignment, analysis, simulation and
// oracle checks from the command line.
//
// Exit codes: 0 success, 1 usage or validation error, 2 a checked property failed.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "interfere/assign.hpp"
#include "interfere/error.hpp"
#include "interfere/estimate.hpp"
#include "interfere/graph.hpp"
#include "interfere/io.hpp"
#include "interfere/oracle.hpp"
#include "interfere/partition.hpp"
#include "interfere/rng.hpp"
#include "interfere/sim.hpp"

using namespace interfere;
using io::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitProperty = 2;

struct Globals {
  int threads = 0;
  bool stamp = false;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Collects provenance while a command runs and embeds it in the JSON outputs.
class Manifest {
 public:
  Manifest(std::string command, const Globals& g) : stamp_(g.stamp) { m_.command = std::move(command); }

  void config(const Json& options) { m_.config_digest = io::fnv1a_hex(options.dump()); }
  void seed(std::uint64_t s) { m_.seed = s; }

  std::string read_input(const std::string& path) {
    std::string text = io::read_file(path);
    m_.inputs.emplace_back(path, io::fnv1a_hex(text));
    return text;
  }

  void artifact(const std::string& path) { m_.artifacts.push_back(path); }

  Json json() const {
    io::RunManifest m = m_;
    if (stamp_) m.timestamp = utc_now();
    return io::to_json(m);
  }

 private:
  io::RunManifest m_;
  bool stamp_;
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    io::write_file(path, text);
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(what + " is not valid JSON: " + e.what(), 0);
  }
}

Graph graph_from_text(const std::string& text) {
  std::istringstream in(text);
  return parse_edge_list(in);
}

Clustering clustering_from_text(const std::string& text) {
  std::istringstream in(text);
  return io::read_clustering_csv(in);
}

Stratification strata_from_text(const std::string& text, std::size_t num_clusters) {
  std::istringstream in(text);
  return io::read_strata_csv(in, num_clusters);
}

void require_same_units(const Graph& g, const Clustering& c) {
  if (g.num_units() != c.num_units()) {
    throw ValidationError("edge list has " + std::to_string(g.num_units()) + " units but clustering has " +
                          std::to_string(c.num_units()));
  }
}

// Restricts a stratification to the clusters kept by a restriction, renumbering
// strata densely in ascending order of their original ids.
Stratification restrict_strata(const Stratification& strata, const std::vector<ClusterId>& kept) {
  std::map<std::uint32_t, std::uint32_t> renumber;
  for (ClusterId c : kept) renumber.emplace(strata.stratum_of.at(c), 0);
  std::uint32_t next = 0;
  for (auto& [from, to] : renumber) to = next++;
  std::vector<std::uint32_t> local(kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) local[k] = renumber.at(strata.stratum_of[kept[k]]);
  return Stratification::from_map(std::move(local), renumber.size());
}

// ---------------------------------------------------------------- generate

struct GenerateOptions {
  std::string sbm_json;
  std::size_t blocks = 0, block_size = 0;
  std::optional<double> p_intra, p_inter, target_rho;
  double mean_degree = 20.0;
  std::optional<std::uint64_t> seed;
  std::string out_edges, out_clustering, metrics;
};

int cmd_generate(const GenerateOptions& o, const Globals& g) {
  Manifest man("generate", g);
  SbmSpec spec;
  if (!o.sbm_json.empty()) {
    spec = io::sbm_spec_from_json(parse_json_text(man.read_input(o.sbm_json), o.sbm_json));
  } else {
    if (!o.seed) throw ValidationError("--seed is required");
    if (o.blocks == 0 || o.block_size == 0) throw ValidationError("--blocks and --block-size are required");
    if (o.target_rho) {
      spec = SbmSpec::from_target(o.blocks, o.block_size, *o.target_rho, o.mean_degree, *o.seed);
    } else if (o.p_intra && o.p_inter) {
      spec = SbmSpec{o.blocks, o.block_size, *o.p_intra, *o.p_inter, *o.seed};
      spec.validate();
    } else {
      throw ValidationError("give --target-rho or both --p-intra and --p-inter");
    }
  }
  man.seed(spec.seed);
  man.config(Json{{"sbm", io::to_json(spec)}});
  const SbmGraph sbm = generate_sbm(spec);

  std::ostringstream edges;
  io::write_edge_list(edges, sbm.graph);
  io::write_file(o.out_edges, edges.str());
  man.artifact(o.out_edges);
  if (!o.out_clustering.empty()) {
    std::ostringstream csv;
    io::write_clustering_csv(csv, sbm.blocks);
    io::write_file(o.out_clustering, csv.str());
    man.artifact(o.out_clustering);
  }
  Json report{{"sbm", io::to_json(spec)},
              {"num_units", sbm.graph.num_units()},
              {"num_edges", sbm.graph.num_edges()},
              {"block_metrics", io::to_json(clustering_metrics(sbm.graph, sbm.blocks))}};
  if (!o.metrics.empty()) man.artifact(o.metrics);
  report["manifest"] = man.json();
  emit(o.metrics, dump(report));
  return kExitOk;
}

// ----------------------------------------------------------------- cluster

struct ClusterOptions {
  std::string edges;
  std::size_t clusters = 0;
  double leniency = 0.0;
  std::size_t iterations = 1;
  std::uint64_t seed = 0;
  bool rebalance = false;
  std::string out, metrics;
};

int cmd_cluster(const ClusterOptions& o, const Globals& g) {
  Manifest man("cluster", g);
  const Graph graph = graph_from_text(man.read_input(o.edges));
  man.seed(o.seed);
  man.config(Json{{"clusters", o.clusters},
                  {"leniency", o.leniency},
                  {"iterations", o.iterations},
                  {"seed", o.seed},
                  {"rebalance", o.rebalance}});
  LdgOptions opt;
  opt.num_clusters = o.clusters;
  opt.leniency = o.leniency;
  opt.iterations = o.iterations;
  opt.seed = o.seed;
  const LdgResult res = ldg_restream(graph, opt);
  Clustering clustering = res.clustering;
  bool rebalanced = false;
  if (o.rebalance && !clustering.is_balanced()) {
    clustering = rebalance(graph, clustering);
    rebalanced = true;
  }

  std::ostringstream csv;
  io::write_clustering_csv(csv, clustering);
  io::write_file(o.out, csv.str());
  man.artifact(o.out);
  if (!o.metrics.empty()) man.artifact(o.metrics);

  Json report{{"metrics", io::to_json(clustering_metrics(graph, clustering))},
              {"num_clusters", clustering.num_clusters()},
              {"capacity", res.capacity},
              {"balanced", clustering.is_balanced()},
              {"rebalanced", rebalanced},
              {"pass_internal_edge_fraction", res.pass_internal_edge_fraction},
              {"selected_pass", res.selected_pass}};
  report["manifest"] = man.json();
  emit(o.metrics, dump(report));
  return kExitOk;
}

// ---------------------------------------------------------------- stratify

struct StratifyOptions {
  std::string edges, clustering, covariates;
  std::size_t strata = 1;
  std::uint64_t seed = 0;
  std::string out, report;
};

int cmd_stratify(const StratifyOptions& o, const Globals& g) {
  Manifest man("stratify", g);
  const Graph graph = graph_from_text(man.read_input(o.edges));
  const Clustering clustering = clustering_from_text(man.read_input(o.clustering));
  require_same_units(graph, clustering);
  std::vector<std::vector<double>> cov;
  if (!o.covariates.empty()) {
    std::istringstream in(man.read_input(o.covariates));
    cov = io::read_cluster_covariates_csv(in, clustering.num_clusters());
  }
  man.seed(o.seed);
  man.config(Json{{"strata", o.strata}, {"seed", o.seed}, {"covariates", !o.covariates.empty()}});
  const Stratification strat = stratify_clusters(cluster_features(graph, clustering, cov), o.strata, o.seed);

  std::ostringstream csv;
  io::write_strata_csv(csv, strat);
  io::write_file(o.out, csv.str());
  man.artifact(o.out);
  if (!o.report.empty()) man.artifact(o.report);
  Json report{{"num_strata", strat.num_strata}, {"strata_sizes", strat.strata_sizes}};
  report["manifest"] = man.json();
  emit(o.report, dump(report));
  return kExitOk;
}

// ------------------------------------------------------------------ assign

struct AssignOptions {
  std::string clustering, strata;
  std::uint64_t seed = 0;
  std::size_t m_cr = 0, n_cr_t = 0, m_cbr_t = 0;
  std::optional<double> subsample;
  std::string mechanism = "complete";
  std::string out, counts;
};

int cmd_assign(const AssignOptions& o, const Globals& g) {
  Manifest man("assign", g);
  const Clustering full = clustering_from_text(man.read_input(o.clustering));
  std::optional<Stratification> full_strata;
  if (!o.strata.empty()) full_strata = strata_from_text(man.read_input(o.strata), full.num_clusters());
  man.seed(o.seed);
  man.config(Json{{"seed", o.seed},
                  {"m_cr", o.m_cr},
                  {"n_cr_t", o.n_cr_t},
                  {"m_cbr_t", o.m_cbr_t},
                  {"subsample", o.subsample ? Json(*o.subsample) : Json(nullptr)},
                  {"mechanism", o.mechanism},
                  {"stratified", full_strata.has_value()}});
  const CrMechanism mech = o.mechanism == "bernoulli" ? CrMechanism::bernoulli : CrMechanism::complete;
  const bool custom = o.m_cr != 0 || o.n_cr_t != 0 || o.m_cbr_t != 0;

  // Optional cluster subsample; everything below runs on local ids.
  std::vector<ClusterId> kept(full.num_clusters());
  for (ClusterId c = 0; c < kept.size(); ++c) kept[c] = c;
  if (o.subsample) kept = subsample_clusters(full, *o.subsample, substream(o.seed, Stream::subsample));
  const Clustering::Restriction r = full.restrict_to(kept);
  const Clustering& c = r.clustering;
  c.cluster_size();  // analysis requires equal cluster sizes

  Bits w, z;
  Json counts_json;
  if (full_strata) {
    const Stratification strat = restrict_strata(*full_strata, kept);
    std::vector<DesignCounts> per;
    if (custom) {
      for (std::size_t s = 0; s < strat.num_strata; ++s) {
        per.push_back(DesignCounts::from_split(c.restrict_to(strat.members[s]).clustering, o.m_cr, o.n_cr_t,
                                               o.m_cbr_t));
      }
    }
    const StratifiedAssignment a = stratified_hierarchical_assign(c, strat, per, o.seed, mech);
    w = a.w;
    z = a.z;
    counts_json = Json::array();
    for (const auto& sa : a.strata) {
      std::vector<ClusterId> original;
      for (ClusterId local : sa.restriction.clusters) original.push_back(r.clusters[local]);
      counts_json.push_back(
          Json{{"stratum", sa.stratum}, {"clusters", original}, {"counts", io::to_json(sa.assignment.counts)}});
    }
  } else {
    const DesignCounts d = custom ? DesignCounts::from_split(c, o.m_cr, o.n_cr_t, o.m_cbr_t) : DesignCounts::symmetric(c);
    const HierarchicalAssignment a = hierarchical_assign(c, d, o.seed, mech);
    w = a.w;
    z = a.z;
    counts_json = io::to_json(a.counts);
  }

  // Rows in original unit order.
  std::vector<std::size_t> order(r.units.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r.units[a] < r.units[b]; });
  std::ostringstream csv;
  csv << "unit_id,arm,treatment\n";
  for (std::size_t k : order) csv << r.units[k] << ',' << (w[k] ? "cr" : "cbr") << ',' << int{z[k]} << '\n';
  io::write_file(o.out, csv.str());
  man.artifact(o.out);
  if (!o.counts.empty()) man.artifact(o.counts);

  Json report{{"stratified", full_strata.has_value()}, {"mechanism", o.mechanism}, {"counts", counts_json}};
  if (o.subsample) report["subsampled_clusters"] = kept;
  report["manifest"] = man.json();
  emit(o.counts, dump(report));
  return kExitOk;
}

// ----------------------------------------------------------------- analyze

struct AnalyzeOptions {
  std::string clustering, assignment, outcomes, strata;
  double alpha = 0.05;
  std::string rule = "chebyshev";
  std::string out;
};

int cmd_analyze(const AnalyzeOptions& o, const Globals& g) {
  Manifest man("analyze", g);
  const Clustering full = clustering_from_text(man.read_input(o.clustering));
  io::AssignmentRows rows;
  {
    std::istringstream in(man.read_input(o.assignment));
    rows = io::read_assignment_csv(in);
  }
  const std::string outcome_text = man.read_input(o.outcomes);
  std::optional<Stratification> full_strata;
  if (!o.strata.empty()) full_strata = strata_from_text(man.read_input(o.strata), full.num_clusters());
  man.config(Json{{"alpha", o.alpha}, {"rule", o.rule}, {"stratified", full_strata.has_value()}});

  // Clusters touched by the assignment must be covered completely.
  std::vector<std::uint8_t> listed(full.num_units(), 0);
  for (UnitId u : rows.units) {
    if (u >= full.num_units()) throw ValidationError("assignment lists unit " + std::to_string(u) + " outside the clustering");
    listed[u] = 1;
  }
  std::vector<ClusterId> kept;
  for (ClusterId c = 0; c < full.num_clusters(); ++c) {
    const auto members = full.members(c);
    const std::size_t covered =
        static_cast<std::size_t>(std::count_if(members.begin(), members.end(), [&](UnitId u) { return listed[u] != 0; }));
    if (covered == members.size()) {
      kept.push_back(c);
    } else if (covered > 0) {
      throw ValidationError("assignment covers cluster " + std::to_string(c) + " only partially");
    }
  }
  const Clustering::Restriction r = full.restrict_to(kept);
  std::vector<std::size_t> row_of(full.num_units(), 0);
  for (std::size_t k = 0; k < rows.units.size(); ++k) row_of[rows.units[k]] = k;
  Bits w(r.units.size()), z(r.units.size());
  for (std::size_t k = 0; k < r.units.size(); ++k) {
    w[k] = rows.w[row_of[r.units[k]]];
    z[k] = rows.z[row_of[r.units[k]]];
  }

  // Outcomes are keyed by original unit id; every assigned unit needs one.
  std::vector<double> y_full;
  {
    std::istringstream in(outcome_text);
    y_full = io::read_outcomes_csv(in, full.num_units(), rows.units);
  }
  std::vector<double> y(r.units.size());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = y_full[r.units[k]];

  const DecisionRule rule = o.rule == "gaussian" ? DecisionRule::gaussian : DecisionRule::chebyshev;
  AnalysisReport report;
  if (full_strata) {
    const Stratification strat = restrict_strata(*full_strata, kept);
    const auto a = StratifiedAssignment::from_units(r.clustering, strat, w, z);
    report = analyze_stratified(r.clustering, a, y, o.alpha, rule);
  } else {
    const auto a = HierarchicalAssignment::from_units(r.clustering, w, z);
    report = analyze(r.clustering, a, y, o.alpha, rule);
  }
  Json j = io::to_json(report);
  if (!o.out.empty()) man.artifact(o.out);
  j["manifest"] = man.json();
  emit(o.out, dump(j));
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string config, study;
  std::optional<std::size_t> replications;
  std::string out_json, out_csv;
};

int cmd_simulate(const SimulateOptions& o, const Globals& g) {
  Manifest man("simulate", g);
  Json cfg_json = parse_json_text(man.read_input(o.config), o.config);
  if (!o.study.empty()) cfg_json["study"] = o.study;
  if (o.replications) cfg_json["replications"] = *o.replications;
  const SimConfig cfg = io::sim_config_from_json(cfg_json);
  man.seed(cfg.seed);
  man.config(io::to_json(cfg));

  const SimReport rep = run_study(cfg);
  for (const auto& row : rep.rows) {
    std::cerr << "[simulate] " << row.setting << " gamma=" << row.gamma << " " << row.wall_seconds << "s\n";
  }
  if (!o.out_csv.empty()) {
    std::ostringstream csv;
    io::write_sim_csv(csv, rep, g.stamp);
    io::write_file(o.out_csv, csv.str());
    man.artifact(o.out_csv);
  }
  if (!o.out_json.empty()) man.artifact(o.out_json);
  Json j = io::to_json(rep, g.stamp);
  j["config"] = io::to_json(cfg);
  j["manifest"] = man.json();
  emit(o.out_json, dump(j));
  for (const auto& c : rep.checks) {
    if (!c.passed) std::cerr << "FAIL " << c.name << ": " << c.detail << "\n";
  }
  return rep.all_passed() ? kExitOk : kExitProperty;
}

// ------------------------------------------------------------------ oracle

struct OracleOptions {
  std::string check = "all";
  std::optional<std::uint64_t> seed;
  std::size_t tables = 100;
  double beta = 1.0, gamma = 0.5;
  std::string edges, clustering;
  std::string out;
};

struct CheckResult {
  std::string name;
  bool passed = true;
  Json values = Json::object();
};

PotentialTable random_table(const Clustering& c, std::uint64_t seed, TableKind kind) {
  TableSpec spec;
  spec.kind = kind;
  spec.tau = 1.0;
  spec.unit_sd = 1.0;
  spec.cluster_sd = 0.5;
  spec.effect_sd = 1.0;
  return make_table(spec, c, seed);
}

SmallDesign design_from(const OracleOptions& o, Manifest& man) {
  if (o.edges.empty() != o.clustering.empty()) throw ValidationError("--edges and --clustering go together");
  if (o.edges.empty()) return small_design_8();
  SmallDesign d;
  d.graph = graph_from_text(man.read_input(o.edges));
  d.clustering = clustering_from_text(man.read_input(o.clustering));
  require_same_units(d.graph, d.clustering);
  d.counts = DesignCounts::symmetric(d.clustering);
  return d;
}

std::uint64_t need_seed(const OracleOptions& o) {
  if (!o.seed) throw ValidationError("--seed is required for checks that draw random tables");
  return *o.seed;
}

CheckResult check_unbiased(const SmallDesign& d, std::uint64_t seed) {
  CheckResult r{"unbiased"};
  const PotentialTable t = random_table(d.clustering, substream(seed, Stream::table), TableKind::heterogeneous);
  const double tau = total_treatment_effect(t);
  EnumerationSpec s;
  s.clustering = d.clustering;
  s.counts = d.counts;
  s.table = t;
  s.statistic = Statistic::tau_cr;
  const Moments cr = enumerate_moments(s);
  s.statistic = Statistic::tau_cbr;
  const Moments cbr = enumerate_moments(s);
  s.statistic = Statistic::estimate;
  const Moments delta = enumerate_moments(s);
  r.values = Json{{"tau", tau},
                  {"outcomes", delta.outcomes},
                  {"outcome_count_closed_form", outcome_count(s)},
                  {"mean_tau_cr", cr.mean},
                  {"mean_tau_cbr", cbr.mean},
                  {"mean_delta", delta.mean}};
  r.passed = std::abs(cr.mean - tau) <= 1e-12 && std::abs(cbr.mean - tau) <= 1e-12 &&
             std::abs(delta.mean) <= 1e-12 && delta.outcomes == outcome_count(s);
  return r;
}

CheckResult check_lemma3(const SmallDesign& d, double beta, double gamma) {
  CheckResult r{"lemma3"};
  const LinearInterferenceModel model{0.0, beta, gamma, 0.0};
  const double n = static_cast<double>(d.clustering.num_units());
  const double m = static_cast<double>(d.clustering.num_clusters());
  const double rho = clustering_metrics(d.graph, d.clustering).rho_c;
  EnumerationSpec s;
  s.clustering = d.clustering;
  s.model = model;
  s.graph = d.graph;
  s.design = DesignKind::complete;
  s.n_treated = d.clustering.num_units() / 2;
  const Moments cr = enumerate_moments(s);
  s.design = DesignKind::cluster;
  s.n_treated = d.clustering.num_clusters() / 2;
  const Moments cbr = enumerate_moments(s);
  s.design = DesignKind::hierarchical;
  s.counts = d.counts;
  const Moments delta = enumerate_moments(s);
  const double cr_closed = expected_tau_complete_linear(model, d.graph);
  const double cbr_closed = expected_tau_cluster_linear(model, d.graph, d.clustering);
  const double delta_closed = expected_delta_linear(model, d.graph, d.clustering, d.counts).delta;
  r.values = Json{{"rho_c", rho},
                  {"mean_tau_cr", cr.mean},
                  {"closed_form_tau_cr", cr_closed},
                  {"beta_minus_gamma_over_n_minus_1", beta - gamma / (n - 1.0)},
                  {"mean_tau_cbr", cbr.mean},
                  {"closed_form_tau_cbr", cbr_closed},
                  {"beta_plus_gamma_rho_form", beta + gamma * (rho * m - 1.0) / (m - 1.0)},
                  {"mean_delta", delta.mean},
                  {"closed_form_delta", delta_closed}};
  r.passed = std::abs(cr.mean - cr_closed) <= 1e-12 && std::abs(cbr.mean - cbr_closed) <= 1e-12 &&
             std::abs(delta.mean - delta_closed) <= 1e-12;
  return r;
}

CheckResult check_fisher(const SmallDesign& d, std::uint64_t seed) {
  CheckResult r{"fisher"};
  PotentialTable t = random_table(d.clustering, substream(seed, Stream::table, 1), TableKind::constant_effect);
  t.y1 = t.y0;
  EnumerationSpec s;
  s.clustering = d.clustering;
  s.counts = d.counts;
  s.table = t;
  const Moments m = enumerate_moments(s);
  const double closed = fisher_null_variance(t.y0, d.clustering, d.counts);
  r.values = Json{{"enumerated_variance", m.variance}, {"fisher_null_variance", closed}};
  r.passed = std::abs(m.variance - closed) <= 1e-10;
  return r;
}

CheckResult check_bound(std::uint64_t seed, std::size_t tables) {
  CheckResult r{"bound"};
  const SmallDesign d = small_design_16();
  EnumerationSpec s;
  s.clustering = d.clustering;
  s.counts = d.counts;
  std::size_t violations = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < tables; ++k) {
    s.table = random_table(d.clustering, substream(seed, Stream::table, 100 + k), TableKind::heterogeneous);
    s.statistic = Statistic::estimate;
    const double var = enumerate_moments(s).variance;
    s.statistic = Statistic::variance_bound;
    const double bound = enumerate_moments(s).mean;
    worst = std::min(worst, bound - var);
    violations += bound < var - 1e-10;
  }
  s.table = random_table(d.clustering, substream(seed, Stream::table, 99), TableKind::constant_effect);
  s.statistic = Statistic::estimate;
  const double var = enumerate_moments(s).variance;
  s.statistic = Statistic::variance_bound;
  const double bound = enumerate_moments(s).mean;
  r.values = Json{{"tables", tables},
                  {"violations", violations},
                  {"min_expected_bound_minus_variance", worst},
                  {"constant_effect_variance", var},
                  {"constant_effect_expected_bound", bound}};
  r.passed = violations == 0 && std::abs(bound - var) <= 1e-10;
  return r;
}

CheckResult check_bernoulli(std::uint64_t seed, std::size_t tables) {
  CheckResult r{"bernoulli"};
  const Clustering c = Clustering::contiguous_blocks(12, 1);
  std::size_t violations = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < tables; ++k) {
    const PotentialTable t = random_table(c, substream(seed, Stream::table, 1000 + k), TableKind::heterogeneous);
    const BernoulliGap gap = bernoulli_vs_cr_variance_gap(t, 6);
    violations += !gap.within_bound;
    worst_slack = std::min(worst_slack, gap.bound - std::abs(gap.gap));
  }
  r.values = Json{{"tables", tables}, {"violations", violations}, {"min_bound_minus_abs_gap", worst_slack}};
  r.passed = violations == 0;
  return r;
}

CheckResult check_negmoment() {
  CheckResult r{"negmoment"};
  const double e = binomial_negative_moment(12, 0.5);
  const double hyp = 2.0 * std::pow(0.5, 12);
  r.values = Json{{"expected_inverse", e},
                  {"deviation_from_one_sixth", e - 1.0 / 6.0},
                  {"allowed", 5.0 / 36.0},
                  {"degenerate_mass", hyp},
                  {"degenerate_mass_limit", 1.0 / 144.0}};
  r.passed = std::abs(e - 1.0 / 6.0) <= 5.0 / 36.0 && hyp <= 1.0 / 144.0;
  return r;
}

int cmd_oracle(const OracleOptions& o, const Globals& g) {
  Manifest man("oracle", g);
  const SmallDesign d = design_from(o, man);
  if (o.seed) man.seed(*o.seed);
  man.config(Json{{"check", o.check},
                  {"seed", o.seed ? Json(*o.seed) : Json(nullptr)},
                  {"tables", o.tables},
                  {"beta", o.beta},
                  {"gamma", o.gamma}});
  const bool all = o.check == "all";
  std::vector<CheckResult> results;
  if (all || o.check == "unbiased") results.push_back(check_unbiased(d, need_seed(o)));
  if (all || o.check == "lemma3") results.push_back(check_lemma3(d, o.beta, o.gamma));
  if (all || o.check == "fisher") results.push_back(check_fisher(d, need_seed(o)));
  if (all || o.check == "bound") results.push_back(check_bound(need_seed(o), o.tables));
  if (all || o.check == "bernoulli") results.push_back(check_bernoulli(need_seed(o), o.tables));
  if (all || o.check == "negmoment") results.push_back(check_negmoment());

  bool ok = true;
  Json checks = Json::array();
  for (const auto& r : results) {
    ok = ok && r.passed;
    std::cerr << (r.passed ? "PASS " : "FAIL ") << r.name << " " << r.values.dump() << "\n";
    checks.push_back(Json{{"check", r.name}, {"passed", r.passed}, {"values", r.values}});
  }
  if (!o.out.empty()) man.artifact(o.out);
  Json j{{"all_passed", ok}, {"checks", std::move(checks)}};
  j["manifest"] = man.json();
  emit(o.out, dump(j));
  return ok ? kExitOk : kExitProperty;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical cluster-randomized designs for detecting network interference"};
  app.require_subcommand(1);
  Globals globals;
  app.add_option("--threads", globals.threads, "OpenMP threads (default: all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag("--stamp", globals.stamp, "Add a UTC timestamp and wall-clock columns to outputs");

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Sample a stochastic block model graph");
  generate->add_option("--sbm", gen.sbm_json, "SBM spec JSON")->check(CLI::ExistingFile);
  generate->add_option("--blocks", gen.blocks, "Number of blocks")->check(CLI::PositiveNumber);
  generate->add_option("--block-size", gen.block_size, "Units per block")->check(CLI::PositiveNumber);
  generate->add_option("--p-intra", gen.p_intra, "Within-block edge probability")->check(CLI::Range(0.0, 1.0));
  generate->add_option("--p-inter", gen.p_inter, "Between-block edge probability")->check(CLI::Range(0.0, 1.0));
  generate->add_option("--target-rho", gen.target_rho, "Expected within-block neighbor fraction")
      ->check(CLI::Range(0.0, 1.0));
  generate->add_option("--mean-degree", gen.mean_degree, "Expected degree with --target-rho")
      ->check(CLI::PositiveNumber);
  generate->add_option("--seed", gen.seed, "Master seed");
  generate->add_option("--out-edges", gen.out_edges, "Edge list output")->required();
  generate->add_option("--out-clustering", gen.out_clustering, "Block clustering CSV output");
  generate->add_option("--metrics", gen.metrics, "Summary JSON output (default stdout)");

  ClusterOptions clu;
  auto* cluster = app.add_subcommand("cluster", "Balanced clustering by restreaming LDG");
  cluster->add_option("--edges", clu.edges, "Edge list")->required()->check(CLI::ExistingFile);
  cluster->add_option("--clusters", clu.clusters, "Number of clusters M")->required()->check(CLI::PositiveNumber);
  cluster->add_option("--leniency", clu.leniency, "Allowed fractional overshoot of N/M")
      ->check(CLI::NonNegativeNumber);
  cluster->add_option("--iterations", clu.iterations, "Streaming passes")->check(CLI::PositiveNumber);
  cluster->add_option("--seed", clu.seed, "Master seed")->required();
  cluster->add_flag("--rebalance", clu.rebalance, "Equalize cluster sizes after streaming");
  cluster->add_option("--out", clu.out, "Clustering CSV output")->required();
  cluster->add_option("--metrics", clu.metrics, "Metrics JSON output (default stdout)");

  StratifyOptions str;
  auto* stratify = app.add_subcommand("stratify", "Group clusters into strata");
  stratify->add_option("--edges", str.edges, "Edge list")->required()->check(CLI::ExistingFile);
  stratify->add_option("--clustering", str.clustering, "Clustering CSV")->required()->check(CLI::ExistingFile);
  stratify->add_option("--covariates", str.covariates, "Per-cluster covariate CSV")->check(CLI::ExistingFile);
  stratify->add_option("--strata", str.strata, "Number of strata L")->required()->check(CLI::PositiveNumber);
  stratify->add_option("--seed", str.seed, "Tie-break seed")->required();
  stratify->add_option("--out", str.out, "Strata CSV output")->required();
  stratify->add_option("--report", str.report, "Summary JSON output (default stdout)");

  AssignOptions asg;
  auto* assign = app.add_subcommand("assign", "Draw a hierarchical assignment");
  assign->add_option("--clustering", asg.clustering, "Clustering CSV")->required()->check(CLI::ExistingFile);
  assign->add_option("--strata", asg.strata, "Strata CSV")->check(CLI::ExistingFile);
  assign->add_option("--seed", asg.seed, "Master seed")->required();
  assign->add_option("--m-cr", asg.m_cr, "Clusters in arm cr (default M/2)");
  assign->add_option("--n-cr-t", asg.n_cr_t, "Treated units in arm cr (default n_cr/2)");
  assign->add_option("--m-cbr-t", asg.m_cbr_t, "Treated clusters in arm cbr (default m_cbr/2)");
  assign->add_option("--subsample", asg.subsample, "Fraction of clusters kept before assignment")
      ->check(CLI::Range(0.0, 1.0));
  assign->add_option("--mechanism", asg.mechanism, "Arm-cr mechanism")
      ->check(CLI::IsMember({"complete", "bernoulli"}));
  assign->add_option("--out", asg.out, "Assignment CSV output")->required();
  assign->add_option("--counts", asg.counts, "Counts JSON output (default stdout)");

  AnalyzeOptions ana;
  auto* analyze_cmd = app.add_subcommand("analyze", "Test for interference");
  analyze_cmd->add_option("--clustering", ana.clustering, "Clustering CSV")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--assignment", ana.assignment, "Assignment CSV")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--outcomes", ana.outcomes, "Outcomes CSV")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--strata", ana.strata, "Strata CSV for the stratified estimator")->check(CLI::ExistingFile);
  analyze_cmd->add_option("--alpha", ana.alpha, "Test level")->check(CLI::Range(0.0, 1.0));
  analyze_cmd->add_option("--rule", ana.rule, "Decision rule")->check(CLI::IsMember({"chebyshev", "gaussian"}));
  analyze_cmd->add_option("--out", ana.out, "Report JSON output (default stdout)");

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo study");
  simulate->add_option("--config", sim.config, "Study config JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--study", sim.study, "Override the study type")
      ->check(CLI::IsMember({"ratio", "power", "type1"}));
  simulate->add_option("--replications", sim.replications, "Override the replication count")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--out-json", sim.out_json, "Report JSON output (default stdout)");
  simulate->add_option("--out-csv", sim.out_csv, "Report CSV output");

  OracleOptions orc;
  auto* oracle = app.add_subcommand("oracle", "Exact enumeration checks on small designs");
  oracle->add_option("--check", orc.check, "Check to run")
      ->check(CLI::IsMember({"all", "unbiased", "lemma3", "fisher", "bound", "bernoulli", "negmoment"}));
  oracle->add_option("--seed", orc.seed, "Seed for random tables");
  oracle->add_option("--tables", orc.tables, "Random tables per property check")->check(CLI::PositiveNumber);
  oracle->add_option("--beta", orc.beta, "Direct effect of the linear model");
  oracle->add_option("--gamma", orc.gamma, "Interference effect of the linear model");
  oracle->add_option("--edges", orc.edges, "Edge list of the design (default: bundled 8-unit design)")
      ->check(CLI::ExistingFile);
  oracle->add_option("--clustering", orc.clustering, "Clustering CSV of the design")->check(CLI::ExistingFile);
  oracle->add_option("--out", orc.out, "Results JSON output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  if (globals.threads > 0) omp_set_num_threads(globals.threads);
  try {
    if (*generate) return cmd_generate(gen, globals);
    if (*cluster) return cmd_cluster(clu, globals);
    if (*stratify) return cmd_stratify(str, globals);
    if (*assign) return cmd_assign(asg, globals);
    if (*analyze_cmd) return cmd_analyze(ana, globals);
    if (*simulate) return cmd_simulate(sim, globals);
    if (*oracle) return cmd_oracle(orc, globals);
  } catch (const interfere::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
