#include "interfere/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <system_error>

#include "interfere/error.hpp"

namespace interfere::io {

namespace {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Data rows of a CSV with exactly `width` columns; a first row starting with
// `header0` is skipped.
std::vector<CsvRow> read_csv(std::istream& in, std::size_t width, std::string_view header0,
                             std::size_t lines_consumed = 0) {
  std::vector<CsvRow> rows;
  std::string line;
  std::size_t lineno = lines_consumed;
  bool first = lines_consumed == 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    CsvRow row{lineno, {}};
    std::stringstream ss(t);
    std::string field;
    while (std::getline(ss, field, ',')) row.fields.push_back(trim(field));
    if (!t.empty() && t.back() == ',') row.fields.emplace_back();
    if (first) {
      first = false;
      if (!row.fields.empty() && row.fields.front() == header0) continue;
    }
    if (row.fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " comma-separated fields, got " +
                           std::to_string(row.fields.size()),
                       lineno);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::uint64_t parse_id(const std::string& s, std::size_t line) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    if (!s.empty() && s.front() == '-') throw ValidationError("line " + std::to_string(line) + ": negative id " + s);
    throw ParseError("invalid non-negative integer '" + s + "'", line);
  }
  if (v > 0xffffffffULL) throw ValidationError("line " + std::to_string(line) + ": id out of range " + s);
  return v;
}

double parse_real(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("invalid number '" + s + "'", line);
  if (!std::isfinite(v)) throw ValidationError("line " + std::to_string(line) + ": non-finite value");
  return v;
}

// Places value rows into slots 0..n-1, rejecting duplicates and gaps.
template <class T>
std::vector<T> dense_by_id(const std::vector<std::pair<std::uint64_t, T>>& items, const char* what) {
  std::uint64_t max_id = 0;
  for (const auto& [id, v] : items) max_id = std::max(max_id, id);
  const std::size_t n = items.empty() ? 0 : static_cast<std::size_t>(max_id) + 1;
  std::vector<T> out(n);
  std::vector<std::uint8_t> seen(n, 0);
  for (const auto& [id, v] : items) {
    if (seen[id]) throw ValidationError(std::string("duplicate ") + what + " id " + std::to_string(id));
    seen[id] = 1;
    out[id] = v;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) throw ValidationError(std::string("missing ") + what + " id " + std::to_string(i));
  }
  if (n == 0) throw ValidationError(std::string("no ") + what + " rows");
  return out;
}

std::string rule_name(DecisionRule r) { return r == DecisionRule::chebyshev ? "chebyshev" : "gaussian"; }

DecisionRule parse_rule(const std::string& s) {
  if (s == "chebyshev") return DecisionRule::chebyshev;
  if (s == "gaussian") return DecisionRule::gaussian;
  throw ValidationError("unknown decision rule '" + s + "'");
}

std::string table_kind_name(TableKind k) {
  switch (k) {
    case TableKind::constant_effect: return "constant_effect";
    case TableKind::heterogeneous: return "heterogeneous";
    case TableKind::constant_y: return "constant_y";
  }
  return "";
}

TableKind parse_table_kind(const std::string& s) {
  if (s == "constant_effect") return TableKind::constant_effect;
  if (s == "heterogeneous") return TableKind::heterogeneous;
  if (s == "constant_y") return TableKind::constant_y;
  throw ValidationError("unknown table kind '" + s + "'");
}

void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> known, const char* where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError(std::string("unknown key '") + key + "' in " + where);
    }
  }
}

template <class T>
void get_if(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("key '") + key + "' has the wrong type");
  }
}

Json nullable(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_clustering_csv(std::ostream& out, const Clustering& clustering) {
  out << "unit_id,cluster_id\n";
  for (std::size_t i = 0; i < clustering.num_units(); ++i) {
    out << i << ',' << clustering.cluster_of(static_cast<UnitId>(i)) << '\n';
  }
}

Clustering read_clustering_csv(std::istream& in) {
  std::vector<std::pair<std::uint64_t, ClusterId>> items;
  ClusterId max_c = 0;
  for (const auto& row : read_csv(in, 2, "unit_id")) {
    const auto c = static_cast<ClusterId>(parse_id(row.fields[1], row.line));
    max_c = std::max(max_c, c);
    items.emplace_back(parse_id(row.fields[0], row.line), c);
  }
  auto assignment = dense_by_id(items, "unit");
  return Clustering(std::move(assignment), static_cast<std::size_t>(max_c) + 1);
}

void write_strata_csv(std::ostream& out, const Stratification& strata) {
  out << "cluster_id,stratum_id\n";
  for (std::size_t c = 0; c < strata.stratum_of.size(); ++c) out << c << ',' << strata.stratum_of[c] << '\n';
}

Stratification read_strata_csv(std::istream& in, std::size_t num_clusters) {
  std::vector<std::pair<std::uint64_t, std::uint32_t>> items;
  std::uint32_t max_s = 0;
  for (const auto& row : read_csv(in, 2, "cluster_id")) {
    const auto s = static_cast<std::uint32_t>(parse_id(row.fields[1], row.line));
    max_s = std::max(max_s, s);
    items.emplace_back(parse_id(row.fields[0], row.line), s);
  }
  auto map = dense_by_id(items, "cluster");
  if (map.size() != num_clusters) {
    throw ValidationError("stratification covers " + std::to_string(map.size()) + " clusters, clustering has " +
                          std::to_string(num_clusters));
  }
  return Stratification::from_map(std::move(map), static_cast<std::size_t>(max_s) + 1);
}

void write_assignment_csv(std::ostream& out, std::span<const std::uint8_t> w, std::span<const std::uint8_t> z) {
  if (w.size() != z.size()) throw ValidationError("arm and treatment vectors differ in length");
  out << "unit_id,arm,treatment\n";
  for (std::size_t i = 0; i < w.size(); ++i) out << i << ',' << (w[i] ? "cr" : "cbr") << ',' << int{z[i]} << '\n';
}

AssignmentRows read_assignment_csv(std::istream& in) {
  std::vector<std::pair<std::uint64_t, std::pair<std::uint8_t, std::uint8_t>>> items;
  for (const auto& row : read_csv(in, 3, "unit_id")) {
    std::uint8_t arm = 0;
    if (row.fields[1] == "cr") {
      arm = 1;
    } else if (row.fields[1] != "cbr") {
      throw ParseError("arm must be 'cr' or 'cbr', got '" + row.fields[1] + "'", row.line);
    }
    const auto t = parse_id(row.fields[2], row.line);
    if (t > 1) throw ParseError("treatment must be 0 or 1", row.line);
    items.push_back({parse_id(row.fields[0], row.line), {arm, static_cast<std::uint8_t>(t)}});
  }
  if (items.empty()) throw ValidationError("assignment has no rows");
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  AssignmentRows a;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (k > 0 && items[k].first == items[k - 1].first) {
      throw ValidationError("duplicate unit id " + std::to_string(items[k].first) + " in assignment");
    }
    a.units.push_back(static_cast<UnitId>(items[k].first));
    a.w.push_back(items[k].second.first);
    a.z.push_back(items[k].second.second);
  }
  return a;
}

std::vector<std::vector<double>> read_cluster_covariates_csv(std::istream& in, std::size_t num_clusters) {
  std::string header;
  std::size_t lineno = 0;
  while (std::getline(in, header)) {
    ++lineno;
    const std::string t = trim(header);
    if (!t.empty() && t.front() != '#') {
      header = t;
      break;
    }
    header.clear();
  }
  if (header.rfind("cluster_id", 0) != 0) throw ParseError("covariate CSV needs a 'cluster_id,...' header", lineno);
  const auto width = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
  if (width < 2) throw ParseError("covariate CSV needs at least one covariate column", lineno);
  std::vector<std::pair<std::uint64_t, std::vector<double>>> items;
  for (const auto& row : read_csv(in, width, "cluster_id", lineno)) {
    std::vector<double> values;
    for (std::size_t k = 1; k < width; ++k) values.push_back(parse_real(row.fields[k], row.line));
    items.emplace_back(parse_id(row.fields[0], row.line), std::move(values));
  }
  auto dense = dense_by_id(items, "cluster");
  if (dense.size() != num_clusters) {
    throw ValidationError("covariates cover " + std::to_string(dense.size()) + " clusters, expected " +
                          std::to_string(num_clusters));
  }
  return dense;
}

void write_outcomes_csv(std::ostream& out, std::span<const double> y) {
  out << "unit_id,y\n";
  for (std::size_t i = 0; i < y.size(); ++i) out << i << ',' << format_double(y[i]) << '\n';
}

std::vector<double> read_outcomes_csv(std::istream& in, std::size_t num_units, std::span<const UnitId> required) {
  std::vector<double> y(num_units, 0.0);
  std::vector<std::uint8_t> seen(num_units, 0);
  for (const auto& row : read_csv(in, 2, "unit_id")) {
    const auto id = parse_id(row.fields[0], row.line);
    if (id >= num_units) {
      throw ValidationError("line " + std::to_string(row.line) + ": unit " + std::to_string(id) +
                            " is not in the assignment");
    }
    if (seen[id]) throw ValidationError("duplicate outcome for unit " + std::to_string(id));
    seen[id] = 1;
    y[id] = parse_real(row.fields[1], row.line);
  }
  std::string missing;
  std::size_t count = 0;
  const auto note = [&](std::size_t i) {
    if (seen[i]) return;
    if (++count <= 20) missing += (missing.empty() ? "" : ",") + std::to_string(i);
  };
  if (required.empty()) {
    for (std::size_t i = 0; i < num_units; ++i) note(i);
  } else {
    for (UnitId u : required) {
      if (u >= num_units) throw ValidationError("required unit " + std::to_string(u) + " is out of range");
      note(u);
    }
  }
  if (count > 0) {
    throw ValidationError("missing outcomes for " + std::to_string(count) + " assigned units: " + missing +
                          (count > 20 ? ",..." : ""));
  }
  return y;
}

void write_potential_csv(std::ostream& out, const PotentialTable& table) {
  out << "unit_id,y1,y0\n";
  for (std::size_t i = 0; i < table.num_units(); ++i) {
    out << i << ',' << format_double(table.y1[i]) << ',' << format_double(table.y0[i]) << '\n';
  }
}

PotentialTable read_potential_csv(std::istream& in) {
  std::vector<std::pair<std::uint64_t, std::pair<double, double>>> items;
  for (const auto& row : read_csv(in, 3, "unit_id")) {
    items.push_back({parse_id(row.fields[0], row.line),
                     {parse_real(row.fields[1], row.line), parse_real(row.fields[2], row.line)}});
  }
  PotentialTable t;
  for (const auto& [y1, y0] : dense_by_id(items, "unit")) {
    t.y1.push_back(y1);
    t.y0.push_back(y0);
  }
  return t;
}

void write_edge_list(std::ostream& out, const Graph& graph) {
  out << "N=" << graph.num_units() << '\n';
  for (const auto& [a, b] : graph.edges()) out << a << ' ' << b << '\n';
}

Json to_json(const ClusteringMetrics& m) {
  return Json{{"rho_c", m.rho_c},
              {"internal_edge_fraction", m.internal_edge_fraction},
              {"balance_ratio", m.balance_ratio},
              {"isolated_units", m.isolated_units},
              {"internal_edges", m.internal_edges},
              {"total_edges", m.total_edges}};
}

Json to_json(const DesignCounts& c) {
  return Json{{"n_cr", c.n_cr},     {"n_cbr", c.n_cbr},   {"m_cr", c.m_cr},       {"m_cbr", c.m_cbr},
              {"n_cr_t", c.n_cr_t}, {"n_cr_c", c.n_cr_c}, {"m_cbr_t", c.m_cbr_t}, {"m_cbr_c", c.m_cbr_c}};
}

DesignCounts design_counts_from_json(const Json& j) {
  reject_unknown_keys(j, {"n_cr", "n_cbr", "m_cr", "m_cbr", "n_cr_t", "n_cr_c", "m_cbr_t", "m_cbr_c"},
                      "design counts");
  DesignCounts c;
  get_if(j, "n_cr", c.n_cr);
  get_if(j, "n_cbr", c.n_cbr);
  get_if(j, "m_cr", c.m_cr);
  get_if(j, "m_cbr", c.m_cbr);
  get_if(j, "n_cr_t", c.n_cr_t);
  get_if(j, "n_cr_c", c.n_cr_c);
  get_if(j, "m_cbr_t", c.m_cbr_t);
  get_if(j, "m_cbr_c", c.m_cbr_c);
  return c;
}

Json to_json(const AnalysisReport& r) {
  Json j{{"tau_cr", r.tau_cr},
         {"tau_cbr", r.tau_cbr},
         {"delta", r.delta},
         {"sigma_hat_sq", r.sigma_hat_sq},
         {"t_stat", nullable(r.t_stat)},
         {"p_chebyshev", r.p_chebyshev},
         {"p_gaussian", r.p_gaussian},
         {"alpha", r.alpha},
         {"rule", rule_name(r.rule)},
         {"decision", r.decision == Decision::reject ? "reject" : "fail_to_reject"},
         {"stratified", r.stratified}};
  if (r.stratified) {
    Json strata = Json::array();
    for (std::size_t s = 0; s < r.strata.size(); ++s) {
      strata.push_back(Json{{"stratum", s},
                            {"num_clusters", r.strata[s].num_clusters},
                            {"delta", r.strata[s].delta},
                            {"sigma_hat_sq", r.strata[s].sigma_hat_sq}});
    }
    j["strata"] = std::move(strata);
  } else {
    j["counts"] = to_json(r.counts);
  }
  return j;
}

Json to_json(const SbmSpec& s) {
  return Json{{"num_blocks", s.num_blocks},
              {"block_size", s.block_size},
              {"p_intra", s.p_intra},
              {"p_inter", s.p_inter},
              {"seed", s.seed}};
}

SbmSpec sbm_spec_from_json(const Json& j) {
  reject_unknown_keys(j, {"num_blocks", "block_size", "p_intra", "p_inter", "seed"}, "SBM spec");
  for (const char* key : {"num_blocks", "block_size", "p_intra", "p_inter", "seed"}) {
    if (!j.contains(key)) throw ValidationError(std::string("SBM spec is missing '") + key + "'");
  }
  SbmSpec s;
  get_if(j, "num_blocks", s.num_blocks);
  get_if(j, "block_size", s.block_size);
  get_if(j, "p_intra", s.p_intra);
  get_if(j, "p_inter", s.p_inter);
  get_if(j, "seed", s.seed);
  s.validate();
  return s;
}

Json to_json(const Moments& m) {
  return Json{{"mean", m.mean}, {"variance", m.variance}, {"outcomes", m.outcomes}};
}

std::string study_name(StudyType s) {
  switch (s) {
    case StudyType::ratio: return "ratio";
    case StudyType::power: return "power";
    case StudyType::type1: return "type1";
  }
  return "";
}

StudyType parse_study(std::string_view s) {
  if (s == "ratio") return StudyType::ratio;
  if (s == "power") return StudyType::power;
  if (s == "type1") return StudyType::type1;
  throw ValidationError("unknown study '" + std::string(s) + "'");
}

Json to_json(const SimConfig& cfg) {
  Json settings = Json::array();
  for (const auto& s : cfg.settings) {
    Json e = Json::object();
    if (s.target_rho) e["target_rho"] = *s.target_rho;
    if (s.p_intra) e["p_intra"] = *s.p_intra;
    if (s.p_inter) e["p_inter"] = *s.p_inter;
    settings.push_back(std::move(e));
  }
  return Json{{"study", study_name(cfg.study)},
              {"seed", cfg.seed},
              {"replications", cfg.replications},
              {"alpha", cfg.alpha},
              {"rule", rule_name(cfg.rule)},
              {"m_cr", cfg.m_cr},
              {"n_cr_t", cfg.n_cr_t},
              {"m_cbr_t", cfg.m_cbr_t},
              {"num_blocks", cfg.num_blocks},
              {"block_size", cfg.block_size},
              {"mean_degree", cfg.mean_degree},
              {"settings", std::move(settings)},
              {"clustering", cfg.clustering == ClusteringSource::blocks ? "blocks" : "ldg"},
              {"leniency", cfg.leniency},
              {"ldg_iterations", cfg.ldg_iterations},
              {"model_alpha", cfg.model_alpha},
              {"beta", cfg.beta},
              {"gamma_grid", cfg.gamma_grid},
              {"noise_sd", cfg.noise_sd},
              {"regenerate_graph", cfg.regenerate_graph},
              {"resample_noise", cfg.resample_noise},
              {"cluster_counts", cfg.cluster_counts},
              {"units_per_cluster", cfg.units_per_cluster},
              {"table",
               Json{{"kind", table_kind_name(cfg.table.kind)},
                    {"tau", cfg.table.tau},
                    {"unit_sd", cfg.table.unit_sd},
                    {"cluster_sd", cfg.table.cluster_sd},
                    {"effect_sd", cfg.table.effect_sd}}}};
}

SimConfig sim_config_from_json(const Json& j) {
  reject_unknown_keys(j,
                      {"study", "seed", "replications", "alpha", "rule", "m_cr", "n_cr_t", "m_cbr_t", "num_blocks",
                       "block_size", "mean_degree", "settings", "clustering", "leniency", "ldg_iterations",
                       "model_alpha", "beta", "gamma_grid", "noise_sd", "regenerate_graph", "resample_noise",
                       "cluster_counts", "units_per_cluster", "table"},
                      "simulation config");
  if (!j.contains("seed")) throw ValidationError("simulation config needs an explicit 'seed'");
  SimConfig cfg;
  std::string study = "power", rule = "chebyshev", source = "blocks";
  get_if(j, "study", study);
  cfg.study = parse_study(study);
  get_if(j, "seed", cfg.seed);
  get_if(j, "replications", cfg.replications);
  get_if(j, "alpha", cfg.alpha);
  get_if(j, "rule", rule);
  cfg.rule = parse_rule(rule);
  get_if(j, "m_cr", cfg.m_cr);
  get_if(j, "n_cr_t", cfg.n_cr_t);
  get_if(j, "m_cbr_t", cfg.m_cbr_t);
  get_if(j, "num_blocks", cfg.num_blocks);
  get_if(j, "block_size", cfg.block_size);
  get_if(j, "mean_degree", cfg.mean_degree);
  if (j.contains("settings")) {
    if (!j["settings"].is_array()) throw ValidationError("'settings' must be an array");
    for (const auto& e : j["settings"]) {
      reject_unknown_keys(e, {"target_rho", "p_intra", "p_inter"}, "SBM setting");
      SbmSetting s;
      double v = 0.0;
      if (e.contains("target_rho")) {
        get_if(e, "target_rho", v);
        s.target_rho = v;
      }
      if (e.contains("p_intra")) {
        get_if(e, "p_intra", v);
        s.p_intra = v;
      }
      if (e.contains("p_inter")) {
        get_if(e, "p_inter", v);
        s.p_inter = v;
      }
      cfg.settings.push_back(s);
    }
  }
  get_if(j, "clustering", source);
  if (source == "blocks") {
    cfg.clustering = ClusteringSource::blocks;
  } else if (source == "ldg") {
    cfg.clustering = ClusteringSource::ldg;
  } else {
    throw ValidationError("clustering must be 'blocks' or 'ldg'");
  }
  get_if(j, "leniency", cfg.leniency);
  get_if(j, "ldg_iterations", cfg.ldg_iterations);
  get_if(j, "model_alpha", cfg.model_alpha);
  get_if(j, "beta", cfg.beta);
  get_if(j, "gamma_grid", cfg.gamma_grid);
  get_if(j, "noise_sd", cfg.noise_sd);
  get_if(j, "regenerate_graph", cfg.regenerate_graph);
  get_if(j, "resample_noise", cfg.resample_noise);
  get_if(j, "cluster_counts", cfg.cluster_counts);
  get_if(j, "units_per_cluster", cfg.units_per_cluster);
  if (j.contains("table")) {
    const Json& t = j["table"];
    reject_unknown_keys(t, {"kind", "tau", "unit_sd", "cluster_sd", "effect_sd"}, "table");
    std::string kind = "constant_effect";
    get_if(t, "kind", kind);
    cfg.table.kind = parse_table_kind(kind);
    get_if(t, "tau", cfg.table.tau);
    get_if(t, "unit_sd", cfg.table.unit_sd);
    get_if(t, "cluster_sd", cfg.table.cluster_sd);
    get_if(t, "effect_sd", cfg.table.effect_sd);
  }
  cfg.validate();
  return cfg;
}

Json to_json(const SimReport& r, bool timing) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json e{{"setting", row.setting},
           {"gamma", row.gamma},
           {"rho_c", row.rho_c},
           {"num_clusters", row.num_clusters},
           {"num_units", row.num_units},
           {"replications", row.replications},
           {"rejection_rate", row.rejection_rate},
           {"rejection_se", row.rejection_se},
           {"chebyshev_rate", row.chebyshev_rate},
           {"gaussian_rate", row.gaussian_rate},
           {"mean_delta", row.mean_delta},
           {"delta_se", row.delta_se},
           {"var_delta", row.var_delta},
           {"mean_sigma_hat_sq", row.mean_sigma_hat_sq}};
    if (r.study == StudyType::power) {
      e["expected_delta"] = row.expected_delta;
      e["approx_variance"] = nullable(row.approx_variance);
    }
    if (r.study == StudyType::ratio) {
      e["reference_variance"] = row.reference_variance;
      e["ratio_mean"] = row.ratio_mean;
      e["ratio_se"] = row.ratio_se;
      e["ratio_q10"] = row.ratio_q10;
      e["ratio_q90"] = row.ratio_q90;
      e["ratio_in_band"] = row.ratio_in_band;
    }
    if (timing) e["wall_seconds"] = row.wall_seconds;
    rows.push_back(std::move(e));
  }
  Json checks = Json::array();
  for (const auto& c : r.checks) checks.push_back(Json{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return Json{{"study", study_name(r.study)},
              {"seed", r.seed},
              {"all_passed", r.all_passed()},
              {"rows", std::move(rows)},
              {"checks", std::move(checks)}};
}

void write_sim_csv(std::ostream& out, const SimReport& r, bool timing) {
  out << "setting,gamma,rho_c,num_clusters,replications,rejection_rate,rejection_se,chebyshev_rate,gaussian_rate,"
         "mean_delta,delta_se,var_delta,mean_sigma_hat_sq,expected_delta,approx_variance,reference_variance,"
         "ratio_mean,ratio_q10,ratio_q90,ratio_in_band";
  if (timing) out << ",wall_seconds";
  out << '\n';
  const auto d = [](double v) { return format_double(v); };
  for (const auto& row : r.rows) {
    out << row.setting << ',' << d(row.gamma) << ',' << d(row.rho_c) << ',' << row.num_clusters << ','
        << row.replications << ',' << d(row.rejection_rate) << ',' << d(row.rejection_se) << ','
        << d(row.chebyshev_rate) << ',' << d(row.gaussian_rate) << ',' << d(row.mean_delta) << ','
        << d(row.delta_se) << ',' << d(row.var_delta) << ',' << d(row.mean_sigma_hat_sq) << ','
        << d(row.expected_delta) << ',' << (row.approx_variance ? d(*row.approx_variance) : "") << ','
        << d(row.reference_variance) << ',' << d(row.ratio_mean) << ',' << d(row.ratio_q10) << ','
        << d(row.ratio_q90) << ',' << d(row.ratio_in_band);
    if (timing) out << ',' << d(row.wall_seconds);
    out << '\n';
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ValidationError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json to_json(const RunManifest& m) {
  Json inputs = Json::array();
  for (const auto& [path, digest] : m.inputs) inputs.push_back(Json{{"path", path}, {"fnv1a", digest}});
  Json j{{"command", m.command},
         {"config_digest", m.config_digest},
         {"seed", m.seed ? Json(*m.seed) : Json(nullptr)},
         {"inputs", std::move(inputs)},
         {"artifacts", m.artifacts}};
  if (m.timestamp) j["timestamp"] = *m.timestamp;
  return j;
}

}  // namespace interfere::io
