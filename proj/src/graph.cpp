#include "interfere/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "interfere/error.hpp"
#include "interfere/rng.hpp"

namespace interfere {

Graph Graph::from_edges(std::size_t num_units, std::span<const Edge> edges) {
  if (num_units == 0) throw ValidationError("graph needs at least one unit");
  if (num_units > std::numeric_limits<UnitId>::max()) throw SizeError("too many units");
  std::vector<Edge> arcs;
  arcs.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    if (a >= num_units || b >= num_units) {
      throw ValidationError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                            ") references a unit >= " + std::to_string(num_units));
    }
    if (a == b) throw ValidationError("self-loop on unit " + std::to_string(a));
    arcs.emplace_back(a, b);
    arcs.emplace_back(b, a);
  }
  std::sort(arcs.begin(), arcs.end());
  arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());

  Graph g;
  g.offsets_.assign(num_units + 1, 0);
  for (const auto& arc : arcs) ++g.offsets_[arc.first + 1];
  for (std::size_t i = 0; i < num_units; ++i) g.offsets_[i + 1] += g.offsets_[i];
  g.adjacency_.reserve(arcs.size());
  for (const auto& arc : arcs) g.adjacency_.push_back(arc.second);
  return g;
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (UnitId i = 0; i < num_units(); ++i) {
    for (UnitId j : neighbors(i)) {
      if (i < j) out.emplace_back(i, j);
    }
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long parse_integer(std::string_view token, std::size_t line) {
  long long v = 0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("expected an integer, got '" + std::string(token) + "'", line);
  }
  return v;
}

}  // namespace

Graph parse_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  std::optional<std::size_t> declared;
  long long max_id = -1;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.starts_with("N=")) {
      const auto n = parse_integer(trim(line.substr(2)), line_no);
      if (n <= 0) throw ValidationError("line " + std::to_string(line_no) + ": N must be positive");
      declared = static_cast<std::size_t>(n);
      continue;
    }
    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
      const auto next = line.find_first_of(" \t,", pos);
      const auto tok = trim(line.substr(pos, next == std::string_view::npos ? next : next - pos));
      if (!tok.empty()) tokens.push_back(tok);
      if (next == std::string_view::npos) break;
      pos = next + 1;
    }
    if (tokens.size() != 2) {
      throw ParseError("expected two unit ids, got " + std::to_string(tokens.size()) + " fields", line_no);
    }
    const auto a = parse_integer(tokens[0], line_no);
    const auto b = parse_integer(tokens[1], line_no);
    if (a < 0 || b < 0) {
      throw ValidationError("line " + std::to_string(line_no) + ": negative unit id");
    }
    if (a == b) {
      throw ValidationError("line " + std::to_string(line_no) + ": self-loop on unit " + std::to_string(a));
    }
    if (std::max(a, b) >= static_cast<long long>(std::numeric_limits<UnitId>::max())) {
      throw SizeError("line " + std::to_string(line_no) + ": unit id too large");
    }
    max_id = std::max({max_id, a, b});
    edges.emplace_back(static_cast<UnitId>(a), static_cast<UnitId>(b));
  }
  const std::size_t inferred = static_cast<std::size_t>(max_id + 1);
  if (declared && *declared < inferred) {
    throw ValidationError("header N=" + std::to_string(*declared) + " is smaller than max id + 1 = " +
                          std::to_string(inferred));
  }
  const std::size_t n = declared.value_or(inferred);
  if (n == 0) throw ValidationError("edge list has no units; add an N=<int> header");
  return Graph::from_edges(n, edges);
}

Graph load_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open edge list " + path.string());
  return parse_edge_list(in);
}

void SbmSpec::validate() const {
  if (num_blocks == 0 || block_size == 0) throw ValidationError("SBM needs positive block count and size");
  const auto prob_ok = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  if (!prob_ok(p_intra) || !prob_ok(p_inter)) throw ValidationError("SBM probabilities must lie in [0,1]");
}

SbmSpec SbmSpec::from_target(std::size_t num_blocks, std::size_t block_size, double target_rho,
                             double mean_degree, std::uint64_t seed) {
  if (num_blocks < 2 || block_size < 2) throw ValidationError("target SBM needs >= 2 blocks of >= 2 units");
  if (!(target_rho >= 0.0 && target_rho <= 1.0)) throw ValidationError("target rho must lie in [0,1]");
  if (!(mean_degree > 0.0)) throw ValidationError("mean degree must be positive");
  const double n = static_cast<double>(num_blocks * block_size);
  const double k = static_cast<double>(block_size);
  SbmSpec s{num_blocks, block_size, target_rho * mean_degree / (k - 1.0),
            (1.0 - target_rho) * mean_degree / (n - k), seed};
  s.validate();
  return s;
}

SbmGraph generate_sbm(const SbmSpec& spec) {
  spec.validate();
  constexpr std::size_t kMaxUnits = 1u << 22;  // ~8.8e12 pairs
  if (spec.block_size > kMaxUnits || spec.num_blocks > kMaxUnits / spec.block_size) {
    throw SizeError("SBM too large for pairwise generation");
  }
  const std::size_t n = spec.num_units();
  Engine rng = make_engine(spec.seed, Stream::graph);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bi = i / spec.block_size;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = (j / spec.block_size == bi) ? spec.p_intra : spec.p_inter;
      const double u = unit(rng);
      if (p >= 1.0 || u < p) edges.emplace_back(static_cast<UnitId>(i), static_cast<UnitId>(j));
    }
  }
  return {Graph::from_edges(n, edges), Clustering::contiguous_blocks(spec.num_blocks, spec.block_size)};
}

double neighborhood_fraction_in_cluster(const Graph& graph, const Clustering& clustering, UnitId unit) {
  if (unit >= graph.num_units() || graph.num_units() != clustering.num_units()) {
    throw ValidationError("unit id out of range or clustering does not cover the graph");
  }
  const auto nbrs = graph.neighbors(unit);
  if (nbrs.empty()) return 0.0;
  const ClusterId own = clustering.cluster_of(unit);
  std::size_t inside = 0;
  for (UnitId v : nbrs) inside += clustering.cluster_of(v) == own;
  return static_cast<double>(inside) / static_cast<double>(nbrs.size());
}

}  // namespace interfere
