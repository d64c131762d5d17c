#include <benchmark/benchmark.h>

#include "interfere/estimate.hpp"
#include "interfere/oracle.hpp"
#include "interfere/outcomes.hpp"
#include "interfere/partition.hpp"
#include "interfere/rng.hpp"
#include "interfere/sim.hpp"

using namespace interfere;

namespace {

const SbmGraph& sbm(std::size_t blocks) {
  static SbmGraph small = generate_sbm(SbmSpec::from_target(20, 100, 0.3, 20.0, 1));
  static SbmGraph large = generate_sbm(SbmSpec::from_target(blocks, 100, 0.3, 20.0, 1));
  return blocks == 20 ? small : large;
}

Bits half_treated(std::size_t n) {
  Bits z(n);
  Engine rng = make_engine(7);
  for (auto& v : z) v = rng() & 1u;
  return z;
}

template <auto Kernel>
void metrics(benchmark::State& state) {
  const SbmGraph& g = sbm(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(g.graph, g.blocks));
}

template <auto Kernel>
void neighbor_fraction(benchmark::State& state) {
  const SbmGraph& g = sbm(static_cast<std::size_t>(state.range(0)));
  const Bits z = half_treated(g.graph.num_units());
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(g.graph, z));
}

template <auto Kernel>
void variance_terms(benchmark::State& state) {
  const SbmGraph& g = sbm(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(g.graph, g.blocks));
}

template <auto Kernel>
void enumeration(benchmark::State& state) {
  const SmallDesign d = small_design_16();
  EnumerationSpec s;
  s.clustering = d.clustering;
  s.counts = d.counts;
  s.table = make_table({TableKind::heterogeneous, 1.0, 1.0, 0.5, 1.0}, d.clustering, 3);
  s.statistic = Statistic::variance_bound;
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(s));
}

}  // namespace

BENCHMARK(metrics<static_cast<ClusteringMetrics (*)(const Graph&, const Clustering&)>(&clustering_metrics)>)
    ->Name("clustering_metrics/openmp")
    ->Arg(20)
    ->Arg(40);
BENCHMARK(metrics<&serial::clustering_metrics>)->Name("clustering_metrics/serial")->Arg(20)->Arg(40);
BENCHMARK(neighbor_fraction<static_cast<std::vector<double> (*)(const Graph&, std::span<const std::uint8_t>)>(
              &treated_neighbor_fraction)>)
    ->Name("treated_neighbor_fraction/openmp")
    ->Arg(20)
    ->Arg(40);
BENCHMARK(neighbor_fraction<&serial::treated_neighbor_fraction>)
    ->Name("treated_neighbor_fraction/serial")
    ->Arg(20)
    ->Arg(40);
BENCHMARK(variance_terms<static_cast<InterferenceVarianceTerms (*)(const Graph&, const Clustering&)>(
              &interference_variance_terms)>)
    ->Name("interference_variance_terms/openmp")
    ->Arg(20)
    ->Arg(40)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(variance_terms<&serial::interference_variance_terms>)
    ->Name("interference_variance_terms/serial")
    ->Arg(20)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(enumeration<static_cast<Moments (*)(const EnumerationSpec&)>(&enumerate_moments)>)
    ->Name("enumerate_moments/openmp")
    ->Unit(benchmark::kMillisecond);
BENCHMARK(enumeration<&serial::enumerate_moments>)->Name("enumerate_moments/serial")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
