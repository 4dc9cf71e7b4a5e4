#include <benchmark/benchmark.h>

#include <omp.h>

#include "featgraph/graph_builder.hpp"
#include "featgraph/serial_reference.hpp"
#include "featgraph/synthetic_bench.hpp"
#include "featgraph/wl_kernel.hpp"

using namespace featgraph;

namespace {

synth::PlantedSpec bench_spec() {
  synth::PlantedSpec s;
  s.window_radius = 10;
  s.distractors = 2000;
  s.d_model = 16;
  auto fam = [](std::string name, std::string prefix, synth::Topology t) {
    synth::MotifSpec m;
    m.family = std::move(name);
    for (int i = 0; i < 30; ++i) m.pool.push_back(prefix + std::to_string(i));
    m.topology = t;
    m.features_per_family = 64;
    m.events_per_feature = 40;
    m.window_noise = 0.1;
    return m;
  };
  s.families = {fam("a", "w", synth::Topology::Clique), fam("b", "n", synth::Topology::Chain),
                fam("c", "s", synth::Topology::Star)};
  return s;
}

const synth::PlantedDump& data() {
  static const auto p = synth::gen_planted_dump(bench_spec(), 1);
  return p;
}

const std::vector<FeatureId>& all_features() {
  static const auto f = [] {
    std::vector<FeatureId> v(data().dump.n_features());
    for (FeatureId i = 0; i < v.size(); ++i) v[i] = i;
    return v;
  }();
  return f;
}

const std::vector<FeatureGraph>& graphs() {
  static const auto g = build_feature_graphs(data().dump, all_features(), GraphConfig{}).graphs;
  return g;
}

void BM_GraphsParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_feature_graphs(data().dump, all_features(), GraphConfig{}));
  state.counters["threads"] = omp_get_max_threads();
}

void BM_GraphsSerial(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(serial::build_feature_graphs(data().dump, all_features(), GraphConfig{}));
  }
}

void BM_KernelParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(kernel_matrix(graphs(), 3, 64));
  state.counters["threads"] = omp_get_max_threads();
}

void BM_KernelSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(serial::kernel_matrix(graphs(), 3, 64));
}

}  // namespace

BENCHMARK(BM_GraphsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GraphsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KernelParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KernelSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
