// Serial reference vs OpenMP kernels: CPT discretization and the report query batch.
#include <benchmark/benchmark.h>

#include "riskbn/infer.hpp"
#include "riskbn/product.hpp"

using namespace riskbn;

namespace {

BuiltModel kettle(int bins) {
  return build_scenario(load_scenario(std::string(RISKBN_SOURCE_DIR) + "/scenarios/kettle_s1.json"), bins);
}

void compile_cpts(benchmark::State& state, ExecPolicy policy) {
  auto built = kettle(static_cast<int>(state.range(0)));
  built.binning.cpt.policy = policy;
  for (auto _ : state) benchmark::DoNotOptimize(compile(built.model, built.binning));
}

void query_batch(benchmark::State& state, ExecPolicy policy) {
  const auto built = kettle(static_cast<int>(state.range(0)));
  const auto m = compile(built.model, built.binning);
  std::vector<std::string> query;
  for (const auto& [id, key] : report_moment_nodes()) query.push_back(id);
  for (const auto& id : report_distribution_nodes()) query.push_back(id);
  VeOptions options;
  options.policy = policy;
  for (auto _ : state) benchmark::DoNotOptimize(posterior(m, built.evidence, query, options));
}

}  // namespace

BENCHMARK_CAPTURE(compile_cpts, serial, ExecPolicy::Serial)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(compile_cpts, parallel, ExecPolicy::Parallel)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(query_batch, serial, ExecPolicy::Serial)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(query_batch, parallel, ExecPolicy::Parallel)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
