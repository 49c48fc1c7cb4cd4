// Serial reference kernel vs the OpenMP replication loop on the two canned
// studies. Thread count is the benchmark argument for the parallel kernel.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "bsnlr/mc.hpp"

namespace {

using namespace bsnlr;

mc::SimConfig config(const char* which, int reps) {
  auto c = mc::preset(which, reps, 1).at(0);
  c.n_grid.resize(1);
  return c;
}

void serial(benchmark::State& state, const char* which) {
  const auto c = config(which, 256);
  const auto x = mc::design(c, 0);
  for (auto _ : state) benchmark::DoNotOptimize(mc::run_block_serial(c, 0, x));
  state.SetItemsProcessed(state.iterations() * c.reps);
}

void parallel(benchmark::State& state, const char* which) {
  const auto c = config(which, 256);
  const auto x = mc::design(c, 0);
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mc::run_block(c, 0, x));
  state.SetItemsProcessed(state.iterations() * c.reps);
}

}  // namespace

BENCHMARK_CAPTURE(serial, gallant, "table1")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(parallel, gallant, "table1")->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(serial, michaelis_menten, "table3")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(parallel, michaelis_menten, "table3")->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
