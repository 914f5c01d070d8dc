#include <random>

#include <benchmark/benchmark.h>

#include "openscr/fit.hpp"
#include "openscr/likelihood.hpp"
#include "openscr/parallel.hpp"
#include "testing.hpp"

namespace {

using namespace openscr;

testkit::Scenario scenario(int primaries) {
  testkit::Layout layout;
  layout.n_primaries = primaries;
  layout.delta.assign(static_cast<std::size_t>(primaries - 1), 0.5);
  auto sc = testkit::make_scenario(layout, {}, 7);
  std::mt19937_64 rng(8);
  testkit::simulate_into(sc, rng);
  return sc;
}

void BM_LogLikelihood(benchmark::State& state) {
  const auto sc = scenario(static_cast<int>(state.range(0)));
  const LogLikelihood ll(sc.data.scr, ParamMap::build(sc.spec, sc.data.frames));
  for (auto _ : state) benchmark::DoNotOptimize(ll.value(sc.theta));
}
BENCHMARK(BM_LogLikelihood)->Arg(3)->Arg(5)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_ValueAndGradient(benchmark::State& state) {
  const auto sc = scenario(static_cast<int>(state.range(0)));
  const LogLikelihood ll(sc.data.scr, ParamMap::build(sc.spec, sc.data.frames));
  Vector g;
  for (auto _ : state) benchmark::DoNotOptimize(ll.value_and_gradient(sc.theta, g));
}
BENCHMARK(BM_ValueAndGradient)->Arg(3)->Arg(5)->Arg(8)->Unit(benchmark::kMillisecond);

// Threads split the mesh; compare with Arg(1).
void BM_GradientThreads(benchmark::State& state) {
  set_thread_count(static_cast<unsigned>(state.range(0)));
  const auto sc = scenario(5);
  const LogLikelihood ll(sc.data.scr, ParamMap::build(sc.spec, sc.data.frames));
  Vector g;
  for (auto _ : state) benchmark::DoNotOptimize(ll.value_and_gradient(sc.theta, g));
  set_thread_count(1);
}
BENCHMARK(BM_GradientThreads)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Maximize(benchmark::State& state) {
  const auto sc = scenario(5);
  for (auto _ : state) benchmark::DoNotOptimize(maximize(sc.spec, sc.data).loglik);
}
BENCHMARK(BM_Maximize)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
