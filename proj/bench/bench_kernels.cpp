// Serial reference path against the OpenMP path for the hot loops.

#include "scorematch/amle.hpp"
#include "scorematch/experiments.hpp"
#include "scorematch/objective.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace scorematch;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(1) ? Exec::parallel : Exec::serial; }

const Dataset& cmp_data(std::size_t n) {
  static std::map<std::size_t, Dataset> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    RngStream rng(1, 0);
    it = cache.emplace(n, simulate_cmp(cmp_design(n, 1), cmp_truth(), rng)).first;
  }
  return it->second;
}

const Dataset& tg_data(std::size_t n) {
  static std::map<std::size_t, Dataset> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    RngStream rng(1, 0);
    it = cache.emplace(n, simulate_tg(tg_design(n, 1), tg_truth(), rng)).first;
  }
  return it->second;
}

void BM_GsmValue(benchmark::State& state) {
  const CmpModel model;
  const Objective obj(ObjectiveTag::gsm_univariate, model, cmp_data(static_cast<std::size_t>(state.range(0))));
  const ParamVector theta = pack(cmp_truth());
  for (auto _ : state) benchmark::DoNotOptimize(obj.value(theta.span(), exec_of(state)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GsmGradient(benchmark::State& state) {
  const CmpModel model;
  const Objective obj(ObjectiveTag::gsm_univariate, model, cmp_data(static_cast<std::size_t>(state.range(0))));
  const ParamVector theta = pack(cmp_truth());
  for (auto _ : state) benchmark::DoNotOptimize(obj.gradient(theta.span(), exec_of(state)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SmGradient(benchmark::State& state) {
  const TgModel model(2);
  const Objective obj(ObjectiveTag::sm_continuous, model, tg_data(static_cast<std::size_t>(state.range(0))));
  const ParamVector theta = pack(tg_truth());
  for (auto _ : state) benchmark::DoNotOptimize(obj.gradient(theta.span(), exec_of(state)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_AmleLoglik(benchmark::State& state) {
  AmleConfig cfg;
  cfg.exec = exec_of(state);
  const Dataset& data = cmp_data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(amle_loglik(data, cmp_truth(), cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_McReplicates(benchmark::State& state) {
  const GsmEstimator gsm;
  McOptions opts;
  opts.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(run_mc(Setting::cmp, {&gsm}, {200}, static_cast<int>(state.range(0)), 1, opts));
}

}  // namespace

BENCHMARK(BM_GsmValue)->ArgsProduct({{1000, 100000}, {0, 1}})->ArgNames({"n", "omp"});
BENCHMARK(BM_GsmGradient)->ArgsProduct({{1000, 100000}, {0, 1}})->ArgNames({"n", "omp"});
BENCHMARK(BM_SmGradient)->ArgsProduct({{1000, 10000}, {0, 1}})->ArgNames({"n", "omp"});
BENCHMARK(BM_AmleLoglik)->ArgsProduct({{1000, 100000}, {0, 1}})->ArgNames({"n", "omp"});
BENCHMARK(BM_McReplicates)->ArgsProduct({{8}, {0, 1}})->ArgNames({"reps", "omp"})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
