#include <random>
#include <string>

#include <benchmark/benchmark.h>

#include <commsynth/cost.hpp>
#include <commsynth/lp.hpp>
#include <commsynth/reach.hpp>
#include <commsynth/scenario.hpp>
#include <commsynth/synth.hpp>

using namespace commsynth;

namespace {

std::string scenario(int k) { return std::string(COMMSYNTH_SCENARIO_DIR) + "/scenario" + std::to_string(k) + ".json"; }

void BM_ReachValue(benchmark::State& state) {
    auto sc = load_scenario(scenario(static_cast<int>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(optimal_reach_avoid_value(sc.game, sc.spec).v_star);
}
BENCHMARK(BM_ReachValue)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_DenseRegionLp(benchmark::State& state) {
    auto sc = load_scenario(scenario(3), true);
    auto aug = augment_with_sink(sc.game, sc.spec);
    auto region = assemble_feasible_region(aug, 1.0, RegionLayout::dense);
    state.counters["variables"] = region.num_variables();
    for (auto _ : state) benchmark::DoNotOptimize(solve_lp(region.lp).status);
}
BENCHMARK(BM_DenseRegionLp)->Unit(benchmark::kMillisecond);

struct CostFixture {
    CooperativeGame aug;
    FeasibleRegion region;
    OccupancyVector x;

    explicit CostFixture(int k)
        : aug([&] {
              auto sc = load_scenario(scenario(k));
              return augment_with_sink(sc.game, sc.spec);
          }()),
          region(assemble_feasible_region(aug, 0.0)),
          x(OccupancyVector::zeros(region.layout)) {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.01, 1.0);
        for (auto& v : x.sa) v = u(rng);
        for (auto& v : x.oc) v = u(rng);
    }
};

void BM_CostValue(benchmark::State& state) {
    CostFixture f(4);
    CostModel model(f.region.layout);
    for (auto _ : state) benchmark::DoNotOptimize(model.value(f.x));
    state.counters["variables"] = static_cast<double>(f.x.sa.size() + f.x.oc.size());
}
BENCHMARK(BM_CostValue)->Unit(benchmark::kMicrosecond);

void BM_CostGradient(benchmark::State& state) {
    CostFixture f(4);
    CostModel model(f.region.layout);
    CostGradient grad;
    for (auto _ : state) benchmark::DoNotOptimize(model.gradient(f.x, grad));
}
BENCHMARK(BM_CostGradient)->Unit(benchmark::kMicrosecond);

void BM_SynthesizeScenario2(benchmark::State& state) {
    auto sc = load_scenario(scenario(2));
    SynthesisConfig cfg;
    cfg.restarts = 1;
    cfg.threads = 1;
    for (auto _ : state) benchmark::DoNotOptimize(synthesize(sc.game, sc.spec, cfg).report.dbar_value);
}
BENCHMARK(BM_SynthesizeScenario2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
