// Serial reference vs OpenMP kernels: the per-window session loop and the
// per-point attack sweep.

#include <benchmark/benchmark.h>

#include "ekert/eavesdrop.hpp"
#include "ekert/protocol.hpp"

namespace {

using namespace ekert;

SessionConfig session_config(std::uint64_t n_trials) {
    SessionConfig cfg;
    cfg.seed = 1;
    cfg.n_trials = n_trials;
    cfg.visibility = 0.9388;
    return cfg;
}

void bm_session_serial(benchmark::State& state) {
    const SessionConfig cfg = session_config(static_cast<std::uint64_t>(state.range(0)));
    for (auto _ : state) {
        SessionData data = run_session_serial(cfg, AttackSpec{});
        benchmark::DoNotOptimize(data.trials.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_session_parallel(benchmark::State& state) {
    const SessionConfig cfg = session_config(static_cast<std::uint64_t>(state.range(0)));
    for (auto _ : state) {
        SessionData data = run_session(cfg, AttackSpec{});
        benchmark::DoNotOptimize(data.trials.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

SweepParams sweep_params(bool parallel) {
    SweepParams params;
    params.mode = AttackMode::dephase;
    params.trials_per_point = 10000;
    params.seed = 2;
    params.parallel = parallel;
    return params;
}

const std::vector<double>& sweep_angles() {
    static const std::vector<double> angles = [] {
        std::vector<double> out;
        for (double a = 0.0; a < 180.0; a += 15.0) out.push_back(a);
        return out;
    }();
    return angles;
}

void bm_sweep_serial(benchmark::State& state) {
    for (auto _ : state) {
        auto rows = sweep(Plane::B, sweep_angles(), sweep_params(false));
        benchmark::DoNotOptimize(rows.data());
    }
}

void bm_sweep_parallel(benchmark::State& state) {
    for (auto _ : state) {
        auto rows = sweep(Plane::B, sweep_angles(), sweep_params(true));
        benchmark::DoNotOptimize(rows.data());
    }
}

}  // namespace

BENCHMARK(bm_session_serial)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_session_parallel)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_sweep_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_sweep_parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
