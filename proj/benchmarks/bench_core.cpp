// Microbenchmarks for the hot paths: convex-net evaluation and
// gradients, conjugate solves, Sinkhorn iterations and SDE sampling.

#include <benchmark/benchmark.h>

#include "npf/bridge.hpp"
#include "npf/conjugate.hpp"
#include "npf/icnn.hpp"
#include "npf/metrics.hpp"
#include "npf/numcore.hpp"

namespace {

using namespace npf;

IcnnParams bench_icnn(int d, int width) {
    IcnnConfig cfg;
    cfg.input_dim = d;
    cfg.width = width;
    cfg.depth = 4;
    Rng rng(1);
    return init_icnn(cfg, rng);
}

void BM_IcnnForward(benchmark::State& state) {
    IcnnParams p = bench_icnn(2, static_cast<int>(state.range(0)));
    Rng rng(2);
    Vec x{rng.normal(), rng.normal()};
    IcnnScratch scratch;
    for (auto _ : state) {
        benchmark::DoNotOptimize(icnn_forward(p, x, scratch));
    }
}
BENCHMARK(BM_IcnnForward)->Arg(32)->Arg(64)->Arg(128);

void BM_IcnnGradInput(benchmark::State& state) {
    IcnnParams p = bench_icnn(2, static_cast<int>(state.range(0)));
    Rng rng(3);
    Vec x{rng.normal(), rng.normal()};
    Vec g(2, 0.0);
    IcnnScratch scratch;
    for (auto _ : state) {
        icnn_grad_input(p, x, g, scratch);
        benchmark::DoNotOptimize(g);
    }
}
BENCHMARK(BM_IcnnGradInput)->Arg(32)->Arg(64)->Arg(128);

void BM_IcnnGradParams(benchmark::State& state) {
    IcnnParams p = bench_icnn(2, static_cast<int>(state.range(0)));
    Rng rng(4);
    Vec x{rng.normal(), rng.normal()};
    Vec g(p.layout.total, 0.0);
    IcnnScratch scratch;
    for (auto _ : state) {
        icnn_grad_params(p, x, 1.0, g, scratch);
        benchmark::DoNotOptimize(g);
    }
}
BENCHMARK(BM_IcnnGradParams)->Arg(32)->Arg(64);

void BM_ConjugateSolve(benchmark::State& state) {
    IcnnParams p = bench_icnn(2, 32);
    ConjugateConfig cfg;
    cfg.max_iterations = 200;
    cfg.gtol = 1e-3;
    Rng rng(5);
    Vec y{rng.normal(), rng.normal()};
    for (auto _ : state) {
        benchmark::DoNotOptimize(conjugate_solve(p, y, y, cfg));
    }
}
BENCHMARK(BM_ConjugateSolve);

void BM_SinkhornDivergence(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(6);
    Mat a(n, 2), b(n, 2);
    for (double& v : a.v) v = rng.normal();
    for (double& v : b.v) v = rng.normal();
    Rng er(7);
    SinkhornConfig cfg;
    cfg.epsilon = epsilon_rule(a, er).value;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sinkhorn_divergence(a, b, cfg));
    }
}
BENCHMARK(BM_SinkhornDivergence)->Arg(64)->Arg(256);

void BM_SdeSample(benchmark::State& state) {
    Rng rng(8);
    DriftNet drift = init_drift(2, {128, 128}, rng);
    BridgeConfig cfg;
    cfg.sigma = 0.1;
    cfg.sde_steps = static_cast<int>(state.range(0));
    Vec y{0.3, -0.2};
    Rng draw(9);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sde_sample(drift, y, cfg, draw));
    }
}
BENCHMARK(BM_SdeSample)->Arg(64)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
