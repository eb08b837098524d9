#include "mfg/nashlab.hpp"
#include "mfg/wellposed.hpp"

#include "../tests/support.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

using namespace mfg;
using namespace mfg::testing;

namespace {

struct Setup {
    ModelSpec spec = coupled_spec();
    std::shared_ptr<const NoiseEnsemble> ens;
    CCIterate it;

    Setup()
    {
        ens = std::make_shared<const NoiseEnsemble>(sample_ensemble(TimeGrid(spec.T, 50), 64, 256, spec.K(), 3));
        it = CCIterate::zeros(spec, *ens);
        forward_pass(spec, *ens, it);
        backward_pass(spec, *ens, it, DriverMode::Coupled);
    }
};

const Setup& setup()
{
    static const Setup s;
    return s;
}

const CCSolution& nash_solution()
{
    static const CCSolution sol = [] {
        const ModelSpec s = nash_spec();
        SolverOptions opt;
        opt.tol = 1e-6;
        return picard_solve(
            s, std::make_shared<const NoiseEnsemble>(sample_ensemble(TimeGrid(s.T, 50), 32, 128, s.K(), 5)), opt);
    }();
    return sol;
}

void threads(benchmark::State& state) { omp_set_num_threads(static_cast<int>(state.range(0))); }

void BM_Forward(benchmark::State& state)
{
    threads(state);
    const Setup& s = setup();
    CCIterate it = s.it;
    for (auto _ : state) {
        forward_pass(s.spec, *s.ens, it);
        benchmark::DoNotOptimize(it.alpha.data());
    }
}

void BM_ForwardReference(benchmark::State& state)
{
    const Setup& s = setup();
    CCIterate it = s.it;
    for (auto _ : state) {
        reference::forward_pass(s.spec, *s.ens, it);
        benchmark::DoNotOptimize(it.alpha.data());
    }
}

void BM_Backward(benchmark::State& state)
{
    threads(state);
    const Setup& s = setup();
    for (auto _ : state) {
        CCIterate it = s.it;
        benchmark::DoNotOptimize(backward_pass(s.spec, *s.ens, it, DriverMode::Coupled).delta);
    }
}

void BM_BackwardReference(benchmark::State& state)
{
    const Setup& s = setup();
    for (auto _ : state) {
        CCIterate it = s.it;
        benchmark::DoNotOptimize(reference::backward_pass(s.spec, *s.ens, it, DriverMode::Coupled).delta);
    }
}

void BM_Realized(benchmark::State& state)
{
    const CCSolution& sol = nash_solution();
    for (auto _ : state) benchmark::DoNotOptimize(simulate_realized(sol, 128, 0, 1).cost0);
}

void BM_RealizedReference(benchmark::State& state)
{
    const CCSolution& sol = nash_solution();
    for (auto _ : state) benchmark::DoNotOptimize(reference::simulate_realized(sol, 128, 0, 1).cost0);
}

void BM_ConvergenceRow(benchmark::State& state)
{
    threads(state);
    const CCSolution& sol = nash_solution();
    for (auto _ : state) benchmark::DoNotOptimize(convergence_row(sol, 64, 16, 1).state_gap);
}

void BM_CertificateSearch(benchmark::State& state)
{
    threads(state);
    const H1Constants c = operator_constants(build_stacked(coupled_spec()));
    for (auto _ : state) benchmark::DoNotOptimize(search_certificate(c, CertificateVariant::EigenBound).rho_cert);
}

}  // namespace

BENCHMARK(BM_ForwardReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Forward)->DenseRange(1, 4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Backward)->DenseRange(1, 4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RealizedReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Realized)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvergenceRow)->DenseRange(1, 4)->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CertificateSearch)->DenseRange(1, 4)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
