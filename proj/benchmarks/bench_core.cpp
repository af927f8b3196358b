#include <benchmark/benchmark.h>

#include <vector>

#include "fsvi/calibration.hpp"
#include "fsvi/dirichlet.hpp"
#include "fsvi/felbo.hpp"
#include "fsvi/mlp.hpp"
#include "fsvi/rng.hpp"
#include "fsvi/special_functions.hpp"

namespace {

using namespace fsvi;

void BM_ln_gamma(benchmark::State& state) {
    Rng rng(1);
    std::vector<double> xs(1024);
    for (double& x : xs) x = rng.uniform(1e-3, 100.0);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(ln_gamma(xs[i++ & 1023]));
    }
}
BENCHMARK(BM_ln_gamma);

void BM_digamma(benchmark::State& state) {
    Rng rng(2);
    std::vector<double> xs(1024);
    for (double& x : xs) x = rng.uniform(1e-3, 100.0);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(digamma(xs[i++ & 1023]));
    }
}
BENCHMARK(BM_digamma);

void BM_trigamma(benchmark::State& state) {
    Rng rng(3);
    std::vector<double> xs(1024);
    for (double& x : xs) x = rng.uniform(1e-3, 100.0);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(trigamma(xs[i++ & 1023]));
    }
}
BENCHMARK(BM_trigamma);

void BM_gamma_sample(benchmark::State& state) {
    Rng rng(4);
    const double shape = static_cast<double>(state.range(0)) / 10.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(rng.gamma(shape));
    }
}
BENCHMARK(BM_gamma_sample)->Arg(5)->Arg(30)->Arg(200);

void BM_dirichlet_sample(benchmark::State& state) {
    Rng rng(5);
    const std::vector<double> alpha(static_cast<std::size_t>(state.range(0)), 2.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rng.dirichlet(alpha));
    }
}
BENCHMARK(BM_dirichlet_sample)->Arg(3)->Arg(7);

void BM_kl_to_uniform(benchmark::State& state) {
    Rng rng(6);
    std::vector<double> values(static_cast<std::size_t>(state.range(0)));
    for (double& v : values) v = rng.uniform(0.1, 50.0);
    const AlphaVector alpha(values);
    for (auto _ : state) {
        benchmark::DoNotOptimize(kl_to_uniform(alpha));
    }
}
BENCHMARK(BM_kl_to_uniform)->Arg(3)->Arg(7);

void BM_differential_entropy(benchmark::State& state) {
    Rng rng(7);
    std::vector<double> values(static_cast<std::size_t>(state.range(0)));
    for (double& v : values) v = rng.uniform(0.1, 50.0);
    const AlphaVector alpha(values);
    for (auto _ : state) {
        benchmark::DoNotOptimize(differential_entropy(alpha));
    }
}
BENCHMARK(BM_differential_entropy)->Arg(3)->Arg(7);

void BM_felbo_loss_batch(benchmark::State& state) {
    Rng rng(8);
    const int n = static_cast<int>(state.range(0));
    std::vector<AlphaVector> in, ood;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
        std::vector<double> v(3);
        for (double& x : v) x = rng.uniform(0.5, 30.0);
        in.push_back(AlphaVector(v));
        labels.push_back(static_cast<int>(rng.below(3)));
        for (double& x : v) x = rng.uniform(0.5, 30.0);
        ood.push_back(AlphaVector(v));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(felbo_loss(in, labels, ood, 0.05));
    }
}
BENCHMARK(BM_felbo_loss_batch)->Arg(128);

void BM_forward_backward(benchmark::State& state) {
    Rng rng(9);
    const Architecture arch{2, {64, 64}, 3};
    const MlpParams params = init_params(arch, rng);
    const std::vector<double> x = {0.3, -1.2};
    const std::vector<double> upstream = {0.1, -0.2, 0.1};
    Rng fwd(10);
    for (auto _ : state) {
        const auto pass = forward(params, x, RunMode::train, 0.0, fwd);
        benchmark::DoNotOptimize(backward(params, pass.trace, upstream, AlphaHeadKind::exp));
    }
}
BENCHMARK(BM_forward_backward);

void BM_ece(benchmark::State& state) {
    Rng rng(11);
    std::vector<PredictionRecord> records;
    for (int i = 0; i < 10000; ++i) {
        const double c = rng.uniform(0.34, 1.0);
        std::vector<double> p = {c, (1.0 - c) / 2.0, (1.0 - c) / 2.0};
        records.push_back(
            record_from_probs(ProbVector(std::move(p)), rng.uniform() < c ? 0 : 1, false));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(ece(records, 15));
    }
}
BENCHMARK(BM_ece);

void BM_auroc(benchmark::State& state) {
    Rng rng(12);
    std::vector<double> scores;
    std::vector<bool> labels;
    for (int i = 0; i < 10000; ++i) {
        const bool positive = rng.uniform() < 0.5;
        scores.push_back(rng.normal(positive ? 1.0 : 0.0, 1.0));
        labels.push_back(positive);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(auroc(scores, labels));
    }
}
BENCHMARK(BM_auroc);

} // namespace

BENCHMARK_MAIN();
