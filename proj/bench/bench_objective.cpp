// Serial reference vs OpenMP objective kernel.
// Args: n, d, K. The largest case is sized like a 20-class, 768-d embedding set.

#include <cmath>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "lprobe/logreg.hpp"

namespace {

struct Problem {
    lprobe::Matrix X;
    std::vector<std::uint32_t> y;
    std::vector<double> s;
    std::vector<double> theta;
    std::vector<double> grad;

    Problem(std::size_t n, std::size_t d, std::size_t K) : X(n, d), y(n), s(K, 1.0), theta(K * (d + 1)), grad(theta.size()) {
        std::mt19937_64 gen(1);
        std::normal_distribution<double> normal;
        for (auto& v : X.values()) v = normal(gen) / std::sqrt(static_cast<double>(d));
        for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<std::uint32_t>(i % K);
        for (auto& v : theta) v = 0.1 * normal(gen);
    }
    lprobe::ProbeProblem view() const { return {X, y, s, 10.0}; }
};

template <auto Kernel>
void run(benchmark::State& state) {
    Problem p(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)),
              static_cast<std::size_t>(state.range(2)));
    const auto view = p.view();
    for (auto _ : state) {
        benchmark::DoNotOptimize(Kernel(view, p.theta, p.grad));
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void sizes(benchmark::internal::Benchmark* b) {
    b->Args({60, 8, 3})->Args({420, 768, 20})->Args({1000, 256, 10})->Args({5247, 768, 20});
    b->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(run<lprobe::objective_and_gradient_reference>)->Name("reference")->Apply(sizes);
BENCHMARK(run<lprobe::objective_and_gradient>)->Name("openmp")->Apply(sizes);

BENCHMARK_MAIN();
