// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dghif/tensorcore/kernels.hpp"

using namespace dghif::tc;

namespace {

std::vector<double> random_values(std::size_t n) {
  std::mt19937_64 rng(n);
  std::uniform_real_distribution<double> dist(-1, 1);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

template <bool Parallel>
void bm_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const kernels::GemmDims d{n, n, n};
  const auto a = random_values(n * n);
  const auto b = random_values(n * n);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::gemm(d, a, b, c);
    } else {
      kernels::serial::gemm(d, a, b, c);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

Csr random_graph(std::size_t nodes, std::size_t avg_degree) {
  std::mt19937_64 rng(nodes);
  std::uniform_int_distribution<std::size_t> pick(0, nodes - 1);
  std::poisson_distribution<std::size_t> deg(static_cast<double>(avg_degree));
  Csr g;
  for (std::size_t i = 0; i < nodes; ++i) {
    const std::size_t k = deg(rng);
    for (std::size_t e = 0; e < k; ++e) g.indices.push_back(pick(rng));
    g.offsets.push_back(g.indices.size());
  }
  return g;
}

template <bool Parallel>
void bm_neighbor_sum(benchmark::State& state) {
  const auto nodes = static_cast<std::size_t>(state.range(0));
  const std::size_t width = 64;
  const Csr g = random_graph(nodes, 8);
  const auto x = random_values(nodes * width);
  std::vector<double> out(nodes * width);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::neighbor_sum(g, width, x, out);
    } else {
      kernels::serial::neighbor_sum(g, width, x, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void bm_attention(benchmark::State& state) {
  const auto segments = static_cast<std::size_t>(state.range(0));
  const std::size_t len = 24;
  const kernels::AttentionDims dims{64, 2};
  std::vector<std::size_t> off{0};
  for (std::size_t s = 0; s < segments; ++s) off.push_back(off.back() + len);
  const std::size_t t = off.back();
  const auto q = random_values(t * 64), k = random_values(t * 64 + 1), v = random_values(t * 64 + 2);
  std::vector<double> probs(kernels::attention_prob_size(off, 2)), out(t * 64);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::segment_attention_forward(q, k, v, off, dims, probs, out);
    } else {
      kernels::serial::segment_attention_forward(q, k, v, off, dims, probs, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(bm_gemm<false>)->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<true>)->Arg(64)->Arg(256);
BENCHMARK(bm_neighbor_sum<false>)->Arg(1000)->Arg(10000);
BENCHMARK(bm_neighbor_sum<true>)->Arg(1000)->Arg(10000);
BENCHMARK(bm_attention<false>)->Arg(32)->Arg(256);
BENCHMARK(bm_attention<true>)->Arg(32)->Arg(256);

BENCHMARK_MAIN();
