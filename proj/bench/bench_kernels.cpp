#include <benchmark/benchmark.h>

#include <random>

#include "cofirec/numerics/kernels.hpp"
#include "cofirec/theory.hpp"

namespace {

using cofirec::numerics::Matrix;
namespace kernels = cofirec::numerics::kernels;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.values()) {
    v = g(rng);
  }
  return m;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  Matrix c;
  for (auto _ : state) {
    kernels::gemm(a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
}

void BM_GemmSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  Matrix c;
  for (auto _ : state) {
    kernels::serial::gemm(a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
}

void BM_NearestRows(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix points = random_matrix(n, 32, 3);
  const Matrix codes = random_matrix(512, 32, 4);
  std::vector<int> idx(n);
  std::vector<double> dist(n);
  for (auto _ : state) {
    kernels::nearest_rows(points, codes, idx, dist);
    benchmark::DoNotOptimize(idx.data());
  }
}

void BM_NearestRowsSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix points = random_matrix(n, 32, 3);
  const Matrix codes = random_matrix(512, 32, 4);
  std::vector<int> idx(n);
  std::vector<double> dist(n);
  for (auto _ : state) {
    kernels::serial::nearest_rows(points, codes, idx, dist);
    benchmark::DoNotOptimize(idx.data());
  }
}

void BM_Simulate(benchmark::State& state) {
  cofirec::theory::TheoryConfig c;
  c.p = 0.9;
  c.V = 16;
  c.K = 4;
  c.trials = 100000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cofirec::theory::simulate(c, cofirec::theory::Mode::indep));
  }
}

void BM_SimulateSerial(benchmark::State& state) {
  cofirec::theory::TheoryConfig c;
  c.p = 0.9;
  c.V = 16;
  c.K = 4;
  c.trials = 100000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cofirec::theory::simulate_serial(c, cofirec::theory::Mode::indep));
  }
}

}  // namespace

BENCHMARK(BM_Gemm)->Arg(64)->Arg(256);
BENCHMARK(BM_GemmSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_NearestRows)->Arg(2048);
BENCHMARK(BM_NearestRowsSerial)->Arg(2048);
BENCHMARK(BM_Simulate);
BENCHMARK(BM_SimulateSerial);

BENCHMARK_MAIN();
