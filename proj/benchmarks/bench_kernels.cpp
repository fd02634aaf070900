// Serial reference vs OpenMP kernels on the shapes the library actually
// hits: cost-matrix products and symmetric eigendecompositions.

#include <benchmark/benchmark.h>

#include <random>

#include "cmech/kernels.hpp"

using namespace cmech;
namespace k = cmech::kernels;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = nd(gen);
  return m;
}

Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  return symmetrize(random_matrix(n, n, seed));
}

void bm_matmul_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(k::serial::matmul(a, b));
  }
}

void bm_matmul_omp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(k::matmul(a, b));
  }
}

void bm_cost_matrix_serial(benchmark::State& state) {
  // BᵀB for a marginal-sized workload matrix
  const auto d = static_cast<std::size_t>(state.range(0));
  const Matrix b = random_matrix(d / 2, d, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(k::serial::matmul_tn(b, b));
  }
}

void bm_cost_matrix_omp(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const Matrix b = random_matrix(d / 2, d, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(k::matmul_tn(b, b));
  }
}

void bm_eigh_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_symmetric(n, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(k::serial::jacobi_eigh(a));
  }
}

void bm_eigh_omp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_symmetric(n, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(k::jacobi_eigh(a));
  }
}

}  // namespace

BENCHMARK(bm_matmul_serial)->Arg(64)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bm_matmul_omp)->Arg(64)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(bm_cost_matrix_serial)->Arg(128)->Arg(206)->Arg(512);
BENCHMARK(bm_cost_matrix_omp)->Arg(128)->Arg(206)->Arg(512);
BENCHMARK(bm_eigh_serial)->Arg(64)->Arg(128)->Arg(206)->Arg(512);
BENCHMARK(bm_eigh_omp)->Arg(64)->Arg(128)->Arg(206)->Arg(512);

BENCHMARK_MAIN();
