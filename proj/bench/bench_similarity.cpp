// Serial vs OpenMP similarity scan over a notebook-sized matrix.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "lpesql/similarity.hpp"

namespace {

constexpr std::size_t kDim = 384;

struct Data {
  std::vector<double> matrix;
  std::vector<double> query;
  std::vector<double> scores;
};

Data make_data(std::size_t rows) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  Data d;
  d.matrix.resize(rows * kDim);
  for (auto& v : d.matrix) v = g(rng);
  d.query.resize(kDim);
  for (auto& v : d.query) v = g(rng);
  d.scores.resize(rows);
  return d;
}

void BM_ScoreSerial(benchmark::State& state) {
  auto d = make_data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    lpesql::kernels::score_rows_serial(d.matrix, kDim, d.query, d.scores);
    benchmark::DoNotOptimize(d.scores.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreParallel(benchmark::State& state) {
  auto d = make_data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    lpesql::kernels::score_rows_parallel(d.matrix, kDim, d.query, d.scores);
    benchmark::DoNotOptimize(d.scores.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ScoreSerial)->Arg(256)->Arg(4096)->Arg(20000);
BENCHMARK(BM_ScoreParallel)->Arg(256)->Arg(4096)->Arg(20000);

BENCHMARK_MAIN();
