#pragma once

// Exhaustive similarity scan over a row-major embedding matrix. The OpenMP
// kernel is what the notebooks use; the serial kernel is kept as the
// reference the tests and the benchmark compare against. Both compute each
// row's dot product in the same order, so their outputs are bit-identical.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lpesql::kernels {

/// Below this many rows the parallel kernel runs on one thread.
inline constexpr std::size_t kParallelRowThreshold = 512;

void score_rows_serial(std::span<const double> matrix, std::size_t dim,
                       std::span<const double> query, std::span<double> out);

void score_rows_parallel(std::span<const double> matrix, std::size_t dim,
                         std::span<const double> query, std::span<double> out);

/// Indices of the best `n` rows: score descending, then seq ascending.
std::vector<std::size_t> rank_top_n(std::span<const double> scores,
                                    std::span<const std::int64_t> seqs,
                                    std::size_t n);

}  // namespace lpesql::kernels
