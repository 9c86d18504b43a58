#include "lpesql/similarity.hpp"

#include <algorithm>
#include <numeric>

namespace lpesql::kernels {

namespace {

inline double row_dot(const double* row, const double* q, std::size_t dim) {
  double dot = 0.0;
  for (std::size_t j = 0; j < dim; ++j) dot += row[j] * q[j];
  return dot;
}

}  // namespace

void score_rows_serial(std::span<const double> matrix, std::size_t dim,
                       std::span<const double> query, std::span<double> out) {
  const std::size_t rows = out.size();
  for (std::size_t i = 0; i < rows; ++i) {
    out[i] = row_dot(matrix.data() + i * dim, query.data(), dim);
  }
}

void score_rows_parallel(std::span<const double> matrix, std::size_t dim,
                         std::span<const double> query, std::span<double> out) {
  const auto rows = static_cast<std::ptrdiff_t>(out.size());
  const double* m = matrix.data();
  const double* q = query.data();
  double* o = out.data();
#pragma omp parallel for schedule(static) if (out.size() >= kParallelRowThreshold)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    o[i] = row_dot(m + static_cast<std::size_t>(i) * dim, q, dim);
  }
}

std::vector<std::size_t> rank_top_n(std::span<const double> scores,
                                    std::span<const std::int64_t> seqs,
                                    std::size_t n) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  n = std::min(n, idx.size());
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return seqs[a] < seqs[b];
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n),
                    idx.end(), better);
  idx.resize(n);
  return idx;
}

}  // namespace lpesql::kernels
