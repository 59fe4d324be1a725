#include "phi/kernels.hpp"

#include <cmath>
#include <limits>

namespace phi::kernels {

namespace {

// Below this many rows the fork/join cost dominates.
constexpr std::size_t kParallelRows = 64;

void nearest_one(MatrixView points, MatrixView centroids, std::size_t r, std::span<int> labels,
                 std::span<double> distances) {
  const auto p = points.row(r);
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = squared_distance(p, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  labels[r] = best;
  distances[r] = best_d;
}

void centroid_one(MatrixView points, std::span<const int> labels, std::size_t k,
                  std::span<double> centroids, std::span<int> counts) {
  double* out = centroids.data() + k * points.cols;
  for (std::size_t j = 0; j < points.cols; ++j) out[j] = 0.0;
  int n = 0;
  for (std::size_t r = 0; r < points.rows; ++r) {
    if (labels[r] != static_cast<int>(k)) continue;
    const auto p = points.row(r);
    for (std::size_t j = 0; j < points.cols; ++j) out[j] += p[j];
    ++n;
  }
  counts[k] = n;
  if (n > 0) {
    for (std::size_t j = 0; j < points.cols; ++j) out[j] /= static_cast<double>(n);
  }
}

void normalize_one(double* row, std::size_t cols, std::span<const double> idf) {
  double norm = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    row[j] *= idf[j];
    norm += row[j] * row[j];
  }
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < cols; ++j) row[j] /= norm;
  }
}

}  // namespace

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] - b[i];
    d += x * x;
  }
  return d;
}

void assign_nearest(MatrixView points, MatrixView centroids, std::span<int> labels,
                    std::span<double> distances) {
  const auto rows = static_cast<std::ptrdiff_t>(points.rows);
#pragma omp parallel for schedule(static) if (points.rows >= kParallelRows)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    nearest_one(points, centroids, static_cast<std::size_t>(r), labels, distances);
  }
}

void assign_nearest_serial(MatrixView points, MatrixView centroids, std::span<int> labels,
                           std::span<double> distances) {
  for (std::size_t r = 0; r < points.rows; ++r) nearest_one(points, centroids, r, labels, distances);
}

// Parallel over clusters: each centroid still sums its rows in row order, so
// the result matches the serial reference exactly.
void accumulate_centroids(MatrixView points, std::span<const int> labels, std::size_t k,
                          std::span<double> centroids, std::span<int> counts) {
  const auto kk = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) if (points.rows >= kParallelRows)
  for (std::ptrdiff_t c = 0; c < kk; ++c) {
    centroid_one(points, labels, static_cast<std::size_t>(c), centroids, counts);
  }
}

void accumulate_centroids_serial(MatrixView points, std::span<const int> labels, std::size_t k,
                                 std::span<double> centroids, std::span<int> counts) {
  for (std::size_t c = 0; c < k; ++c) centroid_one(points, labels, c, centroids, counts);
}

void weight_and_normalize(std::span<double> data, std::size_t rows, std::size_t cols,
                          std::span<const double> idf) {
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (rows >= kParallelRows)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    normalize_one(data.data() + static_cast<std::size_t>(r) * cols, cols, idf);
  }
}

void weight_and_normalize_serial(std::span<double> data, std::size_t rows, std::size_t cols,
                                 std::span<const double> idf) {
  for (std::size_t r = 0; r < rows; ++r) normalize_one(data.data() + r * cols, cols, idf);
}

}  // namespace phi::kernels
