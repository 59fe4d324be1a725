#pragma once

// Data-parallel inner loops of the clustering path. Each kernel has an
// OpenMP version used in production and a serial reference that the tests
// compare it against bit-for-bit.

#include <cstddef>
#include <span>
#include <vector>

namespace phi::kernels {

/// Row-major dense matrix view.
struct MatrixView {
  std::span<const double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const double> row(std::size_t r) const { return data.subspan(r * cols, cols); }
};

double squared_distance(std::span<const double> a, std::span<const double> b);

/// For each row, index of the nearest centroid (ties go to the lower index)
/// and its squared distance.
void assign_nearest(MatrixView points, MatrixView centroids, std::span<int> labels,
                    std::span<double> distances);
void assign_nearest_serial(MatrixView points, MatrixView centroids, std::span<int> labels,
                           std::span<double> distances);

/// Centroid of each label; empty clusters get count 0 and an all-zero row.
void accumulate_centroids(MatrixView points, std::span<const int> labels, std::size_t k,
                          std::span<double> centroids, std::span<int> counts);
void accumulate_centroids_serial(MatrixView points, std::span<const int> labels, std::size_t k,
                                 std::span<double> centroids, std::span<int> counts);

/// In place: entry *= idf[col], then each row scaled to unit L2 norm
/// (all-zero rows stay zero).
void weight_and_normalize(std::span<double> data, std::size_t rows, std::size_t cols,
                          std::span<const double> idf);
void weight_and_normalize_serial(std::span<double> data, std::size_t rows, std::size_t cols,
                                 std::span<const double> idf);

}  // namespace phi::kernels
