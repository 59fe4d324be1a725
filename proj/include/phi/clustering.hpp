#pragma once

#include <map>
#include <string>
#include <vector>

#include "phi/core.hpp"
#include "phi/kernels.hpp"

namespace phi {

/// Dense TF-IDF rows, one per document, L2-normalized.
struct TfidfMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major
  std::map<std::string, std::size_t> vocabulary;

  kernels::MatrixView view() const { return {data, rows, cols}; }
  std::span<const double> row(std::size_t r) const { return view().row(r); }
};

/// Lowercased maximal runs of letters and digits. Bytes >= 0x80 count as
/// letters, so UTF-8 words stay whole.
std::vector<std::string> tokenize(const std::string& text);

/// tf = raw count, idf = ln((1 + n) / (1 + df)) + 1, rows L2-normalized.
/// Throws DomainError when no document contains a term.
TfidfMatrix tfidf_vectorize(const std::vector<std::string>& texts);

struct ClusterAssignment {
  std::vector<int> labels;  // in [0, sizes.size())
  std::vector<int> sizes;
  double largest_fraction = 0.0;
};

/// k-means++ seeding and Lloyd iterations until every centroid moves less
/// than 1e-6 or 100 iterations. Uses min(K, distinct rows) clusters. Labels
/// are renumbered in order of first appearance.
ClusterAssignment kmeans(const TfidfMatrix& matrix, int k, RandomStream& rng);

/// Per-path C_t = size of its cluster / number of paths.
std::vector<double> cluster_fractions(const ClusterAssignment& assignment);

/// Vectorize and cluster. Term-less documents become zero rows; a set with
/// no terms at all is a single cluster.
ClusterAssignment cluster_texts(const std::vector<std::string>& texts, int k, RandomStream& rng);

}  // namespace phi
