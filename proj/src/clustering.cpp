#include "phi/clustering.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace phi {

namespace {

constexpr int kMaxIterations = 100;
constexpr double kShiftTolerance = 1e-6;

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::size_t count_distinct_rows(const TfidfMatrix& m) {
  std::set<std::vector<double>> seen;
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = m.row(r);
    seen.emplace(row.begin(), row.end());
  }
  return seen.size();
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

TfidfMatrix tfidf_vectorize(const std::vector<std::string>& texts) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(texts.size());
  TfidfMatrix m;
  for (const auto& t : texts) {
    docs.push_back(tokenize(t));
    for (const auto& term : docs.back()) m.vocabulary.emplace(term, 0);
  }
  if (m.vocabulary.empty()) throw DomainError("tfidf_vectorize: no document contains a term");
  std::size_t col = 0;
  for (auto& [term, idx] : m.vocabulary) idx = col++;

  m.rows = docs.size();
  m.cols = m.vocabulary.size();
  m.data.assign(m.rows * m.cols, 0.0);
  std::vector<int> df(m.cols, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* row = m.data.data() + r * m.cols;
    for (const auto& term : docs[r]) row[m.vocabulary.at(term)] += 1.0;
    for (std::size_t j = 0; j < m.cols; ++j) df[j] += row[j] > 0.0 ? 1 : 0;
  }
  std::vector<double> idf(m.cols);
  const double n = static_cast<double>(m.rows);
  for (std::size_t j = 0; j < m.cols; ++j) {
    idf[j] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[j]))) + 1.0;
  }
  kernels::weight_and_normalize(m.data, m.rows, m.cols, idf);
  return m;
}

ClusterAssignment kmeans(const TfidfMatrix& matrix, int k, RandomStream& rng) {
  if (matrix.rows == 0) throw DomainError("kmeans needs at least one row");
  if (k < 1) throw DomainError("kmeans needs k >= 1");
  const std::size_t n = matrix.rows;
  const std::size_t d = matrix.cols;
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), count_distinct_rows(matrix));
  const auto points = matrix.view();

  // k-means++ seeding.
  std::vector<double> centroids;
  centroids.reserve(kk * d);
  auto add_centroid = [&](std::size_t r) {
    const auto row = points.row(r);
    centroids.insert(centroids.end(), row.begin(), row.end());
  };
  add_centroid(rng.below(n));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centroids.size() / std::max<std::size_t>(d, 1) < kk) {
    const std::size_t last = centroids.size() / d - 1;
    const std::span<const double> c(centroids.data() + last * d, d);
    for (std::size_t r = 0; r < n; ++r) d2[r] = std::min(d2[r], kernels::squared_distance(points.row(r), c));
    add_centroid(sample_categorical(d2, rng));
  }

  std::vector<int> labels(n, 0);
  std::vector<double> dist(n, 0.0);
  std::vector<double> next(kk * d, 0.0);
  std::vector<int> counts(kk, 0);
  for (int it = 0; it < kMaxIterations; ++it) {
    kernels::assign_nearest(points, {centroids, kk, d}, labels, dist);
    kernels::accumulate_centroids(points, labels, kk, next, counts);
    // Empty-cluster repair: move the centroid onto the worst-fit point.
    for (std::size_t c = 0; c < kk; ++c) {
      if (counts[c] > 0) continue;
      const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      const auto row = points.row(far);
      std::copy(row.begin(), row.end(), next.begin() + static_cast<std::ptrdiff_t>(c * d));
      dist[far] = -1.0;
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < kk; ++c) {
      const std::span<const double> a(centroids.data() + c * d, d), b(next.data() + c * d, d);
      shift = std::max(shift, std::sqrt(kernels::squared_distance(a, b)));
    }
    centroids.swap(next);
    if (shift < kShiftTolerance) break;
  }
  kernels::assign_nearest(points, {centroids, kk, d}, labels, dist);

  ClusterAssignment out;
  std::vector<int> remap(kk, -1);
  out.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto& m = remap[static_cast<std::size_t>(labels[r])];
    if (m < 0) {
      m = static_cast<int>(out.sizes.size());
      out.sizes.push_back(0);
    }
    out.labels[r] = m;
    ++out.sizes[static_cast<std::size_t>(m)];
  }
  out.largest_fraction =
      static_cast<double>(*std::max_element(out.sizes.begin(), out.sizes.end())) / static_cast<double>(n);
  return out;
}

std::vector<double> cluster_fractions(const ClusterAssignment& a) {
  std::vector<double> out(a.labels.size());
  const double total = static_cast<double>(a.labels.size());
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    out[i] = static_cast<double>(a.sizes.at(static_cast<std::size_t>(a.labels[i]))) / total;
  }
  return out;
}

ClusterAssignment cluster_texts(const std::vector<std::string>& texts, int k, RandomStream& rng) {
  if (texts.empty()) throw DomainError("cluster_texts needs at least one text");
  bool any_term = false;
  for (const auto& t : texts) any_term = any_term || !tokenize(t).empty();
  if (!any_term) {
    ClusterAssignment single;
    single.labels.assign(texts.size(), 0);
    single.sizes = {static_cast<int>(texts.size())};
    single.largest_fraction = 1.0;
    return single;
  }
  return kmeans(tfidf_vectorize(texts), k, rng);
}

}  // namespace phi
