#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cwrf/forest.hpp"

namespace cwrf {

// Dense row-major matrix, just enough for the spectral step.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  double max_abs() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  DenseMatrix vectors;         // column k pairs with values[k]
};

// Cyclic Jacobi rotations until the off-diagonal mass is negligible. Rejects
// input that is not symmetric within 1e-10 (relative to the largest entry).
SymmetricEigen eigensolve_symmetric(const DenseMatrix& a);

class SimilarityGraph {
 public:
  explicit SimilarityGraph(std::size_t n = 0) : weights_(n, n) {}
  explicit SimilarityGraph(DenseMatrix weights);

  std::size_t size() const { return weights_.rows(); }
  double weight(std::size_t i, std::size_t j) const { return weights_(i, j); }
  void set_weight(std::size_t i, std::size_t j, double w);
  const DenseMatrix& matrix() const { return weights_; }

  struct Edge {
    std::size_t a;
    std::size_t b;
    double weight;
  };
  // Edges with positive weight, a < b, in lexicographic order.
  std::vector<Edge> edges() const;

 private:
  DenseMatrix weights_;
};

// Trees are linked when their feature sets intersect; the link weight is the
// sum of the pool's per-feature differential ratios over shared features.
SimilarityGraph build_similarity_graph(const ModelPool& pool);

struct Clustering {
  std::vector<std::size_t> assignment;  // tree index -> cluster id in [0, s)
  std::size_t num_clusters = 0;

  std::vector<std::vector<std::size_t>> members() const;
  bool operator==(const Clustering&) const = default;
};

struct KMeansResult {
  std::vector<std::size_t> assignment;
  double inertia = 0.0;
};

// Lloyd iterations from k-means++ seeds; the best of `restarts` runs (by
// within-cluster sum of squares) is kept. Empty clusters are refilled with
// the point farthest from its centroid.
KMeansResult kmeans(const DenseMatrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t restarts = 50, std::size_t max_iterations = 300);

// Normalized spectral clustering: L = I - D^-1/2 W D^-1/2 (isolated nodes get
// a zero scaling entry), the s eigenvectors of smallest eigenvalue, row
// normalization, then k-means.
Clustering spectral_clustering(const SimilarityGraph& g, std::size_t s, std::uint64_t seed);

// Per-query draw of min(q, |cluster|) trees from every cluster without
// replacement. Depends only on (seed, query_id); safe to call concurrently.
std::vector<std::size_t> select_models(const Clustering& c, std::size_t q, std::uint64_t seed,
                                       std::uint64_t query_id);
// Size every select_models call returns.
std::size_t selection_size(const Clustering& c, std::size_t q);

// Text form: `clustering <M> <s>`, then `tree <i> <cluster>` lines, then
// `edge <a> <b> <weight>` lines for the inducing graph.
std::string clustering_to_text(const Clustering& c, const SimilarityGraph& g);
Clustering clustering_from_text(const std::string& text);

}  // namespace cwrf
