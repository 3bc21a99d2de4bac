#include "cwrf/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cwrf/error.hpp"
#include "cwrf/rng.hpp"

namespace cwrf {

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double DenseMatrix::max_abs() const {
  double best = 0.0;
  for (const double v : data_) best = std::max(best, std::abs(v));
  return best;
}

SymmetricEigen eigensolve_symmetric(const DenseMatrix& input) {
  require(input.rows() == input.cols(), "eigensolve: matrix must be square");
  const std::size_t n = input.rows();
  const double scale = std::max(1.0, input.max_abs());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(input(i, j) - input(j, i)) > 1e-10 * scale) {
        fail(ErrorCategory::kInvalidArgument, "eigensolve: matrix is not symmetric");
      }
    }
  }
  DenseMatrix a = input;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (input(i, j) + input(j, i));
  }
  DenseMatrix v = DenseMatrix::identity(n);

  const auto off_diagonal = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    }
    return s;
  };
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) total += a(i, j) * a(i, j);
  }
  const double eps = std::numeric_limits<double>::epsilon();
  const double target = total * eps * eps;

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && off_diagonal() > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= std::numeric_limits<double>::min()) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::hypot(t, 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = DenseMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

SimilarityGraph::SimilarityGraph(DenseMatrix weights) : weights_(std::move(weights)) {
  require(weights_.rows() == weights_.cols(), "graph: weight matrix must be square");
  for (std::size_t i = 0; i < size(); ++i) {
    require(weights_(i, i) == 0.0, "graph: self loops are not allowed");
    for (std::size_t j = 0; j < size(); ++j) {
      require(weights_(i, j) >= 0.0, "graph: negative edge weight");
      require(weights_(i, j) == weights_(j, i), "graph: weights must be symmetric");
    }
  }
}

void SimilarityGraph::set_weight(std::size_t i, std::size_t j, double w) {
  require(i != j, "graph: self loops are not allowed");
  require(w >= 0.0, "graph: negative edge weight");
  weights_(i, j) = weights_(j, i) = w;
}

std::vector<SimilarityGraph::Edge> SimilarityGraph::edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = i + 1; j < size(); ++j) {
      if (weights_(i, j) > 0.0) out.push_back({i, j, weights_(i, j)});
    }
  }
  return out;
}

SimilarityGraph build_similarity_graph(const ModelPool& pool) {
  const std::size_t n = pool.size();
  require(pool.per_feature_ratio.size() == pool.num_features(),
          "graph: pool has no per-feature ratios");
  SimilarityGraph g(n);
  std::vector<std::size_t> shared;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& fi = pool.trees[i].feature_set();
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& fj = pool.trees[j].feature_set();
      shared.clear();
      std::set_intersection(fi.begin(), fi.end(), fj.begin(), fj.end(),
                            std::back_inserter(shared));
      double w = 0.0;
      for (const auto f : shared) w += pool.per_feature_ratio[f];
      if (w > 0.0) g.set_weight(i, j, w);
    }
  }
  return g;
}

std::vector<std::vector<std::size_t>> Clustering::members() const {
  std::vector<std::vector<std::size_t>> out(num_clusters);
  for (std::size_t i = 0; i < assignment.size(); ++i) out[assignment[i]].push_back(i);
  return out;
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

class Lloyd {
 public:
  Lloyd(const DenseMatrix& points, std::size_t k)
      : points_(points), k_(k), centroids_(k, points.cols()) {}

  KMeansResult run(Rng& rng, std::size_t max_iterations) {
    seed_plus_plus(rng);
    const std::size_t n = points_.rows();
    std::vector<std::size_t> assignment(n, 0);
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
      bool changed = iter == 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto nearest = nearest_centroid(points_.row(i));
        if (nearest != assignment[i]) {
          assignment[i] = nearest;
          changed = true;
        }
      }
      repair_empty(assignment);
      update_centroids(assignment);
      if (!changed) break;
    }
    KMeansResult result;
    result.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      result.inertia += squared_distance(points_.row(i), centroids_.row(assignment[i]));
    }
    result.assignment = std::move(assignment);
    return result;
  }

 private:
  void seed_plus_plus(Rng& rng) {
    const std::size_t n = points_.rows();
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t pick = uniform_index(rng, n);
    for (std::size_t c = 0; c < k_; ++c) {
      if (c > 0) {
        const double sum = std::accumulate(d2.begin(), d2.end(), 0.0);
        if (sum > 0.0) {
          double target = std::uniform_real_distribution<double>(0.0, sum)(rng);
          pick = n - 1;
          for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0.0) continue;
            target -= d2[i];
            if (target < 0.0) {
              pick = i;
              break;
            }
          }
          while (d2[pick] <= 0.0) pick = (pick + n - 1) % n;
        } else {
          pick = uniform_index(rng, n);
        }
      }
      set_centroid(c, points_.row(pick));
      for (std::size_t i = 0; i < n; ++i) {
        d2[i] = std::min(d2[i], squared_distance(points_.row(i), points_.row(pick)));
      }
    }
  }

  void set_centroid(std::size_t c, std::span<const double> p) {
    for (std::size_t d = 0; d < p.size(); ++d) centroids_(c, d) = p[d];
  }

  std::size_t nearest_centroid(std::span<const double> p) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k_; ++c) {
      const double d = squared_distance(p, centroids_.row(c));
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  }

  void update_centroids(const std::vector<std::size_t>& assignment) {
    const std::size_t dims = points_.cols();
    centroids_ = DenseMatrix(k_, dims);
    std::vector<std::size_t> sizes(k_, 0);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      ++sizes[assignment[i]];
      const auto p = points_.row(i);
      for (std::size_t d = 0; d < dims; ++d) centroids_(assignment[i], d) += p[d];
    }
    for (std::size_t c = 0; c < k_; ++c) {
      for (std::size_t d = 0; d < dims; ++d) centroids_(c, d) /= static_cast<double>(sizes[c]);
    }
  }

  // Moves the point farthest from its own centroid (among clusters that can
  // spare one) into each empty cluster.
  void repair_empty(std::vector<std::size_t>& assignment) {
    while (true) {
      std::vector<std::size_t> sizes(k_, 0);
      for (const auto a : assignment) ++sizes[a];
      const auto empty = std::find(sizes.begin(), sizes.end(), 0);
      if (empty == sizes.end()) return;
      update_centroids_nonempty(assignment, sizes);
      std::size_t far = assignment.size();
      double far_d = -1.0;
      for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (sizes[assignment[i]] < 2) continue;
        const double d = squared_distance(points_.row(i), centroids_.row(assignment[i]));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      const auto target = static_cast<std::size_t>(empty - sizes.begin());
      assignment[far] = target;
      set_centroid(target, points_.row(far));
    }
  }

  void update_centroids_nonempty(const std::vector<std::size_t>& assignment,
                                 const std::vector<std::size_t>& sizes) {
    const std::size_t dims = points_.cols();
    DenseMatrix sums(k_, dims);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      const auto p = points_.row(i);
      for (std::size_t d = 0; d < dims; ++d) sums(assignment[i], d) += p[d];
    }
    for (std::size_t c = 0; c < k_; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t d = 0; d < dims; ++d) {
        centroids_(c, d) = sums(c, d) / static_cast<double>(sizes[c]);
      }
    }
  }

  const DenseMatrix& points_;
  std::size_t k_;
  DenseMatrix centroids_;
};

}  // namespace

KMeansResult kmeans(const DenseMatrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t restarts, std::size_t max_iterations) {
  require(k >= 1 && k <= points.rows(), "kmeans: k must lie in [1, number of points]");
  require(restarts >= 1, "kmeans: need at least one restart");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t attempt = 0; attempt < restarts; ++attempt) {
    Rng rng(derive_seed(seed, stream::kCluster, attempt));
    Lloyd lloyd(points, k);
    auto result = lloyd.run(rng, max_iterations);
    if (result.inertia < best.inertia) best = std::move(result);
    if (best.inertia == 0.0) break;
  }
  return best;
}

Clustering spectral_clustering(const SimilarityGraph& g, std::size_t s, std::uint64_t seed) {
  const std::size_t n = g.size();
  if (s < 1 || s > n) {
    fail(ErrorCategory::kInvalidArgument, "spectral clustering: need 1 <= s <= M");
  }
  Clustering out;
  out.num_clusters = s;
  if (s == 1) {
    out.assignment.assign(n, 0);
    return out;
  }
  std::vector<double> scale(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < n; ++j) degree += g.weight(i, j);
    if (degree > 0.0) scale[i] = 1.0 / std::sqrt(degree);
  }
  DenseMatrix laplacian(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      laplacian(i, j) = (i == j ? 1.0 : 0.0) - scale[i] * g.weight(i, j) * scale[j];
    }
  }
  const auto eig = eigensolve_symmetric(laplacian);
  DenseMatrix embedding(n, s);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (std::size_t k = 0; k < s; ++k) norm += eig.vectors(i, k) * eig.vectors(i, k);
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < s; ++k) {
      embedding(i, k) = norm > 0.0 ? eig.vectors(i, k) / norm : 0.0;
    }
  }
  out.assignment = kmeans(embedding, s, seed).assignment;
  return out;
}

std::vector<std::size_t> select_models(const Clustering& c, std::size_t q, std::uint64_t seed,
                                       std::uint64_t query_id) {
  require(q >= 1, "select_models: q must be at least 1");
  std::vector<std::size_t> out;
  auto groups = c.members();
  for (std::size_t k = 0; k < groups.size(); ++k) {
    auto& members = groups[k];
    const std::size_t take = std::min(q, members.size());
    if (take < members.size()) {
      Rng rng(derive_seed(derive_seed(seed, stream::kSelect, query_id), k));
      for (std::size_t i = 0; i < take; ++i) {
        std::swap(members[i], members[i + uniform_index(rng, members.size() - i)]);
      }
    }
    out.insert(out.end(), members.begin(), members.begin() + static_cast<long>(take));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t selection_size(const Clustering& c, std::size_t q) {
  std::size_t total = 0;
  for (const auto& members : c.members()) total += std::min(q, members.size());
  return total;
}

std::string clustering_to_text(const Clustering& c, const SimilarityGraph& g) {
  std::ostringstream out;
  out.precision(17);
  out << "clustering " << c.assignment.size() << ' ' << c.num_clusters << '\n';
  for (std::size_t i = 0; i < c.assignment.size(); ++i) {
    out << "tree " << i << ' ' << c.assignment[i] << '\n';
  }
  for (const auto& e : g.edges()) out << "edge " << e.a << ' ' << e.b << ' ' << e.weight << '\n';
  return out.str();
}

Clustering clustering_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  std::size_t n = 0;
  Clustering c;
  if (!(in >> tag >> n >> c.num_clusters) || tag != "clustering") {
    fail(ErrorCategory::kFormat, "clustering text: bad header");
  }
  c.assignment.assign(n, c.num_clusters);
  std::vector<bool> seen(n, false);
  while (in >> tag) {
    if (tag == "edge") {
      std::size_t a = 0;
      std::size_t b = 0;
      double w = 0.0;
      if (!(in >> a >> b >> w)) fail(ErrorCategory::kFormat, "clustering text: bad edge");
      continue;
    }
    std::size_t i = 0;
    std::size_t k = 0;
    if (tag != "tree" || !(in >> i >> k) || i >= n || k >= c.num_clusters || seen[i]) {
      fail(ErrorCategory::kFormat, "clustering text: bad tree line");
    }
    seen[i] = true;
    c.assignment[i] = k;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    fail(ErrorCategory::kFormat, "clustering text: unassigned tree");
  }
  return c;
}

}  // namespace cwrf
