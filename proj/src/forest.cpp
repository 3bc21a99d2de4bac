#include "cwrf/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cwrf/error.hpp"
#include "cwrf/parallel.hpp"
#include "cwrf/rng.hpp"

namespace cwrf {

CostVector::CostVector(std::vector<double> values) : values_(std::move(values)) {
  for (const double c : values_) {
    require(std::isfinite(c) && c > 0.0, "costs must be finite and strictly positive");
  }
}

CostVector load_costs(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::kIo, "cannot open cost file '" + path + "'");
  std::vector<double> costs(schema.size(), 1.0);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto comma = line.rfind(',');
    const auto where = "cost file line " + std::to_string(line_no) + ": ";
    if (comma == std::string::npos) fail(ErrorCategory::kFormat, where + "expected name,cost");
    std::string name = line.substr(0, comma);
    name.erase(0, name.find_first_not_of(" \t"));
    name.erase(name.find_last_not_of(" \t") + 1);
    const auto j = schema.index_of(name);
    if (!j) fail(ErrorCategory::kFormat, where + "unknown feature '" + name + "'");
    std::istringstream value(line.substr(comma + 1));
    double c = 0.0;
    if (!(value >> c) || !(c > 0.0) || !std::isfinite(c)) {
      fail(ErrorCategory::kFormat, where + "cost must be a positive number");
    }
    costs[*j] = c;
  }
  return CostVector(std::move(costs));
}

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::kPlainRf:
      return "plain_rf";
    case Provenance::kWeightedRf:
      return "weighted_rf";
    case Provenance::kIgWeighted:
      return "ig_weighted";
    case Provenance::kSingleTree:
      return "single_tree";
  }
  return "unknown";
}

Provenance parse_provenance(const std::string& name) {
  for (const auto p : {Provenance::kPlainRf, Provenance::kWeightedRf, Provenance::kIgWeighted,
                       Provenance::kSingleTree}) {
    if (name == provenance_name(p)) return p;
  }
  fail(ErrorCategory::kFormat, "unknown pool provenance '" + name + "'");
}

std::vector<DecisionTree> ModelPool::subset(std::span<const std::size_t> indices) const {
  std::vector<DecisionTree> out;
  out.reserve(indices.size());
  for (const auto i : indices) {
    require(i < trees.size(), "pool subset: tree index out of range");
    out.push_back(trees[i]);
  }
  return out;
}

std::size_t default_subspace_size(std::size_t m) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(m))));
}

double differential_ratio(SplitKind kind, const ClassCounts& parent,
                          std::span<const ClassCounts> children, std::uint64_t total) {
  require(total > 0, "differential ratio: empty training set");
  require(children.size() >= 2, "differential ratio: node has fewer than two children");
  const double reach = static_cast<double>(parent.total()) / static_cast<double>(total);
  if (kind == SplitKind::kNumericThreshold) {
    require(children.size() == 2, "differential ratio: threshold node needs two children");
    return std::abs(children[0].positive_fraction() - children[1].positive_fraction()) * reach;
  }
  ClassCounts positive_group;
  ClassCounts negative_group;
  for (const auto& c : children) {
    if (c.total() == 0) continue;
    (c.majority() == Label::kPositive ? positive_group : negative_group) += c;
  }
  if (positive_group.total() == 0 || negative_group.total() == 0) return 0.0;
  return std::abs(positive_group.positive_fraction() - negative_group.positive_fraction()) *
         reach;
}

namespace {

std::vector<ClassCounts> child_counts(const DecisionTree& tree, const TreeNode& n) {
  std::vector<ClassCounts> out;
  out.reserve(n.children.size());
  for (const auto c : n.children) out.push_back(tree.node(c).counts);
  return out;
}

double node_score(const DecisionTree& tree, const TreeNode& n, Vulnerability kind) {
  const auto children = child_counts(tree, n);
  if (kind == Vulnerability::kInformationGain) return information_gain(n.counts, children);
  return differential_ratio(n.split->kind, n.counts, children, tree.total_training_count());
}

}  // namespace

double node_differential_ratio(const DecisionTree& tree, std::size_t node) {
  const auto& n = tree.node(node);
  require(!n.is_leaf(), "differential ratio: leaf node");
  return node_score(tree, n, Vulnerability::kDifferentialRatio);
}

double tree_feature_vulnerability(const DecisionTree& tree, std::size_t feature,
                                  Vulnerability kind) {
  double best = 0.0;
  for (const auto& n : tree.nodes()) {
    if (n.is_leaf() || n.split->feature != feature) continue;
    best = std::max(best, node_score(tree, n, kind));
  }
  return best;
}

std::vector<double> per_feature_vulnerability(std::span<const DecisionTree> trees,
                                              std::size_t num_features, Vulnerability kind) {
  std::vector<double> out(num_features, 0.0);
  if (trees.empty()) return out;
  std::vector<double> tree_max(num_features);
  for (const auto& tree : trees) {
    std::fill(tree_max.begin(), tree_max.end(), 0.0);
    for (const auto& n : tree.nodes()) {
      if (n.is_leaf()) continue;
      const auto j = n.split->feature;
      require(j < num_features, "vulnerability: split feature out of range");
      tree_max[j] = std::max(tree_max[j], node_score(tree, n, kind));
    }
    for (std::size_t j = 0; j < num_features; ++j) out[j] += tree_max[j];
  }
  for (auto& v : out) v /= static_cast<double>(trees.size());
  return out;
}

double feature_differential_ratio(std::size_t feature, std::span<const DecisionTree> trees) {
  if (trees.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& tree : trees) {
    sum += tree_feature_vulnerability(tree, feature, Vulnerability::kDifferentialRatio);
  }
  return sum / static_cast<double>(trees.size());
}

WeightVector compute_weights(std::span<const double> vulnerability, const CostVector& costs,
                             double r) {
  require(vulnerability.size() == costs.size(), "weights: vulnerability/cost length mismatch");
  require(r >= 0.0 && std::isfinite(r), "weights: r must be a nonnegative number");
  std::vector<double> w(vulnerability.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    require(vulnerability[j] >= 0.0, "weights: negative vulnerability");
    // Clamp keeps the (0, 1] invariant when the exponent underflows.
    w[j] = std::max(std::exp(-r * vulnerability[j] / costs[j]),
                    std::numeric_limits<double>::min());
  }
  return WeightVector(std::move(w));
}

ModelPool train_random_forest(const Dataset& train, const ForestParams& params,
                              const WeightVector& weights, std::uint64_t seed) {
  require(params.num_trees >= 1, "forest: need at least one tree");
  require(!train.empty(), "forest: empty training set");
  const std::size_t m = train.num_features();
  const std::size_t f = params.subspace_size == 0 ? default_subspace_size(m) : params.subspace_size;
  require(f <= m, "forest: feature subset size exceeds m");

  ModelPool pool;
  pool.trees.resize(params.num_trees);
  parallel_for(params.num_trees, [&](std::size_t i) {
    const auto rows = bootstrap_indices(train.size(), train.size(),
                                        derive_seed(seed, stream::kBootstrap, i));
    pool.trees[i] =
        train_tree(train, rows, weights, f, params.tree, derive_seed(seed, stream::kTree, i));
  });
  pool.weights_used = weights;
  pool.per_feature_ratio =
      per_feature_vulnerability(pool.trees, m, Vulnerability::kDifferentialRatio);
  pool.provenance = Provenance::kPlainRf;
  pool.subspace_size = f;
  pool.seed = seed;
  return pool;
}

WrfSeeds wrf_seeds(std::uint64_t seed) {
  return {derive_seed(seed, stream::kWrfPass1), derive_seed(seed, stream::kWrfPass2)};
}

ModelPool train_wrf(const Dataset& train, const ForestParams& params, double r,
                    const CostVector& costs, std::uint64_t seed, Vulnerability vulnerability) {
  const std::size_t m = train.num_features();
  require(costs.size() == m, "wrf: cost vector length mismatch");
  const auto seeds = wrf_seeds(seed);
  const auto first = train_random_forest(train, params, WeightVector::uniform(m), seeds.pass1);
  auto scores = vulnerability == Vulnerability::kDifferentialRatio
                    ? first.per_feature_ratio
                    : per_feature_vulnerability(first.trees, m, vulnerability);
  auto weights = compute_weights(scores, costs, r);
  auto pool = train_random_forest(train, params, weights, seeds.pass2);
  pool.prior_vulnerability = std::move(scores);
  pool.provenance = vulnerability == Vulnerability::kDifferentialRatio ? Provenance::kWeightedRf
                                                                       : Provenance::kIgWeighted;
  pool.r = r;
  pool.seed = seed;
  return pool;
}

ModelPool train_single_tree(const Dataset& train, const TreeParams& params, std::uint64_t seed) {
  const std::size_t m = train.num_features();
  ModelPool pool;
  pool.trees.push_back(train_tree(train, WeightVector::uniform(m), m, params,
                                  derive_seed(seed, stream::kTree, 0)));
  pool.weights_used = WeightVector::uniform(m);
  pool.per_feature_ratio =
      per_feature_vulnerability(pool.trees, m, Vulnerability::kDifferentialRatio);
  pool.provenance = Provenance::kSingleTree;
  pool.subspace_size = m;
  pool.seed = seed;
  return pool;
}

Vote predict_pool(std::span<const DecisionTree> trees, std::span<const double> x) {
  require(!trees.empty(), "predict: empty tree subset");
  std::size_t votes = 0;
  for (const auto& t : trees) votes += t.predict(x) == Label::kPositive;
  return {votes >= majority_threshold(trees.size()) ? Label::kPositive : Label::kNegative, votes};
}

Vote predict_pool(const ModelPool& pool, std::span<const std::size_t> indices,
                  std::span<const double> x) {
  require(!indices.empty(), "predict: empty tree subset");
  std::size_t votes = 0;
  for (const auto i : indices) votes += pool.trees[i].predict(x) == Label::kPositive;
  return {votes >= majority_threshold(indices.size()) ? Label::kPositive : Label::kNegative,
          votes};
}

std::vector<std::size_t> feature_usage_counts(const ModelPool& pool) {
  std::vector<std::size_t> counts(pool.num_features(), 0);
  for (const auto& t : pool.trees) {
    for (const auto j : t.feature_set()) ++counts[j];
  }
  return counts;
}

}  // namespace cwrf
