#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cwrf/data.hpp"

namespace cwrf {

struct ClassCounts {
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;

  std::uint64_t total() const { return positives + negatives; }
  double positive_fraction() const {
    return total() == 0 ? 0.0 : static_cast<double>(positives) / static_cast<double>(total());
  }
  // Majority label; ties go positive.
  Label majority() const {
    return positives >= negatives ? Label::kPositive : Label::kNegative;
  }
  ClassCounts& operator+=(const ClassCounts& o) {
    positives += o.positives;
    negatives += o.negatives;
    return *this;
  }
  bool operator==(const ClassCounts&) const = default;
};

// Binary entropy in bits. Throws on an empty node.
double entropy(std::uint64_t positives, std::uint64_t negatives);
double entropy(const ClassCounts& c);

// Parent entropy minus the size-weighted child entropies. Children must sum
// to the parent.
double information_gain(const ClassCounts& parent, std::span<const ClassCounts> children);

// Per-feature multiplier applied to the split criterion. Entries in (0, 1].
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> values);
  static WeightVector uniform(std::size_t m) { return WeightVector(std::vector<double>(m, 1.0)); }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t j) const { return values_[j]; }
  const std::vector<double>& values() const { return values_; }
  bool operator==(const WeightVector&) const = default;

 private:
  std::vector<double> values_;
};

enum class SplitKind { kNumericThreshold, kCategoricalMultiway };

// Numeric: x <= threshold routes to child 0, otherwise child 1.
// Categorical: one child per category observed at training time;
// `child_category[c]` names the category routed to child c.
struct SplitRule {
  std::size_t feature = 0;
  SplitKind kind = SplitKind::kNumericThreshold;
  double threshold = 0.0;
  std::vector<std::size_t> child_category;

  bool operator==(const SplitRule&) const = default;
};

struct TreeNode {
  std::optional<SplitRule> split;
  std::vector<std::size_t> children;
  ClassCounts counts;
  std::optional<Label> leaf_label;

  bool is_leaf() const { return !split.has_value(); }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  // Nodes in preorder with node 0 as root. Validates structure and count
  // conservation, and derives the feature set.
  DecisionTree(std::vector<TreeNode> nodes, std::uint64_t total_training_count);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(std::size_t i) const { return nodes_[i]; }
  const TreeNode& root() const { return nodes_.front(); }
  std::size_t size() const { return nodes_.size(); }
  std::uint64_t total_training_count() const { return total_training_count_; }
  // Sorted indices of every feature used by a split.
  const std::vector<std::size_t>& feature_set() const { return feature_set_; }
  bool uses_feature(std::size_t j) const;
  std::size_t depth() const;

  std::size_t leaf_for(std::span<const double> x) const;
  Label predict(std::span<const double> x) const { return *nodes_[leaf_for(x)].leaf_label; }

  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
  std::uint64_t total_training_count_ = 0;
  std::vector<std::size_t> feature_set_;
};

struct TreeParams {
  std::size_t min_node_size = 2;
  std::size_t max_depth = 0;  // 0 = unlimited
  double gain_tolerance = 1e-12;
};

struct SplitCandidate {
  SplitRule rule;
  double weighted_gain = 0.0;
  double gain = 0.0;
};

// Best weighted-gain split among `candidate_features` over the given rows (row
// indices into `d`, duplicates allowed). Ties go to the lowest feature index,
// then the lowest threshold. Returns nullopt when no split has weighted gain
// above `gain_tolerance`.
std::optional<SplitCandidate> best_split(const Dataset& d, std::span<const std::size_t> rows,
                                         std::span<const std::size_t> candidate_features,
                                         const WeightVector& weights,
                                         double gain_tolerance = 1e-12);

// Grows a tree on `rows` of `d` (all rows when empty). A fresh uniform subset
// of `subspace_size` features is drawn at every node.
DecisionTree train_tree(const Dataset& d, std::span<const std::size_t> rows,
                        const WeightVector& weights, std::size_t subspace_size,
                        const TreeParams& params, std::uint64_t seed);
DecisionTree train_tree(const Dataset& d, const WeightVector& weights,
                        std::size_t subspace_size, const TreeParams& params,
                        std::uint64_t seed);

Label predict_tree(const DecisionTree& tree, std::span<const double> x);

// One sorted feature set per positive leaf, in preorder of the leaves.
std::vector<std::vector<std::size_t>> critical_paths(const DecisionTree& tree);
// Union of critical_paths(tree), sorted.
std::vector<std::size_t> critical_features(const DecisionTree& tree);

// Deterministic preorder text form, one node per line:
//   L <pos> <neg> <P|N>
//   T <pos> <neg> <feature> <threshold>            (two children follow)
//   C <pos> <neg> <feature> <n> <cat_1> ... <cat_n> (n children follow)
// preceded by a `tree <total_training_count> <node_count>` header.
std::string tree_to_text(const DecisionTree& tree);
DecisionTree tree_from_text(const std::string& text);

}  // namespace cwrf
