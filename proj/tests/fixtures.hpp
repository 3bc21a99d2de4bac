#pragma once

#include <memory>
#include <vector>

#include "cwrf/data.hpp"
#include "cwrf/tree.hpp"

namespace cwrf::testing {

// Nested description of a tree, flattened to preorder by build().
struct Shape {
  std::size_t feature = 0;
  double threshold = 0.0;
  ClassCounts counts;
  std::vector<Shape> children;  // empty = leaf; two = threshold split (<=, >)
};

inline Shape leaf(std::uint64_t pos, std::uint64_t neg) { return {0, 0.0, {pos, neg}, {}}; }

inline Shape split(std::size_t feature, double threshold, Shape le, Shape gt) {
  ClassCounts c = le.counts;
  c += gt.counts;
  return {feature, threshold, c, {std::move(le), std::move(gt)}};
}

inline void flatten(const Shape& s, std::vector<TreeNode>& out) {
  const std::size_t at = out.size();
  out.emplace_back();
  out[at].counts = s.counts;
  if (s.children.empty()) {
    out[at].leaf_label = s.counts.majority();
    return;
  }
  out[at].split = SplitRule{s.feature, SplitKind::kNumericThreshold, s.threshold, {}};
  for (const auto& c : s.children) {
    out[at].children.push_back(out.size());
    flatten(c, out);
  }
}

inline DecisionTree build(const Shape& s) {
  std::vector<TreeNode> nodes;
  flatten(s, nodes);
  return DecisionTree(std::move(nodes), s.counts.total());
}

// The three example spam trees over remove, dollar, exclaim, zeros and
// total_capital.
enum Feature : std::size_t { kRemove = 0, kDollar, kExclaim, kZeros, kTotalCapital };

inline DecisionTree tree_f1() {
  return build(split(kRemove, 0.0, split(kDollar, 0.05, leaf(100, 900), leaf(90, 10)),
                     leaf(800, 100)));
}
inline DecisionTree tree_f2() {
  return build(split(kExclaim, 0.378, split(kZeros, 0.25, leaf(50, 450), leaf(400, 200)),
                     leaf(800, 100)));
}
inline DecisionTree tree_f3() {
  return build(split(kDollar, 0.05, split(kTotalCapital, 64.0, leaf(100, 800), leaf(200, 100)),
                     leaf(700, 100)));
}

inline std::shared_ptr<const FeatureSchema> spam_schema() {
  std::vector<FeatureSpec> f;
  for (const char* name : {"remove", "dollar", "exclaim", "zeros", "total_capital"}) {
    f.push_back({name, FeatureKind::kNumeric, {}});
  }
  return std::make_shared<FeatureSchema>(std::move(f), "spam", "1", "0");
}

// remove=0, dollar=0.2, exclaim=0.4, zeros=0.3, total_capital=100.
inline std::vector<double> spam_email() { return {0.0, 0.2, 0.4, 0.3, 100.0}; }

}  // namespace cwrf::testing
