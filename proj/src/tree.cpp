#include "cwrf/tree.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "cwrf/error.hpp"
#include "cwrf/rng.hpp"

namespace cwrf {

double entropy(std::uint64_t positives, std::uint64_t negatives) {
  const auto n = positives + negatives;
  require(n > 0, "entropy: empty node");
  const auto term = [n](std::uint64_t c) {
    if (c == 0) return 0.0;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    return -p * std::log2(p);
  };
  return term(positives) + term(negatives);
}

double entropy(const ClassCounts& c) { return entropy(c.positives, c.negatives); }

double information_gain(const ClassCounts& parent, std::span<const ClassCounts> children) {
  require(parent.total() > 0, "information gain: empty parent");
  ClassCounts sum;
  double weighted = 0.0;
  for (const auto& child : children) {
    sum += child;
    if (child.total() > 0) {
      weighted += static_cast<double>(child.total()) * entropy(child);
    }
  }
  require(sum == parent, "information gain: children do not sum to parent");
  return entropy(parent) - weighted / static_cast<double>(parent.total());
}

WeightVector::WeightVector(std::vector<double> values) : values_(std::move(values)) {
  for (const double w : values_) {
    require(w > 0.0 && w <= 1.0, "weights must lie in (0, 1]");
  }
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, std::uint64_t total_training_count)
    : nodes_(std::move(nodes)), total_training_count_(total_training_count) {
  if (nodes_.empty()) fail(ErrorCategory::kFormat, "tree: no nodes");
  if (nodes_.front().counts.total() != total_training_count_) {
    fail(ErrorCategory::kFormat, "tree: root counts do not match training count");
  }
  std::vector<int> parents(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.is_leaf()) {
      if (!n.children.empty() || !n.leaf_label) {
        fail(ErrorCategory::kFormat, "tree: malformed leaf " + std::to_string(i));
      }
      if (*n.leaf_label != n.counts.majority()) {
        fail(ErrorCategory::kFormat, "tree: leaf label disagrees with counts at node " +
                                         std::to_string(i));
      }
      continue;
    }
    if (n.children.size() < 2 || n.leaf_label) {
      fail(ErrorCategory::kFormat, "tree: malformed internal node " + std::to_string(i));
    }
    if (n.split->kind == SplitKind::kNumericThreshold && n.children.size() != 2) {
      fail(ErrorCategory::kFormat, "tree: threshold node needs two children");
    }
    if (n.split->kind == SplitKind::kCategoricalMultiway &&
        n.split->child_category.size() != n.children.size()) {
      fail(ErrorCategory::kFormat, "tree: category list does not match children");
    }
    ClassCounts sum;
    for (const auto c : n.children) {
      if (c <= i || c >= nodes_.size()) {
        fail(ErrorCategory::kFormat, "tree: child index out of preorder");
      }
      ++parents[c];
      sum += nodes_[c].counts;
    }
    if (!(sum == n.counts)) {
      fail(ErrorCategory::kFormat, "tree: child counts do not sum at node " + std::to_string(i));
    }
    feature_set_.push_back(n.split->feature);
  }
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (parents[i] != 1) fail(ErrorCategory::kFormat, "tree: node without unique parent");
  }
  std::sort(feature_set_.begin(), feature_set_.end());
  feature_set_.erase(std::unique(feature_set_.begin(), feature_set_.end()), feature_set_.end());
}

bool DecisionTree::uses_feature(std::size_t j) const {
  return std::binary_search(feature_set_.begin(), feature_set_.end(), j);
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> depth(nodes_.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, depth[i]);
    for (const auto c : nodes_[i].children) depth[c] = depth[i] + 1;
  }
  return best;
}

std::size_t DecisionTree::leaf_for(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    const auto& rule = *n.split;
    const double v = x[rule.feature];
    if (rule.kind == SplitKind::kNumericThreshold) {
      i = n.children[v <= rule.threshold ? 0 : 1];
      continue;
    }
    const auto cat = static_cast<std::size_t>(v);
    const auto it = std::find(rule.child_category.begin(), rule.child_category.end(), cat);
    if (it != rule.child_category.end()) {
      i = n.children[static_cast<std::size_t>(it - rule.child_category.begin())];
      continue;
    }
    // Category unseen at this node during training: follow the heaviest branch.
    std::size_t heaviest = 0;
    for (std::size_t c = 1; c < n.children.size(); ++c) {
      if (nodes_[n.children[c]].counts.total() > nodes_[n.children[heaviest]].counts.total()) {
        heaviest = c;
      }
    }
    i = n.children[heaviest];
  }
  return i;
}

Label predict_tree(const DecisionTree& tree, std::span<const double> x) {
  return tree.predict(x);
}

namespace {

struct ValueLabel {
  double value;
  bool positive;
};

class SplitSearch {
 public:
  std::optional<SplitCandidate> run(const Dataset& d, std::span<const std::size_t> rows,
                                    std::span<const std::size_t> features,
                                    const WeightVector& weights, double tolerance) {
    ClassCounts parent;
    for (const auto r : rows) {
      (d.label(r) == Label::kPositive ? parent.positives : parent.negatives) += 1;
    }
    if (parent.total() == 0) return std::nullopt;
    const double parent_h = entropy(parent);
    const double n = static_cast<double>(parent.total());

    std::optional<SplitCandidate> best;
    for (const auto j : features) {
      const double w = weights[j];
      if (d.schema().is_categorical(j)) {
        consider_categorical(d, rows, j, w, parent, parent_h, best);
      } else {
        consider_numeric(d, rows, j, w, parent, parent_h, n, best);
      }
    }
    if (best && best->weighted_gain > tolerance) return best;
    return std::nullopt;
  }

 private:
  static double weighted_child_entropy(const ClassCounts& c) {
    return c.total() == 0 ? 0.0 : static_cast<double>(c.total()) * entropy(c);
  }

  static void offer(std::optional<SplitCandidate>& best, SplitCandidate cand) {
    if (!best || cand.weighted_gain > best->weighted_gain) best = std::move(cand);
  }

  void consider_numeric(const Dataset& d, std::span<const std::size_t> rows, std::size_t j,
                        double w, const ClassCounts& parent, double parent_h, double n,
                        std::optional<SplitCandidate>& best) {
    buffer_.clear();
    for (const auto r : rows) buffer_.push_back({d.value(r, j), d.label(r) == Label::kPositive});
    std::sort(buffer_.begin(), buffer_.end(),
              [](const ValueLabel& a, const ValueLabel& b) { return a.value < b.value; });
    if (buffer_.front().value == buffer_.back().value) return;
    ClassCounts left;
    // Best threshold for this feature; strict comparison keeps the lowest one.
    double best_gain = -1.0;
    double best_threshold = 0.0;
    for (std::size_t i = 0; i + 1 < buffer_.size(); ++i) {
      (buffer_[i].positive ? left.positives : left.negatives) += 1;
      const double a = buffer_[i].value;
      const double b = buffer_[i + 1].value;
      if (a == b) continue;
      const ClassCounts right{parent.positives - left.positives,
                              parent.negatives - left.negatives};
      const double gain =
          parent_h - (weighted_child_entropy(left) + weighted_child_entropy(right)) / n;
      if (gain > best_gain) {
        best_gain = gain;
        double t = a + (b - a) / 2.0;
        if (!(t < b)) t = a;
        best_threshold = t;
      }
    }
    if (best_gain < 0.0) return;
    SplitCandidate cand;
    cand.rule.feature = j;
    cand.rule.kind = SplitKind::kNumericThreshold;
    cand.rule.threshold = best_threshold;
    cand.gain = std::max(0.0, best_gain);
    cand.weighted_gain = w * cand.gain;
    offer(best, std::move(cand));
  }

  void consider_categorical(const Dataset& d, std::span<const std::size_t> rows, std::size_t j,
                            double w, const ClassCounts& parent, double parent_h,
                            std::optional<SplitCandidate>& best) {
    const auto n_cat = d.schema().feature(j).categories.size();
    per_category_.assign(n_cat, ClassCounts{});
    for (const auto r : rows) {
      auto& c = per_category_[static_cast<std::size_t>(d.value(r, j))];
      (d.label(r) == Label::kPositive ? c.positives : c.negatives) += 1;
    }
    SplitCandidate cand;
    cand.rule.feature = j;
    cand.rule.kind = SplitKind::kCategoricalMultiway;
    double weighted = 0.0;
    for (std::size_t c = 0; c < n_cat; ++c) {
      if (per_category_[c].total() == 0) continue;
      cand.rule.child_category.push_back(c);
      weighted += weighted_child_entropy(per_category_[c]);
    }
    if (cand.rule.child_category.size() < 2) return;
    cand.gain = std::max(0.0, parent_h - weighted / static_cast<double>(parent.total()));
    cand.weighted_gain = w * cand.gain;
    offer(best, std::move(cand));
  }

  std::vector<ValueLabel> buffer_;
  std::vector<ClassCounts> per_category_;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& d, const WeightVector& weights, std::size_t subspace_size,
              const TreeParams& params, std::uint64_t seed)
      : d_(d),
        weights_(weights),
        subspace_size_(subspace_size),
        params_(params),
        rng_(derive_seed(seed, stream::kTree)),
        feature_pool_(d.num_features()) {
    std::iota(feature_pool_.begin(), feature_pool_.end(), std::size_t{0});
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    const auto total = rows.size();
    grow(std::move(rows), 0);
    return DecisionTree(std::move(nodes_), total);
  }

 private:
  std::vector<std::size_t> draw_candidates() {
    const std::size_t m = feature_pool_.size();
    for (std::size_t i = 0; i < subspace_size_; ++i) {
      const std::size_t k = i + uniform_index(rng_, m - i);
      std::swap(feature_pool_[i], feature_pool_[k]);
    }
    std::vector<std::size_t> out(feature_pool_.begin(),
                                 feature_pool_.begin() + static_cast<long>(subspace_size_));
    std::sort(out.begin(), out.end());
    return out;
  }

  std::size_t make_leaf(std::size_t index) {
    auto& node = nodes_[index];
    node.leaf_label = node.counts.majority();
    return index;
  }

  std::size_t grow(std::vector<std::size_t> rows, std::size_t depth) {
    const std::size_t index = nodes_.size();
    nodes_.emplace_back();
    ClassCounts counts;
    for (const auto r : rows) {
      (d_.label(r) == Label::kPositive ? counts.positives : counts.negatives) += 1;
    }
    nodes_[index].counts = counts;
    if (counts.positives == 0 || counts.negatives == 0) return make_leaf(index);
    if (rows.size() < params_.min_node_size) return make_leaf(index);
    if (params_.max_depth != 0 && depth >= params_.max_depth) return make_leaf(index);

    const auto candidates = draw_candidates();
    auto split = search_.run(d_, rows, candidates, weights_, params_.gain_tolerance);
    if (!split) return make_leaf(index);

    const auto& rule = split->rule;
    std::vector<std::vector<std::size_t>> parts;
    if (rule.kind == SplitKind::kNumericThreshold) {
      parts.resize(2);
      for (const auto r : rows) {
        parts[d_.value(r, rule.feature) <= rule.threshold ? 0 : 1].push_back(r);
      }
    } else {
      parts.resize(rule.child_category.size());
      std::vector<std::size_t> slot(d_.schema().feature(rule.feature).categories.size(), 0);
      for (std::size_t c = 0; c < rule.child_category.size(); ++c) slot[rule.child_category[c]] = c;
      for (const auto r : rows) {
        parts[slot[static_cast<std::size_t>(d_.value(r, rule.feature))]].push_back(r);
      }
    }
    rows.clear();
    rows.shrink_to_fit();
    nodes_[index].split = rule;
    for (auto& part : parts) {
      const auto child = grow(std::move(part), depth + 1);
      nodes_[index].children.push_back(child);
    }
    return index;
  }

  const Dataset& d_;
  const WeightVector& weights_;
  std::size_t subspace_size_;
  TreeParams params_;
  Rng rng_;
  std::vector<std::size_t> feature_pool_;
  std::vector<TreeNode> nodes_;
  SplitSearch search_;
};

}  // namespace

std::optional<SplitCandidate> best_split(const Dataset& d, std::span<const std::size_t> rows,
                                         std::span<const std::size_t> candidate_features,
                                         const WeightVector& weights, double gain_tolerance) {
  require(!rows.empty(), "best_split: no rows");
  require(!candidate_features.empty(), "best_split: no candidate features");
  require(weights.size() == d.num_features(), "best_split: weight vector length mismatch");
  std::vector<std::size_t> sorted(candidate_features.begin(), candidate_features.end());
  std::sort(sorted.begin(), sorted.end());
  SplitSearch search;
  return search.run(d, rows, sorted, weights, gain_tolerance);
}

DecisionTree train_tree(const Dataset& d, std::span<const std::size_t> rows,
                        const WeightVector& weights, std::size_t subspace_size,
                        const TreeParams& params, std::uint64_t seed) {
  require(!d.empty(), "train_tree: empty training set");
  require(subspace_size >= 1, "train_tree: feature subset size must be at least 1");
  require(subspace_size <= d.num_features(), "train_tree: feature subset size exceeds m");
  require(weights.size() == d.num_features(), "train_tree: weight vector length mismatch");
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(d.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
  } else {
    all.assign(rows.begin(), rows.end());
  }
  TreeBuilder builder(d, weights, subspace_size, params, seed);
  return builder.build(std::move(all));
}

DecisionTree train_tree(const Dataset& d, const WeightVector& weights,
                        std::size_t subspace_size, const TreeParams& params,
                        std::uint64_t seed) {
  return train_tree(d, {}, weights, subspace_size, params, seed);
}

std::vector<std::vector<std::size_t>> critical_paths(const DecisionTree& tree) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> path;
  const auto visit = [&](auto&& self, std::size_t i) -> void {
    const auto& n = tree.node(i);
    if (n.is_leaf()) {
      if (*n.leaf_label == Label::kPositive) {
        auto features = path;
        std::sort(features.begin(), features.end());
        features.erase(std::unique(features.begin(), features.end()), features.end());
        out.push_back(std::move(features));
      }
      return;
    }
    path.push_back(n.split->feature);
    for (const auto c : n.children) self(self, c);
    path.pop_back();
  };
  visit(visit, 0);
  return out;
}

std::vector<std::size_t> critical_features(const DecisionTree& tree) {
  std::vector<std::size_t> out;
  for (const auto& p : critical_paths(tree)) out.insert(out.end(), p.begin(), p.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string tree_to_text(const DecisionTree& tree) {
  std::ostringstream out;
  out << "tree " << tree.total_training_count() << ' ' << tree.size() << '\n';
  char buf[64];
  for (const auto& n : tree.nodes()) {
    if (n.is_leaf()) {
      out << "L " << n.counts.positives << ' ' << n.counts.negatives << ' '
          << (*n.leaf_label == Label::kPositive ? 'P' : 'N') << '\n';
    } else if (n.split->kind == SplitKind::kNumericThreshold) {
      std::snprintf(buf, sizeof buf, "%.17g", n.split->threshold);
      out << "T " << n.counts.positives << ' ' << n.counts.negatives << ' ' << n.split->feature
          << ' ' << buf << '\n';
    } else {
      out << "C " << n.counts.positives << ' ' << n.counts.negatives << ' ' << n.split->feature
          << ' ' << n.split->child_category.size();
      for (const auto c : n.split->child_category) out << ' ' << c;
      out << '\n';
    }
  }
  return out.str();
}

namespace {

class TextReader {
 public:
  explicit TextReader(const std::string& text) : in_(text) {}

  std::vector<std::string> next_line() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      std::istringstream ls(line);
      std::vector<std::string> tokens;
      for (std::string t; ls >> t;) tokens.push_back(t);
      if (!tokens.empty()) return tokens;
    }
    return {};
  }

  template <typename T>
  T number(const std::string& token) const {
    T value{};
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      fail(ErrorCategory::kFormat,
           "tree text line " + std::to_string(line_no_) + ": bad number '" + token + "'");
    }
    return value;
  }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCategory::kFormat, "tree text line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istringstream in_;
  int line_no_ = 0;
};

}  // namespace

DecisionTree tree_from_text(const std::string& text) {
  TextReader reader(text);
  const auto header = reader.next_line();
  if (header.size() != 3 || header[0] != "tree") reader.error("expected tree header");
  const auto total = reader.number<std::uint64_t>(header[1]);
  const auto count = reader.number<std::size_t>(header[2]);
  if (count == 0) reader.error("empty tree");

  std::vector<TreeNode> nodes;
  nodes.reserve(count);
  // Pending child slots: (parent, remaining children) in preorder.
  std::vector<std::pair<std::size_t, std::size_t>> open;
  for (std::size_t i = 0; i < count; ++i) {
    const auto t = reader.next_line();
    if (t.size() < 4) reader.error("truncated node");
    TreeNode node;
    node.counts = {reader.number<std::uint64_t>(t[1]), reader.number<std::uint64_t>(t[2])};
    std::size_t arity = 0;
    if (t[0] == "L") {
      if (t.size() != 4 || (t[3] != "P" && t[3] != "N")) reader.error("bad leaf");
      node.leaf_label = t[3] == "P" ? Label::kPositive : Label::kNegative;
    } else if (t[0] == "T") {
      if (t.size() != 5) reader.error("bad threshold node");
      SplitRule rule;
      rule.feature = reader.number<std::size_t>(t[3]);
      rule.kind = SplitKind::kNumericThreshold;
      rule.threshold = reader.number<double>(t[4]);
      node.split = rule;
      arity = 2;
    } else if (t[0] == "C") {
      if (t.size() < 5) reader.error("bad categorical node");
      SplitRule rule;
      rule.feature = reader.number<std::size_t>(t[3]);
      rule.kind = SplitKind::kCategoricalMultiway;
      arity = reader.number<std::size_t>(t[4]);
      if (t.size() != 5 + arity) reader.error("category count mismatch");
      for (std::size_t c = 0; c < arity; ++c) {
        rule.child_category.push_back(reader.number<std::size_t>(t[5 + c]));
      }
      node.split = rule;
    } else {
      reader.error("unknown node kind '" + t[0] + "'");
    }
    if (i > 0) {
      if (open.empty()) reader.error("node without parent");
      nodes[open.back().first].children.push_back(i);
      if (--open.back().second == 0) open.pop_back();
    }
    nodes.push_back(std::move(node));
    if (arity > 0) open.emplace_back(i, arity);
  }
  if (!open.empty()) reader.error("missing child nodes");
  if (!reader.next_line().empty()) reader.error("trailing content");
  return DecisionTree(std::move(nodes), total);
}

}  // namespace cwrf
