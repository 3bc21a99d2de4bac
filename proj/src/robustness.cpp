#include "cwrf/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

#include "cwrf/error.hpp"

namespace cwrf {

std::size_t critical_count(std::size_t feature, std::span<const DecisionTree> trees) {
  std::size_t count = 0;
  for (const auto& t : trees) {
    const auto cf = critical_features(t);
    count += std::binary_search(cf.begin(), cf.end(), feature);
  }
  return count;
}

std::vector<std::size_t> critical_counts(std::span<const DecisionTree> trees,
                                         std::size_t num_features) {
  std::vector<std::size_t> counts(num_features, 0);
  for (const auto& t : trees) {
    for (const auto j : critical_features(t)) {
      require(j < num_features, "critical counts: feature index out of range");
      ++counts[j];
    }
  }
  return counts;
}

namespace {

double smallest_costs(const CostVector& costs, std::size_t k) {
  auto sorted = costs.values();
  std::sort(sorted.begin(), sorted.end());
  return std::accumulate(sorted.begin(), sorted.begin() + static_cast<long>(k), 0.0);
}

void check_budget(std::size_t k, std::size_t m) {
  require(k >= 1, "certificate: k must be at least 1");
  require(k <= m, "certificate: k exceeds the number of features");
}

}  // namespace

Certificate certify(std::span<const DecisionTree> trees, const CostVector& costs, std::size_t k) {
  const std::size_t m = costs.size();
  check_budget(k, m);
  auto counts = critical_counts(trees, m);
  std::sort(counts.begin(), counts.end(), std::greater<>());
  Certificate cert;
  cert.k = k;
  cert.t1 = std::accumulate(counts.begin(), counts.begin() + static_cast<long>(k), std::size_t{0});
  cert.t2 = smallest_costs(costs, k);
  cert.voters = trees.size();
  cert.required_margin = majority_threshold(trees.size()) + cert.t1;
  return cert;
}

std::size_t cluster_spread(const Clustering& c, std::span<const DecisionTree> trees,
                           std::size_t num_features) {
  require(c.assignment.size() == trees.size(), "cluster spread: clustering does not cover pool");
  std::vector<std::set<std::size_t>> clusters(num_features);
  for (std::size_t i = 0; i < trees.size(); ++i) {
    for (const auto j : critical_features(trees[i])) {
      require(j < num_features, "cluster spread: feature index out of range");
      clusters[j].insert(c.assignment[i]);
    }
  }
  std::size_t l = 0;
  for (const auto& s : clusters) l = std::max(l, s.size());
  return l;
}

Certificate clustering_bound(const Clustering& c, std::span<const DecisionTree> trees,
                             std::size_t q, std::size_t k, const CostVector& costs) {
  const std::size_t m = costs.size();
  check_budget(k, m);
  require(q >= 1, "clustering bound: q must be at least 1");
  Certificate cert;
  cert.k = k;
  cert.t1 = k * cluster_spread(c, trees, m) * q;
  cert.t2 = smallest_costs(costs, k);
  cert.voters = selection_size(c, q);
  cert.required_margin = majority_threshold(cert.voters) + cert.t1;
  return cert;
}

std::vector<std::vector<double>> candidate_value_domains(std::span<const DecisionTree> trees,
                                                         const FeatureSchema& schema) {
  const std::size_t m = schema.size();
  std::vector<std::set<double>> thresholds(m);
  std::vector<bool> used(m, false);
  for (const auto& t : trees) {
    for (const auto& n : t.nodes()) {
      if (n.is_leaf()) continue;
      require(n.split->feature < m, "value domains: feature index out of range");
      used[n.split->feature] = true;
      if (n.split->kind == SplitKind::kNumericThreshold) {
        thresholds[n.split->feature].insert(n.split->threshold);
      }
    }
  }
  std::vector<std::vector<double>> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    if (!used[j]) continue;
    if (schema.is_categorical(j)) {
      for (std::size_t c = 0; c < schema.feature(j).categories.size(); ++c) {
        out[j].push_back(static_cast<double>(c));
      }
      continue;
    }
    out[j].assign(thresholds[j].begin(), thresholds[j].end());
    out[j].push_back(std::nextafter(out[j].back(), std::numeric_limits<double>::infinity()));
  }
  return out;
}

namespace {

class Search {
 public:
  Search(std::span<const DecisionTree> trees, std::span<const double> x,
         const std::vector<std::vector<double>>& domains, const BruteForceLimits& limits)
      : trees_(trees), x_(x.begin(), x.end()), limits_(limits) {
    for (std::size_t j = 0; j < domains.size(); ++j) {
      std::vector<double> alternatives;
      for (const double v : domains[j]) {
        if (!same_region(domains[j], v, x[j])) alternatives.push_back(v);
      }
      if (!alternatives.empty()) {
        features_.push_back(j);
        alternatives_.push_back(std::move(alternatives));
      }
    }
  }

  MinimalAttack run() {
    MinimalAttack result;
    if (negative()) {
      result.size = 0;
      return result;
    }
    const std::size_t cap = limits_.max_size == 0 ? x_.size() : limits_.max_size;
    for (std::size_t size = 1; size <= std::min(cap, features_.size()); ++size) {
      chosen_.clear();
      if (combine(0, size)) {
        result.size = size;
        for (const auto slot : chosen_) {
          result.features.push_back(features_[slot]);
          result.values.push_back(x_[features_[slot]]);
        }
        break;
      }
      if (limit_hit_) break;
    }
    result.limit_reached = limit_hit_;
    result.evaluations = evaluations_;
    return result;
  }

 private:
  // Domains are sorted thresholds followed by one value above them, so each
  // entry stands for the interval ending at it. Categorical domains hold one
  // entry per category and compare by equality.
  static bool same_region(const std::vector<double>& domain, double v, double x) {
    const auto region = [&](double value) {
      const auto at = std::lower_bound(domain.begin(), domain.end(), value) - domain.begin();
      return std::min<std::ptrdiff_t>(at, static_cast<std::ptrdiff_t>(domain.size()) - 1);
    };
    return region(v) == region(x);
  }

  bool negative() {
    ++evaluations_;
    return predict_pool(trees_, x_).label == Label::kNegative;
  }

  bool combine(std::size_t start, std::size_t remaining) {
    if (remaining == 0) return assign(0);
    for (std::size_t slot = start; slot + remaining <= features_.size(); ++slot) {
      chosen_.push_back(slot);
      if (combine(slot + 1, remaining - 1)) return true;
      chosen_.pop_back();
      if (limit_hit_) return false;
    }
    return false;
  }

  bool assign(std::size_t depth) {
    if (depth == chosen_.size()) {
      if (evaluations_ >= limits_.max_evaluations) {
        limit_hit_ = true;
        return false;
      }
      return negative();
    }
    const std::size_t j = features_[chosen_[depth]];
    const double original = x_[j];
    for (const double v : alternatives_[chosen_[depth]]) {
      x_[j] = v;
      if (assign(depth + 1)) return true;
      if (limit_hit_) break;
    }
    x_[j] = original;
    return false;
  }

  std::span<const DecisionTree> trees_;
  std::vector<double> x_;
  BruteForceLimits limits_;
  std::vector<std::size_t> features_;
  std::vector<std::vector<double>> alternatives_;
  std::vector<std::size_t> chosen_;
  std::uint64_t evaluations_ = 0;
  bool limit_hit_ = false;
};

}  // namespace

MinimalAttack brute_force_min_attack(std::span<const DecisionTree> trees,
                                     std::span<const double> x,
                                     const std::vector<std::vector<double>>& value_domains,
                                     const BruteForceLimits& limits) {
  require(!trees.empty(), "brute force: empty tree subset");
  require(value_domains.size() == x.size(), "brute force: one value domain per feature expected");
  return Search(trees, x, value_domains, limits).run();
}

}  // namespace cwrf
