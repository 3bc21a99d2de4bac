#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cwrf/cluster.hpp"
#include "cwrf/forest.hpp"

namespace cwrf {

// Number of trees with `feature` on at least one root-to-positive-leaf path.
std::size_t critical_count(std::size_t feature, std::span<const DecisionTree> trees);
std::vector<std::size_t> critical_counts(std::span<const DecisionTree> trees,
                                         std::size_t num_features);

struct Certificate {
  std::size_t k = 0;
  std::size_t t1 = 0;
  double t2 = 0.0;
  std::size_t required_margin = 0;
  // Number of voting trees the margin refers to.
  std::size_t voters = 0;

  // True when no instance can reach the margin: the guarantee is empty.
  bool vacuous() const { return required_margin > voters; }
};

// Tightest certificate for budget k: t1 sums the k largest critical counts,
// t2 the k smallest costs.
Certificate certify(std::span<const DecisionTree> trees, const CostVector& costs, std::size_t k);

// Certificate valid for every per-query draw of q trees from each cluster:
// t1 = k * l * q, where l is the largest number of clusters in which any one
// feature lies on a critical path.
Certificate clustering_bound(const Clustering& c, std::span<const DecisionTree> trees,
                             std::size_t q, std::size_t k, const CostVector& costs);
std::size_t cluster_spread(const Clustering& c, std::span<const DecisionTree> trees,
                           std::size_t num_features);

// Candidate replacement values per feature that reach every distinct region of
// the pool's piecewise-constant decision function. Numeric: each split
// threshold (the top of its interval) plus the value just above the largest.
// Categorical: every category. Features no tree splits on get no candidates.
std::vector<std::vector<double>> candidate_value_domains(std::span<const DecisionTree> trees,
                                                         const FeatureSchema& schema);

struct MinimalAttack {
  // Smallest number of modified features that turns the pooled label
  // negative; nullopt when none exists within the searched sizes.
  std::optional<std::size_t> size;
  std::vector<std::size_t> features;
  std::vector<double> values;
  // Search stopped early by the evaluation limit.
  bool limit_reached = false;
  std::uint64_t evaluations = 0;
};

struct BruteForceLimits {
  std::size_t max_size = 0;             // 0 = number of features
  std::uint64_t max_evaluations = 50'000'000;
};

MinimalAttack brute_force_min_attack(std::span<const DecisionTree> trees,
                                     std::span<const double> x,
                                     const std::vector<std::vector<double>>& value_domains,
                                     const BruteForceLimits& limits = {});

}  // namespace cwrf
