#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cwrf/data.hpp"
#include "cwrf/tree.hpp"

namespace cwrf {

// Per-feature modification cost, strictly positive.
class CostVector {
 public:
  CostVector() = default;
  explicit CostVector(std::vector<double> values);
  static CostVector uniform(std::size_t m) { return CostVector(std::vector<double>(m, 1.0)); }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t j) const { return values_[j]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

// Cost file: one `feature_name,cost` line per listed feature; unlisted
// features cost 1.
CostVector load_costs(const std::string& path, const FeatureSchema& schema);

enum class Provenance { kPlainRf, kWeightedRf, kIgWeighted, kSingleTree };
const char* provenance_name(Provenance p);
Provenance parse_provenance(const std::string& name);

// How a pass-1 pool scores each feature's vulnerability.
enum class Vulnerability { kDifferentialRatio, kInformationGain };

struct ModelPool {
  std::vector<DecisionTree> trees;
  WeightVector weights_used;
  // Mean over trees of the per-tree maximum node differential ratio, computed
  // on `trees` themselves.
  std::vector<double> per_feature_ratio;
  // Vulnerability scores that produced `weights_used` (pass-1 pool); empty
  // for unweighted pools.
  std::vector<double> prior_vulnerability;
  Provenance provenance = Provenance::kPlainRf;
  double r = 0.0;
  std::size_t subspace_size = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return trees.size(); }
  std::size_t num_features() const { return weights_used.size(); }
  std::vector<DecisionTree> subset(std::span<const std::size_t> indices) const;
};

struct ForestParams {
  std::size_t num_trees = 100;
  std::size_t subspace_size = 0;  // 0 = round(sqrt(m))
  TreeParams tree;
};

std::size_t default_subspace_size(std::size_t m);

// Differential ratio of a split with the given parent and children counts.
// Threshold splits compare the two children; multiway splits compare the
// pooled majority-positive children against the pooled majority-negative
// ones and score 0 when either group is empty.
double differential_ratio(SplitKind kind, const ClassCounts& parent,
                          std::span<const ClassCounts> children, std::uint64_t total);
double node_differential_ratio(const DecisionTree& tree, std::size_t node);

// Maximum node score over the nodes of `tree` splitting on `feature`, 0 when
// the feature is unused.
double tree_feature_vulnerability(const DecisionTree& tree, std::size_t feature,
                                  Vulnerability kind);
double feature_differential_ratio(std::size_t feature, std::span<const DecisionTree> trees);
std::vector<double> per_feature_vulnerability(std::span<const DecisionTree> trees,
                                              std::size_t num_features, Vulnerability kind);

// w_j = exp(-r * d_j / c_j).
WeightVector compute_weights(std::span<const double> vulnerability, const CostVector& costs,
                             double r);

// Bagged forest: tree i is grown on bootstrap i (size N) with per-node
// random feature subsets. Per-tree streams derive from `seed`.
ModelPool train_random_forest(const Dataset& train, const ForestParams& params,
                              const WeightVector& weights, std::uint64_t seed);

struct WrfSeeds {
  std::uint64_t pass1;
  std::uint64_t pass2;
};
WrfSeeds wrf_seeds(std::uint64_t seed);

// Two passes: an unweighted pool scores feature vulnerability,
// weights are derived from it, and the returned pool is regrown with them.
ModelPool train_wrf(const Dataset& train, const ForestParams& params, double r,
                    const CostVector& costs, std::uint64_t seed,
                    Vulnerability vulnerability = Vulnerability::kDifferentialRatio);

// Single full-data, full-feature, unweighted entropy tree.
ModelPool train_single_tree(const Dataset& train, const TreeParams& params,
                            std::uint64_t seed);

struct Vote {
  Label label;
  std::size_t positive_votes;
};

// Positive iff positive votes >= ceil(n / 2).
Vote predict_pool(std::span<const DecisionTree> trees, std::span<const double> x);
Vote predict_pool(const ModelPool& pool, std::span<const std::size_t> indices,
                  std::span<const double> x);
inline std::size_t majority_threshold(std::size_t n) { return (n + 1) / 2; }

// Number of trees whose feature set contains each feature.
std::vector<std::size_t> feature_usage_counts(const ModelPool& pool);

}  // namespace cwrf
