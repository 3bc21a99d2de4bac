#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "cwrf/attack.hpp"
#include "cwrf/cluster.hpp"
#include "cwrf/forest.hpp"

namespace cwrf {

enum class Algorithm { kRf, kC45, kIg, kWrf, kCwrf };
const char* algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct ModelSettings {
  Algorithm algorithm = Algorithm::kRf;
  std::size_t num_trees = 100;
  std::size_t subspace_size = 0;  // 0 = round(sqrt(m))
  double r = 0.0;
  std::size_t s = 10;
  std::size_t q = 5;
  TreeParams tree;

  // Throws kConfig on inconsistent values.
  void validate() const;
};

// A trained defense: the pool plus, for cwrf, its clustering.
struct Model {
  Algorithm algorithm = Algorithm::kRf;
  std::shared_ptr<const FeatureSchema> schema;
  std::shared_ptr<const ModelPool> pool;
  std::shared_ptr<const Clustering> clustering;
  std::size_t q = 0;
};

Model train_model(const Dataset& train, const ModelSettings& settings, const CostVector& costs,
                  std::uint64_t seed);

// Oracle answering with the model's prediction rule; `seed` drives the cwrf
// per-query selection.
ModelOracle make_oracle(const Model& model, std::uint64_t seed);

// Directory layout: manifest.json, schema.txt, tree_NNN.txt per tree and
// clustering.txt for cwrf models.
void save_model(const Model& model, const std::string& dir);
Model load_model(const std::string& dir);

}  // namespace cwrf
