#include "cwrf/model.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cwrf/error.hpp"
#include "cwrf/rng.hpp"

namespace cwrf {

namespace fs = std::filesystem;
using nlohmann::json;

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kRf:
      return "rf";
    case Algorithm::kC45:
      return "c45";
    case Algorithm::kIg:
      return "ig";
    case Algorithm::kWrf:
      return "wrf";
    case Algorithm::kCwrf:
      return "cwrf";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (const auto a :
       {Algorithm::kRf, Algorithm::kC45, Algorithm::kIg, Algorithm::kWrf, Algorithm::kCwrf}) {
    if (name == algorithm_name(a)) return a;
  }
  fail(ErrorCategory::kConfig,
       "unknown algorithm '" + name + "' (expected rf, c45, ig, wrf or cwrf)");
}

void ModelSettings::validate() const {
  const auto bad = [](const std::string& msg) { fail(ErrorCategory::kConfig, msg); };
  if (num_trees < 1) bad("M must be at least 1");
  if (!(r >= 0.0) || !std::isfinite(r)) bad("r must be a nonnegative number");
  if (algorithm == Algorithm::kCwrf) {
    if (s < 1) bad("cwrf requires s >= 1");
    if (q < 1) bad("cwrf requires q >= 1");
    if (s > num_trees) bad("cwrf requires s <= M");
  }
}

Model train_model(const Dataset& train, const ModelSettings& settings, const CostVector& costs,
                  std::uint64_t seed) {
  settings.validate();
  const std::size_t m = train.num_features();
  if (costs.size() != m) fail(ErrorCategory::kConfig, "cost vector length does not match schema");
  if (settings.subspace_size > m) fail(ErrorCategory::kConfig, "F exceeds the number of features");
  ForestParams fp{settings.num_trees, settings.subspace_size, settings.tree};

  Model model;
  model.algorithm = settings.algorithm;
  model.schema = train.schema_ptr();
  switch (settings.algorithm) {
    case Algorithm::kRf:
      model.pool = std::make_shared<ModelPool>(
          train_random_forest(train, fp, WeightVector::uniform(m), seed));
      break;
    case Algorithm::kC45:
      model.pool = std::make_shared<ModelPool>(train_single_tree(train, settings.tree, seed));
      break;
    case Algorithm::kIg:
      model.pool = std::make_shared<ModelPool>(
          train_wrf(train, fp, settings.r, costs, seed, Vulnerability::kInformationGain));
      break;
    case Algorithm::kWrf:
    case Algorithm::kCwrf:
      model.pool = std::make_shared<ModelPool>(train_wrf(train, fp, settings.r, costs, seed));
      break;
  }
  if (settings.algorithm == Algorithm::kCwrf) {
    const auto graph = build_similarity_graph(*model.pool);
    model.clustering = std::make_shared<Clustering>(
        spectral_clustering(graph, settings.s, derive_seed(seed, stream::kCluster)));
    model.q = settings.q;
  }
  return model;
}

ModelOracle make_oracle(const Model& model, std::uint64_t seed) {
  if (model.clustering) return clustered_oracle(model.pool, model.clustering, model.q, seed);
  return full_pool_oracle(model.pool);
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::kIo, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorCategory::kIo, "write failed for '" + path.string() + "'");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tree_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tree_%03zu.txt", i);
  return buf;
}

}  // namespace

void save_model(const Model& model, const std::string& dir) {
  require(model.pool && model.schema, "save: incomplete model");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCategory::kIo, "cannot create directory '" + dir + "': " + ec.message());
  const auto& pool = *model.pool;

  json trees = json::array();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto name = tree_file_name(i);
    write_file(fs::path(dir) / name, tree_to_text(pool.trees[i]));
    trees.push_back(name);
  }
  write_file(fs::path(dir) / "schema.txt", format_schema(*model.schema));
  json manifest = {{"format", "cwrf-pool"},
                   {"version", 1},
                   {"algorithm", algorithm_name(model.algorithm)},
                   {"provenance", provenance_name(pool.provenance)},
                   {"M", pool.size()},
                   {"F", pool.subspace_size},
                   {"r", pool.r},
                   {"seed", pool.seed},
                   {"num_features", pool.num_features()},
                   {"weights", pool.weights_used.values()},
                   {"per_feature_ratio", pool.per_feature_ratio},
                   {"prior_vulnerability", pool.prior_vulnerability},
                   {"schema", "schema.txt"},
                   {"trees", trees}};
  if (model.clustering) {
    write_file(fs::path(dir) / "clustering.txt",
               clustering_to_text(*model.clustering, build_similarity_graph(pool)));
    manifest["clustering"] = "clustering.txt";
    manifest["s"] = model.clustering->num_clusters;
    manifest["q"] = model.q;
  }
  write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

Model load_model(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(fs::path(dir) / "manifest.json"));
  } catch (const json::exception& e) {
    fail(ErrorCategory::kFormat, "manifest.json: " + std::string(e.what()));
  }
  try {
    if (manifest.at("format") != "cwrf-pool" || manifest.at("version") != 1) {
      fail(ErrorCategory::kFormat, "manifest.json: not a version 1 pool manifest");
    }
    Model model;
    model.algorithm = parse_algorithm(manifest.at("algorithm").get<std::string>());
    std::istringstream schema_text(
        read_file(fs::path(dir) / manifest.at("schema").get<std::string>()));
    model.schema = std::make_shared<FeatureSchema>(parse_schema(schema_text));

    auto pool = std::make_shared<ModelPool>();
    pool->provenance = parse_provenance(manifest.at("provenance").get<std::string>());
    pool->subspace_size = manifest.at("F").get<std::size_t>();
    pool->r = manifest.at("r").get<double>();
    pool->seed = manifest.at("seed").get<std::uint64_t>();
    pool->weights_used = WeightVector(manifest.at("weights").get<std::vector<double>>());
    pool->per_feature_ratio = manifest.at("per_feature_ratio").get<std::vector<double>>();
    pool->prior_vulnerability = manifest.at("prior_vulnerability").get<std::vector<double>>();
    for (const auto& name : manifest.at("trees")) {
      pool->trees.push_back(tree_from_text(read_file(fs::path(dir) / name.get<std::string>())));
    }
    const auto m = manifest.at("num_features").get<std::size_t>();
    if (pool->trees.size() != manifest.at("M").get<std::size_t>() ||
        pool->weights_used.size() != m || model.schema->size() != m ||
        pool->per_feature_ratio.size() != m) {
      fail(ErrorCategory::kFormat, "manifest.json: inconsistent pool dimensions");
    }
    for (const auto& t : pool->trees) {
      if (!t.feature_set().empty() && t.feature_set().back() >= m) {
        fail(ErrorCategory::kFormat, "tree references a feature outside the schema");
      }
    }
    if (manifest.contains("clustering")) {
      auto c = clustering_from_text(
          read_file(fs::path(dir) / manifest.at("clustering").get<std::string>()));
      if (c.assignment.size() != pool->size()) {
        fail(ErrorCategory::kFormat, "clustering does not cover the pool");
      }
      model.clustering = std::make_shared<Clustering>(std::move(c));
      model.q = manifest.at("q").get<std::size_t>();
    }
    model.pool = std::move(pool);
    return model;
  } catch (const json::exception& e) {
    fail(ErrorCategory::kFormat, "manifest.json: " + std::string(e.what()));
  }
}

}  // namespace cwrf
