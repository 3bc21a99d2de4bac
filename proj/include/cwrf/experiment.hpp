#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cwrf/attack.hpp"
#include "cwrf/model.hpp"

namespace cwrf {

struct ExperimentConfig {
  std::string data_path;
  std::string schema_path;
  std::optional<std::string> costs_path;
  ModelSettings model;
  Knowledge knowledge = Knowledge::kIncomplete;
  std::vector<std::size_t> k_values;  // bounded budgets
  bool unbounded = true;
  std::size_t repeats = 20;
  std::uint64_t seed = 1;
  std::string out;
  double train_fraction = 0.7;
  bool stratified = false;
  std::size_t n_probe = 50;
  std::size_t max_steps = 0;  // 0 = number of features
  bool keep_traces = false;

  bool attacks() const { return unbounded || !k_values.empty(); }
  // Throws kConfig on inconsistent values.
  void validate() const;
};

// Keys mirror the CLI flags: data, schema, costs, algorithm, M, F, r, s, q,
// max_depth, min_node_size, knowledge, k, unbounded, repeats, seed, out,
// train_fraction, stratified, n_probe, max_steps, traces. Unknown keys are
// rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& c);

using Metrics = std::vector<std::pair<std::string, double>>;

struct RepeatReport {
  std::size_t repeat = 0;
  Metrics metrics;
  Metrics timings;  // seconds per phase
  std::vector<AttackResult> attacks;  // traces kept only with keep_traces
};

struct MetricsReport {
  ExperimentConfig config;
  std::vector<RepeatReport> repeats;

  // Arithmetic mean over repeats, in first-repeat metric order.
  Metrics mean() const;
  double mean(const std::string& metric) const;
};

struct ClassificationRates {
  double true_positive_rate = 0.0;
  double false_positive_rate = 0.0;
};
ClassificationRates evaluate_rates(const ModelOracle& oracle, const Dataset& test);

// Split, train, score, probe and attack for every repeat.
MetricsReport run_experiment(const ExperimentConfig& config);
MetricsReport run_experiment(const ExperimentConfig& config, const Dataset& data,
                             const CostVector& costs);

// Columns repeat,metric,value; repeat is "mean" for the aggregate rows.
void write_report_csv(std::ostream& out, const MetricsReport& report);
nlohmann::json report_to_json(const MetricsReport& report);
void write_timings_csv(std::ostream& out, const MetricsReport& report);
void write_traces_jsonl(std::ostream& out, const MetricsReport& report);

enum class SweepParameter { kR, kS, kQ, kK, kM };
SweepParameter parse_sweep_parameter(const std::string& name);
const char* sweep_parameter_name(SweepParameter p);

struct SweepResult {
  SweepParameter parameter = SweepParameter::kR;
  std::vector<double> values;
  std::vector<MetricsReport> reports;
};

SweepResult sweep(const ExperimentConfig& config, SweepParameter parameter,
                  const std::vector<double>& values);
SweepResult sweep(const ExperimentConfig& config, SweepParameter parameter,
                  const std::vector<double>& values, const Dataset& data,
                  const CostVector& costs);
// Columns parameter,parameter_value,repeat,metric,value.
void write_sweep_csv(std::ostream& out, const SweepResult& result);
nlohmann::json sweep_to_json(const SweepResult& result);

struct FeatureUsage {
  std::size_t feature;
  std::string name;
  std::size_t trees;
};
// Per-feature tree counts, descending (ties by feature index).
std::vector<FeatureUsage> feature_usage_histogram(const ModelPool& pool,
                                                  const FeatureSchema& schema);
// Pool trained as in the first repeat of run_experiment.
ModelPool histogram_pool(const ExperimentConfig& config, const Dataset& data,
                         const CostVector& costs);

// Loads the config's dataset and cost file.
Dataset load_experiment_data(const ExperimentConfig& config);
CostVector load_experiment_costs(const ExperimentConfig& config, const FeatureSchema& schema);

}  // namespace cwrf
