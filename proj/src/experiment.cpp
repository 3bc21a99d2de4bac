#include "cwrf/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "cwrf/error.hpp"
#include "cwrf/parallel.hpp"
#include "cwrf/rng.hpp"

namespace cwrf {

using nlohmann::json;

void ExperimentConfig::validate() const {
  const auto bad = [](const std::string& msg) { fail(ErrorCategory::kConfig, msg); };
  model.validate();
  if (repeats < 1) bad("repeats must be at least 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) bad("train_fraction must lie in (0, 1)");
  for (const auto k : k_values) {
    if (k < 1) bad("every k must be at least 1");
  }
}

namespace {

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCategory::kConfig, std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCategory::kConfig, "config must be a JSON object");
  static const std::set<std::string> known = {
      "data",     "schema",  "costs",   "algorithm",      "M",          "F",
      "r",        "s",       "q",       "max_depth",      "min_node_size", "knowledge",
      "k",        "unbounded", "repeats", "seed",         "out",        "train_fraction",
      "stratified", "n_probe", "max_steps", "traces"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) fail(ErrorCategory::kConfig, "unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  if (j.contains("data")) c.data_path = get<std::string>(j, "data");
  if (j.contains("schema")) c.schema_path = get<std::string>(j, "schema");
  if (j.contains("costs")) c.costs_path = get<std::string>(j, "costs");
  if (j.contains("algorithm")) c.model.algorithm = parse_algorithm(get<std::string>(j, "algorithm"));
  if (j.contains("M")) c.model.num_trees = get<std::size_t>(j, "M");
  if (j.contains("F")) c.model.subspace_size = get<std::size_t>(j, "F");
  if (j.contains("r")) c.model.r = get<double>(j, "r");
  if (j.contains("s")) c.model.s = get<std::size_t>(j, "s");
  if (j.contains("q")) c.model.q = get<std::size_t>(j, "q");
  if (j.contains("max_depth")) c.model.tree.max_depth = get<std::size_t>(j, "max_depth");
  if (j.contains("min_node_size")) c.model.tree.min_node_size = get<std::size_t>(j, "min_node_size");
  if (j.contains("knowledge")) c.knowledge = parse_knowledge(get<std::string>(j, "knowledge"));
  if (j.contains("k")) {
    c.k_values = j.at("k").is_array() ? get<std::vector<std::size_t>>(j, "k")
                                      : std::vector<std::size_t>{get<std::size_t>(j, "k")};
    c.unbounded = false;
  }
  if (j.contains("unbounded")) c.unbounded = get<bool>(j, "unbounded");
  if (j.contains("repeats")) c.repeats = get<std::size_t>(j, "repeats");
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed");
  if (j.contains("out")) c.out = get<std::string>(j, "out");
  if (j.contains("train_fraction")) c.train_fraction = get<double>(j, "train_fraction");
  if (j.contains("stratified")) c.stratified = get<bool>(j, "stratified");
  if (j.contains("n_probe")) c.n_probe = get<std::size_t>(j, "n_probe");
  if (j.contains("max_steps")) c.max_steps = get<std::size_t>(j, "max_steps");
  if (j.contains("traces")) c.keep_traces = get<bool>(j, "traces");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::kIo, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCategory::kConfig, "config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

json config_to_json(const ExperimentConfig& c) {
  json j = {{"data", c.data_path},
            {"schema", c.schema_path},
            {"algorithm", algorithm_name(c.model.algorithm)},
            {"M", c.model.num_trees},
            {"F", c.model.subspace_size},
            {"r", c.model.r},
            {"s", c.model.s},
            {"q", c.model.q},
            {"max_depth", c.model.tree.max_depth},
            {"min_node_size", c.model.tree.min_node_size},
            {"knowledge", knowledge_name(c.knowledge)},
            {"k", c.k_values},
            {"unbounded", c.unbounded},
            {"repeats", c.repeats},
            {"seed", c.seed},
            {"train_fraction", c.train_fraction},
            {"stratified", c.stratified},
            {"n_probe", c.n_probe},
            {"max_steps", c.max_steps},
            {"traces", c.keep_traces}};
  if (c.costs_path) j["costs"] = *c.costs_path;
  if (!c.out.empty()) j["out"] = c.out;
  return j;
}

Metrics MetricsReport::mean() const {
  Metrics out;
  if (repeats.empty()) return out;
  for (const auto& [name, unused] : repeats.front().metrics) out.emplace_back(name, mean(name));
  return out;
}

double MetricsReport::mean(const std::string& metric) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : repeats) {
    for (const auto& [name, value] : r.metrics) {
      if (name == metric && std::isfinite(value)) {
        sum += value;
        ++n;
      }
    }
  }
  return n == 0 ? std::nan("") : sum / static_cast<double>(n);
}

ClassificationRates evaluate_rates(const ModelOracle& oracle, const Dataset& test) {
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const bool predicted = oracle.classify(test.row(i)) == Label::kPositive;
    if (!predicted) continue;
    (test.label(i) == Label::kPositive ? tp : fp) += 1;
  }
  const auto pos = test.count(Label::kPositive);
  const auto neg = test.count(Label::kNegative);
  return {pos ? static_cast<double>(tp) / static_cast<double>(pos) : std::nan(""),
          neg ? static_cast<double>(fp) / static_cast<double>(neg) : std::nan("")};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string k_metric(std::size_t k) { return "success_rate_k" + std::to_string(k); }

struct RepeatSeeds {
  std::uint64_t split, train, evaluate, knowledge, oracle, probe;
};

RepeatSeeds repeat_seeds(std::uint64_t master, std::size_t repeat) {
  const auto rs = derive_seed(master, stream::kRepeat, repeat);
  return {derive_seed(rs, stream::kSplit),     derive_seed(rs, stream::kTree),
          derive_seed(rs, stream::kEvaluate),  derive_seed(rs, stream::kKnowledge),
          derive_seed(rs, stream::kOracle),    derive_seed(rs, stream::kProbe)};
}

RepeatReport run_repeat(const ExperimentConfig& config, const Dataset& data,
                        const CostVector& costs, std::size_t repeat) {
  const auto seeds = repeat_seeds(config.seed, repeat);
  RepeatReport report;
  report.repeat = repeat;

  auto start = Clock::now();
  const auto split =
      split_train_test(data, config.train_fraction, seeds.split, config.stratified);
  const auto model = train_model(split.train, config.model, costs, seeds.train);
  report.timings.emplace_back("train_seconds", seconds_since(start));

  start = Clock::now();
  const auto rates = evaluate_rates(make_oracle(model, seeds.evaluate), split.test);
  report.metrics.emplace_back("tpr", rates.true_positive_rate);
  report.metrics.emplace_back("fpr", rates.false_positive_rate);
  report.timings.emplace_back("evaluate_seconds", seconds_since(start));
  if (!config.attacks()) return report;

  start = Clock::now();
  const auto knowledge = make_knowledge_split(split.test, config.knowledge, seeds.knowledge);
  const auto profile = negative_profile(knowledge.probing);
  const auto oracle = make_oracle(model, seeds.oracle);
  ProbeOptions probe{config.knowledge == Knowledge::kComplete ? 0 : config.n_probe,
                     config.max_steps};
  const auto order = learn_attack_order(oracle, knowledge.probing, profile, probe, seeds.probe);
  report.metrics.emplace_back("order_length", static_cast<double>(order.features.size()));
  report.timings.emplace_back("probe_seconds", seconds_since(start));

  start = Clock::now();
  bool counted = false;
  const auto record_population = [&](const AttackResult& r) {
    if (counted) return;
    counted = true;
    report.metrics.emplace_back("attacked", static_cast<double>(r.attacked));
    report.metrics.emplace_back("already_evading", static_cast<double>(r.already_evading));
  };
  for (const auto k : config.k_values) {
    auto r = attack_bounded(oracle, knowledge.attacking, order, k, profile);
    record_population(r);
    report.metrics.emplace_back(k_metric(k), r.attacked ? r.success_rate : std::nan(""));
    if (!config.keep_traces) r.traces.clear();
    report.attacks.push_back(std::move(r));
  }
  if (config.unbounded) {
    AttackResult r;
    if (order.features.empty()) {
      // Nothing was learned, so every attacked instance exhausts the order.
      r = attack_bounded(oracle, knowledge.attacking, order, 1, profile);
      r.mode = AttackMode::kUnbounded;
      r.k = 0;
    } else {
      r = attack_unbounded(oracle, knowledge.attacking, order, profile);
    }
    record_population(r);
    report.metrics.emplace_back("avg_modified", r.evaded ? r.avg_modified : std::nan(""));
    report.metrics.emplace_back(
        "exhausted_fraction",
        r.attacked ? static_cast<double>(r.exhausted) / static_cast<double>(r.attacked)
                   : std::nan(""));
    if (!config.keep_traces) r.traces.clear();
    report.attacks.push_back(std::move(r));
  }
  report.timings.emplace_back("attack_seconds", seconds_since(start));
  return report;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Dataset load_experiment_data(const ExperimentConfig& config) {
  if (config.data_path.empty()) fail(ErrorCategory::kConfig, "no dataset path given");
  if (config.schema_path.empty()) fail(ErrorCategory::kConfig, "no schema path given");
  return load_dataset(config.data_path, load_schema(config.schema_path));
}

CostVector load_experiment_costs(const ExperimentConfig& config, const FeatureSchema& schema) {
  return config.costs_path ? load_costs(*config.costs_path, schema)
                           : CostVector::uniform(schema.size());
}

MetricsReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto data = load_experiment_data(config);
  return run_experiment(config, data, load_experiment_costs(config, data.schema()));
}

MetricsReport run_experiment(const ExperimentConfig& config, const Dataset& data,
                             const CostVector& costs) {
  config.validate();
  MetricsReport report;
  report.config = config;
  report.repeats.resize(config.repeats);
  parallel_for(config.repeats, [&](std::size_t i) {
    report.repeats[i] = run_repeat(config, data, costs, i);
  });
  return report;
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "repeat,metric,value\n";
  for (const auto& r : report.repeats) {
    for (const auto& [name, value] : r.metrics) {
      out << r.repeat << ',' << name << ',' << format_double(value) << '\n';
    }
  }
  for (const auto& [name, value] : report.mean()) {
    out << "mean," << name << ',' << format_double(value) << '\n';
  }
}

namespace {

json metrics_json(const Metrics& m) {
  json j = json::object();
  for (const auto& [name, value] : m) {
    j[name] = std::isfinite(value) ? json(value) : json(nullptr);
  }
  return j;
}

}  // namespace

json report_to_json(const MetricsReport& report) {
  json per = json::array();
  for (const auto& r : report.repeats) {
    per.push_back({{"repeat", r.repeat}, {"metrics", metrics_json(r.metrics)}});
  }
  return {{"config", config_to_json(report.config)},
          {"repeats", report.repeats.size()},
          {"mean", metrics_json(report.mean())},
          {"per_repeat", per}};
}

void write_timings_csv(std::ostream& out, const MetricsReport& report) {
  out << "repeat,phase,seconds\n";
  for (const auto& r : report.repeats) {
    for (const auto& [name, value] : r.timings) {
      out << r.repeat << ',' << name << ',' << format_double(value) << '\n';
    }
  }
}

void write_traces_jsonl(std::ostream& out, const MetricsReport& report) {
  for (const auto& r : report.repeats) {
    for (const auto& a : r.attacks) {
      for (const auto& t : a.traces) {
        json rec = {{"repeat", r.repeat},
                    {"mode", a.mode == AttackMode::kBounded ? "bounded" : "unbounded"},
                    {"k", a.k},
                    {"instance", t.instance},
                    {"modified", t.modified},
                    {"outcome", attack_outcome_name(t.outcome)},
                    {"queries", t.queries}};
        out << rec.dump() << '\n';
      }
    }
  }
}

SweepParameter parse_sweep_parameter(const std::string& name) {
  for (const auto p : {SweepParameter::kR, SweepParameter::kS, SweepParameter::kQ,
                       SweepParameter::kK, SweepParameter::kM}) {
    if (name == sweep_parameter_name(p)) return p;
  }
  fail(ErrorCategory::kConfig, "unknown sweep parameter '" + name + "' (expected r, s, q, k or M)");
}

const char* sweep_parameter_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::kR:
      return "r";
    case SweepParameter::kS:
      return "s";
    case SweepParameter::kQ:
      return "q";
    case SweepParameter::kK:
      return "k";
    case SweepParameter::kM:
      return "M";
  }
  return "unknown";
}

namespace {

std::size_t as_count(double v, const char* what) {
  if (!(v >= 0.0) || v != std::floor(v)) {
    fail(ErrorCategory::kConfig, std::string("sweep value for ") + what +
                                     " must be a nonnegative integer");
  }
  return static_cast<std::size_t>(v);
}

ExperimentConfig with_value(ExperimentConfig c, SweepParameter p, double v) {
  const auto a = c.model.algorithm;
  switch (p) {
    case SweepParameter::kR:
      if (a == Algorithm::kRf || a == Algorithm::kC45) {
        fail(ErrorCategory::kConfig, "r does not apply to algorithm " + std::string(algorithm_name(a)));
      }
      c.model.r = v;
      break;
    case SweepParameter::kS:
    case SweepParameter::kQ:
      if (a != Algorithm::kCwrf) fail(ErrorCategory::kConfig, "s and q apply only to cwrf");
      (p == SweepParameter::kS ? c.model.s : c.model.q) = as_count(v, "s/q");
      break;
    case SweepParameter::kK:
      c.k_values = {as_count(v, "k")};
      c.unbounded = false;
      break;
    case SweepParameter::kM:
      if (a == Algorithm::kC45) fail(ErrorCategory::kConfig, "M does not apply to c45");
      c.model.num_trees = as_count(v, "M");
      break;
  }
  return c;
}

}  // namespace

SweepResult sweep(const ExperimentConfig& config, SweepParameter parameter,
                  const std::vector<double>& values) {
  config.validate();
  const auto data = load_experiment_data(config);
  return sweep(config, parameter, values, data, load_experiment_costs(config, data.schema()));
}

SweepResult sweep(const ExperimentConfig& config, SweepParameter parameter,
                  const std::vector<double>& values, const Dataset& data,
                  const CostVector& costs) {
  if (values.empty()) fail(ErrorCategory::kConfig, "sweep needs at least one value");
  SweepResult result;
  result.parameter = parameter;
  result.values = values;
  for (const double v : values) {
    result.reports.push_back(run_experiment(with_value(config, parameter, v), data, costs));
  }
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "parameter,parameter_value,repeat,metric,value\n";
  const std::string p = sweep_parameter_name(result.parameter);
  for (std::size_t i = 0; i < result.values.size(); ++i) {
    const auto v = format_double(result.values[i]);
    for (const auto& r : result.reports[i].repeats) {
      for (const auto& [name, value] : r.metrics) {
        out << p << ',' << v << ',' << r.repeat << ',' << name << ',' << format_double(value)
            << '\n';
      }
    }
    for (const auto& [name, value] : result.reports[i].mean()) {
      out << p << ',' << v << ",mean," << name << ',' << format_double(value) << '\n';
    }
  }
}

json sweep_to_json(const SweepResult& result) {
  json rows = json::array();
  for (std::size_t i = 0; i < result.values.size(); ++i) {
    rows.push_back({{"value", result.values[i]}, {"mean", metrics_json(result.reports[i].mean())}});
  }
  json config = result.reports.empty() ? json::object() : config_to_json(result.reports[0].config);
  return {{"parameter", sweep_parameter_name(result.parameter)},
          {"config", config},
          {"rows", rows}};
}

std::vector<FeatureUsage> feature_usage_histogram(const ModelPool& pool,
                                                  const FeatureSchema& schema) {
  const auto counts = feature_usage_counts(pool);
  require(counts.size() == schema.size(), "histogram: schema does not match pool");
  std::vector<FeatureUsage> out;
  for (std::size_t j = 0; j < counts.size(); ++j) out.push_back({j, schema.feature(j).name, counts[j]});
  std::stable_sort(out.begin(), out.end(),
                   [](const FeatureUsage& a, const FeatureUsage& b) { return a.trees > b.trees; });
  return out;
}

ModelPool histogram_pool(const ExperimentConfig& config, const Dataset& data,
                         const CostVector& costs) {
  config.validate();
  const auto seeds = repeat_seeds(config.seed, 0);
  const auto split = split_train_test(data, config.train_fraction, seeds.split, config.stratified);
  return *train_model(split.train, config.model, costs, seeds.train).pool;
}

}  // namespace cwrf
