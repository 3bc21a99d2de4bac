// Command-line front end: train, evaluate, attack, certify, sweep, histogram
// and generate.
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cwrf/attack.hpp"
#include "cwrf/error.hpp"
#include "cwrf/experiment.hpp"
#include "cwrf/model.hpp"
#include "cwrf/rng.hpp"
#include "cwrf/robustness.hpp"
#include "cwrf/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::string data, schema, costs, algorithm, knowledge, out;
  std::size_t M = 0, F = 0, s = 0, q = 0, repeats = 0, max_depth = 0, min_node_size = 0, n_probe = 0;
  double r = 0.0, train_fraction = 0.0;
  std::vector<std::size_t> k;
  bool unbounded = false, traces = false;
  std::uint64_t seed = 0;
  std::vector<CLI::Option*> set;
};

// Registers the shared experiment flags on `cmd`.
void add_experiment_flags(CLI::App* cmd, Flags& f, bool with_out = true) {
  cmd->add_option("--config", f.config, "JSON experiment config; flags override it");
  cmd->add_option("--data", f.data, "CSV dataset");
  cmd->add_option("--schema", f.schema, "schema file");
  cmd->add_option("--costs", f.costs, "feature cost file (name,cost lines)");
  cmd->add_option("--algorithm", f.algorithm, "rf, c45, ig, wrf or cwrf");
  cmd->add_option("--M", f.M, "number of trees");
  cmd->add_option("--F", f.F, "features drawn per node (0 = round(sqrt(m)))");
  cmd->add_option("--r", f.r, "vulnerability penalty");
  cmd->add_option("--s", f.s, "number of clusters (cwrf)");
  cmd->add_option("--q", f.q, "trees drawn per cluster per query (cwrf)");
  cmd->add_option("--k", f.k, "bounded attack budgets")->delimiter(',');
  cmd->add_flag("--unbounded", f.unbounded, "also run the unbounded attack when --k is given");
  cmd->add_option("--knowledge", f.knowledge, "incomplete or complete");
  cmd->add_option("--repeats", f.repeats, "number of repeats");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--max-depth", f.max_depth, "tree depth limit (0 = none)");
  cmd->add_option("--min-node-size", f.min_node_size, "smallest node that may be split");
  cmd->add_option("--n-probe", f.n_probe, "positive instances probed");
  cmd->add_option("--train-fraction", f.train_fraction, "share of rows used for training");
  cmd->add_flag("--traces", f.traces, "write attack traces");
  if (with_out) cmd->add_option("--out", f.out, "output location");
}

bool given(const CLI::App* cmd, const char* name) { return cmd->count(name) > 0; }

cwrf::ExperimentConfig build_config(const CLI::App* cmd, const Flags& f) {
  auto c = f.config.empty() ? cwrf::ExperimentConfig{} : cwrf::load_config(f.config);
  if (given(cmd, "--data")) c.data_path = f.data;
  if (given(cmd, "--schema")) c.schema_path = f.schema;
  if (given(cmd, "--costs")) c.costs_path = f.costs;
  if (given(cmd, "--algorithm")) c.model.algorithm = cwrf::parse_algorithm(f.algorithm);
  if (given(cmd, "--M")) c.model.num_trees = f.M;
  if (given(cmd, "--F")) c.model.subspace_size = f.F;
  if (given(cmd, "--r")) c.model.r = f.r;
  if (given(cmd, "--s")) c.model.s = f.s;
  if (given(cmd, "--q")) c.model.q = f.q;
  if (given(cmd, "--k")) {
    c.k_values = f.k;
    c.unbounded = f.unbounded;
  } else if (given(cmd, "--unbounded")) {
    c.unbounded = true;
  }
  if (given(cmd, "--knowledge")) c.knowledge = cwrf::parse_knowledge(f.knowledge);
  if (given(cmd, "--repeats")) c.repeats = f.repeats;
  if (given(cmd, "--seed")) c.seed = f.seed;
  if (given(cmd, "--max-depth")) c.model.tree.max_depth = f.max_depth;
  if (given(cmd, "--min-node-size")) c.model.tree.min_node_size = f.min_node_size;
  if (given(cmd, "--n-probe")) c.n_probe = f.n_probe;
  if (given(cmd, "--train-fraction")) c.train_fraction = f.train_fraction;
  if (given(cmd, "--traces")) c.keep_traces = f.traces;
  if (cmd->get_option_no_throw("--out") && given(cmd, "--out")) c.out = f.out;
  c.validate();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) cwrf::fail(cwrf::ErrorCategory::kIo, "cannot create '" + path.parent_path().string() + "'");
  std::ofstream out(path, std::ios::binary);
  if (!out) cwrf::fail(cwrf::ErrorCategory::kIo, "cannot write '" + path.string() + "'");
  out << text;
}

std::string require_out(const std::string& out, const char* what) {
  if (out.empty()) cwrf::fail(cwrf::ErrorCategory::kConfig, std::string(what) + " needs --out");
  return out;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void print_means(const cwrf::MetricsReport& report) {
  for (const auto& [name, value] : report.mean()) std::cout << name << ' ' << fmt(value) << '\n';
}

void write_report(const cwrf::MetricsReport& report, const std::string& dir) {
  std::ostringstream csv, timings, traces;
  cwrf::write_report_csv(csv, report);
  cwrf::write_timings_csv(timings, report);
  write_text(fs::path(dir) / "report.csv", csv.str());
  write_text(fs::path(dir) / "summary.json", cwrf::report_to_json(report).dump(2) + "\n");
  write_text(fs::path(dir) / "timings.csv", timings.str());
  if (report.config.keep_traces) {
    cwrf::write_traces_jsonl(traces, report);
    write_text(fs::path(dir) / "traces.jsonl", traces.str());
  }
}

int run_train(const CLI::App* cmd, const Flags& f) {
  const auto config = build_config(cmd, f);
  const auto dir = require_out(config.out, "train");
  const auto data = cwrf::load_experiment_data(config);
  const auto costs = cwrf::load_experiment_costs(config, data.schema());
  const auto model = cwrf::train_model(data, config.model, costs, config.seed);
  cwrf::save_model(model, dir);
  std::cout << "trained " << cwrf::algorithm_name(model.algorithm) << " pool of "
            << model.pool->size() << " trees -> " << dir << '\n';
  return 0;
}

int run_evaluate(const CLI::App* cmd, const Flags& f, const std::string& model_dir) {
  if (!model_dir.empty()) {
    const auto model = cwrf::load_model(model_dir);
    if (f.data.empty()) cwrf::fail(cwrf::ErrorCategory::kConfig, "evaluate --model needs --data");
    const auto data = cwrf::load_dataset(f.data, *model.schema, {.require_both_classes = false});
    const auto rates = cwrf::evaluate_rates(
        cwrf::make_oracle(model, cwrf::derive_seed(f.seed, cwrf::stream::kEvaluate)), data);
    const json j = {{"tpr", std::isfinite(rates.true_positive_rate) ? json(rates.true_positive_rate) : json(nullptr)},
                    {"fpr", std::isfinite(rates.false_positive_rate) ? json(rates.false_positive_rate) : json(nullptr)},
                    {"rows", data.size()}};
    std::cout << "tpr " << fmt(rates.true_positive_rate) << "\nfpr "
              << fmt(rates.false_positive_rate) << '\n';
    if (!f.out.empty()) write_text(f.out, j.dump(2) + "\n");
    return 0;
  }
  const auto config = build_config(cmd, f);
  const auto report = cwrf::run_experiment(config);
  print_means(report);
  if (!config.out.empty()) write_report(report, config.out);
  return 0;
}

int run_attack(const CLI::App* cmd, const Flags& f, const std::string& model_dir) {
  if (model_dir.empty()) cwrf::fail(cwrf::ErrorCategory::kConfig, "attack needs --model");
  if (f.data.empty()) cwrf::fail(cwrf::ErrorCategory::kConfig, "attack needs --data");
  const auto model = cwrf::load_model(model_dir);
  const auto data = cwrf::load_dataset(f.data, *model.schema);
  const auto mode = given(cmd, "--knowledge") ? cwrf::parse_knowledge(f.knowledge)
                                              : cwrf::Knowledge::kIncomplete;
  const auto split =
      cwrf::make_knowledge_split(data, mode, cwrf::derive_seed(f.seed, cwrf::stream::kKnowledge));
  const auto profile = cwrf::negative_profile(split.probing);
  const auto oracle = cwrf::make_oracle(model, cwrf::derive_seed(f.seed, cwrf::stream::kOracle));
  cwrf::ProbeOptions probe;
  probe.n_probe = mode == cwrf::Knowledge::kComplete ? 0 : (given(cmd, "--n-probe") ? f.n_probe : 50);
  const auto order = cwrf::learn_attack_order(oracle, split.probing, profile, probe,
                                              cwrf::derive_seed(f.seed, cwrf::stream::kProbe));
  std::vector<cwrf::AttackResult> results;
  for (const auto k : f.k) results.push_back(cwrf::attack_bounded(oracle, split.attacking, order, k, profile));
  if ((f.k.empty() || f.unbounded) && !order.features.empty()) {
    results.push_back(cwrf::attack_unbounded(oracle, split.attacking, order, profile));
  }
  json summary = {{"order", order.features}, {"results", json::array()}};
  std::ostringstream traces;
  for (const auto& r : results) {
    const bool bounded = r.mode == cwrf::AttackMode::kBounded;
    summary["results"].push_back({{"mode", bounded ? "bounded" : "unbounded"},
                                  {"k", r.k},
                                  {"attacked", r.attacked},
                                  {"evaded", r.evaded},
                                  {"exhausted", r.exhausted},
                                  {"already_evading", r.already_evading},
                                  {"success_rate", r.success_rate},
                                  {"avg_modified", r.avg_modified}});
    if (bounded) {
      std::cout << "k=" << r.k << " success_rate " << fmt(r.success_rate) << '\n';
    } else {
      std::cout << "unbounded avg_modified " << fmt(r.avg_modified) << " exhausted "
                << r.exhausted << '\n';
    }
    cwrf::write_traces_jsonl(traces, r, *model.schema);
  }
  if (order.features.empty()) std::cout << "probing recorded no features\n";
  if (!f.out.empty()) {
    write_text(fs::path(f.out) / "traces.jsonl", traces.str());
    write_text(fs::path(f.out) / "attack.json", summary.dump(2) + "\n");
  }
  return 0;
}

int run_certify(const Flags& f, const std::string& model_dir, std::size_t k_max) {
  if (model_dir.empty()) cwrf::fail(cwrf::ErrorCategory::kConfig, "certify needs --model");
  const auto model = cwrf::load_model(model_dir);
  const auto costs = f.costs.empty() ? cwrf::CostVector::uniform(model.schema->size())
                                     : cwrf::load_costs(f.costs, *model.schema);
  const std::size_t m = model.schema->size();
  const std::size_t top = k_max == 0 ? std::min<std::size_t>(m, 10) : std::min(k_max, m);
  std::ostringstream table;
  table << "bound,k,t1,t2,required_margin,voters\n";
  const auto row = [&](const char* bound, const cwrf::Certificate& c) {
    table << bound << ',' << c.k << ',' << c.t1 << ',' << c.t2 << ',' << c.required_margin << ','
          << c.voters << '\n';
  };
  for (std::size_t k = 1; k <= top; ++k) row("pool", cwrf::certify(model.pool->trees, costs, k));
  if (model.clustering) {
    for (std::size_t k = 1; k <= top; ++k) {
      row("clustered", cwrf::clustering_bound(*model.clustering, model.pool->trees, model.q, k, costs));
    }
  }
  std::cout << table.str();
  if (!f.out.empty()) write_text(f.out, table.str());
  return 0;
}

int run_sweep(const CLI::App* cmd, const Flags& f, const std::string& param,
              const std::vector<double>& values) {
  const auto config = build_config(cmd, f);
  const auto result = cwrf::sweep(config, cwrf::parse_sweep_parameter(param), values);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::cout << param << '=' << values[i];
    for (const auto& [name, value] : result.reports[i].mean()) std::cout << ' ' << name << '=' << fmt(value);
    std::cout << '\n';
  }
  if (!config.out.empty()) {
    std::ostringstream csv;
    cwrf::write_sweep_csv(csv, result);
    write_text(fs::path(config.out) / "sweep.csv", csv.str());
    write_text(fs::path(config.out) / "sweep.json", cwrf::sweep_to_json(result).dump(2) + "\n");
  }
  return 0;
}

int run_histogram(const CLI::App* cmd, const Flags& f, const std::string& model_dir) {
  cwrf::ModelPool pool;
  std::shared_ptr<const cwrf::FeatureSchema> schema;
  std::string out = f.out;
  if (!model_dir.empty()) {
    const auto model = cwrf::load_model(model_dir);
    pool = *model.pool;
    schema = model.schema;
  } else {
    const auto config = build_config(cmd, f);
    const auto data = cwrf::load_experiment_data(config);
    pool = cwrf::histogram_pool(config, data, cwrf::load_experiment_costs(config, data.schema()));
    schema = data.schema_ptr();
  }
  const auto hist = cwrf::feature_usage_histogram(pool, *schema);
  std::ostringstream csv;
  csv << "rank,feature,name,trees\n";
  std::size_t frequent = 0;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    csv << i + 1 << ',' << hist[i].feature << ',' << hist[i].name << ',' << hist[i].trees << '\n';
    frequent += 5 * hist[i].trees >= 4 * pool.size();
  }
  std::cout << csv.str() << "features in at least 80% of " << pool.size()
            << " trees: " << frequent << '\n';
  if (!out.empty()) write_text(out, csv.str());
  return 0;
}

int run_generate(const cwrf::SyntheticParams& p, const std::string& out) {
  const auto dir = require_out(out, "generate");
  const auto d = cwrf::make_synthetic(p);
  std::ostringstream csv;
  cwrf::write_dataset_csv(csv, d);
  write_text(fs::path(dir) / "synthetic.csv", csv.str());
  write_text(fs::path(dir) / "synthetic.schema", cwrf::format_schema(d.schema()));
  std::cout << "wrote " << d.size() << " rows (" << d.count(cwrf::Label::kPositive)
            << " positive) to " << dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomness-hardened random forests and evasion attack simulation"};
  app.require_subcommand(1);
  Flags f;
  std::string model_dir;
  std::size_t k_max = 0;
  std::string sweep_param;
  std::vector<double> sweep_values;
  cwrf::SyntheticParams synth;

  auto* train = app.add_subcommand("train", "train a pool on a dataset and save it");
  add_experiment_flags(train, f);
  auto* evaluate = app.add_subcommand("evaluate", "run the repeated experiment, or score a saved model");
  add_experiment_flags(evaluate, f);
  evaluate->add_option("--model", model_dir, "saved model directory to score on --data");
  auto* attack = app.add_subcommand("attack", "probe and attack a saved model");
  add_experiment_flags(attack, f);
  attack->add_option("--model", model_dir, "saved model directory")->required();
  auto* certify = app.add_subcommand("certify", "print robustness certificates for a saved model");
  certify->add_option("--model", model_dir, "saved model directory")->required();
  certify->add_option("--costs", f.costs, "feature cost file");
  certify->add_option("--k", k_max, "largest budget (default min(m, 10))");
  certify->add_option("--out", f.out, "CSV output file");
  auto* sweep = app.add_subcommand("sweep", "repeat the experiment over parameter values");
  add_experiment_flags(sweep, f);
  sweep->add_option("--param", sweep_param, "r, s, q, k or M")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->delimiter(',')->required();
  auto* histogram = app.add_subcommand("histogram", "tree counts per feature");
  add_experiment_flags(histogram, f);
  histogram->add_option("--model", model_dir, "saved model directory");
  auto* generate = app.add_subcommand("generate", "write the synthetic mixed-type dataset");
  generate->add_option("--rows", synth.rows, "rows");
  generate->add_option("--numeric", synth.numeric, "numeric features");
  generate->add_option("--categorical", synth.categorical, "categorical features");
  generate->add_option("--categories", synth.categories, "categories per categorical feature");
  generate->add_option("--informative", synth.informative, "numeric features in the label rule");
  generate->add_option("--noise", synth.label_noise, "label flip probability");
  generate->add_option("--seed", synth.seed, "seed");
  generate->add_option("--out", f.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cwrf::exit_code(cwrf::ErrorCategory::kInvalidArgument);
  }

  try {
    if (*train) return run_train(train, f);
    if (*evaluate) return run_evaluate(evaluate, f, model_dir);
    if (*attack) return run_attack(attack, f, model_dir);
    if (*certify) return run_certify(f, model_dir, k_max);
    if (*sweep) return run_sweep(sweep, f, sweep_param, sweep_values);
    if (*histogram) return run_histogram(histogram, f, model_dir);
    if (*generate) return run_generate(synth, f.out);
  } catch (const cwrf::Error& e) {
    std::cerr << "error [" << cwrf::category_name(e.category()) << "]: " << e.what() << '\n';
    return cwrf::exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
