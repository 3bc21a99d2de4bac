#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cwrf/error.hpp"
#include "cwrf/experiment.hpp"
#include "cwrf/synthetic.hpp"

using namespace cwrf;
namespace fs = std::filesystem;

namespace {

Dataset small_data() {
  SyntheticParams p;
  p.rows = 500;
  p.seed = 3;
  return make_synthetic(p);
}

ExperimentConfig small_config(Algorithm a) {
  ExperimentConfig c;
  c.model.algorithm = a;
  c.model.num_trees = 10;
  c.model.r = 1.5;
  c.model.s = 3;
  c.model.q = 2;
  c.model.tree.max_depth = 5;
  c.k_values = {1, 2};
  c.repeats = 3;
  c.n_probe = 20;
  c.seed = 11;
  return c;
}

std::string csv_of(const MetricsReport& r) {
  std::ostringstream out;
  write_report_csv(out, r);
  return out.str();
}

ErrorCategory category_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCategory::kIo;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("cwrf_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Experiment, ReportIsDeterministicForEveryAlgorithm) {
  const auto data = small_data();
  const auto costs = CostVector::uniform(data.num_features());
  for (const auto a : {Algorithm::kRf, Algorithm::kC45, Algorithm::kIg, Algorithm::kWrf,
                       Algorithm::kCwrf}) {
    const auto cfg = small_config(a);
    const auto first = run_experiment(cfg, data, costs);
    const auto second = run_experiment(cfg, data, costs);
    EXPECT_EQ(csv_of(first), csv_of(second)) << algorithm_name(a);
    ASSERT_EQ(first.repeats.size(), 3u);
    const double tpr = first.mean("tpr");
    EXPECT_GT(tpr, 0.5) << algorithm_name(a);
    EXPECT_LE(tpr, 1.0);
    const double sr1 = first.mean("success_rate_k1"), sr2 = first.mean("success_rate_k2");
    EXPECT_LE(sr1, sr2 + 1e-12);
  }
}

TEST(Experiment, ReportLayout) {
  const auto data = small_data();
  const auto r = run_experiment(small_config(Algorithm::kWrf), data,
                                CostVector::uniform(data.num_features()));
  std::istringstream in(csv_of(r));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "repeat,metric,value");
  std::size_t rows = 0, mean_rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.rfind("mean,", 0) == 0) ++mean_rows;
  }
  const auto per = r.repeats[0].metrics.size();
  EXPECT_EQ(rows, per * 4);
  EXPECT_EQ(mean_rows, per);
  for (const auto* name : {"tpr", "fpr", "order_length", "success_rate_k1", "avg_modified"}) {
    bool found = false;
    for (const auto& [n, v] : r.repeats[0].metrics) found |= n == name;
    EXPECT_TRUE(found) << name;
  }
  const auto j = report_to_json(r);
  EXPECT_EQ(j.at("config").at("algorithm"), "wrf");
  EXPECT_EQ(j.at("repeats"), 3);
  EXPECT_EQ(j.at("per_repeat").size(), 3u);
  EXPECT_TRUE(j.contains("mean"));
  std::ostringstream t;
  write_timings_csv(t, r);
  EXPECT_NE(t.str().find("train"), std::string::npos);
}

TEST(Experiment, NanMetricsAreSkippedInTheMean) {
  MetricsReport r;
  r.repeats.resize(3);
  r.repeats[0].metrics = {{"a", 1.0}};
  r.repeats[1].metrics = {{"a", std::nan("")}};
  r.repeats[2].metrics = {{"a", 3.0}};
  EXPECT_DOUBLE_EQ(r.mean("a"), 2.0);
}

TEST(Experiment, TracesCoverEveryAttack) {
  const auto data = small_data();
  auto cfg = small_config(Algorithm::kRf);
  cfg.keep_traces = true;
  cfg.repeats = 1;
  const auto r = run_experiment(cfg, data, CostVector::uniform(data.num_features()));
  std::ostringstream out;
  write_traces_jsonl(out, r);
  std::istringstream in(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("repeat"));
    EXPECT_TRUE(j.contains("mode"));
    EXPECT_TRUE(j.contains("outcome"));
    ++n;
  }
  std::size_t expected = 0;
  for (const auto& a : r.repeats[0].attacks) expected += a.traces.size();
  EXPECT_EQ(n, expected);
  EXPECT_GT(n, 0u);
}

TEST(Config, JsonRoundTripAndErrors) {
  auto c = small_config(Algorithm::kCwrf);
  c.data_path = "d.csv";
  c.schema_path = "d.schema";
  const auto j = config_to_json(c);
  const auto back = config_from_json(j);
  EXPECT_EQ(config_to_json(back), j);

  EXPECT_EQ(category_of([] { config_from_json({{"bogus", 1}}); }), ErrorCategory::kConfig);
  EXPECT_EQ(category_of([] { config_from_json({{"algorithm", "svm"}}); }), ErrorCategory::kConfig);
  EXPECT_EQ(category_of([] { config_from_json({{"repeats", "many"}}); }), ErrorCategory::kConfig);
  auto bad = small_config(Algorithm::kCwrf);
  bad.model.s = 50;
  EXPECT_EQ(category_of([&] { bad.validate(); }), ErrorCategory::kConfig);
  EXPECT_EQ(category_of([] { load_config("/nonexistent/cfg.json"); }), ErrorCategory::kIo);

  const auto k_only = config_from_json({{"k", {1, 3}}});
  EXPECT_FALSE(k_only.unbounded);
  EXPECT_EQ(k_only.k_values, (std::vector<std::size_t>{1, 3}));
}

TEST(Sweep, ValuesAndErrors) {
  const auto data = small_data();
  const auto costs = CostVector::uniform(data.num_features());
  auto cfg = small_config(Algorithm::kWrf);
  cfg.repeats = 2;
  const auto s = sweep(cfg, SweepParameter::kR, {0.0, 3.0}, data, costs);
  ASSERT_EQ(s.reports.size(), 2u);
  EXPECT_EQ(s.reports[1].config.model.r, 3.0);
  std::ostringstream out;
  write_sweep_csv(out, s);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "parameter,parameter_value,repeat,metric,value");
  EXPECT_EQ(sweep_to_json(s).at("rows").size(), 2u);

  EXPECT_EQ(category_of([&] { sweep(cfg, SweepParameter::kR, {}, data, costs); }),
            ErrorCategory::kConfig);
  EXPECT_EQ(category_of([&] { sweep(cfg, SweepParameter::kS, {2.0}, data, costs); }),
            ErrorCategory::kConfig);
  EXPECT_EQ(category_of([] { parse_sweep_parameter("depth"); }), ErrorCategory::kConfig);
}

TEST(Histogram, SortedCounts) {
  const auto data = small_data();
  const auto cfg = small_config(Algorithm::kRf);
  const auto pool = histogram_pool(cfg, data, CostVector::uniform(data.num_features()));
  const auto h = feature_usage_histogram(pool, data.schema());
  ASSERT_EQ(h.size(), data.num_features());
  for (std::size_t i = 1; i < h.size(); ++i) {
    EXPECT_GE(h[i - 1].trees, h[i].trees);
    if (h[i - 1].trees == h[i].trees) EXPECT_LT(h[i - 1].feature, h[i].feature);
  }
  const auto counts = feature_usage_counts(pool);
  for (const auto& u : h) {
    EXPECT_EQ(u.trees, counts[u.feature]);
    EXPECT_EQ(u.name, data.schema().feature(u.feature).name);
  }
}

TEST(Model, SingleTreeForC45) {
  const auto data = small_data();
  ModelSettings s;
  s.algorithm = Algorithm::kC45;
  const auto m = train_model(data, s, CostVector::uniform(data.num_features()), 1);
  EXPECT_EQ(m.pool->size(), 1u);
}

TEST(Model, SaveLoadRoundTrip) {
  const auto data = small_data();
  for (const auto a : {Algorithm::kWrf, Algorithm::kCwrf}) {
    auto s = small_config(a).model;
    const auto m = train_model(data, s, CostVector::uniform(data.num_features()), 5);
    const auto dir = temp_dir(algorithm_name(a));
    save_model(m, dir.string());
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "tree_000.txt"));
    EXPECT_EQ(fs::exists(dir / "clustering.txt"), a == Algorithm::kCwrf);
    const auto back = load_model(dir.string());
    EXPECT_EQ(back.algorithm, a);
    EXPECT_EQ(back.pool->trees, m.pool->trees);
    EXPECT_EQ(back.pool->weights_used, m.pool->weights_used);
    EXPECT_EQ(*back.schema, *m.schema);
    if (a == Algorithm::kCwrf) {
      EXPECT_EQ(*back.clustering, *m.clustering);
      EXPECT_EQ(back.q, m.q);
    }
    const auto o1 = make_oracle(m, 3), o2 = make_oracle(back, 3);
    for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(o1.classify(data.row(i)), o2.classify(data.row(i)));

    std::ofstream(dir / "manifest.json") << "{not json";
    EXPECT_EQ(category_of([&] { load_model(dir.string()); }), ErrorCategory::kFormat);
    fs::remove_all(dir);
  }
  EXPECT_EQ(category_of([] { load_model("/nonexistent/pool"); }), ErrorCategory::kIo);
}
