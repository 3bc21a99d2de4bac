#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

#include "cwrf/error.hpp"
#include "cwrf/experiment.hpp"
#include "cwrf/robustness.hpp"
#include "cwrf/synthetic.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// Configs travel as JSON text; the Python side uses dicts.
cwrf::ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    cwrf::fail(cwrf::ErrorCategory::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  return cwrf::config_from_json(j);
}

struct PyModel {
  cwrf::Model model;
};

std::vector<std::vector<double>> rows_of(const cwrf::Dataset& d) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < d.size(); ++i) out.emplace_back(d.row(i).begin(), d.row(i).end());
  return out;
}

}  // namespace

PYBIND11_MODULE(_cwrf, m) {
  m.doc() = "Randomness-hardened random forests and evasion attack experiments";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error;
  error.call_once_and_store_result([&] { return py::exception<cwrf::Error>(m, "Error"); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const cwrf::Error& e) {
      const auto msg = std::string(cwrf::category_name(e.category())) + ": " + e.what();
      py::set_error(error.get_stored(), msg.c_str());
    }
  });

  m.def("information_gain",
        [](std::pair<std::uint64_t, std::uint64_t> parent,
           const std::vector<std::pair<std::uint64_t, std::uint64_t>>& children) {
          std::vector<cwrf::ClassCounts> c;
          for (const auto& [p, n] : children) c.push_back({p, n});
          return cwrf::information_gain({parent.first, parent.second}, c);
        },
        py::arg("parent"), py::arg("children"));
  m.def("compute_weights",
        [](const std::vector<double>& vulnerability, const std::vector<double>& costs, double r) {
          return cwrf::compute_weights(vulnerability, cwrf::CostVector(costs), r).values();
        },
        py::arg("vulnerability"), py::arg("costs"), py::arg("r"));

  m.def("generate_synthetic",
        [](std::size_t rows, std::uint64_t seed, const std::string& csv_path,
           const std::string& schema_path) {
          cwrf::SyntheticParams p;
          p.rows = rows;
          p.seed = seed;
          const auto d = cwrf::make_synthetic(p);
          std::ostringstream csv;
          cwrf::write_dataset_csv(csv, d);
          std::ofstream(csv_path) << csv.str();
          std::ofstream(schema_path) << cwrf::format_schema(d.schema());
          return d.size();
        },
        py::arg("rows"), py::arg("seed"), py::arg("csv_path"), py::arg("schema_path"));

  m.def("run_experiment",
        [](const std::string& config) {
          const auto cfg = parse_config(config);
          cwrf::MetricsReport report;
          {
            py::gil_scoped_release release;
            report = cwrf::run_experiment(cfg);
          }
          return cwrf::report_to_json(report).dump();
        },
        py::arg("config_json"), "Runs the repeated experiment; returns the JSON summary text.");

  m.def("sweep",
        [](const std::string& config, const std::string& parameter, const std::vector<double>& values) {
          const auto cfg = parse_config(config);
          const auto p = cwrf::parse_sweep_parameter(parameter);
          cwrf::SweepResult result;
          {
            py::gil_scoped_release release;
            result = cwrf::sweep(cfg, p, values);
          }
          return cwrf::sweep_to_json(result).dump();
        },
        py::arg("config_json"), py::arg("parameter"), py::arg("values"));

  py::class_<PyModel>(m, "Model")
      .def_static(
          "train",
          [](const std::string& config, std::uint64_t seed) {
            const auto cfg = parse_config(config);
            const auto data = cwrf::load_experiment_data(cfg);
            const auto costs = cwrf::load_experiment_costs(cfg, data.schema());
            py::gil_scoped_release release;
            return PyModel{cwrf::train_model(data, cfg.model, costs, seed)};
          },
          py::arg("config_json"), py::arg("seed") = 1)
      .def_static("load", [](const std::string& dir) { return PyModel{cwrf::load_model(dir)}; })
      .def("save", [](const PyModel& self, const std::string& dir) { cwrf::save_model(self.model, dir); })
      .def_property_readonly("algorithm",
                             [](const PyModel& self) { return cwrf::algorithm_name(self.model.algorithm); })
      .def_property_readonly("num_trees", [](const PyModel& self) { return self.model.pool->size(); })
      .def_property_readonly("feature_names",
                             [](const PyModel& self) {
                               std::vector<std::string> names;
                               for (std::size_t j = 0; j < self.model.schema->size(); ++j)
                                 names.push_back(self.model.schema->feature(j).name);
                               return names;
                             })
      .def_property_readonly("weights", [](const PyModel& self) { return self.model.pool->weights_used.values(); })
      .def("feature_usage", [](const PyModel& self) { return cwrf::feature_usage_counts(*self.model.pool); })
      .def(
          "predict",
          [](const PyModel& self, const std::vector<std::vector<double>>& rows, std::uint64_t seed) {
            const auto oracle = cwrf::make_oracle(self.model, seed);
            std::vector<int> out;
            for (const auto& r : rows) {
              cwrf::require(r.size() == self.model.schema->size(), "predict: row length mismatch");
              out.push_back(oracle.classify(r) == cwrf::Label::kPositive ? 1 : 0);
            }
            return out;
          },
          py::arg("rows"), py::arg("seed") = 1, "1 = positive (malicious), 0 = negative.")
      .def(
          "certify",
          [](const PyModel& self, std::size_t k) {
            const auto costs = cwrf::CostVector::uniform(self.model.schema->size());
            const auto c = cwrf::certify(self.model.pool->trees, costs, k);
            return py::dict(py::arg("k") = c.k, py::arg("t1") = c.t1, py::arg("t2") = c.t2,
                            py::arg("required_margin") = c.required_margin,
                            py::arg("voters") = c.voters);
          },
          py::arg("k"));

  m.def("load_rows",
        [](const std::string& csv_path, const std::string& schema_path) {
          const auto schema = cwrf::load_schema(schema_path);
          const auto d = cwrf::load_dataset(csv_path, schema);
          std::vector<int> labels;
          for (const auto l : d.labels()) labels.push_back(l == cwrf::Label::kPositive ? 1 : 0);
          return py::make_tuple(rows_of(d), labels);
        },
        py::arg("csv_path"), py::arg("schema_path"), "Encoded feature rows and 0/1 labels.");
}
