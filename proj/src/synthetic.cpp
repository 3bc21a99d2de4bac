#include "cwrf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <random>

#include "cwrf/error.hpp"
#include "cwrf/rng.hpp"

namespace cwrf {

Dataset make_synthetic(const SyntheticParams& p) {
  require(p.rows >= 2, "synthetic: need at least two rows");
  require(p.numeric + p.categorical >= 1, "synthetic: need at least one feature");
  require(p.categorical == 0 || p.categories >= 2, "synthetic: need at least two categories");
  require(p.label_noise >= 0.0 && p.label_noise <= 0.5, "synthetic: label_noise in [0, 0.5]");

  std::vector<FeatureSpec> specs;
  for (std::size_t j = 0; j < p.numeric; ++j) {
    specs.push_back({"num_" + std::to_string(j), FeatureKind::kNumeric, {}});
  }
  for (std::size_t j = 0; j < p.categorical; ++j) {
    FeatureSpec spec{"cat_" + std::to_string(j), FeatureKind::kCategorical, {}};
    for (std::size_t c = 0; c < p.categories; ++c) {
      spec.categories.push_back("c" + std::to_string(c));
    }
    specs.push_back(std::move(spec));
  }
  auto schema = std::make_shared<FeatureSchema>(std::move(specs), "label", "attack", "normal");

  Rng rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::bernoulli_distribution flip(p.label_noise);
  const std::size_t informative = std::min(p.informative, p.numeric);
  std::vector<double> coef(informative);
  for (auto& c : coef) c = unit(rng) >= 0 ? 1.0 + std::abs(unit(rng)) : -1.0 - std::abs(unit(rng));
  std::vector<std::vector<double>> offset(p.categorical, std::vector<double>(p.categories));
  for (auto& row : offset) {
    for (auto& v : row) v = unit(rng);
  }

  const std::size_t m = p.numeric + p.categorical;
  std::vector<double> values(p.rows * m);
  std::vector<Label> labels(p.rows);
  std::vector<std::size_t> ids(p.rows);
  for (std::size_t i = 0; i < p.rows; ++i) {
    double score = 0.0;
    for (std::size_t j = 0; j < p.numeric; ++j) {
      values[i * m + j] = normal(rng);
      if (j < informative) score += coef[j] * values[i * m + j];
    }
    for (std::size_t j = 0; j < p.categorical; ++j) {
      const auto c = uniform_index(rng, p.categories);
      values[i * m + p.numeric + j] = static_cast<double>(c);
      score += offset[j][c];
    }
    bool positive = score > 0.0;
    if (flip(rng)) positive = !positive;
    labels[i] = positive ? Label::kPositive : Label::kNegative;
    ids[i] = i;
  }
  return Dataset(std::move(schema), std::move(values), std::move(labels), std::move(ids));
}

void write_dataset_csv(std::ostream& out, const Dataset& d) {
  const auto& schema = d.schema();
  for (const auto& f : schema.features()) out << f.name << ',';
  out << schema.label_column() << '\n';
  const std::string negative = schema.negative_label().value_or("negative");
  char buf[40];
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.num_features(); ++j) {
      const double v = d.value(i, j);
      if (schema.is_categorical(j)) {
        out << schema.feature(j).categories[static_cast<std::size_t>(v)];
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
      }
      out << ',';
    }
    out << (d.label(i) == Label::kPositive ? schema.positive_label() : negative) << '\n';
  }
}

}  // namespace cwrf
