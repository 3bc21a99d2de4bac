#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cwrf {

enum class Label : std::uint8_t { kNegative = 0, kPositive = 1 };

inline const char* label_name(Label label) {
  return label == Label::kPositive ? "positive" : "negative";
}

enum class FeatureKind { kNumeric, kCategorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kNumeric;
  // Non-empty iff kind == kCategorical. Values are stored in a Dataset as the
  // index of the category in this list.
  std::vector<std::string> categories;

  bool operator==(const FeatureSpec&) const = default;
};

// Ordered feature list plus the label column. When `negative_label` is set,
// label cells other than the two declared strings are rejected; otherwise any
// non-positive string is negative.
class FeatureSchema {
 public:
  FeatureSchema(std::vector<FeatureSpec> features, std::string label_column,
                std::string positive_label,
                std::optional<std::string> negative_label = std::nullopt);

  std::size_t size() const { return features_.size(); }
  const FeatureSpec& feature(std::size_t j) const { return features_[j]; }
  const std::vector<FeatureSpec>& features() const { return features_; }
  bool is_categorical(std::size_t j) const {
    return features_[j].kind == FeatureKind::kCategorical;
  }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::optional<std::size_t> category_index(std::size_t j,
                                            std::string_view value) const;

  const std::string& label_column() const { return label_column_; }
  const std::string& positive_label() const { return positive_label_; }
  const std::optional<std::string>& negative_label() const {
    return negative_label_;
  }

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<FeatureSpec> features_;
  std::string label_column_;
  std::string positive_label_;
  std::optional<std::string> negative_label_;
};

// Schema text: one `name,kind[,cat1|cat2|...]` line per feature, in order, and
// one `label,<column>,<positive>[,<negative>]` line. `#` starts a comment.
FeatureSchema parse_schema(std::istream& in);
FeatureSchema load_schema(const std::string& path);
std::string format_schema(const FeatureSchema& schema);

// Row-major instance table. Categorical cells hold the category index.
// `source_ids` tracks the row each instance came from in the originally loaded
// file, so partitions and samples can be checked by row identity.
class Dataset {
 public:
  Dataset(std::shared_ptr<const FeatureSchema> schema, std::vector<double> values,
          std::vector<Label> labels, std::vector<std::size_t> source_ids = {});

  const FeatureSchema& schema() const { return *schema_; }
  const std::shared_ptr<const FeatureSchema>& schema_ptr() const {
    return schema_;
  }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t num_features() const { return schema_->size(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * num_features(), num_features()};
  }
  double value(std::size_t i, std::size_t j) const {
    return values_[i * num_features() + j];
  }
  Label label(std::size_t i) const { return labels_[i]; }
  const std::vector<Label>& labels() const { return labels_; }
  std::size_t source_id(std::size_t i) const { return source_ids_[i]; }
  const std::vector<std::size_t>& source_ids() const { return source_ids_; }

  std::size_t count(Label label) const;

  // Rows in the given order; duplicates allowed.
  Dataset subset(std::span<const std::size_t> rows) const;
  // Rows carrying the given label, in original order.
  Dataset filter(Label label) const;

  bool operator==(const Dataset& other) const;

 private:
  std::shared_ptr<const FeatureSchema> schema_;
  std::vector<double> values_;
  std::vector<Label> labels_;
  std::vector<std::size_t> source_ids_;
};

struct LoadOptions {
  // Training data must contain both classes. Scoring-only files may relax it.
  bool require_both_classes = true;
};

// Reads a comma-separated file with a header row. Columns may appear in any
// order and extra columns are ignored. Errors carry 1-based data row numbers
// (header excluded) and the column name.
Dataset load_dataset(const std::string& path, const FeatureSchema& schema,
                     const LoadOptions& options = {});
Dataset parse_dataset(std::istream& in, const FeatureSchema& schema,
                      const LoadOptions& options = {});

// Reads one raw column by name (e.g. a day or session key used for grouping).
std::vector<std::string> load_column(const std::string& path,
                                     const std::string& column);

// RFC-4180 style record splitting: quoted fields, doubled quotes, embedded
// commas. Returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Uniform random partition without replacement; the train side receives
// round(train_fraction * N) rows, clamped so both sides are nonempty. With
// `stratified`, each class is split separately at the same fraction.
TrainTestSplit split_train_test(const Dataset& d, double train_fraction,
                                std::uint64_t seed, bool stratified = false);

// Rows whose group key is in `train_groups` go to train, the rest to test.
TrainTestSplit split_by_group(const Dataset& d, std::span<const std::string> keys,
                              std::span<const std::string> train_groups);

std::vector<std::size_t> bootstrap_indices(std::size_t population,
                                           std::size_t size, std::uint64_t seed);
Dataset bootstrap_sample(const Dataset& d, std::size_t size, std::uint64_t seed);

// Per-feature substitution values an attacker uses: mean over negatives for
// numeric features, mode over negatives for categorical ones (ties resolved by
// schema category order).
struct NegativeProfile {
  std::vector<double> values;
};

NegativeProfile negative_profile(const Dataset& d);

}  // namespace cwrf
