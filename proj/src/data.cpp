#include "cwrf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cwrf/error.hpp"
#include "cwrf/rng.hpp"

namespace cwrf {

const char* category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kInvalidArgument:
      return "invalid-argument";
    case ErrorCategory::kData:
      return "data";
    case ErrorCategory::kFormat:
      return "format";
    case ErrorCategory::kConfig:
      return "config";
    case ErrorCategory::kIo:
      return "io";
  }
  return "unknown";
}

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kInvalidArgument:
      return 2;
    case ErrorCategory::kData:
      return 3;
    case ErrorCategory::kFormat:
      return 4;
    case ErrorCategory::kConfig:
      return 5;
    case ErrorCategory::kIo:
      return 6;
  }
  return 1;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::kIo, "cannot open '" + path + "'");
  return in;
}

}  // namespace

FeatureSchema::FeatureSchema(std::vector<FeatureSpec> features,
                             std::string label_column, std::string positive_label,
                             std::optional<std::string> negative_label)
    : features_(std::move(features)),
      label_column_(std::move(label_column)),
      positive_label_(std::move(positive_label)),
      negative_label_(std::move(negative_label)) {
  std::unordered_set<std::string> names;
  for (const auto& f : features_) {
    if (f.name.empty()) fail(ErrorCategory::kFormat, "schema: empty feature name");
    if (!names.insert(f.name).second) {
      fail(ErrorCategory::kFormat, "schema: duplicate feature '" + f.name + "'");
    }
    if (f.kind == FeatureKind::kCategorical) {
      if (f.categories.empty()) {
        fail(ErrorCategory::kFormat,
             "schema: categorical feature '" + f.name + "' has no categories");
      }
      std::unordered_set<std::string> cats(f.categories.begin(), f.categories.end());
      if (cats.size() != f.categories.size()) {
        fail(ErrorCategory::kFormat,
             "schema: duplicate category in feature '" + f.name + "'");
      }
    } else if (!f.categories.empty()) {
      fail(ErrorCategory::kFormat,
           "schema: numeric feature '" + f.name + "' lists categories");
    }
  }
  if (label_column_.empty()) fail(ErrorCategory::kFormat, "schema: missing label line");
  if (names.count(label_column_)) {
    fail(ErrorCategory::kFormat,
         "schema: label column '" + label_column_ + "' is also a feature");
  }
  if (negative_label_ && *negative_label_ == positive_label_) {
    fail(ErrorCategory::kFormat, "schema: positive and negative labels coincide");
  }
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t j = 0; j < features_.size(); ++j) {
    if (features_[j].name == name) return j;
  }
  return std::nullopt;
}

std::optional<std::size_t> FeatureSchema::category_index(
    std::size_t j, std::string_view value) const {
  const auto& cats = features_[j].categories;
  const auto it = std::find(cats.begin(), cats.end(), value);
  if (it == cats.end()) return std::nullopt;
  return static_cast<std::size_t>(it - cats.begin());
}

FeatureSchema parse_schema(std::istream& in) {
  std::vector<FeatureSpec> features;
  std::optional<std::vector<std::string>> label_line;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    const auto where = "schema line " + std::to_string(line_no) + ": ";
    if (fields[0] == "label") {
      if (label_line) fail(ErrorCategory::kFormat, where + "second label line");
      if (fields.size() < 3 || fields.size() > 4) {
        fail(ErrorCategory::kFormat,
             where + "expected label,<column>,<positive>[,<negative>]");
      }
      label_line = std::move(fields);
      continue;
    }
    if (fields.size() < 2) fail(ErrorCategory::kFormat, where + "expected name,kind");
    FeatureSpec spec;
    spec.name = fields[0];
    if (fields[1] == "numeric") {
      if (fields.size() != 2) {
        fail(ErrorCategory::kFormat, where + "numeric feature takes no categories");
      }
      spec.kind = FeatureKind::kNumeric;
    } else if (fields[1] == "categorical") {
      if (fields.size() != 3) {
        fail(ErrorCategory::kFormat, where + "expected name,categorical,c1|c2|...");
      }
      spec.kind = FeatureKind::kCategorical;
      for (auto& c : split(fields[2], '|')) {
        if (c.empty()) fail(ErrorCategory::kFormat, where + "empty category");
        spec.categories.push_back(std::move(c));
      }
    } else {
      fail(ErrorCategory::kFormat, where + "unknown kind '" + fields[1] + "'");
    }
    features.push_back(std::move(spec));
  }
  if (!label_line) fail(ErrorCategory::kFormat, "schema: missing label line");
  std::optional<std::string> negative;
  if (label_line->size() == 4) negative = (*label_line)[3];
  return FeatureSchema(std::move(features), (*label_line)[1], (*label_line)[2],
                       std::move(negative));
}

FeatureSchema load_schema(const std::string& path) {
  auto in = open_input(path);
  return parse_schema(in);
}

std::string format_schema(const FeatureSchema& schema) {
  std::ostringstream out;
  for (const auto& f : schema.features()) {
    out << f.name << ',';
    if (f.kind == FeatureKind::kNumeric) {
      out << "numeric";
    } else {
      out << "categorical,";
      for (std::size_t c = 0; c < f.categories.size(); ++c) {
        if (c) out << '|';
        out << f.categories[c];
      }
    }
    out << '\n';
  }
  out << "label," << schema.label_column() << ',' << schema.positive_label();
  if (schema.negative_label()) out << ',' << *schema.negative_label();
  out << '\n';
  return out.str();
}

Dataset::Dataset(std::shared_ptr<const FeatureSchema> schema,
                 std::vector<double> values, std::vector<Label> labels,
                 std::vector<std::size_t> source_ids)
    : schema_(std::move(schema)),
      values_(std::move(values)),
      labels_(std::move(labels)),
      source_ids_(std::move(source_ids)) {
  require(schema_ != nullptr, "dataset: null schema");
  require(values_.size() == labels_.size() * schema_->size(),
          "dataset: value count does not match rows x features");
  if (source_ids_.empty()) {
    source_ids_.resize(labels_.size());
    std::iota(source_ids_.begin(), source_ids_.end(), std::size_t{0});
  }
  require(source_ids_.size() == labels_.size(), "dataset: source id count mismatch");
  const std::size_t m = schema_->size();
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double v = values_[i * m + j];
      if (!std::isfinite(v)) {
        fail(ErrorCategory::kData, "dataset: non-finite value at row " +
                                       std::to_string(i + 1) + ", feature '" +
                                       schema_->feature(j).name + "'");
      }
      if (schema_->is_categorical(j)) {
        const auto n = schema_->feature(j).categories.size();
        if (v < 0 || v != std::floor(v) || v >= static_cast<double>(n)) {
          fail(ErrorCategory::kData,
               "dataset: invalid category code at row " + std::to_string(i + 1) +
                   ", feature '" + schema_->feature(j).name + "'");
        }
      }
    }
  }
}

std::size_t Dataset::count(Label label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  const std::size_t m = num_features();
  std::vector<double> values;
  values.reserve(rows.size() * m);
  std::vector<Label> labels;
  labels.reserve(rows.size());
  std::vector<std::size_t> ids;
  ids.reserve(rows.size());
  for (const auto r : rows) {
    require(r < size(), "dataset: subset row out of range");
    const auto x = row(r);
    values.insert(values.end(), x.begin(), x.end());
    labels.push_back(labels_[r]);
    ids.push_back(source_ids_[r]);
  }
  return Dataset(schema_, std::move(values), std::move(labels), std::move(ids));
}

Dataset Dataset::filter(Label label) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < size(); ++i) {
    if (labels_[i] == label) rows.push_back(i);
  }
  return subset(rows);
}

bool Dataset::operator==(const Dataset& other) const {
  return *schema_ == *other.schema_ && values_ == other.values_ &&
         labels_ == other.labels_ && source_ids_ == other.source_ids_;
}

bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) fail(ErrorCategory::kFormat, "csv: unterminated quoted field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

namespace {

struct HeaderMap {
  std::vector<std::size_t> feature_column;
  std::size_t label_column = 0;
  std::size_t width = 0;
};

HeaderMap map_header(std::istream& in, const FeatureSchema& schema) {
  std::vector<std::string> header;
  if (!read_csv_record(in, header)) fail(ErrorCategory::kFormat, "csv: missing header row");
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = trim(header[c]);
    if (!pos.emplace(name, c).second) {
      fail(ErrorCategory::kFormat, "csv: duplicate column '" + name + "'");
    }
  }
  HeaderMap map;
  map.width = header.size();
  for (const auto& f : schema.features()) {
    const auto it = pos.find(f.name);
    if (it == pos.end()) fail(ErrorCategory::kFormat, "csv: missing column '" + f.name + "'");
    map.feature_column.push_back(it->second);
  }
  const auto it = pos.find(schema.label_column());
  if (it == pos.end()) {
    fail(ErrorCategory::kFormat,
         "csv: missing label column '" + schema.label_column() + "'");
  }
  map.label_column = it->second;
  return map;
}

}  // namespace

Dataset parse_dataset(std::istream& in, const FeatureSchema& schema,
                      const LoadOptions& options) {
  const auto header = map_header(in, schema);
  const std::size_t m = schema.size();
  std::vector<double> values;
  std::vector<Label> labels;
  std::vector<std::string> fields;
  std::size_t row = 0;
  while (read_csv_record(in, fields)) {
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    ++row;
    const auto where = [&](const std::string& column) {
      return "row " + std::to_string(row) + ", column '" + column + "'";
    };
    if (fields.size() != header.width) {
      fail(ErrorCategory::kData, "csv: row " + std::to_string(row) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(header.width));
    }
    for (std::size_t j = 0; j < m; ++j) {
      const auto& spec = schema.feature(j);
      const auto cell = trim(fields[header.feature_column[j]]);
      if (cell.empty()) fail(ErrorCategory::kData, "csv: missing value at " + where(spec.name));
      if (spec.kind == FeatureKind::kNumeric) {
        const auto v = parse_double(cell);
        if (!v) {
          fail(ErrorCategory::kData,
               "csv: unparseable numeric '" + cell + "' at " + where(spec.name));
        }
        values.push_back(*v);
      } else {
        const auto idx = schema.category_index(j, cell);
        if (!idx) {
          fail(ErrorCategory::kData,
               "csv: unknown category '" + cell + "' at " + where(spec.name));
        }
        values.push_back(static_cast<double>(*idx));
      }
    }
    const auto label = trim(fields[header.label_column]);
    if (label == schema.positive_label()) {
      labels.push_back(Label::kPositive);
    } else if (!schema.negative_label() || label == *schema.negative_label()) {
      labels.push_back(Label::kNegative);
    } else {
      fail(ErrorCategory::kData,
           "csv: unknown label '" + label + "' at " + where(schema.label_column()));
    }
  }
  auto shared = std::make_shared<const FeatureSchema>(schema);
  Dataset d(std::move(shared), std::move(values), std::move(labels));
  if (options.require_both_classes &&
      (d.count(Label::kPositive) == 0 || d.count(Label::kNegative) == 0)) {
    fail(ErrorCategory::kData, "training dataset must contain both classes");
  }
  return d;
}

Dataset load_dataset(const std::string& path, const FeatureSchema& schema,
                     const LoadOptions& options) {
  auto in = open_input(path);
  return parse_dataset(in, schema, options);
}

std::vector<std::string> load_column(const std::string& path,
                                     const std::string& column) {
  auto in = open_input(path);
  std::vector<std::string> header;
  if (!read_csv_record(in, header)) fail(ErrorCategory::kFormat, "csv: missing header row");
  std::optional<std::size_t> pos;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (trim(header[c]) == column) pos = c;
  }
  if (!pos) fail(ErrorCategory::kFormat, "csv: missing column '" + column + "'");
  std::vector<std::string> out;
  std::vector<std::string> fields;
  while (read_csv_record(in, fields)) {
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    if (*pos >= fields.size()) {
      fail(ErrorCategory::kData,
           "csv: row " + std::to_string(out.size() + 1) + " is too short");
    }
    out.push_back(trim(fields[*pos]));
  }
  return out;
}

namespace {

std::size_t train_count(std::size_t n, double fraction) {
  auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

}  // namespace

TrainTestSplit split_train_test(const Dataset& d, double train_fraction,
                                std::uint64_t seed, bool stratified) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    fail(ErrorCategory::kInvalidArgument, "split: train fraction must lie in (0,1)");
  }
  require(d.size() >= 2, "split: need at least two rows");
  Rng rng(derive_seed(seed, stream::kSplit));
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  const auto partition = [&](std::vector<std::size_t> rows) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto k = train_count(rows.size(), train_fraction);
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + k);
    test_rows.insert(test_rows.end(), rows.begin() + k, rows.end());
  };
  if (stratified) {
    for (const auto label : {Label::kPositive, Label::kNegative}) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.label(i) == label) rows.push_back(i);
      }
      if (rows.size() >= 2) {
        partition(std::move(rows));
      } else {
        train_rows.insert(train_rows.end(), rows.begin(), rows.end());
      }
    }
  } else {
    std::vector<std::size_t> rows(d.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    partition(std::move(rows));
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  if (test_rows.empty()) fail(ErrorCategory::kData, "split: test partition is empty");
  return {d.subset(train_rows), d.subset(test_rows)};
}

TrainTestSplit split_by_group(const Dataset& d, std::span<const std::string> keys,
                              std::span<const std::string> train_groups) {
  require(keys.size() == d.size(), "group split: key count does not match rows");
  const std::unordered_set<std::string> train(train_groups.begin(), train_groups.end());
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (std::size_t i = 0; i < d.size(); ++i) {
    (train.count(keys[i]) ? train_rows : test_rows).push_back(i);
  }
  if (train_rows.empty() || test_rows.empty()) {
    fail(ErrorCategory::kData, "group split: a partition is empty");
  }
  return {d.subset(train_rows), d.subset(test_rows)};
}

std::vector<std::size_t> bootstrap_indices(std::size_t population,
                                           std::size_t size, std::uint64_t seed) {
  require(population > 0, "bootstrap: empty dataset");
  require(size > 0, "bootstrap: sample size must be positive");
  Rng rng(derive_seed(seed, stream::kBootstrap));
  std::vector<std::size_t> rows(size);
  for (auto& r : rows) r = uniform_index(rng, population);
  return rows;
}

Dataset bootstrap_sample(const Dataset& d, std::size_t size, std::uint64_t seed) {
  const auto rows = bootstrap_indices(d.size(), size, seed);
  return d.subset(rows);
}

NegativeProfile negative_profile(const Dataset& d) {
  const std::size_t m = d.num_features();
  const std::size_t negatives = d.count(Label::kNegative);
  if (negatives == 0) fail(ErrorCategory::kData, "profile: no negative instances");
  const auto& schema = d.schema();
  NegativeProfile profile;
  profile.values.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    if (schema.is_categorical(j)) {
      std::vector<std::size_t> freq(schema.feature(j).categories.size(), 0);
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.label(i) == Label::kNegative) ++freq[static_cast<std::size_t>(d.value(i, j))];
      }
      // max_element returns the first maximum, i.e. the earliest schema category.
      profile.values[j] =
          static_cast<double>(std::max_element(freq.begin(), freq.end()) - freq.begin());
    } else {
      // Kahan summation keeps the mean independent of row order to rounding.
      double sum = 0.0;
      double carry = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.label(i) != Label::kNegative) continue;
        const double y = d.value(i, j) - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
      }
      profile.values[j] = sum / static_cast<double>(negatives);
    }
  }
  return profile;
}

}  // namespace cwrf
