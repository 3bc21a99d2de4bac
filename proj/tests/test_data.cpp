#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "cwrf/data.hpp"
#include "cwrf/error.hpp"

using namespace cwrf;

namespace {

const char* kSchema =
    "# toy\n"
    "x,numeric\n"
    "color,categorical,red|green|blue\n"
    "label,y,spam,ham\n";

FeatureSchema toy_schema() {
  std::istringstream in(kSchema);
  return parse_schema(in);
}

Dataset parse(const std::string& csv, const FeatureSchema& s, LoadOptions o = {}) {
  std::istringstream in(csv);
  return parse_dataset(in, s, o);
}

template <typename Fn>
ErrorCategory category_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  ADD_FAILURE() << "expected an exception";
  return ErrorCategory::kInvalidArgument;
}

template <typename Fn>
std::string message_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

Dataset numbered(std::size_t n) {
  std::vector<FeatureSpec> f{{"v", FeatureKind::kNumeric, {}}};
  auto schema = std::make_shared<FeatureSchema>(std::move(f), "y", "1", "0");
  std::vector<double> values;
  std::vector<Label> labels;
  for (std::size_t i = 0; i < n; ++i) {
    values.push_back(static_cast<double>(i));
    labels.push_back(i % 3 == 0 ? Label::kPositive : Label::kNegative);
  }
  return Dataset(schema, values, labels);
}

}  // namespace

TEST(Schema, ParsesKindsAndLabel) {
  const auto s = toy_schema();
  ASSERT_EQ(s.size(), 2u);
  EXPECT_FALSE(s.is_categorical(0));
  EXPECT_TRUE(s.is_categorical(1));
  EXPECT_EQ(s.feature(1).categories, (std::vector<std::string>{"red", "green", "blue"}));
  EXPECT_EQ(s.label_column(), "y");
  EXPECT_EQ(s.positive_label(), "spam");
  EXPECT_EQ(s.negative_label(), std::optional<std::string>("ham"));
  EXPECT_EQ(s.index_of("color"), std::optional<std::size_t>(1));
  EXPECT_EQ(s.category_index(1, "blue"), std::optional<std::size_t>(2));
  EXPECT_FALSE(s.category_index(1, "pink"));
}

TEST(Schema, FormatRoundTrips) {
  const auto s = toy_schema();
  std::istringstream in(format_schema(s));
  EXPECT_EQ(parse_schema(in), s);
}

TEST(Schema, RejectsMalformedInput) {
  for (const char* text : {"x,numeric\n",                              // no label line
                           "x,numeric\nx,numeric\nlabel,y,1\n",        // duplicate
                           "x,integer\nlabel,y,1\n",                   // unknown kind
                           "x,categorical\nlabel,y,1\n",               // no categories
                           "y,numeric\nlabel,y,1\n",                   // label is a feature
                           "x,numeric\nlabel,y,1,1\n"}) {              // labels coincide
    std::istringstream in(text);
    EXPECT_EQ(category_of([&] { parse_schema(in); }), ErrorCategory::kFormat) << text;
  }
}

TEST(Dataset, ParsesColumnsInAnyOrderWithQuotes) {
  const auto d = parse("y,color,extra,x\nspam,blue,\"a,b\",1.5\nham,red,z,-2\n", toy_schema());
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d.value(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(d.value(0, 1), 2.0);
  EXPECT_EQ(d.label(0), Label::kPositive);
  EXPECT_EQ(d.label(1), Label::kNegative);
  EXPECT_EQ(d.source_ids(), (std::vector<std::size_t>{0, 1}));
}

TEST(Dataset, ErrorsNameRowAndColumn) {
  const auto s = toy_schema();
  const auto msg = message_of([&] { parse("x,color,y\n1,red,spam\nabc,red,ham\n", s); });
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'x'"), std::string::npos) << msg;

  EXPECT_EQ(category_of([&] { parse("x,color,y\n1,pink,spam\n2,red,ham\n", s); }),
            ErrorCategory::kData);
  EXPECT_EQ(category_of([&] { parse("x,color,y\n1,red,maybe\n2,red,ham\n", s); }),
            ErrorCategory::kData);
  EXPECT_EQ(category_of([&] { parse("x,y\n1,spam\n", s); }), ErrorCategory::kFormat);
  EXPECT_EQ(category_of([&] { parse("x,color,y\n1,red\n", s); }), ErrorCategory::kData);
  EXPECT_EQ(category_of([&] { parse("x,color,y\n,red,spam\n", s); }), ErrorCategory::kData);
  EXPECT_EQ(category_of([&] { parse("x,color,y\nnan,red,spam\n2,red,ham\n", s); }),
            ErrorCategory::kData);
}

TEST(Dataset, SingleClassTrainingDataIsRejected) {
  const auto s = toy_schema();
  const auto fn = [&] { parse("x,color,y\n1,red,spam\n2,blue,spam\n", s); };
  EXPECT_EQ(category_of(fn), ErrorCategory::kData);
  EXPECT_NE(message_of(fn).find("both classes"), std::string::npos);
  EXPECT_EQ(parse("x,color,y\n1,red,spam\n", s, {.require_both_classes = false}).size(), 1u);
}

TEST(Dataset, SubsetAndFilterKeepSourceIds) {
  const auto d = numbered(10);
  const std::vector<std::size_t> rows{7, 2, 2};
  const auto s = d.subset(rows);
  EXPECT_EQ(s.source_ids(), (std::vector<std::size_t>{7, 2, 2}));
  const auto pos = d.filter(Label::kPositive);
  EXPECT_EQ(pos.source_ids(), (std::vector<std::size_t>{0, 3, 6, 9}));
}

TEST(Split, PartitionsWithRoundedTrainSize) {
  const auto d = numbered(101);
  const auto s = split_train_test(d, 0.7, 42);
  EXPECT_EQ(s.train.size(), 71u);
  EXPECT_EQ(s.test.size(), 30u);
  std::set<std::size_t> seen(s.train.source_ids().begin(), s.train.source_ids().end());
  for (const auto id : s.test.source_ids()) EXPECT_TRUE(seen.insert(id).second);
  EXPECT_EQ(seen.size(), 101u);
  const auto again = split_train_test(d, 0.7, 42);
  EXPECT_EQ(again.train, s.train);
  EXPECT_NE(split_train_test(d, 0.7, 43).train, s.train);
}

TEST(Split, ClampsSoBothSidesAreNonEmpty) {
  const auto d = numbered(3);
  EXPECT_EQ(split_train_test(d, 0.01, 1).train.size(), 1u);
  EXPECT_EQ(split_train_test(d, 0.99, 1).test.size(), 1u);
  EXPECT_EQ(category_of([&] { split_train_test(d, 1.0, 1); }), ErrorCategory::kInvalidArgument);
}

TEST(Split, StratifiedKeepsClassShares) {
  const auto d = numbered(300);  // 100 positives
  const auto s = split_train_test(d, 0.7, 5, true);
  EXPECT_EQ(s.train.count(Label::kPositive), 70u);
  EXPECT_EQ(s.train.count(Label::kNegative), 140u);
}

TEST(Split, ByGroup) {
  const auto d = numbered(4);
  const std::vector<std::string> keys{"mon", "tue", "mon", "wed"};
  const std::vector<std::string> train{"mon"};
  const auto s = split_by_group(d, keys, train);
  EXPECT_EQ(s.train.source_ids(), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(s.test.source_ids(), (std::vector<std::size_t>{1, 3}));
}

TEST(Bootstrap, DeterministicInRangeWithRepeats) {
  const auto a = bootstrap_indices(50, 50, 9);
  EXPECT_EQ(a, bootstrap_indices(50, 50, 9));
  EXPECT_NE(a, bootstrap_indices(50, 50, 10));
  for (const auto i : a) EXPECT_LT(i, 50u);
  EXPECT_LT(std::set<std::size_t>(a.begin(), a.end()).size(), 50u);
  // Expected distinct share of a size-N bootstrap is about 1 - 1/e.
  const auto big = bootstrap_indices(20000, 20000, 3);
  const double distinct = static_cast<double>(std::set<std::size_t>(big.begin(), big.end()).size());
  EXPECT_NEAR(distinct / 20000.0, 0.632, 0.01);
}

TEST(Profile, MeanForNumericModeForCategorical) {
  const auto d = parse(
      "x,color,y\n"
      "1,red,ham\n"
      "2,green,ham\n"
      "6,green,ham\n"
      "100,blue,spam\n"
      "100,blue,spam\n",
      toy_schema());
  const auto p = negative_profile(d);
  EXPECT_DOUBLE_EQ(p.values[0], 3.0);
  EXPECT_DOUBLE_EQ(p.values[1], 1.0);
}

TEST(Profile, ModeTiesGoToEarlierCategory) {
  const auto d = parse("x,color,y\n1,blue,ham\n1,green,ham\n1,red,spam\n", toy_schema());
  EXPECT_DOUBLE_EQ(negative_profile(d).values[1], 1.0);  // green precedes blue
}

TEST(Profile, NeedsNegatives) {
  const auto d = parse("x,color,y\n1,blue,spam\n", toy_schema(), {.require_both_classes = false});
  EXPECT_EQ(category_of([&] { negative_profile(d); }), ErrorCategory::kData);
}

TEST(Spambase, LoadsBundledCopy) {
  const auto schema = load_schema(std::string(CWRF_DATA_DIR) + "/spambase.schema");
  const auto d = load_dataset(std::string(CWRF_DATA_DIR) + "/spambase.csv", schema);
  EXPECT_EQ(d.num_features(), 57u);
  EXPECT_EQ(d.size(), 4597u);
  EXPECT_EQ(d.count(Label::kPositive), 1812u);
}
