#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "cwrf/error.hpp"
#include "cwrf/rng.hpp"
#include "cwrf/tree.hpp"
#include "fixtures.hpp"

using namespace cwrf;
using namespace cwrf::testing;

namespace {

std::shared_ptr<const FeatureSchema> numeric_schema(std::size_t m) {
  std::vector<FeatureSpec> f;
  for (std::size_t j = 0; j < m; ++j) f.push_back({"f" + std::to_string(j), FeatureKind::kNumeric, {}});
  return std::make_shared<FeatureSchema>(std::move(f), "y", "1", "0");
}

Dataset random_numeric(std::size_t n, std::size_t m, std::uint64_t seed, int levels = 5) {
  Rng rng(seed);
  std::vector<double> values(n * m);
  std::vector<Label> labels(n);
  for (auto& v : values) v = static_cast<double>(uniform_index(rng, static_cast<std::size_t>(levels)));
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = values[i * m] + (m > 1 ? values[i * m + 1] : 0.0) + uniform_index(rng, 3) > levels;
    labels[i] = pos ? Label::kPositive : Label::kNegative;
  }
  return Dataset(numeric_schema(m), values, labels);
}

std::vector<std::size_t> all_rows(const Dataset& d) {
  std::vector<std::size_t> r(d.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = i;
  return r;
}

// Reference search straight from the definitions: every midpoint of every
// feature, weighted gain compared strictly in (feature, threshold) order.
std::optional<std::pair<std::size_t, double>> reference_split(const Dataset& d,
                                                              const WeightVector& w) {
  ClassCounts parent;
  for (std::size_t i = 0; i < d.size(); ++i) (d.label(i) == Label::kPositive ? parent.positives : parent.negatives)++;
  double best = 1e-12;
  std::optional<std::pair<std::size_t, double>> out;
  for (std::size_t j = 0; j < d.num_features(); ++j) {
    std::set<double> values;
    for (std::size_t i = 0; i < d.size(); ++i) values.insert(d.value(i, j));
    std::vector<double> v(values.begin(), values.end());
    for (std::size_t t = 0; t + 1 < v.size(); ++t) {
      const double thr = (v[t] + v[t + 1]) / 2;
      ClassCounts c[2];
      for (std::size_t i = 0; i < d.size(); ++i) {
        auto& side = c[d.value(i, j) <= thr ? 0 : 1];
        (d.label(i) == Label::kPositive ? side.positives : side.negatives)++;
      }
      const double g = w[j] * information_gain(parent, c);
      if (g > best + 1e-12) {
        best = g;
        out = {j, thr};
      }
    }
  }
  return out;
}

}  // namespace

TEST(Entropy, MatchesReferenceValues) {
  EXPECT_NEAR(entropy(3, 1), 0.8112781244591328, 1e-12);
  EXPECT_DOUBLE_EQ(entropy(5, 5), 1.0);
  EXPECT_DOUBLE_EQ(entropy(7, 0), 0.0);
  EXPECT_THROW(entropy(0, 0), Error);
}

TEST(InformationGain, ExampleTreeNodes) {
  const auto f1 = tree_f1();
  const auto f2 = tree_f2();
  const ClassCounts dollar[] = {f1.node(2).counts, f1.node(3).counts};
  const ClassCounts zeros[] = {f2.node(2).counts, f2.node(3).counts};
  EXPECT_NEAR(information_gain(f1.node(1).counts, dollar), 0.1949101652671104, 1e-12);
  EXPECT_NEAR(information_gain(f2.node(1).counts, zeros), 0.2619521962117658, 1e-12);
  EXPECT_NEAR(information_gain(f1.node(1).counts, dollar), 0.19, 0.005);
  EXPECT_NEAR(information_gain(f2.node(1).counts, zeros), 0.26, 0.005);
}

TEST(InformationGain, ChildrenMustSumToParent) {
  const ClassCounts kids[] = {{1, 1}, {1, 0}};
  EXPECT_THROW(information_gain({5, 5}, kids), Error);
}

TEST(Weights, RejectOutOfRange) {
  EXPECT_THROW(WeightVector({0.0}), Error);
  EXPECT_THROW(WeightVector({1.5}), Error);
  EXPECT_NO_THROW(WeightVector({1.0, 1e-300}));
}

TEST(BestSplit, MidpointThresholdOnSeparableData) {
  auto schema = numeric_schema(1);
  const Dataset d(schema, {1, 2, 3, 10, 11, 12},
                  {Label::kNegative, Label::kNegative, Label::kNegative, Label::kPositive,
                   Label::kPositive, Label::kPositive});
  const std::vector<std::size_t> feats{0};
  const auto s = best_split(d, all_rows(d), feats, WeightVector::uniform(1));
  ASSERT_TRUE(s);
  EXPECT_DOUBLE_EQ(s->rule.threshold, 6.5);
  EXPECT_DOUBLE_EQ(s->gain, 1.0);
}

TEST(BestSplit, TiesGoToLowestFeatureIndex) {
  auto schema = numeric_schema(3);
  // Features 1 and 2 are identical copies; feature 0 carries no signal.
  const Dataset d(schema, {0, 1, 1, 1, 2, 2, 0, 3, 3, 1, 4, 4},
                  {Label::kNegative, Label::kNegative, Label::kPositive, Label::kPositive});
  const std::vector<std::size_t> feats{0, 1, 2};
  const auto s = best_split(d, all_rows(d), feats, WeightVector::uniform(3));
  ASSERT_TRUE(s);
  EXPECT_EQ(s->rule.feature, 1u);
  EXPECT_DOUBLE_EQ(s->rule.threshold, 2.5);
}

TEST(BestSplit, WeightsMultiplyTheCriterion) {
  auto schema = numeric_schema(2);
  const Dataset d(schema, {1, 1, 2, 2, 3, 3, 4, 4},
                  {Label::kNegative, Label::kNegative, Label::kPositive, Label::kPositive});
  const std::vector<std::size_t> feats{0, 1};
  const auto s = best_split(d, all_rows(d), feats, WeightVector({0.5, 1.0}));
  ASSERT_TRUE(s);
  EXPECT_EQ(s->rule.feature, 1u);
  EXPECT_DOUBLE_EQ(s->weighted_gain, s->gain);
}

TEST(BestSplit, AgreesWithReferenceSearch) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto d = random_numeric(60, 4, seed);
    Rng rng(seed + 100);
    std::vector<double> w(4);
    for (auto& v : w) v = 0.2 + 0.8 * std::uniform_real_distribution<double>()(rng);
    const WeightVector weights(w);
    const std::vector<std::size_t> feats{0, 1, 2, 3};
    const auto got = best_split(d, all_rows(d), feats, weights);
    const auto want = reference_split(d, weights);
    ASSERT_EQ(got.has_value(), want.has_value()) << seed;
    if (!got) continue;
    EXPECT_EQ(got->rule.feature, want->first) << seed;
    EXPECT_DOUBLE_EQ(got->rule.threshold, want->second) << seed;
  }
}

TEST(BestSplit, CategoricalMultiway) {
  std::vector<FeatureSpec> f{{"c", FeatureKind::kCategorical, {"a", "b", "c"}}};
  auto schema = std::make_shared<FeatureSchema>(std::move(f), "y", "1", "0");
  const Dataset d(schema, {0, 0, 2, 2},
                  {Label::kPositive, Label::kPositive, Label::kNegative, Label::kNegative});
  const std::vector<std::size_t> feats{0};
  const auto s = best_split(d, all_rows(d), feats, WeightVector::uniform(1));
  ASSERT_TRUE(s);
  EXPECT_EQ(s->rule.kind, SplitKind::kCategoricalMultiway);
  EXPECT_EQ(s->rule.child_category, (std::vector<std::size_t>{0, 2}));
}

TEST(TrainTree, SeparableDataGivesDepthOneTree) {
  auto schema = numeric_schema(1);
  const Dataset d(schema, {1, 2, 3, 10, 11, 12},
                  {Label::kNegative, Label::kNegative, Label::kNegative, Label::kPositive,
                   Label::kPositive, Label::kPositive});
  const auto t = train_tree(d, WeightVector::uniform(1), 1, {}, 7);
  EXPECT_EQ(t.depth(), 1u);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(t.predict(d.row(i)), d.label(i));
}

TEST(TrainTree, PureDataGivesSingleLeaf) {
  auto schema = numeric_schema(1);
  const Dataset d(schema, {1, 2}, {Label::kNegative, Label::kNegative});
  const auto t = train_tree(d, WeightVector::uniform(1), 1, {}, 7);
  EXPECT_EQ(t.size(), 1u);
  EXPECT_TRUE(t.feature_set().empty());
  EXPECT_TRUE(critical_paths(t).empty());
}

TEST(TrainTree, TiedLeafIsPositive) {
  auto schema = numeric_schema(1);
  const Dataset d(schema, {1, 1}, {Label::kNegative, Label::kPositive});
  const auto t = train_tree(d, WeightVector::uniform(1), 1, {}, 7);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(*t.root().leaf_label, Label::kPositive);
}

TEST(TrainTree, RespectsStoppingRules) {
  const auto d = random_numeric(400, 4, 3);
  TreeParams shallow;
  shallow.max_depth = 2;
  EXPECT_LE(train_tree(d, WeightVector::uniform(4), 2, shallow, 1).depth(), 2u);
  TreeParams big;
  big.min_node_size = 150;
  const auto t = train_tree(d, WeightVector::uniform(4), 4, big, 1);
  for (const auto& n : t.nodes()) {
    if (!n.is_leaf()) EXPECT_GE(n.counts.total(), 150u);
  }
}

TEST(TrainTree, DeterministicPerSeedAndCountsConserved) {
  const auto d = random_numeric(300, 5, 11);
  const auto a = train_tree(d, WeightVector::uniform(5), 2, {}, 99);
  EXPECT_EQ(a, train_tree(d, WeightVector::uniform(5), 2, {}, 99));
  EXPECT_EQ(a.root().counts.total(), 300u);
  EXPECT_EQ(a.total_training_count(), 300u);
  // Every training row lands in a leaf whose counts include it.
  std::vector<ClassCounts> seen(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto& c = seen[a.leaf_for(d.row(i))];
    (d.label(i) == Label::kPositive ? c.positives : c.negatives)++;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.node(i).is_leaf()) EXPECT_EQ(seen[i], a.node(i).counts);
  }
}

TEST(TrainTree, UnseenCategoryFollowsHeaviestChild) {
  std::vector<FeatureSpec> f{{"c", FeatureKind::kCategorical, {"a", "b", "z"}}};
  auto schema = std::make_shared<FeatureSchema>(std::move(f), "y", "1", "0");
  const Dataset d(schema, {0, 0, 0, 1},
                  {Label::kPositive, Label::kPositive, Label::kPositive, Label::kNegative});
  const auto t = train_tree(d, WeightVector::uniform(1), 1, {}, 1);
  ASSERT_EQ(t.depth(), 1u);
  const double unseen[] = {2.0};
  EXPECT_EQ(t.predict(unseen), Label::kPositive);
}

TEST(CriticalPaths, ExampleTrees) {
  const auto paths = critical_paths(tree_f1());
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0], (std::vector<std::size_t>{kRemove, kDollar}));
  EXPECT_EQ(paths[1], (std::vector<std::size_t>{kRemove}));
  EXPECT_EQ(critical_features(tree_f3()), (std::vector<std::size_t>{kDollar, kTotalCapital}));
}

TEST(CriticalPaths, ExampleEmailIsSpamEverywhere) {
  const auto x = spam_email();
  for (const auto& t : {tree_f1(), tree_f2(), tree_f3()}) EXPECT_EQ(t.predict(x), Label::kPositive);
}

TEST(TreeText, RoundTripsExactly) {
  const auto d = random_numeric(200, 3, 5);
  const auto t = train_tree(d, WeightVector::uniform(3), 2, {}, 5);
  const auto text = tree_to_text(t);
  EXPECT_EQ(tree_from_text(text), t);
  EXPECT_EQ(tree_to_text(tree_from_text(text)), text);
  EXPECT_EQ(tree_to_text(tree_f1()).substr(0, 12), "tree 2000 5\n");
}

TEST(TreeText, RejectsCorruptInput) {
  auto text = tree_to_text(tree_f1());
  EXPECT_THROW(tree_from_text("forest 1 1\n"), Error);
  EXPECT_THROW(tree_from_text(text.substr(0, text.size() - 10)), Error);
  const auto pos = text.find("L 100 900 N");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 11, "L 100 900 P");
  EXPECT_THROW(tree_from_text(text), Error);
}
