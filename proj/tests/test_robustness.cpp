#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "cwrf/error.hpp"
#include "cwrf/robustness.hpp"
#include "cwrf/rng.hpp"
#include "fixtures.hpp"
#include "random_pools.hpp"

using namespace cwrf;
using namespace cwrf::testing;

namespace {

// Exhaustive search over the value grid {-0.5, 0.5, 1.5, 2.5, 3.5}, which
// reaches every region of grid-threshold trees.
std::optional<std::size_t> grid_min_attack(std::span<const DecisionTree> trees,
                                           std::vector<double> x) {
  const std::size_t m = x.size();
  const double grid[] = {-0.5, 0.5, 1.5, 2.5, 3.5};
  std::optional<std::size_t> best;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    const auto size = static_cast<std::size_t>(__builtin_popcount(mask));
    if (best && size >= *best) continue;
    std::vector<std::size_t> feats;
    for (std::size_t j = 0; j < m; ++j)
      if (mask >> j & 1) feats.push_back(j);
    std::size_t combos = 1;
    for (std::size_t i = 0; i < feats.size(); ++i) combos *= 5;
    for (std::size_t c = 0; c < combos; ++c) {
      auto y = x;
      std::size_t code = c;
      for (const auto j : feats) {
        y[j] = grid[code % 5];
        code /= 5;
      }
      if (predict_pool(trees, y).label == Label::kNegative) {
        best = size;
        break;
      }
    }
  }
  return best;
}

}  // namespace

TEST(CriticalCount, ExamplePool) {
  const std::vector<DecisionTree> pool = {tree_f1(), tree_f2(), tree_f3()};
  const auto cc = critical_counts(pool, 5);
  EXPECT_EQ(cc, (std::vector<std::size_t>{1, 2, 1, 1, 1}));
  EXPECT_EQ(critical_count(kDollar, pool), 2u);
  EXPECT_EQ(critical_count(kRemove, pool), 1u);
}

TEST(CriticalCount, IgnoresFeaturesOnlyOnNegativePaths) {
  // total_capital appears only above negative leaves.
  const auto t = build(split(kDollar, 0.1, split(kTotalCapital, 5.0, leaf(0, 5), leaf(1, 4)),
                             leaf(6, 1)));
  const std::vector<DecisionTree> pool = {t};
  EXPECT_EQ(critical_count(kTotalCapital, pool), 0u);
  EXPECT_EQ(critical_count(kDollar, pool), 1u);
}

TEST(Certify, TwoTreeExample) {
  const std::vector<DecisionTree> pool = {tree_f1(), tree_f2()};
  const auto c = certify(pool, CostVector::uniform(5), 1);
  EXPECT_EQ(c.t1, 1u);
  EXPECT_DOUBLE_EQ(c.t2, 1.0);
  EXPECT_EQ(c.required_margin, 2u);
  EXPECT_EQ(c.voters, 2u);
  EXPECT_FALSE(c.vacuous());
}

TEST(Certify, UsesLargestCountsAndSmallestCosts) {
  const std::vector<DecisionTree> pool = {tree_f1(), tree_f2(), tree_f3()};
  const CostVector costs({3.0, 0.5, 2.0, 1.0, 4.0});
  const auto c = certify(pool, costs, 2);
  EXPECT_EQ(c.t1, 3u);
  EXPECT_DOUBLE_EQ(c.t2, 1.5);
  EXPECT_EQ(c.required_margin, 5u);
  EXPECT_TRUE(c.vacuous());
  EXPECT_THROW(certify(pool, costs, 0), Error);
  EXPECT_THROW(certify(pool, costs, 6), Error);
}

TEST(Certify, MonotoneInBudget) {
  const std::vector<DecisionTree> pool = {tree_f1(), tree_f2(), tree_f3()};
  const CostVector costs({3.0, 0.5, 2.0, 1.0, 4.0});
  Certificate prev;
  for (std::size_t k = 1; k <= 5; ++k) {
    const auto c = certify(pool, costs, k);
    EXPECT_GE(c.t1, prev.t1);
    EXPECT_GT(c.t2, prev.t2);
    EXPECT_GE(c.required_margin, prev.required_margin);
    prev = c;
  }
  EXPECT_EQ(prev.t1, 6u);
  EXPECT_DOUBLE_EQ(prev.t2, 10.5);
}

TEST(ClusteringBound, SpreadOfOneOnExamplePartition) {
  const std::vector<DecisionTree> pool = {tree_f1(), tree_f2(), tree_f3()};
  const Clustering c{{0, 1, 0}, 2};
  EXPECT_EQ(cluster_spread(c, pool, 5), 1u);
  const auto b = clustering_bound(c, pool, 1, 2, CostVector::uniform(5));
  EXPECT_EQ(b.voters, 2u);
  EXPECT_EQ(b.t1, 2u);
  EXPECT_EQ(b.required_margin, 3u);
  EXPECT_DOUBLE_EQ(b.t2, 2.0);
  // Splitting the two dollar trees apart raises the spread.
  EXPECT_EQ(cluster_spread(Clustering{{0, 0, 1}, 2}, pool, 5), 2u);
}

TEST(ValueDomains, ThresholdsPlusOneAbove) {
  const std::vector<DecisionTree> pool = {tree_f1(), tree_f3()};
  const auto d = candidate_value_domains(pool, *spam_schema());
  ASSERT_EQ(d.size(), 5u);
  EXPECT_EQ(d[kRemove].size(), 2u);
  EXPECT_EQ(d[kRemove][0], 0.0);
  EXPECT_GT(d[kRemove][1], 0.0);
  EXPECT_EQ(d[kDollar].size(), 2u);
  EXPECT_TRUE(d[kExclaim].empty());
  EXPECT_EQ(d[kTotalCapital][0], 64.0);
}

TEST(BruteForce, ExampleMinimalSizes) {
  const auto schema = spam_schema();
  const auto x = spam_email();
  const std::vector<std::vector<DecisionTree>> pools = {
      {tree_f1()}, {tree_f1(), tree_f2()}, {tree_f1(), tree_f2(), tree_f3()}};
  const std::size_t expected[] = {1, 3, 2};
  for (std::size_t i = 0; i < pools.size(); ++i) {
    ASSERT_EQ(predict_pool(pools[i], x).label, Label::kPositive);
    const auto r = brute_force_min_attack(pools[i], x, candidate_value_domains(pools[i], *schema));
    ASSERT_TRUE(r.size.has_value());
    EXPECT_EQ(*r.size, expected[i]) << "pool " << i;
    EXPECT_FALSE(r.limit_reached);
    auto y = x;
    for (std::size_t f = 0; f < r.features.size(); ++f) y[r.features[f]] = r.values[f];
    EXPECT_EQ(predict_pool(pools[i], y).label, Label::kNegative);
  }
  const std::vector<DecisionTree> three = pools[2];
  const auto r = brute_force_min_attack(three, x, candidate_value_domains(three, *schema));
  EXPECT_EQ(r.features, (std::vector<std::size_t>{kDollar, kTotalCapital}));
}

TEST(BruteForce, AlreadyNegativeAndLimits) {
  const std::vector<DecisionTree> pool = {tree_f1(), tree_f2(), tree_f3()};
  const auto schema = spam_schema();
  const auto domains = candidate_value_domains(pool, *schema);
  const std::vector<double> benign = {0.0, 0.0, 0.0, 0.0, 10.0};
  ASSERT_EQ(predict_pool(pool, benign).label, Label::kNegative);
  EXPECT_EQ(brute_force_min_attack(pool, benign, domains).size, 0u);
  BruteForceLimits small;
  small.max_size = 1;
  EXPECT_FALSE(brute_force_min_attack(pool, spam_email(), domains, small).size.has_value());
  BruteForceLimits tiny;
  tiny.max_evaluations = 2;
  const auto r = brute_force_min_attack(pool, spam_email(), domains, tiny);
  EXPECT_TRUE(r.limit_reached);
  EXPECT_FALSE(r.size.has_value());
}

TEST(BruteForce, MatchesGridSearchOnRandomPools) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto p = random_pool(seed);
    const auto schema = numeric_schema(p.m);
    const auto domains = candidate_value_domains(p.trees, *schema);
    Rng rng(derive_seed(seed, 99));
    const auto x = random_grid_point(rng, p.m);
    const auto fast = brute_force_min_attack(p.trees, x, domains);
    const auto slow = grid_min_attack(p.trees, x);
    ASSERT_FALSE(fast.limit_reached);
    EXPECT_EQ(fast.size, slow) << "seed " << seed;
    ++checked;
  }
  EXPECT_EQ(checked, 300u);
}

// No attack of size k reaches a negative label when positive votes meet the
// certified margin, for the full pool and for every clustered draw.
TEST(Certify, SoundOnRandomPools) {
  std::size_t engaged = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const auto p = random_pool(seed + 1000);
    const auto schema = numeric_schema(p.m);
    const auto domains = candidate_value_domains(p.trees, *schema);
    const auto costs = CostVector::uniform(p.m);
    Rng rng(seed);
    const auto x = random_grid_point(rng, p.m);
    const auto votes = predict_pool(p.trees, x).positive_votes;
    const auto attack = brute_force_min_attack(p.trees, x, domains);
    if (!attack.size || *attack.size == 0) continue;
    for (std::size_t k = 1; k <= p.m; ++k) {
      const auto cert = certify(p.trees, costs, k);
      if (votes >= cert.required_margin) {
        EXPECT_GT(*attack.size, k) << "seed " << seed;
        ++engaged;
      }
    }
    // Clustered version on a random partition.
    const std::size_t s = std::min<std::size_t>(2, p.trees.size());
    Clustering c{std::vector<std::size_t>(p.trees.size()), s};
    for (std::size_t i = 0; i < p.trees.size(); ++i) c.assignment[i] = i % s;
    for (std::uint64_t qid = 0; qid < 3; ++qid) {
      const auto picked = select_models(c, 1, seed, qid);
      std::vector<DecisionTree> sub;
      for (const auto i : picked) sub.push_back(p.trees[i]);
      const auto v = predict_pool(sub, x).positive_votes;
      const auto a = brute_force_min_attack(sub, x, domains);
      for (std::size_t k = 1; k <= p.m; ++k) {
        const auto b = clustering_bound(c, p.trees, 1, k, costs);
        EXPECT_EQ(b.voters, sub.size());
        if (v >= b.required_margin) {
          if (a.size) EXPECT_GT(*a.size, k);
          ++engaged;
        }
      }
    }
  }
  EXPECT_GT(engaged, 20u);
}
