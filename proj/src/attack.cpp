#include "cwrf/attack.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "cwrf/error.hpp"
#include "cwrf/rng.hpp"

namespace cwrf {

ModelOracle full_pool_oracle(std::shared_ptr<const ModelPool> pool) {
  require(pool && pool->size() > 0, "oracle: empty pool");
  return ModelOracle([pool](std::span<const double> x, std::uint64_t) {
    return predict_pool(pool->trees, x).label;
  });
}

ModelOracle clustered_oracle(std::shared_ptr<const ModelPool> pool,
                             std::shared_ptr<const Clustering> clustering, std::size_t q,
                             std::uint64_t seed) {
  require(pool && pool->size() > 0, "oracle: empty pool");
  require(clustering && clustering->assignment.size() == pool->size(),
          "oracle: clustering does not cover the pool");
  require(q >= 1, "oracle: q must be at least 1");
  return ModelOracle([pool, clustering, q, seed](std::span<const double> x, std::uint64_t id) {
    const auto chosen = select_models(*clustering, q, seed, id);
    return predict_pool(*pool, chosen, x).label;
  });
}

AttackOrder learn_attack_order(const ModelOracle& oracle, const Dataset& probing,
                               const NegativeProfile& profile, const ProbeOptions& options,
                               std::uint64_t seed) {
  const std::size_t m = probing.num_features();
  require(profile.values.size() == m, "probing: profile length mismatch");
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < probing.size(); ++i) {
    if (probing.label(i) == Label::kPositive) positives.push_back(i);
  }
  const std::size_t n = options.n_probe == 0 ? positives.size() : options.n_probe;
  if (positives.empty() || positives.size() < n) {
    fail(ErrorCategory::kData, "probing set has " + std::to_string(positives.size()) +
                                   " positive instances, need " + std::to_string(n));
  }
  const std::size_t max_steps = options.max_steps == 0 ? m : std::min(options.max_steps, m);

  Rng rng(derive_seed(seed, stream::kProbe));
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(positives[i], positives[i + uniform_index(rng, positives.size() - i)]);
  }

  AttackOrder order;
  order.probed = n;
  std::vector<std::size_t> freq(m, 0);
  std::vector<double> x(m);
  std::vector<std::size_t> untouched(m);
  for (std::size_t p = 0; p < n; ++p) {
    const auto row = probing.row(positives[p]);
    std::copy(row.begin(), row.end(), x.begin());
    if (oracle.classify(x) == Label::kNegative) {
      ++order.already_accepted;
      continue;
    }
    std::iota(untouched.begin(), untouched.end(), std::size_t{0});
    std::size_t remaining = m;
    for (std::size_t step = 0; step < max_steps && remaining > 0; ++step) {
      const std::size_t pick = uniform_index(rng, remaining);
      const std::size_t j = untouched[pick];
      untouched[pick] = untouched[--remaining];
      x[j] = profile.values[j];
      if (oracle.classify(x) == Label::kNegative) {
        ++freq[j];
        break;
      }
    }
  }

  std::vector<std::size_t> recorded;
  for (std::size_t j = 0; j < m; ++j) {
    if (freq[j] > 0) recorded.push_back(j);
  }
  std::stable_sort(recorded.begin(), recorded.end(),
                   [&](std::size_t a, std::size_t b) { return freq[a] > freq[b]; });
  order.features = recorded;
  for (const auto j : recorded) order.frequencies.push_back(freq[j]);
  return order;
}

const char* attack_outcome_name(AttackOutcome o) {
  switch (o) {
    case AttackOutcome::kEvaded:
      return "evaded";
    case AttackOutcome::kDetected:
      return "detected";
    case AttackOutcome::kExhausted:
      return "exhausted";
    case AttackOutcome::kAlreadyEvading:
      return "already_evading";
  }
  return "unknown";
}

namespace {

// Runs the in-order substitution on every positive of the attack set with at
// most `budget` modifications each.
AttackResult run_attack(const ModelOracle& oracle, const Dataset& attack_set,
                        const AttackOrder& order, std::size_t budget, bool bounded,
                        const NegativeProfile& profile) {
  const std::size_t m = attack_set.num_features();
  require(profile.values.size() == m, "attack: profile length mismatch");
  if (attack_set.count(Label::kPositive) == 0) {
    fail(ErrorCategory::kData, "attack set contains no positive instances");
  }
  for (const auto j : order.features) require(j < m, "attack: order feature out of range");

  AttackResult result;
  std::vector<double> x(m);
  std::size_t modified_total = 0;
  const std::size_t limit = std::min(budget, order.features.size());
  for (std::size_t i = 0; i < attack_set.size(); ++i) {
    if (attack_set.label(i) != Label::kPositive) continue;
    const auto row = attack_set.row(i);
    std::copy(row.begin(), row.end(), x.begin());
    AttackTrace trace;
    trace.row = i;
    trace.instance = attack_set.source_id(i);
    ++trace.queries;
    if (oracle.classify(x) == Label::kNegative) {
      trace.outcome = AttackOutcome::kAlreadyEvading;
      ++result.already_evading;
      result.traces.push_back(std::move(trace));
      continue;
    }
    ++result.attacked;
    bool accepted = false;
    for (std::size_t step = 0; step < limit && !accepted; ++step) {
      const std::size_t j = order.features[step];
      x[j] = profile.values[j];
      trace.modified.push_back(j);
      ++trace.queries;
      accepted = oracle.classify(x) == Label::kNegative;
    }
    if (accepted) {
      trace.outcome = AttackOutcome::kEvaded;
      ++result.evaded;
      modified_total += trace.modified.size();
    } else if (!bounded || limit < budget) {
      trace.outcome = AttackOutcome::kExhausted;
      ++result.exhausted;
    } else {
      trace.outcome = AttackOutcome::kDetected;
    }
    result.traces.push_back(std::move(trace));
  }
  if (result.attacked > 0) {
    result.success_rate =
        static_cast<double>(result.evaded) / static_cast<double>(result.attacked);
  }
  if (result.evaded > 0) {
    result.avg_modified =
        static_cast<double>(modified_total) / static_cast<double>(result.evaded);
  }
  return result;
}

}  // namespace

AttackResult attack_bounded(const ModelOracle& oracle, const Dataset& attack_set,
                            const AttackOrder& order, std::size_t k,
                            const NegativeProfile& profile) {
  require(k >= 1, "bounded attack: k must be at least 1");
  auto result = run_attack(oracle, attack_set, order, k, true, profile);
  result.mode = AttackMode::kBounded;
  result.k = k;
  return result;
}

AttackResult attack_unbounded(const ModelOracle& oracle, const Dataset& attack_set,
                              const AttackOrder& order, const NegativeProfile& profile,
                              std::size_t max_steps) {
  require(!order.features.empty(), "unbounded attack: empty attack order");
  const std::size_t budget = max_steps == 0 ? order.features.size() : max_steps;
  auto result = run_attack(oracle, attack_set, order, budget, false, profile);
  result.mode = AttackMode::kUnbounded;
  return result;
}

const char* knowledge_name(Knowledge k) {
  return k == Knowledge::kComplete ? "complete" : "incomplete";
}

Knowledge parse_knowledge(const std::string& name) {
  if (name == "incomplete") return Knowledge::kIncomplete;
  if (name == "complete") return Knowledge::kComplete;
  fail(ErrorCategory::kConfig, "knowledge must be 'incomplete' or 'complete', got '" + name + "'");
}

KnowledgeSplit make_knowledge_split(const Dataset& test, Knowledge mode, std::uint64_t seed) {
  require(test.size() >= 2, "knowledge split: need at least two test instances");
  std::vector<std::size_t> rows(test.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Rng rng(derive_seed(seed, stream::kKnowledge));
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto half = static_cast<long>(rows.size() / 2);
  std::vector<std::size_t> first(rows.begin(), rows.begin() + half);
  std::vector<std::size_t> second(rows.begin() + half, rows.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  if (mode == Knowledge::kComplete) {
    std::vector<std::size_t> all(test.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return {test.subset(all), test.subset(second)};
  }
  return {test.subset(first), test.subset(second)};
}

void write_traces_jsonl(std::ostream& out, const AttackResult& result,
                        const FeatureSchema& schema) {
  for (const auto& t : result.traces) {
    nlohmann::json names = nlohmann::json::array();
    for (const auto j : t.modified) names.push_back(schema.feature(j).name);
    nlohmann::json rec = {{"instance", t.instance},
                          {"row", t.row},
                          {"modified", t.modified},
                          {"modified_names", names},
                          {"outcome", attack_outcome_name(t.outcome)},
                          {"queries", t.queries}};
    out << rec.dump() << '\n';
  }
}

}  // namespace cwrf
