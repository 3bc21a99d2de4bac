#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cwrf/cluster.hpp"
#include "cwrf/data.hpp"
#include "cwrf/forest.hpp"

namespace cwrf {

// Black-box classifier. Every query gets a fresh id, which randomized
// defenses use to pick their per-query model subset.
class ModelOracle {
 public:
  using Classify = std::function<Label(std::span<const double>, std::uint64_t query_id)>;

  explicit ModelOracle(Classify fn) : fn_(std::move(fn)) {}
  ModelOracle(const ModelOracle& o) : fn_(o.fn_), next_(o.next_.load()) {}

  Label classify(std::span<const double> x) const { return fn_(x, next_.fetch_add(1)); }
  std::uint64_t queries() const { return next_.load(); }

 private:
  Classify fn_;
  mutable std::atomic<std::uint64_t> next_{0};
};

// Majority vote of the whole pool.
ModelOracle full_pool_oracle(std::shared_ptr<const ModelPool> pool);
// Majority vote of select_models(clustering, q, seed, query_id).
ModelOracle clustered_oracle(std::shared_ptr<const ModelPool> pool,
                             std::shared_ptr<const Clustering> clustering, std::size_t q,
                             std::uint64_t seed);

struct AttackOrder {
  std::vector<std::size_t> features;     // descending recorded frequency
  std::vector<std::size_t> frequencies;  // paired with `features`
  std::size_t probed = 0;                // positive instances probed
  std::size_t already_accepted = 0;      // probed instances accepted unmodified
};

struct ProbeOptions {
  std::size_t n_probe = 50;  // 0 = every positive in the probing set
  std::size_t max_steps = 0;  // 0 = number of features
};

// Random probing: each probed positive gets random one-at-a-time profile
// substitutions until the oracle accepts it; the feature changed last is
// recorded.
AttackOrder learn_attack_order(const ModelOracle& oracle, const Dataset& probing,
                               const NegativeProfile& profile, const ProbeOptions& options,
                               std::uint64_t seed);

enum class AttackOutcome {
  kEvaded,          // accepted after one or more modifications
  kDetected,        // bounded budget spent without acceptance
  kExhausted,       // order or step limit ran out without acceptance
  kAlreadyEvading,  // accepted before any modification
};
const char* attack_outcome_name(AttackOutcome o);

struct AttackTrace {
  std::size_t row = 0;
  std::size_t instance = 0;  // source id of the row
  std::vector<std::size_t> modified;
  AttackOutcome outcome = AttackOutcome::kDetected;
  std::size_t queries = 0;
};

enum class AttackMode { kBounded, kUnbounded };

struct AttackResult {
  AttackMode mode = AttackMode::kBounded;
  std::size_t k = 0;  // bounded budget
  // Positives rejected before modification; the population the rates use.
  std::size_t attacked = 0;
  std::size_t evaded = 0;
  std::size_t exhausted = 0;
  std::size_t already_evading = 0;
  double success_rate = 0.0;  // evaded / attacked (bounded)
  double avg_modified = 0.0;  // mean modifications over evaded instances (unbounded)
  std::vector<AttackTrace> traces;
};

AttackResult attack_bounded(const ModelOracle& oracle, const Dataset& attack_set,
                            const AttackOrder& order, std::size_t k,
                            const NegativeProfile& profile);
// max_steps = 0 means the whole order.
AttackResult attack_unbounded(const ModelOracle& oracle, const Dataset& attack_set,
                              const AttackOrder& order, const NegativeProfile& profile,
                              std::size_t max_steps = 0);

enum class Knowledge { kIncomplete, kComplete };
const char* knowledge_name(Knowledge k);
Knowledge parse_knowledge(const std::string& name);

struct KnowledgeSplit {
  Dataset probing;
  Dataset attacking;
};

// The test set is shuffled and halved. Incomplete: probing is the first half.
// Complete: probing is the whole test set. Attacking is the second half.
KnowledgeSplit make_knowledge_split(const Dataset& test, Knowledge mode, std::uint64_t seed);

// One JSON object per line: instance, row, modified (indices and names),
// outcome, queries.
void write_traces_jsonl(std::ostream& out, const AttackResult& result,
                        const FeatureSchema& schema);

}  // namespace cwrf
