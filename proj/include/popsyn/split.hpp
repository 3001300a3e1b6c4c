#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "popsyn/dataset.hpp"
#include "popsyn/rng.hpp"
#include "popsyn/schema.hpp"

namespace popsyn {

inline constexpr std::size_t kFolds = 5;

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Application / test / train partition of record indices, with K folds
/// over the training pool. All index lists are sorted ascending.
struct SplitPlan {
  std::vector<std::size_t> application_ids;
  std::vector<std::size_t> test_ids;
  std::vector<std::size_t> train_ids;
  std::vector<Fold> folds;
};

/// Records matching every (feature, allowed values) constraint form one
/// conditional group, e.g. all apartments at one location.
struct GroupSelector {
  struct Constraint {
    std::size_t feature = 0;
    std::vector<CategoryIndex> values;
  };
  std::vector<Constraint> constraints;

  bool matches(const AgentRecord& record) const;
};

std::vector<std::size_t> select_group(std::span<const AgentRecord> records, const GroupSelector& selector);

/// Picks the (property_type, distance_phase1[, distance_phase2]) group whose
/// size is closest to target_fraction of the data. Ties go to the
/// lexicographically smallest key, coarser groups first.
GroupSelector choose_application_selector(std::span<const AgentRecord> records, const Schema& schema,
                                          double target_fraction = 0.05);

/// Holds out application_ids, then splits the rest 90/10 train/test and
/// partitions train into kFolds validation subsets.
/// Requires n >= 100 and an application set of (0%, 15%] of n.
SplitPlan make_split(std::size_t n, std::span<const std::size_t> application_ids, SeededRng& rng);

SplitPlan make_split(std::span<const AgentRecord> records, const GroupSelector& selector, SeededRng& rng);

/// Throws SplitError if the plan's structural invariants do not hold for n records.
void check_split(const SplitPlan& plan, std::size_t n);

}  // namespace popsyn
