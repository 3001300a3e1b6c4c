#include "popsyn/split.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "popsyn/error.hpp"

namespace popsyn {

bool GroupSelector::matches(const AgentRecord& record) const {
  for (const auto& c : constraints) {
    if (c.feature >= record.values.size()) return false;
    if (std::find(c.values.begin(), c.values.end(), record.values[c.feature]) == c.values.end()) return false;
  }
  return true;
}

std::vector<std::size_t> select_group(std::span<const AgentRecord> records, const GroupSelector& selector) {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (selector.matches(records[i])) ids.push_back(i);
  }
  return ids;
}

GroupSelector choose_application_selector(std::span<const AgentRecord> records, const Schema& schema,
                                          double target_fraction) {
  const std::size_t type = schema.index_of("property_type");
  const std::size_t d1 = schema.index_of("distance_phase1");
  const std::size_t d2 = schema.index_of("distance_phase2");
  if (records.empty()) throw SplitError("cannot choose an application group from an empty dataset");

  // Keys: (t, a, b) with b == kAny for the coarser two-feature groups.
  constexpr CategoryIndex kAny = std::numeric_limits<CategoryIndex>::max();
  std::map<std::tuple<CategoryIndex, CategoryIndex, CategoryIndex>, std::size_t> counts;
  for (const auto& r : records) {
    ++counts[{r.values[type], r.values[d1], kAny}];
    ++counts[{r.values[type], r.values[d1], r.values[d2]}];
  }

  const double target = target_fraction * static_cast<double>(records.size());
  const std::size_t limit = static_cast<std::size_t>(0.15 * static_cast<double>(records.size()));
  const std::tuple<CategoryIndex, CategoryIndex, CategoryIndex>* best = nullptr;
  double best_gap = 0.0;
  for (const auto& [key, count] : counts) {
    if (count > limit) continue;
    const double gap = std::abs(static_cast<double>(count) - target);
    const bool coarser = std::get<2>(key) == kAny;
    const bool best_coarser = best && std::get<2>(*best) == kAny;
    if (!best || gap < best_gap || (gap == best_gap && coarser && !best_coarser)) {
      best = &key;
      best_gap = gap;
    }
  }
  if (!best) throw SplitError("no conditional group small enough for an application set");

  GroupSelector s;
  s.constraints.push_back({type, {std::get<0>(*best)}});
  s.constraints.push_back({d1, {std::get<1>(*best)}});
  if (std::get<2>(*best) != kAny) s.constraints.push_back({d2, {std::get<2>(*best)}});
  return s;
}

SplitPlan make_split(std::size_t n, std::span<const std::size_t> application_ids, SeededRng& rng) {
  if (n < 100) throw SplitError("split needs at least 100 records, got " + std::to_string(n));
  std::vector<bool> held(n, false);
  for (std::size_t id : application_ids) {
    if (id >= n) throw SplitError("application id " + std::to_string(id) + " out of range");
    held[id] = true;
  }
  const auto n_app = static_cast<std::size_t>(std::count(held.begin(), held.end(), true));
  if (n_app == 0) throw SplitError("application selector matched no records");
  if (static_cast<double>(n_app) > 0.15 * static_cast<double>(n)) {
    throw SplitError("application selector matched " + std::to_string(n_app) + " of " + std::to_string(n) +
                     " records (more than 15%)");
  }

  SplitPlan plan;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < n; ++i) {
    if (held[i]) {
      plan.application_ids.push_back(i);
    } else {
      pool.push_back(i);
    }
  }

  rng.shuffle(pool);
  const auto n_test = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(pool.size())));
  plan.test_ids.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(pool.begin() + static_cast<std::ptrdiff_t>(n_test), pool.end());

  // Folds: contiguous chunks of the shuffled training pool, sizes differ by at most one.
  const std::size_t base = train.size() / kFolds;
  const std::size_t extra = train.size() % kFolds;
  std::size_t begin = 0;
  for (std::size_t k = 0; k < kFolds; ++k) {
    const std::size_t len = base + (k < extra ? 1 : 0);
    Fold fold;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (i >= begin && i < begin + len) {
        fold.validation.push_back(train[i]);
      } else {
        fold.train.push_back(train[i]);
      }
    }
    std::sort(fold.validation.begin(), fold.validation.end());
    std::sort(fold.train.begin(), fold.train.end());
    plan.folds.push_back(std::move(fold));
    begin += len;
  }

  std::sort(plan.test_ids.begin(), plan.test_ids.end());
  std::sort(train.begin(), train.end());
  plan.train_ids = std::move(train);
  return plan;
}

SplitPlan make_split(std::span<const AgentRecord> records, const GroupSelector& selector, SeededRng& rng) {
  const auto ids = select_group(records, selector);
  return make_split(records.size(), ids, rng);
}

void check_split(const SplitPlan& plan, std::size_t n) {
  std::vector<int> owner(n, 0);
  auto mark = [&](const std::vector<std::size_t>& ids, const char* name) {
    for (std::size_t id : ids) {
      if (id >= n) throw SplitError(std::string(name) + " id out of range");
      if (owner[id]++) throw SplitError(std::string(name) + " overlaps another set");
    }
  };
  mark(plan.application_ids, "application");
  mark(plan.test_ids, "test");
  mark(plan.train_ids, "train");
  if (std::count(owner.begin(), owner.end(), 1) != static_cast<std::ptrdiff_t>(n)) {
    throw SplitError("split does not cover every record");
  }
  if (plan.folds.size() != kFolds) throw SplitError("expected " + std::to_string(kFolds) + " folds");

  std::vector<int> in_validation(n, 0);
  for (const auto& fold : plan.folds) {
    std::vector<std::size_t> merged = fold.train;
    merged.insert(merged.end(), fold.validation.begin(), fold.validation.end());
    std::sort(merged.begin(), merged.end());
    if (merged != plan.train_ids) throw SplitError("fold train + validation differs from the training pool");
    for (std::size_t id : fold.validation) ++in_validation[id];
  }
  for (std::size_t id : plan.train_ids) {
    if (in_validation[id] != 1) throw SplitError("fold validation subsets do not partition the training pool");
  }
}

}  // namespace popsyn
