#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "popsyn/dataset.hpp"
#include "popsyn/rng.hpp"
#include "popsyn/schema.hpp"

namespace popsyn {

/// Observed output-tuple frequencies per full conditional tuple, plus the
/// overall output-tuple frequencies. Counts are stored exactly and only
/// normalized when a probability is requested.
class EmpiricalTable {
 public:
  using Tuple = std::vector<CategoryIndex>;

  struct Entries {
    std::vector<Tuple> tuples;        // sorted, distinct
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;

    double probability(std::size_t i) const {
      return static_cast<double>(counts[i]) / static_cast<double>(total);
    }
  };

  EmpiricalTable() = default;
  EmpiricalTable(Schema schema, std::map<Tuple, Entries> by_conditionals, Entries overall);

  const Schema& schema() const { return schema_; }
  const std::map<Tuple, Entries>& by_conditionals() const { return by_conditionals_; }
  const Entries& overall() const { return overall_; }

  /// Entries for a conditional tuple, or nullptr if unseen in training.
  const Entries* find(const Tuple& conditionals) const;

  std::string to_json() const;
  static EmpiricalTable from_json(const std::string& text);

 private:
  Schema schema_;
  std::map<Tuple, Entries> by_conditionals_;
  Entries overall_;
};

/// Throws ValidationError on empty training data.
EmpiricalTable fit_empirical(std::span<const AgentRecord> train, const Schema& schema);

/// Draws outputs from the table of the record's conditional tuple, falling
/// back to the overall table for unseen tuples. Conditionals pass through.
AgentRecord sample_baseline(const EmpiricalTable& table, const AgentRecord& conditionals, SeededRng& rng);

std::vector<AgentRecord> sample_baseline(const EmpiricalTable& table, std::span<const AgentRecord> conditionals,
                                         std::size_t per_row, SeededRng& rng);

}  // namespace popsyn
