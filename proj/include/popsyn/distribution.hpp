#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "popsyn/dataset.hpp"
#include "popsyn/schema.hpp"

namespace popsyn {

/// Dense probability table over the Cartesian product of a feature subset.
///
/// Bins are laid out in mixed radix with the last feature varying fastest.
/// Every theoretical bin is present, including empty ones, so n_bins() is
/// always the product of the subset's category counts.
class DistributionTable {
 public:
  DistributionTable() = default;
  DistributionTable(std::vector<std::size_t> features, std::vector<std::size_t> radices,
                    std::vector<double> probabilities);

  /// Normalizes nonnegative counts (all-zero counts are rejected).
  static DistributionTable from_counts(std::vector<std::size_t> features, std::vector<std::size_t> radices,
                                       std::span<const double> counts);

  const std::vector<std::size_t>& features() const { return features_; }
  const std::vector<std::size_t>& radices() const { return radices_; }
  std::size_t n_bins() const { return probs_.size(); }
  std::span<const double> probabilities() const { return probs_; }

  std::size_t bin_index(std::span<const CategoryIndex> tuple) const;
  std::vector<CategoryIndex> tuple_of(std::size_t bin) const;
  double at(std::span<const CategoryIndex> tuple) const { return probs_[bin_index(tuple)]; }

  double total() const;

  /// True when both tables cover the same features with the same radices.
  bool same_layout(const DistributionTable& other) const;

 private:
  std::vector<std::size_t> features_;
  std::vector<std::size_t> radices_;
  std::vector<double> probs_;
};

/// Mixed-radix bin count; throws if it would exceed `limit`.
std::size_t bin_count(std::span<const std::size_t> radices, std::size_t limit = std::size_t{1} << 26);

/// Normalized frequency table of agents over 1-3 output features.
/// Throws ValidationError for an empty agent list or a subset outside 1-3.
DistributionTable build_table(std::span<const AgentRecord> agents, const Schema& schema,
                              std::span<const std::size_t> subset);
DistributionTable build_table(std::span<const AgentRecord> agents, const Schema& schema,
                              const std::vector<std::string>& subset_names);

/// Total variation distance; tables must share a layout.
double total_variation(const DistributionTable& a, const DistributionTable& b);

}  // namespace popsyn
