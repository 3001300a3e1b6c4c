#include "popsyn/distribution.hpp"

#include <cmath>
#include <numeric>

#include "popsyn/error.hpp"

namespace popsyn {

std::size_t bin_count(std::span<const std::size_t> radices, std::size_t limit) {
  std::size_t n = 1;
  for (std::size_t r : radices) {
    if (r == 0) throw ShapeError("distribution radix must be positive");
    if (n > limit / r) throw ShapeError("distribution table too large");
    n *= r;
  }
  return n;
}

DistributionTable::DistributionTable(std::vector<std::size_t> features, std::vector<std::size_t> radices,
                                     std::vector<double> probabilities)
    : features_(std::move(features)), radices_(std::move(radices)), probs_(std::move(probabilities)) {
  if (features_.size() != radices_.size()) throw ShapeError("feature and radix lists differ in length");
  if (probs_.size() != bin_count(radices_)) {
    throw ShapeError("table has " + std::to_string(probs_.size()) + " bins, expected " +
                     std::to_string(bin_count(radices_)));
  }
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("table probabilities must be finite and nonnegative");
  }
}

DistributionTable DistributionTable::from_counts(std::vector<std::size_t> features, std::vector<std::size_t> radices,
                                                 std::span<const double> counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(total > 0.0)) throw ValidationError("cannot normalize an empty count table");
  std::vector<double> probs(counts.begin(), counts.end());
  for (auto& p : probs) p /= total;
  return DistributionTable(std::move(features), std::move(radices), std::move(probs));
}

std::size_t DistributionTable::bin_index(std::span<const CategoryIndex> tuple) const {
  if (tuple.size() != radices_.size()) throw ShapeError("tuple length does not match table arity");
  std::size_t bin = 0;
  for (std::size_t i = 0; i < radices_.size(); ++i) {
    if (tuple[i] >= radices_[i]) throw ShapeError("tuple entry out of range");
    bin = bin * radices_[i] + tuple[i];
  }
  return bin;
}

std::vector<CategoryIndex> DistributionTable::tuple_of(std::size_t bin) const {
  std::vector<CategoryIndex> t(radices_.size());
  for (std::size_t i = radices_.size(); i-- > 0;) {
    t[i] = static_cast<CategoryIndex>(bin % radices_[i]);
    bin /= radices_[i];
  }
  return t;
}

double DistributionTable::total() const { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

bool DistributionTable::same_layout(const DistributionTable& other) const {
  return features_ == other.features_ && radices_ == other.radices_;
}

DistributionTable build_table(std::span<const AgentRecord> agents, const Schema& schema,
                              std::span<const std::size_t> subset) {
  if (agents.empty()) throw ValidationError("build_table needs at least one agent");
  if (subset.empty() || subset.size() > 3) {
    throw ValidationError("distribution subsets have 1 to 3 features, got " + std::to_string(subset.size()));
  }
  std::vector<std::size_t> radices;
  for (std::size_t f : subset) {
    if (f >= schema.output_count()) {
      throw ValidationError("feature index " + std::to_string(f) + " is not an output feature");
    }
    radices.push_back(schema.feature(f).categories());
  }
  std::vector<double> counts(bin_count(radices), 0.0);
  std::vector<std::size_t> features(subset.begin(), subset.end());
  for (const auto& a : agents) {
    std::size_t bin = 0;
    for (std::size_t i = 0; i < subset.size(); ++i) {
      const auto v = a.values.at(subset[i]);
      if (v >= radices[i]) throw EncodingError("feature '" + schema.feature(subset[i]).name + "' index out of range");
      bin = bin * radices[i] + v;
    }
    counts[bin] += 1.0;
  }
  return DistributionTable::from_counts(std::move(features), std::move(radices), counts);
}

DistributionTable build_table(std::span<const AgentRecord> agents, const Schema& schema,
                              const std::vector<std::string>& subset_names) {
  std::vector<std::size_t> subset;
  for (const auto& name : subset_names) subset.push_back(schema.index_of(name));
  return build_table(agents, schema, subset);
}

double total_variation(const DistributionTable& a, const DistributionTable& b) {
  if (!a.same_layout(b)) throw ValidationError("total_variation: tables cover different features");
  double tv = 0.0;
  for (std::size_t i = 0; i < a.n_bins(); ++i) tv += std::abs(a.probabilities()[i] - b.probabilities()[i]);
  return 0.5 * tv;
}

}  // namespace popsyn
