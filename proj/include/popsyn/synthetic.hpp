#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "popsyn/dataset.hpp"
#include "popsyn/distribution.hpp"
#include "popsyn/rng.hpp"
#include "popsyn/schema.hpp"

namespace popsyn {

/// Schema-faithful stand-in for the housing dataset with a known joint.
///
/// Generative story for one record:
///   property_type ~ p(t)
///   size | t, sales_price | t,size, floor | t, and three independent distances
///   household class k ~ softmax(logits(c)), four classes
///   each output feature ~ class-conditional categorical table, independently given k
///
/// Every table is derived from the fixed coefficients in synthetic.cpp and
/// the schema's bin counts, so p(c), p(k | c) and p(x | c) are closed form.
/// Bump the version string whenever a coefficient changes.
class PlantedPopulation {
 public:
  static constexpr std::string_view kVersion = "planted-v1";
  static constexpr std::size_t kClasses = 4;
  using ClassWeights = std::array<double, kClasses>;

  /// Requires the twelve housing features by name (any bin counts).
  explicit PlantedPopulation(Schema schema);

  const Schema& schema() const { return schema_; }

  AgentRecord draw(SeededRng& rng) const;
  /// Draws property attributes only; output indices are left at 0.
  AgentRecord draw_conditionals(SeededRng& rng) const;
  /// Overwrites the output features of `record` given its conditionals.
  void draw_outputs(AgentRecord& record, SeededRng& rng) const;

  /// p(c) for the record's conditional features.
  double conditional_probability(const AgentRecord& record) const;
  /// p(k | c).
  ClassWeights class_posterior(const AgentRecord& record) const;
  /// p(x_f = v | k) for output feature f (schema index).
  const std::vector<double>& output_table(std::size_t klass, std::size_t output_feature) const;

  /// Exact joint of the given output features given the record's conditionals.
  DistributionTable conditional_distribution(const AgentRecord& conditionals,
                                             std::span<const std::size_t> output_subset) const;

  /// Exact p(x_f | c_g = v), marginalizing all other conditionals.
  struct SingleValueMarginals {
    // [conditional feature - output_count][value] -> p(c_g = v)
    std::vector<std::vector<double>> value_probability;
    // [conditional feature - output_count][value][output feature][category]
    std::vector<std::vector<std::vector<std::vector<double>>>> output_given_value;
  };
  SingleValueMarginals single_value_marginals() const;

 private:
  Schema schema_;
  // schema indices
  std::size_t age_, gender_, nationality_, investor_, prior_home_;
  std::size_t d1_, d2_, dg_, price_, size_, floor_, type_;

  std::vector<double> type_p_;
  std::vector<std::vector<double>> size_given_type_;
  std::vector<std::vector<std::vector<double>>> price_given_type_size_;
  std::vector<std::vector<double>> floor_given_type_;
  std::vector<double> d1_p_, d2_p_, dg_p_;
  // [class][output feature] -> categorical table
  std::vector<std::vector<std::vector<double>>> output_tables_;
};

std::vector<AgentRecord> generate_synthetic_dataset(const Schema& schema, std::size_t n, SeededRng& rng);

/// Closed-form joint over the named output features given full conditionals.
DistributionTable true_conditional_distribution(const Schema& schema, const AgentRecord& conditionals,
                                                const std::vector<std::string>& output_subset);

}  // namespace popsyn
