#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popsyn/dataset.hpp"
#include "popsyn/distribution.hpp"
#include "popsyn/schema.hpp"

namespace popsyn {

/// Standardized RMSE: RMSE over all N_c bins divided by the mean cell
/// probability 1/N_c, i.e. sqrt(N_c * sum (estimate - truth)^2).
/// Throws ValidationError when the tables cover different features.
double srmse(const DistributionTable& estimate, const DistributionTable& truth);

/// Same formula on raw paired vectors (used for pooled marginals).
double srmse(std::span<const double> estimate, std::span<const double> truth);

/// Coefficient of determination of `estimate` as a predictor of `truth`.
/// Absent when truth is constant.
std::optional<double> r_squared(std::span<const double> estimate, std::span<const double> truth);

/// Pearson correlation; absent when either vector is constant.
std::optional<double> pearson(std::span<const double> estimate, std::span<const double> truth);

/// Percentage of generated agents whose full output tuple never occurs in train.
double zero_sample_pct(std::span<const AgentRecord> generated, std::span<const AgentRecord> train,
                       const Schema& schema);

/// Number of distinct output tuples among agents.
std::size_t distinct_output_tuples(std::span<const AgentRecord> agents, const Schema& schema);

/// Per-feature marginals of every output feature, concatenated in schema
/// order. Length is the schema's output width.
std::vector<double> pooled_marginals(std::span<const AgentRecord> agents, const Schema& schema);

/// Pooled marginal SRMSE with N_c = total output category count.
double pooled_marginal_srmse(std::span<const AgentRecord> estimate, std::span<const AgentRecord> truth,
                             const Schema& schema);

/// The four evaluated distributions: pooled marginals, age x nationality,
/// age x nationality x prior_home, age x prior_home x investor.
struct DistributionSrmse {
  double marginal = 0.0;
  double bivariate = 0.0;
  double trivariate1 = 0.0;
  double trivariate2 = 0.0;
};

struct EvalReport {
  DistributionSrmse srmse;
  std::vector<std::pair<std::string, double>> per_feature_marginal_srmse;
  std::optional<double> marginal_r_squared;
  std::optional<double> marginal_pearson;
  std::optional<double> zero_sample_pct;
  std::size_t distinct_tuples = 0;
  std::size_t generated_count = 0;
  std::size_t truth_count = 0;
  // Across-fold statistics of validation marginal SRMSE, when available.
  std::optional<double> fold_mean;
  std::optional<double> fold_std;
};

inline const std::vector<std::string> kBivariate = {"age", "nationality"};
inline const std::vector<std::string> kTrivariate1 = {"age", "nationality", "prior_home"};
inline const std::vector<std::string> kTrivariate2 = {"age", "prior_home", "investor"};

/// Full comparison of a generated population against a truth set.
/// `train`, when non-empty, adds the zero-sample percentage.
EvalReport distribution_suite(std::span<const AgentRecord> generated, std::span<const AgentRecord> truth,
                              const Schema& schema, std::span<const AgentRecord> train = {});

std::string report_to_json(const EvalReport& report, int indent = 2);

/// Mean and standard deviation (population, divide by n).
std::pair<double, double> mean_std(std::span<const double> values);

}  // namespace popsyn
