#include "popsyn/metrics.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "popsyn/error.hpp"

namespace popsyn {

double srmse(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size() || truth.empty()) {
    throw ValidationError("srmse: vectors have different lengths (" + std::to_string(estimate.size()) + " vs " +
                          std::to_string(truth.size()) + ")");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = estimate[i] - truth[i];
    sq += d * d;
  }
  return std::sqrt(static_cast<double>(truth.size()) * sq);
}

double srmse(const DistributionTable& estimate, const DistributionTable& truth) {
  if (!estimate.same_layout(truth)) throw ValidationError("srmse: tables cover different feature subsets");
  return srmse(estimate.probabilities(), truth.probabilities());
}

std::optional<double> r_squared(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size() || truth.empty()) throw ValidationError("r_squared: length mismatch");
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - estimate[i]) * (truth[i] - estimate[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

std::optional<double> pearson(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size() || truth.empty()) throw ValidationError("pearson: length mismatch");
  const double n = static_cast<double>(truth.size());
  const double me = std::accumulate(estimate.begin(), estimate.end(), 0.0) / n;
  const double mt = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  double cov = 0.0, ve = 0.0, vt = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    cov += (estimate[i] - me) * (truth[i] - mt);
    ve += (estimate[i] - me) * (estimate[i] - me);
    vt += (truth[i] - mt) * (truth[i] - mt);
  }
  if (ve == 0.0 || vt == 0.0) return std::nullopt;
  return cov / std::sqrt(ve * vt);
}

double zero_sample_pct(std::span<const AgentRecord> generated, std::span<const AgentRecord> train,
                       const Schema& schema) {
  if (generated.empty() || train.empty()) throw ValidationError("zero_sample_pct needs nonempty inputs");
  std::set<std::vector<CategoryIndex>> seen;
  for (const auto& r : train) seen.insert(output_tuple(r, schema));
  std::size_t novel = 0;
  for (const auto& g : generated) {
    if (!seen.contains(output_tuple(g, schema))) ++novel;
  }
  return 100.0 * static_cast<double>(novel) / static_cast<double>(generated.size());
}

std::size_t distinct_output_tuples(std::span<const AgentRecord> agents, const Schema& schema) {
  std::set<std::vector<CategoryIndex>> seen;
  for (const auto& r : agents) seen.insert(output_tuple(r, schema));
  return seen.size();
}

std::vector<double> pooled_marginals(std::span<const AgentRecord> agents, const Schema& schema) {
  if (agents.empty()) throw ValidationError("pooled_marginals needs at least one agent");
  std::vector<double> out;
  for (std::size_t f = 0; f < schema.output_count(); ++f) {
    const std::size_t subset[] = {f};
    const auto t = build_table(agents, schema, subset);
    out.insert(out.end(), t.probabilities().begin(), t.probabilities().end());
  }
  return out;
}

double pooled_marginal_srmse(std::span<const AgentRecord> estimate, std::span<const AgentRecord> truth,
                             const Schema& schema) {
  return srmse(pooled_marginals(estimate, schema), pooled_marginals(truth, schema));
}

EvalReport distribution_suite(std::span<const AgentRecord> generated, std::span<const AgentRecord> truth,
                              const Schema& schema, std::span<const AgentRecord> train) {
  if (generated.empty() || truth.empty()) throw ValidationError("distribution suite needs nonempty populations");
  for (const auto* names : {&kBivariate, &kTrivariate1, &kTrivariate2}) {
    for (const auto& n : *names) schema.index_of(n);
  }
  EvalReport report;
  const auto est = pooled_marginals(generated, schema);
  const auto tru = pooled_marginals(truth, schema);
  report.srmse.marginal = srmse(est, tru);
  std::size_t offset = 0;
  for (std::size_t f = 0; f < schema.output_count(); ++f) {
    const std::size_t w = schema.feature(f).categories();
    report.per_feature_marginal_srmse.emplace_back(
        schema.feature(f).name, srmse(std::span(est).subspan(offset, w), std::span(tru).subspan(offset, w)));
    offset += w;
  }
  auto joint = [&](const std::vector<std::string>& names) {
    return srmse(build_table(generated, schema, names), build_table(truth, schema, names));
  };
  report.srmse.bivariate = joint(kBivariate);
  report.srmse.trivariate1 = joint(kTrivariate1);
  report.srmse.trivariate2 = joint(kTrivariate2);
  report.marginal_r_squared = r_squared(est, tru);
  report.marginal_pearson = pearson(est, tru);
  if (!train.empty()) report.zero_sample_pct = zero_sample_pct(generated, train, schema);
  report.distinct_tuples = distinct_output_tuples(generated, schema);
  report.generated_count = generated.size();
  report.truth_count = truth.size();
  return report;
}

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string report_to_json(const EvalReport& r, int indent) {
  nlohmann::ordered_json j;
  j["srmse"] = {{"marginal", r.srmse.marginal},
                {"bivariate", r.srmse.bivariate},
                {"trivariate1", r.srmse.trivariate1},
                {"trivariate2", r.srmse.trivariate2}};
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [name, v] : r.per_feature_marginal_srmse) per[name] = v;
  j["per_feature_marginal_srmse"] = per;
  j["marginal_r_squared"] = optional_json(r.marginal_r_squared);
  j["marginal_pearson"] = optional_json(r.marginal_pearson);
  j["zero_sample_pct"] = optional_json(r.zero_sample_pct);
  j["distinct_tuples"] = r.distinct_tuples;
  j["generated_count"] = r.generated_count;
  j["truth_count"] = r.truth_count;
  j["fold_mean"] = optional_json(r.fold_mean);
  j["fold_std"] = optional_json(r.fold_std);
  return j.dump(indent);
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) throw ValidationError("mean_std of an empty list");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

}  // namespace popsyn
