#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "popsyn/baseline.hpp"
#include "popsyn/cgan.hpp"
#include "popsyn/cvae.hpp"
#include "popsyn/dataset.hpp"
#include "popsyn/schema.hpp"
#include "popsyn/split.hpp"

namespace popsyn {

enum class ModelKind { baseline, cvae, cgan };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

using TrainedModel = std::variant<EmpiricalTable, CvaeModel, CganModel>;

std::vector<AgentRecord> sample_model(const TrainedModel& model, std::span<const AgentRecord> conditionals,
                                      std::size_t per_row, SeededRng& rng);

/// Candidate values per hyperparameter. The CGAN ignores the bottleneck and
/// beta axes; the baseline has no hyperparameters.
struct GridSpec {
  std::vector<std::size_t> batch_sizes;
  std::vector<std::size_t> hidden_layers;
  std::vector<std::size_t> hidden_units;
  std::vector<std::size_t> bottleneck_dims;
  std::vector<double> learning_rates;
  std::vector<double> betas;
  std::vector<Activation> activations;
  std::vector<std::size_t> epochs;

  /// Throws ValidationError naming the first empty axis.
  void validate() const;
  std::size_t size(ModelKind kind) const;

  /// Cartesian product over the axes, first axis varying slowest.
  std::vector<CvaeTrainConfig> cvae_configs(const CvaeTrainConfig& base) const;
  std::vector<CganTrainConfig> cgan_configs(const CganTrainConfig& base) const;

  /// One-point grid holding the given config's values.
  static GridSpec single(const CvaeTrainConfig& c);
  static GridSpec single(const CganTrainConfig& c);
  /// Small default search (at most 12 configs), best known config first.
  static GridSpec default_for(ModelKind kind);

  nlohmann::ordered_json to_json() const;
  /// Axes absent from j keep the fallback's values. A scalar counts as a
  /// one-element axis.
  static GridSpec from_json(const nlohmann::json& j, const GridSpec& fallback);
};

struct ExperimentRecord {
  std::size_t config_index = 0;
  nlohmann::ordered_json config;
  std::vector<double> fold_srmse;  // validation pooled marginal SRMSE per fold
  double mean = 0.0;
  double std = 0.0;
  double best = 0.0;
  std::size_t best_fold = 0;
  std::optional<double> zero_sample_pct;  // best fold's validation samples vs that fold's train
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
};

nlohmann::ordered_json to_json(const ExperimentRecord& r, bool include_timing = true);

struct GridOptions {
  std::uint64_t seed = 1;
  std::size_t validation_per_row = 1;
};

struct GridEntry {
  ExperimentRecord record;
  std::optional<TrainedModel> best_model;  // trained on the best fold
  TrainTrace best_trace;
};

struct GridResult {
  /// Successful configs by best-fold SRMSE, then mean, then config index;
  /// failed configs follow in config order.
  std::vector<GridEntry> entries;
  std::size_t succeeded() const;
};

/// Trains every config of the grid on all folds of the split. Fold k of
/// every config uses the same training seed, so configs see identical
/// initial noise streams. (config, fold) jobs run in parallel; the result
/// does not depend on completion order.
GridResult run_grid(ModelKind kind, const GridSpec& grid, std::span<const AgentRecord> records,
                    const Schema& schema, const SplitPlan& split, const GridOptions& options,
                    const CvaeTrainConfig& cvae_base = {}, const CganTrainConfig& cgan_base = {});

/// Baseline counterpart of run_grid: fit per fold, score on the fold's validation rows.
GridResult run_baseline_folds(std::span<const AgentRecord> records, const Schema& schema, const SplitPlan& split,
                              const GridOptions& options);

struct ProtocolConfig {
  std::uint64_t seed = 1;
  std::size_t records = 6893;
  std::vector<SchemaVariant> variants{SchemaVariant::original, SchemaVariant::extended};
  std::size_t samples_per_row = 10;
  std::size_t validation_per_row = 1;
  CvaeTrainConfig cvae;
  CganTrainConfig cgan;
  std::optional<GridSpec> cvae_grid;
  std::optional<GridSpec> cgan_grid;

  nlohmann::ordered_json to_json() const;
  /// Required fields: seed, records, variants, cvae, cgan. A missing one
  /// raises UsageError naming it.
  static ProtocolConfig from_json(const nlohmann::json& j);
};

struct ProtocolReport {
  nlohmann::ordered_json table2;     // validation: Marg., mu, sigma, zero-samples per model and variant
  nlohmann::ordered_json table3;     // test and application SRMSE over four distributions
  nlohmann::ordered_json selection;  // ranked grid records per model and variant, no timings
  nlohmann::ordered_json timings;    // wall clock, kept apart so the reports stay reproducible
  std::map<std::string, std::string> figures;  // relative path -> CSV text
};

/// Synthetic data per variant, then split, baseline, CVAE and CGAN selection
/// over K folds, and evaluation of the best-fold models on the test and
/// application conditionals.
ProtocolReport run_paper_protocol(const ProtocolConfig& config);

/// Same protocol on a supplied dataset (one variant).
ProtocolReport run_paper_protocol(std::span<const AgentRecord> records, const Schema& schema,
                                  const ProtocolConfig& config);

/// The split used by the protocol and grid commands: application group
/// chosen near 5% of the data, then 90/10 train/test and five folds.
SplitPlan protocol_split(std::span<const AgentRecord> records, const Schema& schema, std::uint64_t seed);

using NamedSamples = std::vector<std::pair<std::string, std::vector<AgentRecord>>>;

/// One row per output category: feature, category, truth, then one column per sample set.
std::string marginal_figure_csv(const Schema& schema, std::span<const AgentRecord> truth, const NamedSamples& samples);

/// One row per bin of the bivariate and both trivariate tables.
std::string joint_figure_csv(const Schema& schema, std::span<const AgentRecord> truth, const NamedSamples& samples);

void save_model(const TrainedModel& model, const std::string& dir);
TrainedModel load_model(const std::string& dir);

/// Writes table2.json, table3.json, selection.json, timings.json and the figure CSVs.
void write_protocol_report(const ProtocolReport& report, const std::string& dir);

}  // namespace popsyn
