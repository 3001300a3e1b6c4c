#include "popsyn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <sstream>
#include <tuple>

#include "popsyn/error.hpp"
#include "popsyn/metrics.hpp"
#include "popsyn/model_io.hpp"
#include "popsyn/synthetic.hpp"

namespace popsyn {

namespace {

using Clock = std::chrono::steady_clock;

// Fork tags, kept fixed so output does not move when code is reordered.
constexpr std::uint64_t kSplitTag = 11;
constexpr std::uint64_t kDataTag = 12;
constexpr std::uint64_t kValidationSampleTag = 13;
constexpr std::uint64_t kEvalSampleTag = 14;

std::uint64_t fold_seed(std::uint64_t master, std::size_t fold) { return mix_seed(master, 1000 + fold); }

template <typename T>
void require_axis(const std::vector<T>& axis, const char* name) {
  if (axis.empty()) throw ValidationError(std::string("grid axis '") + name + "' is empty");
}

template <typename T>
std::vector<T> read_axis(const nlohmann::json& j, const char* key, const std::vector<T>& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  try {
    if (v.is_array()) return v.get<std::vector<T>>();
    return {v.get<T>()};
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("grid axis '") + key + "' has the wrong type");
  }
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

struct FoldRun {
  std::optional<TrainedModel> model;
  TrainTrace trace;
  double srmse = 0.0;
  double zero_pct = 0.0;
  double seconds = 0.0;
  bool failed = false;
  std::string failure;
};

FoldRun run_fold(ModelKind kind, const CvaeTrainConfig& cvae_cfg, const CganTrainConfig& cgan_cfg,
                 std::span<const AgentRecord> records, const Schema& schema, const Fold& fold, std::uint64_t seed,
                 std::size_t per_row) {
  FoldRun run;
  const auto start = Clock::now();
  const auto train = select_records(records, fold.train);
  const auto validation = select_records(records, fold.validation);
  try {
    switch (kind) {
      case ModelKind::baseline:
        run.model = fit_empirical(train, schema);
        break;
      case ModelKind::cvae: {
        auto cfg = cvae_cfg;
        cfg.seed = seed;
        auto r = train_cvae(train, schema, cfg, validation);
        run.model = std::move(r.model);
        run.trace = std::move(r.trace);
        break;
      }
      case ModelKind::cgan: {
        auto cfg = cgan_cfg;
        cfg.seed = seed;
        auto r = train_cgan(train, schema, cfg, validation);
        run.model = std::move(r.model);
        run.trace = std::move(r.trace);
        break;
      }
    }
    SeededRng rng = SeededRng(seed).fork(kValidationSampleTag);
    const auto generated = sample_model(*run.model, validation, per_row, rng);
    run.srmse = pooled_marginal_srmse(generated, validation, schema);
    run.zero_pct = zero_sample_pct(generated, train, schema);
    if (!std::isfinite(run.srmse)) throw TrainingError("validation SRMSE is not finite");
  } catch (const TrainingError& e) {
    run.failed = true;
    run.failure = e.what();
    run.model.reset();
  }
  run.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return run;
}

GridResult collect(std::vector<nlohmann::ordered_json> configs, std::vector<FoldRun>& runs, std::uint64_t seed) {
  const std::size_t n_configs = configs.size();
  std::vector<GridEntry> ok, failed;
  for (std::size_t c = 0; c < n_configs; ++c) {
    GridEntry entry;
    auto& rec = entry.record;
    rec.config_index = c;
    rec.config = std::move(configs[c]);
    rec.seed = seed;
    for (std::size_t k = 0; k < kFolds; ++k) {
      const auto& run = runs[c * kFolds + k];
      rec.wall_seconds += run.seconds;
      if (run.failed && !rec.failed) {
        rec.failed = true;
        rec.failure = "fold " + std::to_string(k) + ": " + run.failure;
      }
      rec.fold_srmse.push_back(run.srmse);
    }
    if (rec.failed) {
      failed.push_back(std::move(entry));
      continue;
    }
    std::tie(rec.mean, rec.std) = mean_std(rec.fold_srmse);
    rec.best_fold = static_cast<std::size_t>(std::min_element(rec.fold_srmse.begin(), rec.fold_srmse.end()) -
                                             rec.fold_srmse.begin());
    rec.best = rec.fold_srmse[rec.best_fold];
    auto& best = runs[c * kFolds + rec.best_fold];
    rec.zero_sample_pct = best.zero_pct;
    entry.best_model = std::move(best.model);
    entry.best_trace = std::move(best.trace);
    ok.push_back(std::move(entry));
  }
  std::stable_sort(ok.begin(), ok.end(), [](const GridEntry& a, const GridEntry& b) {
    if (a.record.best != b.record.best) return a.record.best < b.record.best;
    if (a.record.mean != b.record.mean) return a.record.mean < b.record.mean;
    return a.record.config_index < b.record.config_index;
  });
  GridResult result;
  result.entries = std::move(ok);
  for (auto& e : failed) result.entries.push_back(std::move(e));
  return result;
}

GridResult run_jobs(ModelKind kind, const std::vector<CvaeTrainConfig>& cvae_cfgs,
                    const std::vector<CganTrainConfig>& cgan_cfgs, std::vector<nlohmann::ordered_json> configs,
                    std::span<const AgentRecord> records, const Schema& schema, const SplitPlan& split,
                    const GridOptions& options) {
  check_split(split, records.size());
  const std::size_t n_configs = configs.size();
  const std::size_t n_jobs = n_configs * kFolds;
  std::vector<FoldRun> runs(n_jobs);
  std::vector<std::exception_ptr> errors(n_jobs);
  const long long jobs = static_cast<long long>(n_jobs);

#pragma omp parallel for schedule(dynamic, 1)
  for (long long job = 0; job < jobs; ++job) {
    const auto c = static_cast<std::size_t>(job) / kFolds;
    const auto k = static_cast<std::size_t>(job) % kFolds;
    try {
      runs[job] = run_fold(kind, kind == ModelKind::cvae ? cvae_cfgs[c] : CvaeTrainConfig{},
                           kind == ModelKind::cgan ? cgan_cfgs[c] : CganTrainConfig{}, records, schema,
                           split.folds[k], fold_seed(options.seed, k), options.validation_per_row);
    } catch (...) {
      errors[job] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return collect(std::move(configs), runs, options.seed);
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::baseline: return "baseline";
    case ModelKind::cvae: return "cvae";
    case ModelKind::cgan: return "cgan";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "baseline") return ModelKind::baseline;
  if (name == "cvae") return ModelKind::cvae;
  if (name == "cgan") return ModelKind::cgan;
  throw ValidationError("unknown model kind '" + name + "' (expected baseline, cvae or cgan)");
}

std::vector<AgentRecord> sample_model(const TrainedModel& model, std::span<const AgentRecord> conditionals,
                                      std::size_t per_row, SeededRng& rng) {
  if (per_row == 0 || conditionals.empty()) return {};
  if (const auto* t = std::get_if<EmpiricalTable>(&model)) return sample_baseline(*t, conditionals, per_row, rng);
  if (const auto* m = std::get_if<CvaeModel>(&model)) return sample_cvae(*m, conditionals, per_row, rng);
  return sample_cgan(std::get<CganModel>(model), conditionals, per_row, rng);
}

void GridSpec::validate() const {
  require_axis(batch_sizes, "batch_size");
  require_axis(hidden_layers, "hidden_layers");
  require_axis(hidden_units, "hidden_units");
  require_axis(bottleneck_dims, "bottleneck_dim");
  require_axis(learning_rates, "learning_rate");
  require_axis(betas, "beta");
  require_axis(activations, "hidden_activation");
  require_axis(epochs, "epochs");
}

std::size_t GridSpec::size(ModelKind kind) const {
  if (kind == ModelKind::baseline) return 1;
  std::size_t n = batch_sizes.size() * hidden_layers.size() * hidden_units.size() * learning_rates.size() *
                  activations.size() * epochs.size();
  if (kind == ModelKind::cvae) n *= bottleneck_dims.size() * betas.size();
  return n;
}

std::vector<CvaeTrainConfig> GridSpec::cvae_configs(const CvaeTrainConfig& base) const {
  validate();
  std::vector<CvaeTrainConfig> out;
  for (auto b : batch_sizes)
    for (auto l : hidden_layers)
      for (auto u : hidden_units)
        for (auto d : bottleneck_dims)
          for (auto lr : learning_rates)
            for (auto beta : betas)
              for (auto a : activations)
                for (auto e : epochs) {
                  auto c = base;
                  c.batch_size = b;
                  c.hidden_layers = l;
                  c.hidden_units = u;
                  c.bottleneck_dim = d;
                  c.learning_rate = lr;
                  c.beta = beta;
                  c.hidden_activation = a;
                  c.epochs = e;
                  c.validate();
                  out.push_back(c);
                }
  return out;
}

std::vector<CganTrainConfig> GridSpec::cgan_configs(const CganTrainConfig& base) const {
  validate();
  std::vector<CganTrainConfig> out;
  for (auto b : batch_sizes)
    for (auto l : hidden_layers)
      for (auto u : hidden_units)
        for (auto lr : learning_rates)
          for (auto a : activations)
            for (auto e : epochs) {
              auto c = base;
              c.batch_size = b;
              c.hidden_layers = l;
              c.hidden_units = u;
              c.learning_rate = lr;
              c.hidden_activation = a;
              c.epochs = e;
              c.validate();
              out.push_back(c);
            }
  return out;
}

GridSpec GridSpec::single(const CvaeTrainConfig& c) {
  return {{c.batch_size}, {c.hidden_layers}, {c.hidden_units}, {c.bottleneck_dim}, {c.learning_rate},
          {c.beta},       {c.hidden_activation}, {c.epochs}};
}

GridSpec GridSpec::single(const CganTrainConfig& c) {
  const CvaeTrainConfig unused;
  return {{c.batch_size},    {c.hidden_layers}, {c.hidden_units},      {unused.bottleneck_dim},
          {c.learning_rate}, {unused.beta},     {c.hidden_activation}, {c.epochs}};
}

GridSpec GridSpec::default_for(ModelKind kind) {
  if (kind == ModelKind::cgan) {
    auto g = single(CganTrainConfig{});
    g.batch_sizes = {64, 32};
    g.hidden_units = {1200, 256};
    return g;
  }
  auto g = single(CvaeTrainConfig{});
  g.hidden_units = {50, 100};
  g.bottleneck_dims = {25, 10};
  g.betas = {0.5, 1.0};
  return g;
}

nlohmann::ordered_json GridSpec::to_json() const {
  std::vector<std::string> acts;
  for (auto a : activations) acts.push_back(popsyn::to_string(a));
  return {{"batch_size", batch_sizes},       {"hidden_layers", hidden_layers}, {"hidden_units", hidden_units},
          {"bottleneck_dim", bottleneck_dims}, {"learning_rate", learning_rates}, {"beta", betas},
          {"hidden_activation", acts},       {"epochs", epochs}};
}

GridSpec GridSpec::from_json(const nlohmann::json& j, const GridSpec& fallback) {
  if (!j.is_object()) throw ValidationError("grid must be a JSON object");
  static const std::vector<std::string> known = {"batch_size",    "hidden_layers", "hidden_units",
                                                 "bottleneck_dim", "learning_rate", "beta",
                                                 "hidden_activation", "epochs"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("unknown grid axis '" + key + "'");
    }
  }
  GridSpec g;
  g.batch_sizes = read_axis(j, "batch_size", fallback.batch_sizes);
  g.hidden_layers = read_axis(j, "hidden_layers", fallback.hidden_layers);
  g.hidden_units = read_axis(j, "hidden_units", fallback.hidden_units);
  g.bottleneck_dims = read_axis(j, "bottleneck_dim", fallback.bottleneck_dims);
  g.learning_rates = read_axis(j, "learning_rate", fallback.learning_rates);
  g.betas = read_axis(j, "beta", fallback.betas);
  g.epochs = read_axis(j, "epochs", fallback.epochs);
  if (j.contains("hidden_activation")) {
    for (const auto& name : read_axis<std::string>(j, "hidden_activation", {})) {
      g.activations.push_back(activation_from_string(name));
    }
  } else {
    g.activations = fallback.activations;
  }
  g.validate();
  return g;
}

nlohmann::ordered_json to_json(const ExperimentRecord& r, bool include_timing) {
  nlohmann::ordered_json j;
  j["config_index"] = r.config_index;
  j["config"] = r.config;
  j["seed"] = r.seed;
  j["failed"] = r.failed;
  if (r.failed) {
    j["failure"] = r.failure;
  } else {
    j["fold_srmse"] = r.fold_srmse;
    j["mean"] = r.mean;
    j["std"] = r.std;
    j["best"] = r.best;
    j["best_fold"] = r.best_fold;
    j["zero_sample_pct"] = optional_json(r.zero_sample_pct);
  }
  if (include_timing) j["wall_seconds"] = r.wall_seconds;
  return j;
}

std::size_t GridResult::succeeded() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const GridEntry& e) { return !e.record.failed; }));
}

GridResult run_grid(ModelKind kind, const GridSpec& grid, std::span<const AgentRecord> records,
                    const Schema& schema, const SplitPlan& split, const GridOptions& options,
                    const CvaeTrainConfig& cvae_base, const CganTrainConfig& cgan_base) {
  if (kind == ModelKind::baseline) return run_baseline_folds(records, schema, split, options);
  std::vector<CvaeTrainConfig> cvae_cfgs;
  std::vector<CganTrainConfig> cgan_cfgs;
  std::vector<nlohmann::ordered_json> configs;
  if (kind == ModelKind::cvae) {
    cvae_cfgs = grid.cvae_configs(cvae_base);
    for (auto c : cvae_cfgs) {
      c.seed = options.seed;
      configs.push_back(to_json(c));
    }
  } else {
    cgan_cfgs = grid.cgan_configs(cgan_base);
    for (auto c : cgan_cfgs) {
      c.seed = options.seed;
      configs.push_back(to_json(c));
    }
  }
  return run_jobs(kind, cvae_cfgs, cgan_cfgs, std::move(configs), records, schema, split, options);
}

GridResult run_baseline_folds(std::span<const AgentRecord> records, const Schema& schema, const SplitPlan& split,
                              const GridOptions& options) {
  return run_jobs(ModelKind::baseline, {}, {}, {nlohmann::ordered_json::object()}, records, schema, split,
                  options);
}

nlohmann::ordered_json ProtocolConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["records"] = records;
  std::vector<std::string> names;
  for (auto v : variants) names.push_back(popsyn::to_string(v));
  j["variants"] = names;
  j["samples_per_row"] = samples_per_row;
  j["validation_per_row"] = validation_per_row;
  j["cvae"] = popsyn::to_json(cvae);
  j["cgan"] = popsyn::to_json(cgan);
  if (cvae_grid) j["cvae_grid"] = cvae_grid->to_json();
  if (cgan_grid) j["cgan_grid"] = cgan_grid->to_json();
  return j;
}

ProtocolConfig ProtocolConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("protocol config must be a JSON object");
  for (const char* key : {"seed", "records", "variants", "cvae", "cgan"}) {
    if (!j.contains(key)) throw UsageError(std::string("protocol config is missing required field '") + key + "'");
  }
  static const std::vector<std::string> known = {"seed",    "records",   "variants",  "samples_per_row",
                                                 "validation_per_row", "cvae", "cgan", "cvae_grid",
                                                 "cgan_grid"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("unknown protocol config field '" + key + "'");
    }
  }
  ProtocolConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.records = j.at("records").get<std::size_t>();
    c.variants.clear();
    for (const auto& name : j.at("variants")) c.variants.push_back(variant_from_string(name.get<std::string>()));
    c.samples_per_row = j.value("samples_per_row", c.samples_per_row);
    c.validation_per_row = j.value("validation_per_row", c.validation_per_row);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("protocol config: ") + e.what());
  }
  if (c.variants.empty()) throw ValidationError("protocol config lists no variants");
  if (c.samples_per_row == 0 || c.validation_per_row == 0) throw ValidationError("samples per row must be positive");
  c.cvae = cvae_config_from_json(j.at("cvae"));
  c.cgan = cgan_config_from_json(j.at("cgan"));
  if (j.contains("cvae_grid")) c.cvae_grid = GridSpec::from_json(j.at("cvae_grid"), GridSpec::single(c.cvae));
  if (j.contains("cgan_grid")) c.cgan_grid = GridSpec::from_json(j.at("cgan_grid"), GridSpec::single(c.cgan));
  return c;
}

namespace {

struct VariantOutput {
  nlohmann::ordered_json table2_rows = nlohmann::ordered_json::array();
  nlohmann::ordered_json table3_rows = nlohmann::ordered_json::array();
  nlohmann::ordered_json selection;
  nlohmann::ordered_json timings;
  std::map<std::string, std::string> figures;
};

}  // namespace

std::string marginal_figure_csv(const Schema& schema, std::span<const AgentRecord> truth,
                                const NamedSamples& samples) {
  std::ostringstream csv;
  csv << "feature,category,truth";
  for (const auto& [name, s] : samples) csv << ',' << name;
  csv << '\n';
  const auto t = pooled_marginals(truth, schema);
  std::vector<std::vector<double>> m;
  for (const auto& [name, s] : samples) m.push_back(pooled_marginals(s, schema));
  std::size_t offset = 0;
  for (std::size_t f = 0; f < schema.output_count(); ++f) {
    const auto& spec = schema.feature(f);
    for (std::size_t v = 0; v < spec.categories(); ++v, ++offset) {
      csv << spec.name << ',' << spec.labels[v] << ',' << fmt(t[offset]);
      for (const auto& row : m) csv << ',' << fmt(row[offset]);
      csv << '\n';
    }
  }
  return csv.str();
}

std::string joint_figure_csv(const Schema& schema, std::span<const AgentRecord> truth, const NamedSamples& samples) {
  std::ostringstream csv;
  csv << "distribution,bin,cell,truth";
  for (const auto& [name, s] : samples) csv << ',' << name;
  csv << '\n';
  const std::vector<std::pair<std::string, std::vector<std::string>>> dists = {
      {"bivariate", kBivariate}, {"trivariate1", kTrivariate1}, {"trivariate2", kTrivariate2}};
  for (const auto& [dname, names] : dists) {
    const auto t = build_table(truth, schema, names);
    std::vector<DistributionTable> m;
    for (const auto& [name, s] : samples) m.push_back(build_table(s, schema, names));
    for (std::size_t bin = 0; bin < t.n_bins(); ++bin) {
      const auto tuple = t.tuple_of(bin);
      std::string cell;
      for (std::size_t i = 0; i < tuple.size(); ++i) {
        if (i) cell += '|';
        cell += schema.feature(t.features()[i]).labels[tuple[i]];
      }
      csv << dname << ',' << bin << ',' << cell << ',' << fmt(t.probabilities()[bin]);
      for (const auto& table : m) csv << ',' << fmt(table.probabilities()[bin]);
      csv << '\n';
    }
  }
  return csv.str();
}

SplitPlan protocol_split(std::span<const AgentRecord> records, const Schema& schema, std::uint64_t seed) {
  SeededRng rng = SeededRng(seed).fork(kSplitTag);
  return make_split(records, choose_application_selector(records, schema), rng);
}

void save_model(const TrainedModel& model, const std::string& dir) {
  if (const auto* t = std::get_if<EmpiricalTable>(&model)) return save_baseline(*t, dir);
  if (const auto* m = std::get_if<CvaeModel>(&model)) return save_cvae(*m, dir);
  save_cgan(std::get<CganModel>(model), dir);
}

TrainedModel load_model(const std::string& dir) {
  const auto kind = model_kind_from_string(model_kind(dir));
  if (kind == ModelKind::baseline) return load_baseline(dir);
  if (kind == ModelKind::cvae) return load_cvae(dir);
  return load_cgan(dir);
}

namespace {

VariantOutput run_variant(std::span<const AgentRecord> records, const Schema& schema, const ProtocolConfig& config) {
  if (records.size() < 1000) {
    throw ValidationError("the protocol needs at least 1000 records, got " + std::to_string(records.size()));
  }
  const std::string variant = to_string(schema.variant());
  const auto selector = choose_application_selector(records, schema);
  const auto split = protocol_split(records, schema, config.seed);
  const auto train = select_records(records, split.train_ids);
  const auto test = select_records(records, split.test_ids);
  const auto application = select_records(records, split.application_ids);

  const GridOptions options{config.seed, config.validation_per_row};
  VariantOutput out;
  out.selection["variant"] = variant;
  out.selection["split"] = {{"records", records.size()},
                            {"train", split.train_ids.size()},
                            {"test", split.test_ids.size()},
                            {"application", split.application_ids.size()}};
  nlohmann::ordered_json app_group = nlohmann::ordered_json::array();
  for (const auto& c : selector.constraints) {
    std::vector<std::string> labels;
    for (auto v : c.values) labels.push_back(schema.feature(c.feature).labels[v]);
    app_group.push_back({{"feature", schema.feature(c.feature).name}, {"values", labels}});
  }
  out.selection["application_group"] = app_group;
  out.timings["variant"] = variant;

  NamedSamples test_samples, app_samples;
  for (ModelKind kind : {ModelKind::baseline, ModelKind::cvae, ModelKind::cgan}) {
    const auto start = Clock::now();
    GridResult grid;
    if (kind == ModelKind::baseline) {
      grid = run_baseline_folds(records, schema, split, options);
    } else if (kind == ModelKind::cvae) {
      grid = run_grid(kind, config.cvae_grid.value_or(GridSpec::single(config.cvae)), records, schema, split,
                      options, config.cvae, config.cgan);
    } else {
      grid = run_grid(kind, config.cgan_grid.value_or(GridSpec::single(config.cgan)), records, schema, split,
                      options, config.cvae, config.cgan);
    }
    const std::string name = to_string(kind);
    out.timings[name] = std::chrono::duration<double>(Clock::now() - start).count();

    auto ranking = nlohmann::ordered_json::array();
    for (const auto& e : grid.entries) ranking.push_back(to_json(e.record, false));
    out.selection[name] = ranking;
    if (grid.succeeded() == 0) {
      throw TrainingError(name + ": every configuration failed on variant " + variant);
    }
    const auto& best = grid.entries.front();
    out.table2_rows.push_back({{"variant", variant},
                               {"model", name},
                               {"marginal", best.record.best},
                               {"mu", best.record.mean},
                               {"sigma", best.record.std},
                               {"zero_sample_pct", optional_json(best.record.zero_sample_pct)},
                               {"config_index", best.record.config_index},
                               {"best_fold", best.record.best_fold}});

    SeededRng rng = SeededRng(config.seed).fork(mix_seed(kEvalSampleTag, static_cast<std::uint64_t>(kind)));
    auto on_test = sample_model(*best.best_model, test, config.samples_per_row, rng);
    auto on_app = sample_model(*best.best_model, application, config.samples_per_row, rng);
    for (auto [set, generated, truth] :
         {std::tuple{"test", &on_test, std::span<const AgentRecord>(test)},
          std::tuple{"application", &on_app, std::span<const AgentRecord>(application)}}) {
      const auto r = distribution_suite(*generated, truth, schema, train);
      out.table3_rows.push_back({{"variant", variant},
                                 {"model", name},
                                 {"set", set},
                                 {"marginal", r.srmse.marginal},
                                 {"bivariate", r.srmse.bivariate},
                                 {"trivariate1", r.srmse.trivariate1},
                                 {"trivariate2", r.srmse.trivariate2},
                                 {"marginal_r_squared", optional_json(r.marginal_r_squared)},
                                 {"marginal_pearson", optional_json(r.marginal_pearson)},
                                 {"zero_sample_pct", optional_json(r.zero_sample_pct)},
                                 {"distinct_tuples", r.distinct_tuples}});
    }
    test_samples.emplace_back(name, std::move(on_test));
    app_samples.emplace_back(name, std::move(on_app));
  }
  out.figures[variant + "/fig6_marginals_test.csv"] = marginal_figure_csv(schema, test, test_samples);
  out.figures[variant + "/fig7_joints_test.csv"] = joint_figure_csv(schema, test, test_samples);
  out.figures[variant + "/fig8_joints_application.csv"] = joint_figure_csv(schema, application, app_samples);
  return out;
}

nlohmann::ordered_json table_header(const ProtocolConfig& config) {
  return {{"seed", config.seed}, {"samples_per_row", config.samples_per_row}};
}

ProtocolReport assemble(const ProtocolConfig& config, std::vector<VariantOutput> parts) {
  ProtocolReport report;
  report.table2 = table_header(config);
  report.table2["columns"] = {"marginal", "mu", "sigma", "zero_sample_pct"};
  report.table2["rows"] = nlohmann::ordered_json::array();
  report.table3 = table_header(config);
  report.table3["columns"] = {"marginal", "bivariate", "trivariate1", "trivariate2"};
  report.table3["rows"] = nlohmann::ordered_json::array();
  report.selection = nlohmann::ordered_json::array();
  report.timings = nlohmann::ordered_json::array();
  for (auto& p : parts) {
    for (auto& r : p.table2_rows) report.table2["rows"].push_back(std::move(r));
    for (auto& r : p.table3_rows) report.table3["rows"].push_back(std::move(r));
    report.selection.push_back(std::move(p.selection));
    report.timings.push_back(std::move(p.timings));
    report.figures.merge(p.figures);
  }
  return report;
}

}  // namespace

ProtocolReport run_paper_protocol(const ProtocolConfig& config) {
  std::vector<VariantOutput> parts;
  for (auto variant : config.variants) {
    if (variant == SchemaVariant::custom) throw ValidationError("synthetic protocol runs need a housing variant");
    const Schema schema = Schema::housing(variant);
    SeededRng rng = SeededRng(config.seed).fork(mix_seed(kDataTag, static_cast<std::uint64_t>(variant)));
    const auto records = generate_synthetic_dataset(schema, config.records, rng);
    parts.push_back(run_variant(records, schema, config));
  }
  return assemble(config, std::move(parts));
}

ProtocolReport run_paper_protocol(std::span<const AgentRecord> records, const Schema& schema,
                                  const ProtocolConfig& config) {
  std::vector<VariantOutput> parts;
  parts.push_back(run_variant(records, schema, config));
  return assemble(config, std::move(parts));
}

void write_protocol_report(const ProtocolReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir);
  write_text_file((fs::path(dir) / "table2.json").string(), report.table2.dump(2) + "\n");
  write_text_file((fs::path(dir) / "table3.json").string(), report.table3.dump(2) + "\n");
  write_text_file((fs::path(dir) / "selection.json").string(), report.selection.dump(2) + "\n");
  write_text_file((fs::path(dir) / "timings.json").string(), report.timings.dump(2) + "\n");
  for (const auto& [rel, text] : report.figures) {
    const auto path = fs::path(dir) / "figures" / rel;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
    write_text_file(path.string(), text);
  }
}

}  // namespace popsyn
