#include "popsyn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <memory>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "popsyn/error.hpp"
#include "popsyn/harness.hpp"
#include "popsyn/metrics.hpp"
#include "popsyn/model_io.hpp"
#include "popsyn/synthetic.hpp"

namespace popsyn {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

enum class Kind { integer, real, text, list, boolean };

// One command-line flag that overrides a config key. `path` allows nested keys.
struct Binding {
  std::vector<std::string> path;
  Kind kind;
  std::string flag;
  std::string text;
  bool on = false;
  CLI::Option* option = nullptr;
};

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  std::string config_path;
  std::vector<std::unique_ptr<Binding>> bindings;

  void bind(const std::string& flags, std::vector<std::string> path, Kind kind, const std::string& help) {
    auto b = std::make_unique<Binding>();
    b->path = std::move(path);
    b->kind = kind;
    if (kind == Kind::boolean) {
      b->option = app->add_flag(flags, b->on, help);
    } else {
      b->option = app->add_option(flags, b->text, help);
    }
    b->flag = b->option->get_name();
    bindings.push_back(std::move(b));
  }
};

Json convert(const Binding& b) {
  try {
    std::size_t used = 0;
    switch (b.kind) {
      case Kind::integer: {
        if (b.text.empty() || b.text[0] == '-') break;
        const auto v = std::stoull(b.text, &used);
        if (used == b.text.size()) return v;
        break;
      }
      case Kind::real: {
        const auto v = std::stod(b.text, &used);
        if (used == b.text.size()) return v;
        break;
      }
      case Kind::text:
        return b.text;
      case Kind::list: {
        Json arr = Json::array();
        std::string item;
        for (char ch : b.text + ",") {
          if (ch != ',') {
            item += ch;
          } else if (!item.empty()) {
            arr.push_back(item);
            item.clear();
          }
        }
        return arr;
      }
      case Kind::boolean:
        return b.on;
    }
  } catch (const std::logic_error&) {
  }
  throw UsageError(b.flag + ": cannot parse '" + b.text + "'");
}

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ValidationError("config file " + path + " must hold a JSON object");
  return j;
}

Json effective_config(const Command& cmd, Json base) {
  Json cfg = load_config(cmd.config_path);
  for (auto& [key, value] : cfg.items()) base[key] = value;
  for (const auto& b : cmd.bindings) {
    if (b->option->count() == 0) continue;
    Json* slot = &base;
    for (std::size_t i = 0; i + 1 < b->path.size(); ++i) {
      if (!slot->contains(b->path[i])) (*slot)[b->path[i]] = Json::object();
      slot = &(*slot)[b->path[i]];
    }
    (*slot)[b->path.back()] = convert(*b);
  }
  return base;
}

void allow_only(const Json& cfg, const std::string& command, std::initializer_list<const char*> keys) {
  for (const auto& [key, value] : cfg.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
      throw ValidationError(command + ": unknown config field '" + key + "'");
    }
  }
}

std::string need_text(const Json& cfg, const std::string& command, const std::string& key) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) {
    throw UsageError(command + ": missing required setting '" + key + "' (flag --" + key + " or config file)");
  }
  if (!cfg.at(key).is_string()) throw ValidationError(command + ": setting '" + key + "' must be a string");
  return cfg.at(key).get<std::string>();
}

std::string opt_text(const Json& cfg, const std::string& key) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) return {};
  if (!cfg.at(key).is_string()) throw ValidationError("setting '" + key + "' must be a string");
  return cfg.at(key).get<std::string>();
}

std::uint64_t get_count(const Json& cfg, const std::string& key, std::uint64_t fallback) {
  if (!cfg.contains(key)) return fallback;
  const auto& v = cfg.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw ValidationError("setting '" + key + "' must be a nonnegative integer");
  }
  return cfg.at(key).get<std::uint64_t>();
}

void prepare_out(const std::string& dir, const Json& cfg) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
  Json echo = cfg;
  echo.erase("out");
  write_text_file((fs::path(dir) / "effective_config.json").string(), echo.dump(2) + "\n");
}

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

Schema schema_for(const Json& cfg, const std::string& command) {
  return load_schema(need_text(cfg, command, "schema"));
}

// Hyperparameter keys shared by train and grid; everything else is plumbing.
Json strip(Json cfg, std::initializer_list<const char*> plumbing) {
  for (const char* k : plumbing) cfg.erase(k);
  return cfg;
}

void write_traces(const std::string& dir, const TrainTrace& trace) {
  write_text_file(join(dir, "trace_batches.csv"), trace.batch_csv());
  write_text_file(join(dir, "trace_validation.csv"), trace.validation_csv());
}

// ---- commands -------------------------------------------------------------

int cmd_gen_data(const Command& cmd, std::ostream& out) {
  const Json cfg = effective_config(cmd, {{"variant", "extended"}, {"records", 6893}, {"seed", 1}});
  allow_only(cfg, cmd.name, {"variant", "records", "seed", "schema", "out"});
  const auto dir = need_text(cfg, cmd.name, "out");
  const auto n = get_count(cfg, "records", 0);
  if (n == 0) throw ValidationError("gen-data: records must be at least 1");
  const std::string schema_path = opt_text(cfg, "schema");
  const Schema schema =
      schema_path.empty() ? Schema::housing(variant_from_string(opt_text(cfg, "variant"))) : load_schema(schema_path);
  SeededRng rng(get_count(cfg, "seed", 1));
  const auto records = generate_synthetic_dataset(schema, n, rng);
  prepare_out(dir, cfg);
  write_dataset_csv(join(dir, "data.csv"), schema, records);
  save_schema(schema, join(dir, "schema.json"));
  out << "wrote " << records.size() << " records to " << join(dir, "data.csv") << " (" << schema.size()
      << " columns, output width " << schema.output_width() << ", conditional width " << schema.conditional_width()
      << ")\n";
  return kExitOk;
}

int cmd_train(const Command& cmd, std::ostream& out) {
  const Json cfg = effective_config(cmd, {{"seed", 1}});
  const auto kind = model_kind_from_string(need_text(cfg, cmd.name, "model"));
  const auto dir = need_text(cfg, cmd.name, "out");
  const Schema schema = schema_for(cfg, cmd.name);
  Json hyper = strip(cfg, {"model", "data", "schema", "out", "validation_data"});
  const auto records = read_dataset_csv(need_text(cfg, cmd.name, "data"), schema);
  std::vector<AgentRecord> validation;
  if (const auto v = opt_text(cfg, "validation_data"); !v.empty()) validation = read_dataset_csv(v, schema);

  if (kind == ModelKind::baseline) {
    hyper.erase("seed");
    if (!hyper.empty()) throw ValidationError("train: the baseline takes no hyperparameter '" + hyper.begin().key() + "'");
    const auto table = fit_empirical(records, schema);
    prepare_out(dir, cfg);
    save_baseline(table, dir);
    out << "baseline: " << table.by_conditionals().size() << " conditional combinations from " << records.size()
        << " records\n";
    return kExitOk;
  }
  TrainTrace trace;
  if (kind == ModelKind::cvae) {
    const auto config = cvae_config_from_json(hyper);
    auto result = train_cvae(records, schema, config, validation);
    prepare_out(dir, cfg);
    save_cvae(result.model, dir);
    trace = std::move(result.trace);
  } else {
    const auto config = cgan_config_from_json(hyper);
    auto result = train_cgan(records, schema, config, validation);
    prepare_out(dir, cfg);
    save_cgan(result.model, dir);
    trace = std::move(result.trace);
  }
  write_traces(dir, trace);
  out << to_string(kind) << ": " << trace.batch_loss.size() << " iterations";
  if (!trace.batch_loss.empty()) out << ", final batch loss " << trace.batch_loss.back();
  if (trace.restored_iteration) out << ", kept checkpoint from iteration " << *trace.restored_iteration;
  out << "\n";
  return kExitOk;
}

int cmd_sample(const Command& cmd, std::ostream& out) {
  const Json cfg = effective_config(cmd, {{"seed", 1}, {"n_per_row", 1}});
  allow_only(cfg, cmd.name, {"model", "data", "n_per_row", "seed", "out"});
  const auto dir = need_text(cfg, cmd.name, "out");
  const auto model = load_model(need_text(cfg, cmd.name, "model"));
  const Schema& schema = std::visit([](const auto& m) -> const Schema& {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, EmpiricalTable>) {
      return m.schema();
    } else {
      return m.schema;
    }
  }, model);
  const auto conditionals = read_conditionals_csv(need_text(cfg, cmd.name, "data"), schema);
  SeededRng rng(get_count(cfg, "seed", 1));
  const auto agents = sample_model(model, conditionals, get_count(cfg, "n_per_row", 1), rng);
  prepare_out(dir, cfg);
  write_dataset_csv(join(dir, "samples.csv"), schema, agents);
  out << "wrote " << agents.size() << " agents to " << join(dir, "samples.csv") << "\n";
  return kExitOk;
}

int cmd_evaluate(const Command& cmd, std::ostream& out) {
  const Json cfg = effective_config(cmd, {});
  allow_only(cfg, cmd.name, {"samples", "truth", "train", "schema", "seed", "out"});
  const auto dir = need_text(cfg, cmd.name, "out");
  const Schema schema = schema_for(cfg, cmd.name);
  const auto samples = read_dataset_csv(need_text(cfg, cmd.name, "samples"), schema);
  const auto truth = read_dataset_csv(need_text(cfg, cmd.name, "truth"), schema);
  std::vector<AgentRecord> train;
  if (const auto t = opt_text(cfg, "train"); !t.empty()) train = read_dataset_csv(t, schema);
  const auto report = distribution_suite(samples, truth, schema, train);
  const NamedSamples named{{"generated", samples}};
  prepare_out(dir, cfg);
  write_text_file(join(dir, "report.json"), report_to_json(report) + "\n");
  write_text_file(join(dir, "fig6_marginals.csv"), marginal_figure_csv(schema, truth, named));
  write_text_file(join(dir, "fig7_joints.csv"), joint_figure_csv(schema, truth, named));
  out << "marginal " << report.srmse.marginal << "  bivariate " << report.srmse.bivariate << "  trivariate1 "
      << report.srmse.trivariate1 << "  trivariate2 " << report.srmse.trivariate2 << "\n";
  return kExitOk;
}

int cmd_protocol(const Command& cmd, std::ostream& out) {
  const Json defaults = cmd.config_path.empty() ? Json(ProtocolConfig{}.to_json()) : Json::object();
  const Json cfg = effective_config(cmd, defaults);
  const auto dir = need_text(cfg, cmd.name, "out");
  const std::string data = opt_text(cfg, "data");
  const std::string schema_path = opt_text(cfg, "schema");
  if (data.empty() != schema_path.empty()) throw UsageError("protocol: --data and --schema go together");
  const auto config = ProtocolConfig::from_json(strip(cfg, {"out", "data", "schema"}));
  ProtocolReport report;
  if (data.empty()) {
    report = run_paper_protocol(config);
  } else {
    const Schema schema = load_schema(schema_path);
    report = run_paper_protocol(read_dataset_csv(data, schema), schema, config);
  }
  prepare_out(dir, cfg);
  write_protocol_report(report, dir);
  for (const auto& row : report.table3["rows"]) {
    out << row["variant"].get<std::string>() << ' ' << row["model"].get<std::string>() << ' '
        << row["set"].get<std::string>() << ": marginal " << row["marginal"].get<double>() << " bivariate "
        << row["bivariate"].get<double>() << "\n";
  }
  return kExitOk;
}

int cmd_grid(const Command& cmd, std::ostream& out) {
  const Json cfg = effective_config(cmd, {{"seed", 1}, {"variant", "extended"}, {"records", 6893}});
  allow_only(cfg, cmd.name,
             {"model", "data", "schema", "variant", "records", "seed", "grid", "base", "validation_per_row", "out"});
  const auto kind = model_kind_from_string(need_text(cfg, cmd.name, "model"));
  if (kind == ModelKind::baseline) throw ValidationError("grid: the baseline has no hyperparameters to search");
  const auto dir = need_text(cfg, cmd.name, "out");
  const auto seed = get_count(cfg, "seed", 1);

  const std::string data = opt_text(cfg, "data");
  std::vector<AgentRecord> records;
  Schema schema = data.empty() ? Schema::housing(variant_from_string(opt_text(cfg, "variant"))) : schema_for(cfg, cmd.name);
  if (data.empty()) {
    SeededRng rng(seed);
    records = generate_synthetic_dataset(schema, get_count(cfg, "records", 6893), rng);
  } else {
    records = read_dataset_csv(data, schema);
  }

  const Json base = cfg.contains("base") ? cfg.at("base") : Json::object();
  CvaeTrainConfig cvae_base;
  CganTrainConfig cgan_base;
  GridSpec fallback = GridSpec::default_for(kind);
  if (kind == ModelKind::cvae) {
    cvae_base = cvae_config_from_json(base);
  } else {
    cgan_base = cgan_config_from_json(base);
  }
  const GridSpec grid = cfg.contains("grid") ? GridSpec::from_json(cfg.at("grid"), fallback) : fallback;
  const auto split = protocol_split(records, schema, seed);
  out << to_string(kind) << " grid: " << grid.size(kind) << " configs x " << kFolds << " folds\n" << std::flush;

  const GridOptions options{seed, get_count(cfg, "validation_per_row", 1)};
  if (options.validation_per_row == 0) throw ValidationError("grid: validation_per_row must be positive");
  prepare_out(dir, cfg);
  const auto result = run_grid(kind, grid, records, schema, split, options, cvae_base, cgan_base);
  Json ranking = Json::array();
  for (const auto& e : result.entries) {
    ranking.push_back(to_json(e.record));
    const auto sub = join(join(dir, "experiments"), "config_" + std::to_string(e.record.config_index));
    std::error_code ec;
    fs::create_directories(sub, ec);
    if (ec) throw IoError("cannot create directory " + sub);
    write_text_file(join(sub, "record.json"), to_json(e.record).dump(2) + "\n");
    if (e.best_model) {
      save_model(*e.best_model, join(sub, "model"));
      write_traces(sub, e.best_trace);
    }
  }
  write_text_file(join(dir, "ranking.json"), ranking.dump(2) + "\n");
  for (const auto& e : result.entries) {
    out << "config " << e.record.config_index << ": ";
    if (e.record.failed) {
      out << "failed (" << e.record.failure << ")\n";
    } else {
      out << "best " << e.record.best << " mean " << e.record.mean << " std " << e.record.std << "\n";
    }
  }
  return kExitOk;
}

void add_common(Command& cmd, bool with_schema, bool with_data) {
  cmd.app->add_option("--config", cmd.config_path, "JSON config file; flags override its values");
  cmd.bind("--seed", {"seed"}, Kind::integer, "master seed");
  cmd.bind("--out", {"out"}, Kind::text, "output directory");
  if (with_schema) cmd.bind("--schema", {"schema"}, Kind::text, "schema JSON");
  if (with_data) cmd.bind("--data", {"data"}, Kind::text, "dataset CSV");
}

void add_hyperparameters(Command& cmd) {
  cmd.bind("--epochs", {"epochs"}, Kind::integer, "training epochs");
  cmd.bind("--batch-size", {"batch_size"}, Kind::integer, "mini-batch size");
  cmd.bind("--hidden-layers", {"hidden_layers"}, Kind::integer, "hidden layers per network");
  cmd.bind("--hidden-units", {"hidden_units"}, Kind::integer, "units per hidden layer");
  cmd.bind("--bottleneck-dim", {"bottleneck_dim"}, Kind::integer, "CVAE latent width");
  cmd.bind("--learning-rate", {"learning_rate"}, Kind::real, "RMSProp learning rate");
  cmd.bind("--beta", {"beta"}, Kind::real, "CVAE KL weight");
  cmd.bind("--noise-dim", {"noise_dim"}, Kind::integer, "CGAN noise width");
  cmd.bind("--hidden-activation", {"hidden_activation"}, Kind::text, "identity, elu, relu or sigmoid");
  cmd.bind("--non-saturating", {"non_saturating"}, Kind::boolean, "CGAN non-saturating generator loss");
  cmd.bind("--validation-every", {"validation_every"}, Kind::integer, "iterations between validation points");
  cmd.bind("--early-stopping", {"early_stopping"}, Kind::boolean, "keep the best validation checkpoint");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional population synthesis: synthetic data, CVAE / CGAN / baseline training and evaluation"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](const std::string& name, const std::string& help) -> Command& {
    commands.push_back(std::make_unique<Command>());
    commands.back()->name = name;
    commands.back()->app = app.add_subcommand(name, help);
    return *commands.back();
  };

  auto& gen = add("gen-data", "write a planted synthetic dataset and its schema");
  add_common(gen, true, false);
  gen.bind("--variant", {"variant"}, Kind::text, "original or extended");
  gen.bind("-n,--records", {"records"}, Kind::integer, "number of records");

  auto& train = add("train", "train a cvae, cgan or baseline model");
  add_common(train, true, true);
  train.bind("--model", {"model"}, Kind::text, "cvae, cgan or baseline");
  train.bind("--validation-data", {"validation_data"}, Kind::text, "optional validation CSV for traces");
  add_hyperparameters(train);

  auto& sample = add("sample", "sample agents for each conditional row");
  add_common(sample, false, false);
  sample.bind("--model", {"model"}, Kind::text, "trained model directory");
  sample.bind("--data,--conditionals", {"data"}, Kind::text, "conditionals CSV");
  sample.bind("--n-per-row", {"n_per_row"}, Kind::integer, "agents per conditional row");

  auto& evaluate = add("evaluate", "compare a sampled population with a truth set");
  add_common(evaluate, true, false);
  evaluate.bind("--samples", {"samples"}, Kind::text, "generated agents CSV");
  evaluate.bind("--truth,--data", {"truth"}, Kind::text, "true agents CSV");
  evaluate.bind("--train", {"train"}, Kind::text, "training CSV for the zero-sample percentage");

  auto& protocol = add("protocol", "full run: split, baseline, CVAE, CGAN, test and application reports");
  add_common(protocol, true, true);
  protocol.bind("--records", {"records"}, Kind::integer, "synthetic records per variant");
  protocol.bind("--variants", {"variants"}, Kind::list, "comma-separated schema variants");
  protocol.bind("--samples-per-row", {"samples_per_row"}, Kind::integer, "agents per test/application row");
  protocol.bind("--validation-per-row", {"validation_per_row"}, Kind::integer, "agents per validation row");
  protocol.bind("--cvae-epochs", {"cvae", "epochs"}, Kind::integer, "CVAE epochs");
  protocol.bind("--cgan-epochs", {"cgan", "epochs"}, Kind::integer, "CGAN epochs");

  auto& grid = add("grid", "K-fold hyperparameter grid search");
  add_common(grid, true, true);
  grid.bind("--model", {"model"}, Kind::text, "cvae or cgan");
  grid.bind("--variant", {"variant"}, Kind::text, "synthetic variant when no --data is given");
  grid.bind("--records", {"records"}, Kind::integer, "synthetic records when no --data is given");
  grid.bind("--validation-per-row", {"validation_per_row"}, Kind::integer, "agents per validation row");
  grid.bind("--epochs", {"grid", "epochs"}, Kind::integer, "single epochs value for every config");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    for (const auto& cmd : commands) {
      if (!cmd->app->parsed()) continue;
      if (cmd->name == "gen-data") return cmd_gen_data(*cmd, out);
      if (cmd->name == "train") return cmd_train(*cmd, out);
      if (cmd->name == "sample") return cmd_sample(*cmd, out);
      if (cmd->name == "evaluate") return cmd_evaluate(*cmd, out);
      if (cmd->name == "protocol") return cmd_protocol(*cmd, out);
      if (cmd->name == "grid") return cmd_grid(*cmd, out);
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace popsyn
