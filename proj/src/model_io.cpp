#include "popsyn/model_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "popsyn/error.hpp"

namespace popsyn {

namespace fs = std::filesystem;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir);
}

template <typename Config>
void check_keys(const nlohmann::json& j, const Config& defaults, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " config must be a JSON object");
  const auto known = to_json(defaults);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ValidationError(std::string("unknown ") + what + " config field '" + key + "'");
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& slot) {
  if (!j.contains(key)) return;
  try {
    slot = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("config field '") + key + "' has the wrong type");
  }
}

void read_activation(const nlohmann::json& j, Activation& slot) {
  std::string name;
  read_field(j, "hidden_activation", name);
  if (!name.empty()) slot = activation_from_string(name);
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

nlohmann::json load_manifest(const std::string& dir, const std::string& kind) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text_file((fs::path(dir) / "manifest.json").string()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model manifest in " + dir + ": " + e.what());
  }
  if (m.value("kind", std::string()) != kind) {
    throw ValidationError("model in " + dir + " is '" + m.value("kind", std::string("?")) + "', expected '" + kind + "'");
  }
  if (m.value("format_version", 0) != kModelFormatVersion) throw ValidationError("unsupported model format in " + dir);
  return m;
}

Schema manifest_schema(const nlohmann::json& m) {
  Schema schema = Schema::from_json(m.at("schema").dump());
  if (m.at("schema_fingerprint").get<std::string>() != hex(schema.fingerprint())) {
    throw ValidationError("model manifest schema fingerprint does not match its schema");
  }
  return schema;
}

nlohmann::ordered_json network_entry(const std::string& component, const Mlp& net) {
  return {{"component", component}, {"file", component + ".bin"}, {"layers", architecture_json(net)}};
}

Mlp load_network(const std::string& dir, const nlohmann::json& m, const std::string& component) {
  for (const auto& n : m.at("networks")) {
    if (n.at("component").get<std::string>() != component) continue;
    Mlp net = network_from_architecture(n.at("layers"));
    read_weights((fs::path(dir) / n.at("file").get<std::string>()).string(), net);
    return net;
  }
  throw ValidationError("model manifest has no '" + component + "' network");
}

nlohmann::ordered_json base_manifest(const std::string& kind, const Schema& schema) {
  nlohmann::ordered_json m;
  m["kind"] = kind;
  m["format_version"] = kModelFormatVersion;
  m["schema_fingerprint"] = hex(schema.fingerprint());
  m["schema"] = nlohmann::ordered_json::parse(schema.to_json());
  return m;
}

}  // namespace

nlohmann::ordered_json to_json(const CvaeTrainConfig& c) {
  return {{"hidden_layers", c.hidden_layers},   {"hidden_units", c.hidden_units},
          {"bottleneck_dim", c.bottleneck_dim}, {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},   {"beta", c.beta},
          {"epochs", c.epochs},                 {"seed", c.seed},
          {"hidden_activation", to_string(c.hidden_activation)},
          {"validation_every", c.validation_every},
          {"early_stopping", c.early_stopping}};
}

nlohmann::ordered_json to_json(const CganTrainConfig& c) {
  return {{"hidden_layers", c.hidden_layers},
          {"hidden_units", c.hidden_units},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"noise_dim", c.noise_dim},
          {"seed", c.seed},
          {"hidden_activation", to_string(c.hidden_activation)},
          {"non_saturating", c.non_saturating},
          {"validation_every", c.validation_every},
          {"early_stopping", c.early_stopping}};
}

CvaeTrainConfig cvae_config_from_json(const nlohmann::json& j, CvaeTrainConfig c) {
  check_keys(j, c, "cvae");
  read_field(j, "hidden_layers", c.hidden_layers);
  read_field(j, "hidden_units", c.hidden_units);
  read_field(j, "bottleneck_dim", c.bottleneck_dim);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "learning_rate", c.learning_rate);
  read_field(j, "beta", c.beta);
  read_field(j, "epochs", c.epochs);
  read_field(j, "seed", c.seed);
  read_activation(j, c.hidden_activation);
  read_field(j, "validation_every", c.validation_every);
  read_field(j, "early_stopping", c.early_stopping);
  c.validate();
  return c;
}

CganTrainConfig cgan_config_from_json(const nlohmann::json& j, CganTrainConfig c) {
  check_keys(j, c, "cgan");
  read_field(j, "hidden_layers", c.hidden_layers);
  read_field(j, "hidden_units", c.hidden_units);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "learning_rate", c.learning_rate);
  read_field(j, "epochs", c.epochs);
  read_field(j, "noise_dim", c.noise_dim);
  read_field(j, "seed", c.seed);
  read_activation(j, c.hidden_activation);
  read_field(j, "non_saturating", c.non_saturating);
  read_field(j, "validation_every", c.validation_every);
  read_field(j, "early_stopping", c.early_stopping);
  c.validate();
  return c;
}

void write_weights(const std::string& path, const Mlp& network) {
  const auto params = network.flat_parameters();
  std::vector<unsigned char> bytes(params.size() * 8);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(params[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

void read_weights(const std::string& path, Mlp& network) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() != network.parameter_count() * 8) {
    throw ValidationError("weight file " + path + " holds " + std::to_string(bytes.size() / 8) + " values, expected " +
                          std::to_string(network.parameter_count()));
  }
  std::vector<double> params(network.parameter_count());
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{static_cast<unsigned char>(bytes[i * 8 + b])} << (8 * b);
    params[i] = std::bit_cast<double>(bits);
  }
  network.set_flat_parameters(params);
}

nlohmann::ordered_json architecture_json(const Mlp& network) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& l : network.layers()) {
    nlohmann::ordered_json e{{"in", l.in_width()}, {"out", l.out_width()}, {"activation", to_string(l.activation)}};
    if (!l.blocks.empty()) e["blocks"] = l.blocks;
    arr.push_back(e);
  }
  return arr;
}

Mlp network_from_architecture(const nlohmann::json& layers) {
  std::vector<DenseLayer> out;
  for (const auto& e : layers) {
    const auto in = e.at("in").get<std::size_t>();
    const auto n = e.at("out").get<std::size_t>();
    std::vector<std::size_t> blocks;
    if (e.contains("blocks")) blocks = e.at("blocks").get<std::vector<std::size_t>>();
    out.emplace_back(Matrix(n, in), std::vector<double>(n, 0.0),
                     activation_from_string(e.at("activation").get<std::string>()), std::move(blocks));
  }
  return Mlp(std::move(out));
}

void save_cvae(const CvaeModel& model, const std::string& dir) {
  ensure_dir(dir);
  auto m = base_manifest("cvae", model.schema);
  m["config"] = to_json(model.config);
  m["networks"] = {network_entry("encoder", model.encoder), network_entry("decoder", model.decoder)};
  write_text_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
  write_weights((fs::path(dir) / "encoder.bin").string(), model.encoder);
  write_weights((fs::path(dir) / "decoder.bin").string(), model.decoder);
}

CvaeModel load_cvae(const std::string& dir) {
  const auto m = load_manifest(dir, "cvae");
  try {
    CvaeModel model{manifest_schema(m), cvae_config_from_json(m.at("config")), {}, {}};
    model.encoder = load_network(dir, m, "encoder");
    model.decoder = load_network(dir, m, "decoder");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model manifest in " + dir + ": " + e.what());
  }
}

void save_cgan(const CganModel& model, const std::string& dir) {
  ensure_dir(dir);
  auto m = base_manifest("cgan", model.schema);
  m["config"] = to_json(model.config);
  m["networks"] = {network_entry("generator", model.generator), network_entry("discriminator", model.discriminator)};
  write_text_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
  write_weights((fs::path(dir) / "generator.bin").string(), model.generator);
  write_weights((fs::path(dir) / "discriminator.bin").string(), model.discriminator);
}

CganModel load_cgan(const std::string& dir) {
  const auto m = load_manifest(dir, "cgan");
  try {
    CganModel model{manifest_schema(m), cgan_config_from_json(m.at("config")), {}, {}};
    model.generator = load_network(dir, m, "generator");
    model.discriminator = load_network(dir, m, "discriminator");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model manifest in " + dir + ": " + e.what());
  }
}

void save_baseline(const EmpiricalTable& table, const std::string& dir) {
  ensure_dir(dir);
  auto m = base_manifest("baseline", table.schema());
  m["table"] = "baseline.json";
  write_text_file((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
  write_text_file((fs::path(dir) / "baseline.json").string(), table.to_json() + "\n");
}

EmpiricalTable load_baseline(const std::string& dir) {
  load_manifest(dir, "baseline");
  return EmpiricalTable::from_json(read_text_file((fs::path(dir) / "baseline.json").string()));
}

std::string model_kind(const std::string& dir) {
  try {
    const auto m = nlohmann::json::parse(read_text_file((fs::path(dir) / "manifest.json").string()));
    return m.at("kind").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model manifest in " + dir + ": " + e.what());
  }
}

}  // namespace popsyn
