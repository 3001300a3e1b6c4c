#pragma once

// On-disk model layout, one directory per model:
//   manifest.json   kind, format version, schema + fingerprint, config, and
//                   per network: component tag, weight file, layer shapes
//   <component>.bin little-endian float64, layer order, each layer's weights
//                   row-major (out x in) followed by its bias
// Baseline tables are stored as baseline.json next to a manifest.

#include <string>

#include <json.hpp>

#include "popsyn/baseline.hpp"
#include "popsyn/cgan.hpp"
#include "popsyn/cvae.hpp"
#include "popsyn/mlp.hpp"

namespace popsyn {

inline constexpr int kModelFormatVersion = 1;

nlohmann::ordered_json to_json(const CvaeTrainConfig& c);
nlohmann::ordered_json to_json(const CganTrainConfig& c);

/// Reads known keys over `base`; unknown keys raise ValidationError.
CvaeTrainConfig cvae_config_from_json(const nlohmann::json& j, CvaeTrainConfig base = {});
CganTrainConfig cgan_config_from_json(const nlohmann::json& j, CganTrainConfig base = {});

void write_weights(const std::string& path, const Mlp& network);
/// Fills an already-shaped network; the file length must match exactly.
void read_weights(const std::string& path, Mlp& network);

nlohmann::ordered_json architecture_json(const Mlp& network);
/// Zero-initialized network with the recorded layer shapes.
Mlp network_from_architecture(const nlohmann::json& layers);

void save_cvae(const CvaeModel& model, const std::string& dir);
CvaeModel load_cvae(const std::string& dir);
void save_cgan(const CganModel& model, const std::string& dir);
CganModel load_cgan(const std::string& dir);
void save_baseline(const EmpiricalTable& table, const std::string& dir);
EmpiricalTable load_baseline(const std::string& dir);

/// "cvae", "cgan" or "baseline", from the manifest.
std::string model_kind(const std::string& dir);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace popsyn
