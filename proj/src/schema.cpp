#include "popsyn/schema.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "popsyn/error.hpp"

namespace popsyn {

std::string to_string(FeatureRole r) { return r == FeatureRole::output ? "output" : "conditional"; }

std::string to_string(SchemaVariant v) {
  switch (v) {
    case SchemaVariant::original: return "original";
    case SchemaVariant::extended: return "extended";
    case SchemaVariant::custom: return "custom";
  }
  return "custom";
}

SchemaVariant variant_from_string(const std::string& s) {
  if (s == "original") return SchemaVariant::original;
  if (s == "extended") return SchemaVariant::extended;
  if (s == "custom") return SchemaVariant::custom;
  throw ValidationError("unknown schema variant '" + s + "' (expected original, extended or custom)");
}

Schema::Schema(std::vector<FeatureSpec> features, SchemaVariant variant)
    : features_(std::move(features)), variant_(variant) {
  std::set<std::string> names;
  bool seen_conditional = false;
  for (const auto& f : features_) {
    if (f.name.empty()) throw ValidationError("feature with empty name");
    if (!names.insert(f.name).second) throw ValidationError("duplicate feature '" + f.name + "'");
    if (f.categories() < 2) {
      throw ValidationError("feature '" + f.name + "' needs at least 2 categories");
    }
    std::set<std::string> labels(f.labels.begin(), f.labels.end());
    if (labels.size() != f.labels.size()) {
      throw ValidationError("feature '" + f.name + "' has duplicate category labels");
    }
    if (f.role == FeatureRole::conditional) {
      seen_conditional = true;
    } else {
      if (seen_conditional) {
        throw ValidationError("output feature '" + f.name + "' listed after a conditional feature");
      }
      ++output_count_;
    }
  }
}

namespace {

FeatureSpec make_feature(std::string name, FeatureRole role, std::vector<std::string> labels) {
  return FeatureSpec{std::move(name), role, std::move(labels)};
}

}  // namespace

Schema Schema::housing(SchemaVariant variant) {
  if (variant == SchemaVariant::custom) throw ValidationError("housing schema is original or extended");
  const bool ext = variant == SchemaVariant::extended;
  constexpr auto out = FeatureRole::output;
  constexpr auto cond = FeatureRole::conditional;

  std::vector<std::string> age =
      ext ? std::vector<std::string>{"18-20", "21-23", "24-26", "27-29", "30-32", "33-35",
                                     "36-38", "39-41", "42-44", "45-47", "48-50", "51-53",
                                     "54-56", "57-59", "60-64", "65-69", "70+"}
          : std::vector<std::string>{"18-24", "25-29", "30-34", "35-39", "40-44", "45-49", "50-59", "60+"};
  std::vector<std::string> distance =
      ext ? std::vector<std::string>{"<0.25km", "0.25-0.5km", "0.5-1km", "1-1.5km", "1.5-2km", ">2km"}
          : std::vector<std::string>{"<0.5km", "0.5-1km", "1-2km", ">2km"};
  std::vector<std::string> price =
      ext ? std::vector<std::string>{"<1.0bn",  "1.0-1.5bn", "1.5-2.0bn", "2.0-2.5bn", "2.5-3.0bn",
                                     "3.0-3.5bn", "3.5-4.0bn", "4.0-5.0bn", "5.0-6.0bn", "6.0-8.0bn",
                                     "8.0-10bn", "10-15bn",  "15-20bn",  ">20bn"}
          : std::vector<std::string>{"<1.0bn",  "1.0-1.5bn", "1.5-2.0bn", "2.0-2.5bn", "2.5-3.0bn", "3.0-4.0bn",
                                     "4.0-6.0bn", "6.0-8.0bn", "8.0-12bn", "12-20bn",  ">20bn"};
  std::vector<std::string> size =
      ext ? std::vector<std::string>{"<50m2", "50-65m2", "65-80m2", "80-100m2", "100-150m2", "150-250m2", ">250m2"}
          : std::vector<std::string>{"<60m2", "60-80m2", "80-100m2", "100-150m2", ">150m2"};
  std::vector<std::string> floor =
      ext ? std::vector<std::string>{"n/a", "1-3", "4-6", "7-10", "11-15", "16-20", "21+"}
          : std::vector<std::string>{"n/a", "1-5", "6-10", "11-20", "21+"};

  std::vector<FeatureSpec> f;
  f.push_back(make_feature("age", out, age));
  f.push_back(make_feature("gender", out, {"male", "female"}));
  f.push_back(make_feature("nationality", out,
                      {"vietnam", "south_korea", "japan", "china", "taiwan", "united_states", "france",
                       "united_kingdom", "australia", "singapore", "malaysia", "other"}));
  f.push_back(make_feature("investor", out, {"no", "yes"}));
  f.push_back(make_feature("prior_home", out,
                      {"hoan_kiem", "ba_dinh", "dong_da", "hai_ba_trung", "cau_giay", "thanh_xuan",
                       "long_bien", "gia_lam", "hoang_mai", "tay_ho", "hung_yen", "other"}));
  f.push_back(make_feature("distance_phase1", cond, distance));
  f.push_back(make_feature("distance_phase2", cond, distance));
  f.push_back(make_feature("distance_greenfield", cond, distance));
  f.push_back(make_feature("sales_price", cond, price));
  f.push_back(make_feature("size", cond, size));
  f.push_back(make_feature("floor", cond, floor));
  f.push_back(make_feature("property_type", cond, {"villa", "townhouse", "apartment"}));
  return Schema(std::move(f), variant);
}

std::size_t Schema::output_width() const {
  std::size_t w = 0;
  for (std::size_t i = 0; i < output_count_; ++i) w += features_[i].categories();
  return w;
}

std::size_t Schema::conditional_width() const {
  std::size_t w = 0;
  for (std::size_t i = output_count_; i < features_.size(); ++i) w += features_[i].categories();
  return w;
}

std::vector<std::size_t> Schema::output_blocks() const {
  std::vector<std::size_t> b;
  for (std::size_t i = 0; i < output_count_; ++i) b.push_back(features_[i].categories());
  return b;
}

std::vector<std::size_t> Schema::conditional_blocks() const {
  std::vector<std::size_t> b;
  for (std::size_t i = output_count_; i < features_.size(); ++i) b.push_back(features_[i].categories());
  return b;
}

std::optional<std::size_t> Schema::find(const std::string& name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw ValidationError("unknown feature '" + name + "'");
}

std::uint64_t Schema::output_combinations() const {
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < output_count_; ++i) n *= features_[i].categories();
  return n;
}

std::uint64_t Schema::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Schema::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = to_string(variant_);
  j["features"] = nlohmann::ordered_json::array();
  for (const auto& f : features_) {
    nlohmann::ordered_json jf;
    jf["name"] = f.name;
    jf["role"] = to_string(f.role);
    jf["categories"] = f.labels;
    j["features"].push_back(jf);
  }
  return j.dump(2);
}

Schema Schema::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("schema JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("features") || !j["features"].is_array()) {
    throw ValidationError("schema JSON needs a 'features' array");
  }
  const auto variant = variant_from_string(j.value("variant", std::string("custom")));
  std::vector<FeatureSpec> features;
  for (const auto& jf : j["features"]) {
    if (!jf.contains("name") || !jf.contains("role") || !jf.contains("categories")) {
      throw ValidationError("schema feature entries need name, role and categories");
    }
    FeatureSpec f;
    f.name = jf["name"].get<std::string>();
    const auto role = jf["role"].get<std::string>();
    if (role == "output") {
      f.role = FeatureRole::output;
    } else if (role == "conditional") {
      f.role = FeatureRole::conditional;
    } else {
      throw ValidationError("feature '" + f.name + "' has unknown role '" + role + "'");
    }
    f.labels = jf["categories"].get<std::vector<std::string>>();
    features.push_back(std::move(f));
  }
  return Schema(std::move(features), variant);
}

bool Schema::operator==(const Schema& other) const {
  if (variant_ != other.variant_ || features_.size() != other.features_.size()) return false;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& a = features_[i];
    const auto& b = other.features_[i];
    if (a.name != b.name || a.role != b.role || a.labels != b.labels) return false;
  }
  return true;
}

Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read schema file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return Schema::from_json(buf.str());
}

void save_schema(const Schema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write schema file " + path);
  out << schema.to_json() << '\n';
  if (!out) throw IoError("failed writing schema file " + path);
}

}  // namespace popsyn
