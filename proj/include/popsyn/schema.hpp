#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace popsyn {

enum class FeatureRole { output, conditional };
enum class SchemaVariant { original, extended, custom };

std::string to_string(FeatureRole r);
std::string to_string(SchemaVariant v);
SchemaVariant variant_from_string(const std::string& s);

struct FeatureSpec {
  std::string name;
  FeatureRole role = FeatureRole::output;
  std::vector<std::string> labels;

  std::size_t categories() const { return labels.size(); }
};

/// Ordered categorical features; output features come first.
class Schema {
 public:
  Schema() = default;
  Schema(std::vector<FeatureSpec> features, SchemaVariant variant);

  /// The twelve-feature housing schema in its original (36/36) or
  /// extended (45/49) discretization.
  static Schema housing(SchemaVariant variant);

  const std::vector<FeatureSpec>& features() const { return features_; }
  const FeatureSpec& feature(std::size_t i) const { return features_.at(i); }
  std::size_t size() const { return features_.size(); }
  SchemaVariant variant() const { return variant_; }

  std::size_t output_count() const { return output_count_; }
  std::size_t conditional_count() const { return features_.size() - output_count_; }

  /// One-hot widths.
  std::size_t output_width() const;
  std::size_t conditional_width() const;

  /// Category counts of output / conditional features in canonical order.
  std::vector<std::size_t> output_blocks() const;
  std::vector<std::size_t> conditional_blocks() const;

  std::optional<std::size_t> find(const std::string& name) const;
  /// Index of a feature by name; throws ValidationError naming it if absent.
  std::size_t index_of(const std::string& name) const;

  /// Number of distinct full output tuples.
  std::uint64_t output_combinations() const;

  /// Stable 64-bit FNV-1a hash of the canonical JSON form.
  std::uint64_t fingerprint() const;

  std::string to_json() const;
  static Schema from_json(const std::string& text);

  bool operator==(const Schema&) const;

 private:
  std::vector<FeatureSpec> features_;
  SchemaVariant variant_ = SchemaVariant::custom;
  std::size_t output_count_ = 0;
};

Schema load_schema(const std::string& path);
void save_schema(const Schema& schema, const std::string& path);

}  // namespace popsyn
