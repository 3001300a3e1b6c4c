#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "popsyn/matrix.hpp"
#include "popsyn/schema.hpp"

namespace popsyn {

using CategoryIndex = std::uint32_t;

/// One agent: a category index per schema feature, in schema order.
struct AgentRecord {
  std::vector<CategoryIndex> values;

  bool operator==(const AgentRecord&) const = default;
  auto operator<=>(const AgentRecord&) const = default;
};

/// Throws EncodingError naming the first feature whose index is out of range.
void validate_record(const AgentRecord& record, const Schema& schema);

/// Output-feature indices only (the "agent" part of a record).
std::vector<CategoryIndex> output_tuple(const AgentRecord& record, const Schema& schema);
/// Conditional-feature indices only.
std::vector<CategoryIndex> conditional_tuple(const AgentRecord& record, const Schema& schema);

struct OneHotPair {
  std::vector<double> outputs;
  std::vector<double> conditionals;
};

/// Concatenated one-hot blocks in canonical feature order.
OneHotPair encode_one_hot(const AgentRecord& record, const Schema& schema);

/// Inverse of encode_one_hot; each block must contain exactly one 1.
AgentRecord decode_one_hot(std::span<const double> outputs, std::span<const double> conditionals,
                           const Schema& schema);

/// Batch form: row i of each matrix encodes records[i].
struct EncodedBatch {
  Matrix outputs;       // n x output_width
  Matrix conditionals;  // n x conditional_width
};

EncodedBatch encode_batch(std::span<const AgentRecord> records, const Schema& schema);
Matrix encode_conditionals(std::span<const AgentRecord> records, const Schema& schema);

std::vector<AgentRecord> select_records(std::span<const AgentRecord> records,
                                        std::span<const std::size_t> indices);

// CSV layout: header of feature names, one row of integer category indices per record.

void write_dataset_csv(const std::string& path, const Schema& schema, std::span<const AgentRecord> records);
std::string dataset_csv(const Schema& schema, std::span<const AgentRecord> records);

/// Header must list exactly the schema features in order (ValidationError
/// lists the offending names). Malformed rows raise ValidationError with the
/// 1-based line number.
std::vector<AgentRecord> read_dataset_csv(const std::string& path, const Schema& schema);
std::vector<AgentRecord> parse_dataset_csv(const std::string& text, const Schema& schema);

/// Reads rows that carry at least every conditional column (any order,
/// output columns optional). Output indices in the result are set to 0.
std::vector<AgentRecord> read_conditionals_csv(const std::string& path, const Schema& schema);
std::vector<AgentRecord> parse_conditionals_csv(const std::string& text, const Schema& schema);

}  // namespace popsyn
