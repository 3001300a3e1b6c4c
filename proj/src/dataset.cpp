#include "popsyn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "popsyn/error.hpp"

namespace popsyn {

void validate_record(const AgentRecord& record, const Schema& schema) {
  if (record.values.size() != schema.size()) {
    throw EncodingError("record has " + std::to_string(record.values.size()) + " values, schema has " +
                        std::to_string(schema.size()) + " features");
  }
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (record.values[i] >= schema.feature(i).categories()) {
      throw EncodingError("feature '" + schema.feature(i).name + "' index " +
                          std::to_string(record.values[i]) + " out of range [0, " +
                          std::to_string(schema.feature(i).categories()) + ")");
    }
  }
}

std::vector<CategoryIndex> output_tuple(const AgentRecord& record, const Schema& schema) {
  return {record.values.begin(), record.values.begin() + static_cast<std::ptrdiff_t>(schema.output_count())};
}

std::vector<CategoryIndex> conditional_tuple(const AgentRecord& record, const Schema& schema) {
  return {record.values.begin() + static_cast<std::ptrdiff_t>(schema.output_count()), record.values.end()};
}

namespace {

void write_one_hot(const AgentRecord& record, const Schema& schema, std::size_t first, std::size_t last,
                   std::span<double> dst) {
  std::fill(dst.begin(), dst.end(), 0.0);
  std::size_t offset = 0;
  for (std::size_t i = first; i < last; ++i) {
    dst[offset + record.values[i]] = 1.0;
    offset += schema.feature(i).categories();
  }
}

void read_one_hot(std::span<const double> src, const Schema& schema, std::size_t first, std::size_t last,
                  AgentRecord& record) {
  std::size_t offset = 0;
  for (std::size_t i = first; i < last; ++i) {
    const std::size_t width = schema.feature(i).categories();
    std::size_t hot = width;
    for (std::size_t k = 0; k < width; ++k) {
      const double v = src[offset + k];
      if (v == 1.0) {
        if (hot != width) throw EncodingError("feature '" + schema.feature(i).name + "' has several hot entries");
        hot = k;
      } else if (v != 0.0) {
        throw EncodingError("feature '" + schema.feature(i).name + "' block is not one-hot");
      }
    }
    if (hot == width) throw EncodingError("feature '" + schema.feature(i).name + "' block has no hot entry");
    record.values[i] = static_cast<CategoryIndex>(hot);
    offset += width;
  }
}

}  // namespace

OneHotPair encode_one_hot(const AgentRecord& record, const Schema& schema) {
  validate_record(record, schema);
  OneHotPair pair{std::vector<double>(schema.output_width()), std::vector<double>(schema.conditional_width())};
  write_one_hot(record, schema, 0, schema.output_count(), pair.outputs);
  write_one_hot(record, schema, schema.output_count(), schema.size(), pair.conditionals);
  return pair;
}

AgentRecord decode_one_hot(std::span<const double> outputs, std::span<const double> conditionals,
                           const Schema& schema) {
  if (outputs.size() != schema.output_width() || conditionals.size() != schema.conditional_width()) {
    throw EncodingError("one-hot widths " + std::to_string(outputs.size()) + "/" +
                        std::to_string(conditionals.size()) + " do not match schema " +
                        std::to_string(schema.output_width()) + "/" + std::to_string(schema.conditional_width()));
  }
  AgentRecord r{std::vector<CategoryIndex>(schema.size(), 0)};
  read_one_hot(outputs, schema, 0, schema.output_count(), r);
  read_one_hot(conditionals, schema, schema.output_count(), schema.size(), r);
  return r;
}

EncodedBatch encode_batch(std::span<const AgentRecord> records, const Schema& schema) {
  EncodedBatch batch{Matrix(records.size(), schema.output_width()),
                     Matrix(records.size(), schema.conditional_width())};
  for (std::size_t r = 0; r < records.size(); ++r) {
    validate_record(records[r], schema);
    write_one_hot(records[r], schema, 0, schema.output_count(), batch.outputs.row(r));
    write_one_hot(records[r], schema, schema.output_count(), schema.size(), batch.conditionals.row(r));
  }
  return batch;
}

Matrix encode_conditionals(std::span<const AgentRecord> records, const Schema& schema) {
  Matrix out(records.size(), schema.conditional_width());
  for (std::size_t r = 0; r < records.size(); ++r) {
    validate_record(records[r], schema);
    write_one_hot(records[r], schema, schema.output_count(), schema.size(), out.row(r));
  }
  return out;
}

std::vector<AgentRecord> select_records(std::span<const AgentRecord> records,
                                        std::span<const std::size_t> indices) {
  std::vector<AgentRecord> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(records[i]);
  return out;
}

std::string dataset_csv(const Schema& schema, std::span<const AgentRecord> records) {
  std::string out;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (i) out += ',';
    out += schema.feature(i).name;
  }
  out += '\n';
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(r.values[i]);
    }
    out += '\n';
  }
  return out;
}

void write_dataset_csv(const std::string& path, const Schema& schema, std::span<const AgentRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset file " + path);
  out << dataset_csv(schema, records);
  if (!out) throw IoError("failed writing dataset file " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // Trim surrounding whitespace.
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CategoryIndex parse_index(const std::string& cell, std::size_t line_no, const FeatureSpec& feature) {
  CategoryIndex v = 0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ValidationError("line " + std::to_string(line_no) + ": feature '" + feature.name +
                          "' value '" + cell + "' is not a category index");
  }
  if (v >= feature.categories()) {
    throw ValidationError("line " + std::to_string(line_no) + ": feature '" + feature.name + "' index " +
                          std::to_string(v) + " out of range [0, " + std::to_string(feature.categories()) + ")");
  }
  return v;
}

// Maps CSV columns to schema features; returns column index per feature or npos.
std::vector<std::size_t> map_header(const std::vector<std::string>& header, const Schema& schema) {
  std::vector<std::size_t> column(schema.size(), std::string::npos);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (auto f = schema.find(header[c])) column[*f] = c;
  }
  return column;
}

}  // namespace

std::vector<AgentRecord> parse_dataset_csv(const std::string& text, const Schema& schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("dataset CSV is empty (missing header)");
  const auto header = split_csv_line(line);

  std::vector<std::string> problems;
  for (const auto& name : header) {
    if (!schema.find(name)) problems.push_back("unexpected column '" + name + "'");
  }
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& name = schema.feature(i).name;
    if (std::find(header.begin(), header.end(), name) == header.end()) {
      problems.push_back("missing column '" + name + "'");
    } else if (i >= header.size() || header[i] != name) {
      problems.push_back("column '" + name + "' out of canonical order");
    }
  }
  if (!problems.empty()) {
    std::string msg = "dataset header does not match schema:";
    for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : " ") + problems[i];
    throw ValidationError(msg);
  }

  std::vector<AgentRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != schema.size()) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected " + std::to_string(schema.size()) +
                            " fields, found " + std::to_string(cells.size()));
    }
    AgentRecord r{std::vector<CategoryIndex>(schema.size())};
    for (std::size_t i = 0; i < schema.size(); ++i) r.values[i] = parse_index(cells[i], line_no, schema.feature(i));
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<AgentRecord> read_dataset_csv(const std::string& path, const Schema& schema) {
  return parse_dataset_csv(read_file(path), schema);
}

std::vector<AgentRecord> parse_conditionals_csv(const std::string& text, const Schema& schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("conditionals CSV is empty (missing header)");
  const auto header = split_csv_line(line);
  const auto column = map_header(header, schema);
  for (std::size_t i = schema.output_count(); i < schema.size(); ++i) {
    if (column[i] == std::string::npos) {
      throw ValidationError("conditionals CSV is missing column '" + schema.feature(i).name + "'");
    }
  }

  std::vector<AgentRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(cells.size()));
    }
    AgentRecord r{std::vector<CategoryIndex>(schema.size(), 0)};
    for (std::size_t i = schema.output_count(); i < schema.size(); ++i) {
      r.values[i] = parse_index(cells[column[i]], line_no, schema.feature(i));
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<AgentRecord> read_conditionals_csv(const std::string& path, const Schema& schema) {
  return parse_conditionals_csv(read_file(path), schema);
}

}  // namespace popsyn
