#include "popsyn/baseline.hpp"

#include <json.hpp>

#include "popsyn/error.hpp"

namespace popsyn {

namespace {

EmpiricalTable::Entries to_entries(const std::map<EmpiricalTable::Tuple, std::uint64_t>& counts) {
  EmpiricalTable::Entries e;
  for (const auto& [tuple, c] : counts) {
    e.tuples.push_back(tuple);
    e.counts.push_back(c);
    e.total += c;
  }
  return e;
}

std::size_t draw_entry(const EmpiricalTable::Entries& e, SeededRng& rng) {
  // Integer inverse CDF on exact counts.
  std::uint64_t target = rng.below(static_cast<std::size_t>(e.total));
  for (std::size_t i = 0; i < e.counts.size(); ++i) {
    if (target < e.counts[i]) return i;
    target -= e.counts[i];
  }
  return e.counts.size() - 1;
}

}  // namespace

EmpiricalTable::EmpiricalTable(Schema schema, std::map<Tuple, Entries> by_conditionals, Entries overall)
    : schema_(std::move(schema)), by_conditionals_(std::move(by_conditionals)), overall_(std::move(overall)) {}

const EmpiricalTable::Entries* EmpiricalTable::find(const Tuple& conditionals) const {
  auto it = by_conditionals_.find(conditionals);
  return it == by_conditionals_.end() ? nullptr : &it->second;
}

EmpiricalTable fit_empirical(std::span<const AgentRecord> train, const Schema& schema) {
  if (train.empty()) throw ValidationError("fit_empirical needs training data");
  std::map<EmpiricalTable::Tuple, std::map<EmpiricalTable::Tuple, std::uint64_t>> grouped;
  std::map<EmpiricalTable::Tuple, std::uint64_t> overall;
  for (const auto& r : train) {
    validate_record(r, schema);
    auto out = output_tuple(r, schema);
    ++grouped[conditional_tuple(r, schema)][out];
    ++overall[out];
  }
  std::map<EmpiricalTable::Tuple, EmpiricalTable::Entries> by_cond;
  for (const auto& [key, counts] : grouped) by_cond.emplace(key, to_entries(counts));
  return EmpiricalTable(schema, std::move(by_cond), to_entries(overall));
}

AgentRecord sample_baseline(const EmpiricalTable& table, const AgentRecord& conditionals, SeededRng& rng) {
  const auto& schema = table.schema();
  const auto* entries = table.find(conditional_tuple(conditionals, schema));
  if (!entries) entries = &table.overall();
  const auto& tuple = entries->tuples[draw_entry(*entries, rng)];
  AgentRecord out = conditionals;
  std::copy(tuple.begin(), tuple.end(), out.values.begin());
  return out;
}

std::vector<AgentRecord> sample_baseline(const EmpiricalTable& table, std::span<const AgentRecord> conditionals,
                                         std::size_t per_row, SeededRng& rng) {
  std::vector<AgentRecord> out;
  out.reserve(conditionals.size() * per_row);
  for (const auto& c : conditionals) {
    for (std::size_t i = 0; i < per_row; ++i) out.push_back(sample_baseline(table, c, rng));
  }
  return out;
}

namespace {

nlohmann::ordered_json entries_json(const EmpiricalTable::Entries& e) {
  auto arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < e.tuples.size(); ++i) {
    arr.push_back({{"outputs", e.tuples[i]}, {"count", e.counts[i]}, {"probability", e.probability(i)}});
  }
  return arr;
}

EmpiricalTable::Entries entries_from_json(const nlohmann::json& arr) {
  std::map<EmpiricalTable::Tuple, std::uint64_t> counts;
  for (const auto& item : arr) {
    counts[item.at("outputs").get<EmpiricalTable::Tuple>()] += item.at("count").get<std::uint64_t>();
  }
  return to_entries(counts);
}

}  // namespace

std::string EmpiricalTable::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = "baseline";
  j["schema"] = nlohmann::ordered_json::parse(schema_.to_json());
  j["overall"] = entries_json(overall_);
  auto combos = nlohmann::ordered_json::array();
  for (const auto& [key, e] : by_conditionals_) combos.push_back({{"conditionals", key}, {"table", entries_json(e)}});
  j["combinations"] = combos;
  return j.dump(1);
}

EmpiricalTable EmpiricalTable::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("kind", std::string()) != "baseline") throw ValidationError("not a baseline table");
    Schema schema = Schema::from_json(j.at("schema").dump());
    std::map<Tuple, Entries> by_cond;
    for (const auto& c : j.at("combinations")) {
      by_cond.emplace(c.at("conditionals").get<Tuple>(), entries_from_json(c.at("table")));
    }
    return EmpiricalTable(std::move(schema), std::move(by_cond), entries_from_json(j.at("overall")));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("baseline JSON: ") + e.what());
  }
}

}  // namespace popsyn
