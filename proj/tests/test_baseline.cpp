#include <doctest.h>

#include <map>

#include "popsyn/baseline.hpp"
#include "popsyn/error.hpp"
#include "support.hpp"

using namespace popsyn;
using testing::feat;

namespace {

Schema small() {
  return Schema({feat("o1", FeatureRole::output, 3), feat("o2", FeatureRole::output, 2),
                 feat("c", FeatureRole::conditional, 3)},
                SchemaVariant::custom);
}

AgentRecord rec(CategoryIndex a, CategoryIndex b, CategoryIndex c) { return AgentRecord{{a, b, c}}; }

double tv(const std::map<EmpiricalTable::Tuple, double>& a, const EmpiricalTable::Entries& e) {
  std::map<EmpiricalTable::Tuple, double> diff = a;
  for (std::size_t i = 0; i < e.tuples.size(); ++i) diff[e.tuples[i]] -= e.probability(i);
  double s = 0;
  for (const auto& [t, d] : diff) s += std::abs(d);
  return 0.5 * s;
}

}  // namespace

TEST_SUITE("baseline") {

TEST_CASE("single record gives a point mass") {
  const auto s = small();
  const std::vector<AgentRecord> train{rec(2, 1, 0)};
  const auto t = fit_empirical(train, s);
  const auto* e = t.find({0});
  REQUIRE(e != nullptr);
  REQUIRE(e->tuples.size() == 1);
  CHECK(e->tuples[0] == EmpiricalTable::Tuple{2, 1});
  CHECK(e->probability(0) == 1.0);
  SeededRng rng(1);
  for (int i = 0; i < 20; ++i) CHECK(sample_baseline(t, rec(0, 0, 0), rng) == rec(2, 1, 0));
}

TEST_CASE("two outputs under one conditional tuple split evenly") {
  const auto s = small();
  const std::vector<AgentRecord> train{rec(0, 0, 1), rec(1, 1, 1)};
  const auto t = fit_empirical(train, s);
  const auto* e = t.find({1});
  REQUIRE(e != nullptr);
  CHECK(e->tuples.size() == 2);
  CHECK(e->probability(0) == 0.5);
  CHECK(e->probability(1) == 0.5);
  CHECK(t.find({2}) == nullptr);
}

TEST_CASE("overall table equals output tuple counts over n") {
  const auto s = small();
  const std::vector<AgentRecord> train{rec(0, 0, 0), rec(0, 0, 1), rec(1, 0, 2), rec(2, 1, 0), rec(0, 0, 0),
                                       rec(2, 1, 1), rec(2, 1, 2), rec(1, 1, 0), rec(0, 0, 2), rec(1, 0, 1)};
  std::map<EmpiricalTable::Tuple, int> counts;
  for (const auto& r : train) ++counts[{r.values[0], r.values[1]}];
  const auto t = fit_empirical(train, s);
  const auto& all = t.overall();
  CHECK(all.total == 10);
  CHECK(all.tuples.size() == counts.size());
  double sum = 0;
  for (std::size_t i = 0; i < all.tuples.size(); ++i) {
    CHECK(all.probability(i) == doctest::Approx(counts[all.tuples[i]] / 10.0));
    sum += all.probability(i);
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  for (const auto& [key, e] : t.by_conditionals()) {
    double total = 0;
    for (std::size_t i = 0; i < e.tuples.size(); ++i) total += e.probability(i);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK_THROWS_AS(fit_empirical(std::vector<AgentRecord>{}, s), ValidationError);
}

TEST_CASE("sampling reproduces stored tables and falls back for unseen tuples") {
  const auto s = small();
  const std::vector<AgentRecord> train{rec(0, 0, 0), rec(0, 0, 0), rec(1, 1, 0), rec(2, 0, 0),
                                       rec(2, 1, 1), rec(1, 0, 1), rec(0, 1, 1)};
  const auto t = fit_empirical(train, s);
  SeededRng rng(5);
  const int n = 100000;
  std::map<EmpiricalTable::Tuple, double> seen, unseen;
  for (int i = 0; i < n; ++i) {
    const auto a = sample_baseline(t, rec(0, 0, 0), rng);
    seen[{a.values[0], a.values[1]}] += 1.0 / n;
    const auto b = sample_baseline(t, rec(0, 0, 2), rng);
    CHECK(b.values[2] == 2);
    unseen[{b.values[0], b.values[1]}] += 1.0 / n;
  }
  CHECK(tv(seen, *t.find({0})) <= 0.01);
  CHECK(tv(unseen, t.overall()) <= 0.01);
}

TEST_CASE("json round trip and per-row sampling") {
  const auto s = small();
  SeededRng rng(8);
  const auto train = testing::random_records(s, 40, rng);
  const auto t = fit_empirical(train, s);
  const auto back = EmpiricalTable::from_json(t.to_json());
  CHECK(back.to_json() == t.to_json());
  SeededRng a(3), b(3);
  const auto x = sample_baseline(t, train, 3, a);
  CHECK(x.size() == 120);
  CHECK(x == sample_baseline(back, train, 3, b));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].values[2] == train[i / 3].values[2]);
}

}  // TEST_SUITE
