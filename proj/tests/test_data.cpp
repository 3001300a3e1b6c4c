#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "popsyn/dataset.hpp"
#include "popsyn/distribution.hpp"
#include "popsyn/error.hpp"
#include "popsyn/schema.hpp"
#include "popsyn/split.hpp"
#include "popsyn/synthetic.hpp"
#include "support.hpp"

using namespace popsyn;

namespace {

// E[TV] between a multinomial sample of size m and its source, normal approximation.
double expected_sampling_tv(const std::vector<double>& p, double m) {
  double s = 0;
  for (double q : p) s += std::sqrt(2 * q * (1 - q) / (std::numbers::pi * m));
  return 0.5 * s;
}

double tv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("housing schema widths") {
  const auto original = Schema::housing(SchemaVariant::original);
  CHECK(original.output_width() == 36);
  CHECK(original.conditional_width() == 36);
  const auto extended = Schema::housing(SchemaVariant::extended);
  CHECK(extended.output_width() == 45);
  CHECK(extended.conditional_width() == 49);
  for (const auto* s : {&original, &extended}) {
    CHECK(s->size() == 12);
    CHECK(s->output_count() == 5);
    for (std::size_t i = 0; i < s->size(); ++i) {
      CHECK(s->feature(i).role == (i < 5 ? FeatureRole::output : FeatureRole::conditional));
      CHECK(s->feature(i).categories() >= 2);
    }
  }
}

TEST_CASE("schema validation") {
  using testing::feat;
  CHECK_THROWS_AS(Schema({feat("a", FeatureRole::output, 1), feat("c", FeatureRole::conditional, 2)},
                         SchemaVariant::custom),
                  ValidationError);
  FeatureSpec dup{"a", FeatureRole::output, {"x", "x"}};
  CHECK_THROWS_AS(Schema({dup, feat("c", FeatureRole::conditional, 2)}, SchemaVariant::custom), ValidationError);
  CHECK_THROWS_AS(Schema({feat("c", FeatureRole::conditional, 2), feat("a", FeatureRole::output, 2)},
                         SchemaVariant::custom),
                  ValidationError);
  CHECK_THROWS_AS(Schema({feat("a", FeatureRole::output, 2), feat("a", FeatureRole::conditional, 2)},
                         SchemaVariant::custom),
                  ValidationError);
}

TEST_CASE("schema json round trip keeps fingerprint") {
  for (auto v : {SchemaVariant::original, SchemaVariant::extended}) {
    const auto s = Schema::housing(v);
    const auto back = Schema::from_json(s.to_json());
    CHECK(back.to_json() == s.to_json());
    CHECK(back.fingerprint() == s.fingerprint());
  }
  CHECK(Schema::housing(SchemaVariant::original).fingerprint() !=
        Schema::housing(SchemaVariant::extended).fingerprint());
  const auto toy = testing::toy_schema();
  CHECK(Schema::from_json(toy.to_json()).variant() == SchemaVariant::custom);
}

TEST_CASE("one-hot encoding") {
  using testing::feat;
  const Schema tiny({feat("a", FeatureRole::output, 2), feat("c", FeatureRole::conditional, 3)},
                    SchemaVariant::custom);
  const auto e = encode_one_hot(AgentRecord{{0, 2}}, tiny);
  CHECK(e.outputs == std::vector<double>{1, 0});
  CHECK(e.conditionals == std::vector<double>{0, 0, 1});

  const auto ext = Schema::housing(SchemaVariant::extended);
  SeededRng rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto r = testing::random_record(ext, rng);
    const auto pair = encode_one_hot(r, ext);
    CHECK(pair.outputs.size() == 45);
    CHECK(std::count(pair.outputs.begin(), pair.outputs.end(), 1.0) == 5);
    CHECK(std::count(pair.conditionals.begin(), pair.conditionals.end(), 1.0) == 7);
    CHECK(decode_one_hot(pair.outputs, pair.conditionals, ext) == r);
  }
  CHECK_THROWS_AS(encode_one_hot(AgentRecord{{2, 0}}, tiny), EncodingError);
  CHECK_THROWS_AS(encode_one_hot(AgentRecord{{0}}, tiny), EncodingError);
  const std::vector<double> two_hot{1, 1}, cond{1, 0, 0};
  CHECK_THROWS_AS(decode_one_hot(two_hot, cond, tiny), EncodingError);
}

TEST_CASE("encode_batch stacks rows") {
  const auto s = testing::toy_schema();
  SeededRng rng(2);
  const auto recs = testing::random_records(s, 5, rng);
  const auto b = encode_batch(recs, s);
  CHECK(b.outputs.rows() == 5);
  CHECK(b.outputs.cols() == s.output_width());
  CHECK(b.conditionals.cols() == s.conditional_width());
  for (std::size_t i = 0; i < 5; ++i) {
    const auto one = encode_one_hot(recs[i], s);
    CHECK(std::equal(one.outputs.begin(), one.outputs.end(), b.outputs.row(i).begin()));
  }
}

TEST_CASE("dataset csv round trip and errors") {
  const auto s = Schema::housing(SchemaVariant::original);
  SeededRng rng(12);
  const auto recs = generate_synthetic_dataset(s, 50, rng);
  const auto text = dataset_csv(s, recs);
  CHECK(parse_dataset_csv(text, s) == recs);

  std::string corrupt = text + "1,0,0,0,0,0,0,0,0,0,0\n";
  try {
    parse_dataset_csv(corrupt, s);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 52") != std::string::npos);
  }
  std::string out_of_range = text + "1,0,0,0,0,0,0,0,0,0,0,99\n";
  CHECK_THROWS_WITH_AS(parse_dataset_csv(out_of_range, s), doctest::Contains("line 52"), ValidationError);

  std::string header = text;
  header.replace(0, 3, "agx");
  CHECK_THROWS_WITH_AS(parse_dataset_csv(header, s), doctest::Contains("missing column 'age'"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_dataset_csv(header, s), doctest::Contains("unexpected column 'agx'"), ValidationError);
}

TEST_CASE("conditionals csv accepts any column order and names missing columns") {
  const auto s = testing::toy_schema();
  const auto recs = parse_conditionals_csv("c2,c1\n2,1\n0,0\n", s);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].values == std::vector<CategoryIndex>{0, 0, 0, 1, 2});
  CHECK_THROWS_WITH_AS(parse_conditionals_csv("c1\n1\n", s), doctest::Contains("'c2'"), ValidationError);
}

TEST_CASE("split arithmetic on 1000 records with a 50-record application group") {
  std::vector<std::size_t> app;
  for (std::size_t i = 0; i < 50; ++i) app.push_back(i * 20 + 3);
  SeededRng rng(1);
  const auto plan = make_split(1000, app, rng);
  CHECK(plan.application_ids.size() == 50);
  CHECK(plan.test_ids.size() == 95);
  CHECK(plan.train_ids.size() == 855);
  REQUIRE(plan.folds.size() == kFolds);
  for (const auto& f : plan.folds) {
    CHECK(f.validation.size() == 171);
    CHECK(f.train.size() == 684);
  }
  CHECK_NOTHROW(check_split(plan, 1000));

  SeededRng again(1);
  const auto plan2 = make_split(1000, app, again);
  CHECK(plan2.test_ids == plan.test_ids);
  CHECK(plan2.folds[2].validation == plan.folds[2].validation);
}

TEST_CASE("split partitions for any seed") {
  std::vector<std::size_t> app{5, 6, 7, 8, 9, 10, 11, 12};
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SeededRng rng(seed);
    const std::size_t n = 100 + seed * 37;
    const auto plan = make_split(n, app, rng);
    std::vector<int> seen(n, 0);
    for (auto id : plan.application_ids) ++seen[id];
    for (auto id : plan.test_ids) ++seen[id];
    for (auto id : plan.train_ids) ++seen[id];
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    std::vector<int> in_val(n, 0);
    for (const auto& f : plan.folds) {
      std::vector<std::size_t> u = f.train;
      u.insert(u.end(), f.validation.begin(), f.validation.end());
      std::sort(u.begin(), u.end());
      CHECK(u == plan.train_ids);
      for (auto id : f.validation) ++in_val[id];
    }
    for (auto id : plan.train_ids) CHECK(in_val[id] == 1);
  }
}

TEST_CASE("split preconditions") {
  SeededRng rng(1);
  const std::vector<std::size_t> none;
  CHECK_THROWS_AS(make_split(1000, none, rng), SplitError);
  std::vector<std::size_t> big;
  for (std::size_t i = 0; i < 200; ++i) big.push_back(i);
  CHECK_THROWS_AS(make_split(1000, big, rng), SplitError);
  const std::vector<std::size_t> one{0};
  CHECK_THROWS_AS(make_split(99, one, rng), SplitError);
}

TEST_CASE("application selector picks a whole conditional group near 5%") {
  const auto s = Schema::housing(SchemaVariant::extended);
  SeededRng rng(7);
  const auto recs = generate_synthetic_dataset(s, 6893, rng);
  const auto selector = choose_application_selector(recs, s);
  const auto group = select_group(recs, selector);
  const double frac = static_cast<double>(group.size()) / recs.size();
  CHECK(frac > 0.0);
  CHECK(frac <= 0.15);
  CHECK(std::abs(frac - 0.05) < 0.03);
  CHECK(selector.constraints.front().feature == s.index_of("property_type"));

  SeededRng split_rng(1);
  const auto plan = make_split(recs, selector, split_rng);
  CHECK(plan.application_ids == group);
  // No training record falls in the held-out group.
  for (auto id : plan.train_ids) CHECK_FALSE(selector.matches(recs[id]));
}

TEST_CASE("generator produces valid records deterministically") {
  for (auto v : {SchemaVariant::original, SchemaVariant::extended}) {
    const auto s = Schema::housing(v);
    SeededRng rng(1);
    const auto one = generate_synthetic_dataset(s, 1, rng);
    REQUIRE(one.size() == 1);
    CHECK_NOTHROW(validate_record(one[0], s));
    SeededRng a(5), b(5);
    const auto ra = generate_synthetic_dataset(s, 6893, a);
    CHECK(ra.size() == 6893);
    CHECK(ra == generate_synthetic_dataset(s, 6893, b));
    for (const auto& r : ra) validate_record(r, s);
  }
}

TEST_CASE("generator single-value conditionals match the closed form at 200k records") {
  for (auto v : {SchemaVariant::original, SchemaVariant::extended}) {
    const auto s = Schema::housing(v);
    const PlantedPopulation pop(s);
    const auto exact = pop.single_value_marginals();
    SeededRng rng(99);
    const std::size_t n = 200000;
    const auto recs = generate_synthetic_dataset(s, n, rng);
    for (std::size_t g = 0; g < s.conditional_count(); ++g) {
      const std::size_t feature = s.output_count() + g;
      const auto& pv = exact.value_probability[g];
      const std::size_t top = static_cast<std::size_t>(std::max_element(pv.begin(), pv.end()) - pv.begin());
      for (std::size_t value = 0; value < pv.size(); ++value) {
        std::vector<const AgentRecord*> sel;
        for (const auto& r : recs)
          if (r.values[feature] == value) sel.push_back(&r);
        if (pv[value] == 0.0) {
          CHECK(sel.empty());
          continue;
        }
        CHECK(static_cast<double>(sel.size()) / n == doctest::Approx(pv[value]).epsilon(0.1));
        for (std::size_t f = 0; f < s.output_count(); ++f) {
          const auto& truth = exact.output_given_value[g][value][f];
          std::vector<double> emp(truth.size(), 0.0);
          for (const auto* r : sel) emp[r->values[f]] += 1.0 / sel.size();
          const double d = tv(emp, truth);
          const double bound = std::max(0.01, 4 * expected_sampling_tv(truth, sel.size()));
          CHECK_MESSAGE(d <= bound, s.feature(feature).name, "=", value, " output ", s.feature(f).name);
          if (value == top) CHECK(d <= 0.01);
        }
      }
    }
  }
}

TEST_CASE("true conditional distribution is normalized") {
  const auto s = Schema::housing(SchemaVariant::extended);
  SeededRng rng(3);
  const PlantedPopulation pop(s);
  for (int i = 0; i < 5; ++i) {
    const auto c = pop.draw_conditionals(rng);
    const auto gender = true_conditional_distribution(s, c, {"gender"});
    CHECK(gender.n_bins() == 2);
    CHECK(gender.total() == doctest::Approx(1.0).epsilon(1e-12));
    const auto joint =
        true_conditional_distribution(s, c, {"age", "gender", "nationality", "investor", "prior_home"});
    CHECK(joint.n_bins() == s.output_combinations());
    CHECK(std::abs(joint.total() - 1.0) < 1e-12);
  }
}

TEST_CASE("true conditional distribution matches a Monte-Carlo estimate") {
  const auto s = Schema::housing(SchemaVariant::extended);
  const PlantedPopulation pop(s);
  SeededRng rng(31);
  const auto c = pop.draw_conditionals(rng);
  const auto exact = true_conditional_distribution(s, c, {"age", "gender"});
  const std::size_t draws = 1000000;
  std::vector<double> emp(exact.n_bins(), 0.0);
  AgentRecord r = c;
  const std::size_t age = s.index_of("age"), gender = s.index_of("gender");
  for (std::size_t i = 0; i < draws; ++i) {
    pop.draw_outputs(r, rng);
    const std::vector<CategoryIndex> t{r.values[age], r.values[gender]};
    emp[exact.bin_index(t)] += 1.0 / draws;
  }
  const std::vector<double> p(exact.probabilities().begin(), exact.probabilities().end());
  CHECK(tv(emp, p) <= 0.005);
}

}  // TEST_SUITE
