#include <doctest.h>

#include <cmath>
#include <map>

#include "popsyn/distribution.hpp"
#include "popsyn/error.hpp"
#include "popsyn/metrics.hpp"
#include "popsyn/synthetic.hpp"
#include "support.hpp"

using namespace popsyn;
using testing::feat;

namespace {

Schema two_three() {
  return Schema({feat("a", FeatureRole::output, 2), feat("b", FeatureRole::output, 3),
                 feat("c", FeatureRole::conditional, 2)},
                SchemaVariant::custom);
}

AgentRecord rec(CategoryIndex a, CategoryIndex b) { return AgentRecord{{a, b, 0}}; }

DistributionTable table(std::vector<double> p) {
  const std::size_t n = p.size();
  return DistributionTable({0}, {n}, std::move(p));
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("build_table") {
  const auto s = two_three();
  const std::vector<AgentRecord> one{rec(1, 2)};
  const auto point = build_table(one, s, std::vector<std::string>{"a", "b"});
  CHECK(point.n_bins() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(point.probabilities()[i] == (i == point.bin_index(std::vector<CategoryIndex>{1, 2}) ? 1.0 : 0.0));

  const std::vector<AgentRecord> ten{rec(0, 0), rec(0, 0), rec(0, 1), rec(1, 2), rec(1, 2),
                                     rec(1, 2), rec(0, 2), rec(1, 0), rec(0, 0), rec(1, 1)};
  std::map<std::pair<int, int>, int> counts;
  for (const auto& r : ten) ++counts[{r.values[0], r.values[1]}];
  const auto t = build_table(ten, s, std::vector<std::string>{"a", "b"});
  double total = 0;
  for (CategoryIndex a = 0; a < 2; ++a)
    for (CategoryIndex b = 0; b < 3; ++b) {
      const std::vector<CategoryIndex> tuple{a, b};
      CHECK(t.at(tuple) == doctest::Approx(counts[{a, b}] / 10.0));
      total += t.at(tuple);
    }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(t.tuple_of(t.bin_index(std::vector<CategoryIndex>{1, 1})) == std::vector<CategoryIndex>{1, 1});
  CHECK_THROWS_AS(build_table(ten, s, std::vector<std::string>{}), ValidationError);
  CHECK_THROWS_AS(build_table(ten, s, std::vector<std::string>{"c"}), ValidationError);
}

TEST_CASE("srmse hand values") {
  CHECK(srmse(table({0.5, 0.5}), table({0.5, 0.5})) == 0.0);
  CHECK(srmse(table({1.0, 0.0}), table({0.5, 0.5})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(srmse(table({1, 0, 0, 0}), table({0.25, 0.25, 0.25, 0.25})) ==
        doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(srmse(table({1, 0, 0, 0}), table({0.25, 0.25, 0.25, 0.25})) == doctest::Approx(1.7321).epsilon(1e-4));
  CHECK_THROWS_AS(srmse(table({1, 0}), table({0.2, 0.3, 0.5})), ValidationError);
}

TEST_CASE("r squared and pearson") {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  CHECK(*r_squared(p, p) == doctest::Approx(1.0));
  CHECK(*pearson(p, p) == doctest::Approx(1.0));
  const std::vector<double> t{0.7, 0.3}, rev{0.3, 0.7};
  CHECK(*pearson(rev, t) == doctest::Approx(-1.0));

  // Hand least squares on a 4-bin fixture.
  const std::vector<double> truth{0.1, 0.2, 0.3, 0.4}, est{0.15, 0.15, 0.35, 0.35};
  // mean 0.25; SS_tot = 0.0225+0.0025+0.0025+0.0225 = 0.05; SS_res = 4 * 0.0025 = 0.01
  CHECK(*r_squared(est, truth) == doctest::Approx(1.0 - 0.01 / 0.05));
  // cov = sum((e-.25)(t-.25)) = (-.1)(-.15)+(-.1)(-.05)+(.1)(.05)+(.1)(.15) = 0.04
  // sd_e = sqrt(4*0.01) = 0.2, sd_t = sqrt(0.05)
  CHECK(*pearson(est, truth) == doctest::Approx(0.04 / (0.2 * std::sqrt(0.05))));
  const std::vector<double> flat{0.25, 0.25, 0.25, 0.25};
  CHECK_FALSE(pearson(flat, truth).has_value());
  CHECK_FALSE(r_squared(truth, flat).has_value());
}

TEST_CASE("zero-sample percentage") {
  const auto s = two_three();
  const std::vector<AgentRecord> train{rec(0, 0), rec(0, 1), rec(1, 1)};
  const std::vector<AgentRecord> seen{rec(0, 0), rec(1, 1), rec(1, 1)};
  CHECK(zero_sample_pct(seen, train, s) == 0.0);
  const std::vector<AgentRecord> novel{rec(1, 2), rec(0, 2)};
  CHECK(zero_sample_pct(novel, train, s) == 100.0);
  const std::vector<AgentRecord> mixed{rec(0, 0), rec(0, 1), rec(1, 1), rec(1, 2), rec(0, 0),
                                       rec(1, 0), rec(0, 1), rec(0, 2), rec(1, 1), rec(0, 0)};
  CHECK(zero_sample_pct(mixed, train, s) == doctest::Approx(30.0));
  CHECK(distinct_output_tuples(mixed, s) == 6);
}

TEST_CASE("pooled marginals concatenate per-feature marginals") {
  const auto s = two_three();
  const std::vector<AgentRecord> a{rec(0, 0), rec(1, 2), rec(1, 2), rec(0, 1)};
  const auto m = pooled_marginals(a, s);
  CHECK(m == std::vector<double>{0.5, 0.5, 0.25, 0.25, 0.5});
  const std::vector<AgentRecord> b{rec(0, 0), rec(0, 0), rec(0, 0), rec(0, 0)};
  // sqrt(5 * ((.5)^2 + (.5)^2 + (.75)^2 + (.25)^2 + (.5)^2))
  CHECK(pooled_marginal_srmse(a, b, s) == doctest::Approx(std::sqrt(5 * (0.25 + 0.25 + 0.5625 + 0.0625 + 0.25))));
}

TEST_CASE("distribution suite") {
  const auto s = Schema::housing(SchemaVariant::extended);
  SeededRng rng(4);
  const auto truth = generate_synthetic_dataset(s, 3000, rng);
  const auto same = distribution_suite(truth, truth, s, truth);
  CHECK(same.srmse.marginal == 0.0);
  CHECK(same.srmse.bivariate == 0.0);
  CHECK(same.srmse.trivariate1 == 0.0);
  CHECK(same.srmse.trivariate2 == 0.0);
  CHECK(*same.marginal_r_squared == doctest::Approx(1.0));
  CHECK(*same.zero_sample_pct == 0.0);

  const auto other = generate_synthetic_dataset(s, 2000, rng);
  const auto r = distribution_suite(other, truth, s);
  CHECK_FALSE(r.zero_sample_pct.has_value());
  CHECK(r.srmse.bivariate == srmse(build_table(other, s, kBivariate), build_table(truth, s, kBivariate)));
  CHECK(r.srmse.trivariate1 == srmse(build_table(other, s, kTrivariate1), build_table(truth, s, kTrivariate1)));
  CHECK(r.srmse.trivariate2 == srmse(build_table(other, s, kTrivariate2), build_table(truth, s, kTrivariate2)));
  CHECK(r.srmse.marginal == doctest::Approx(pooled_marginal_srmse(other, truth, s)));
  CHECK(r.per_feature_marginal_srmse.size() == 5);
  CHECK(r.generated_count == 2000);
  CHECK(r.truth_count == 3000);

  const auto json = report_to_json(r);
  for (const char* key : {"\"marginal\"", "\"bivariate\"", "\"trivariate1\"", "\"trivariate2\""}) {
    CHECK(json.find(key) != std::string::npos);
  }
}

TEST_CASE("mean and population standard deviation") {
  const std::vector<double> v{1, 2, 3, 4};
  const auto [m, sd] = mean_std(v);
  CHECK(m == 2.5);
  CHECK(sd == doctest::Approx(std::sqrt(1.25)));
}

}  // TEST_SUITE
