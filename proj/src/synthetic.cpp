#include "popsyn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "popsyn/error.hpp"

namespace popsyn {

namespace {

// Classes: 0 young local buyer, 1 established local family,
//          2 foreign professional, 3 local investor.
using Coeffs = std::array<double, PlantedPopulation::kClasses>;

constexpr Coeffs kBase = {0.2, 0.3, 0.0, -0.3};
constexpr Coeffs kPriceSlope = {-4.0, 0.0, 2.0, 4.0};
constexpr Coeffs kSizeSlope = {-1.0, 1.5, -0.5, 0.5};
constexpr Coeffs kFloorSlope = {-0.5, -0.5, 2.5, 0.5};
constexpr Coeffs kPhase1Slope = {1.5, 0.0, -2.5, 0.0};
constexpr Coeffs kPhase2Slope = {0.0, -1.0, 0.5, 0.5};
constexpr Coeffs kGreenfieldSlope = {0.5, -2.0, 0.5, 0.0};
// rows: villa, townhouse, apartment
constexpr std::array<Coeffs, 3> kTypeEffect = {{{-1.5, 0.3, -0.2, 1.5},
                                                {-0.3, 1.0, -0.8, 0.5},
                                                {1.0, -0.3, 1.2, -1.0}}};

struct Bump {
  double center;
  double width;
};

constexpr std::array<Bump, 4> kAgeByClass = {{{0.15, 0.08}, {0.40, 0.10}, {0.60, 0.10}, {0.80, 0.10}}};
constexpr Coeffs kFemaleByClass = {0.45, 0.50, 0.30, 0.55};
constexpr Coeffs kInvestorByClass = {0.05, 0.12, 0.30, 0.65};

// vietnam, south_korea, japan, china, taiwan, united_states, france,
// united_kingdom, australia, singapore, malaysia, other
constexpr std::array<std::array<double, 12>, 4> kNationalityByClass = {{
    {0.940, 0.010, 0.005, 0.010, 0.005, 0.005, 0.005, 0.005, 0.005, 0.005, 0.005, 0.005},
    {0.900, 0.030, 0.010, 0.020, 0.005, 0.005, 0.005, 0.005, 0.005, 0.005, 0.005, 0.005},
    {0.050, 0.380, 0.190, 0.080, 0.060, 0.050, 0.040, 0.040, 0.030, 0.030, 0.020, 0.030},
    {0.820, 0.080, 0.020, 0.030, 0.020, 0.005, 0.005, 0.005, 0.005, 0.005, 0.005, 0.005},
}};

// hoan_kiem, ba_dinh, dong_da, hai_ba_trung, cau_giay, thanh_xuan,
// long_bien, gia_lam, hoang_mai, tay_ho, hung_yen, other
constexpr std::array<std::array<double, 12>, 4> kPriorHomeByClass = {{
    {0.02, 0.02, 0.05, 0.05, 0.04, 0.06, 0.25, 0.20, 0.15, 0.02, 0.10, 0.04},
    {0.05, 0.06, 0.12, 0.12, 0.15, 0.12, 0.12, 0.06, 0.08, 0.04, 0.03, 0.05},
    {0.06, 0.08, 0.04, 0.04, 0.06, 0.02, 0.06, 0.02, 0.02, 0.30, 0.01, 0.29},
    {0.20, 0.18, 0.12, 0.12, 0.08, 0.06, 0.08, 0.04, 0.04, 0.05, 0.01, 0.02},
}};

constexpr std::array<double, 3> kTypeProbability = {0.15, 0.25, 0.60};
constexpr std::array<Bump, 3> kSizeByType = {{{0.85, 0.15}, {0.55, 0.15}, {0.25, 0.20}}};
constexpr std::array<double, 3> kPricePremium = {0.15, 0.06, 0.0};
constexpr double kPriceIntercept = 0.08;
constexpr double kPricePerSize = 0.70;
constexpr double kPriceWidth = 0.12;
constexpr Bump kApartmentFloor = {0.4, 0.5};
constexpr Bump kPhase1 = {0.35, 0.35};
constexpr Bump kPhase2 = {0.60, 0.35};
constexpr Bump kGreenfield = {0.45, 0.40};
// Added to every bump cell before normalizing so no category is impossible.
constexpr double kBumpFloor = 0.01;
constexpr std::size_t kApartment = 2;

double position(std::size_t v, std::size_t n) { return (static_cast<double>(v) + 0.5) / static_cast<double>(n); }

std::vector<double> normalized(std::vector<double> w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= total;
  return w;
}

std::vector<double> bump(std::size_t n, Bump b) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (position(i, n) - b.center) / b.width;
    w[i] = std::exp(-0.5 * d * d) + kBumpFloor;
  }
  return normalized(std::move(w));
}

template <std::size_t N>
std::vector<double> fixed_table(const std::array<double, N>& values, std::size_t n, const std::string& name) {
  if (n != N) {
    throw ValidationError("synthetic generator expects " + std::to_string(N) + " categories for '" + name +
                          "', schema has " + std::to_string(n));
  }
  return normalized(std::vector<double>(values.begin(), values.end()));
}

std::vector<double> binary(double p_second) { return {1.0 - p_second, p_second}; }

}  // namespace

PlantedPopulation::PlantedPopulation(Schema schema) : schema_(std::move(schema)) {
  age_ = schema_.index_of("age");
  gender_ = schema_.index_of("gender");
  nationality_ = schema_.index_of("nationality");
  investor_ = schema_.index_of("investor");
  prior_home_ = schema_.index_of("prior_home");
  d1_ = schema_.index_of("distance_phase1");
  d2_ = schema_.index_of("distance_phase2");
  dg_ = schema_.index_of("distance_greenfield");
  price_ = schema_.index_of("sales_price");
  size_ = schema_.index_of("size");
  floor_ = schema_.index_of("floor");
  type_ = schema_.index_of("property_type");
  if (schema_.output_count() != 5) throw ValidationError("synthetic generator expects five output features");

  auto cats = [&](std::size_t f) { return schema_.feature(f).categories(); };
  if (cats(gender_) != 2 || cats(investor_) != 2) {
    throw ValidationError("synthetic generator expects binary gender and investor features");
  }

  type_p_ = fixed_table(kTypeProbability, cats(type_), "property_type");
  for (std::size_t t = 0; t < 3; ++t) {
    size_given_type_.push_back(bump(cats(size_), kSizeByType[t]));
    std::vector<std::vector<double>> by_size;
    for (std::size_t s = 0; s < cats(size_); ++s) {
      const double center = kPriceIntercept + kPricePerSize * position(s, cats(size_)) + kPricePremium[t];
      by_size.push_back(bump(cats(price_), {center, kPriceWidth}));
    }
    price_given_type_size_.push_back(std::move(by_size));

    std::vector<double> floor(cats(floor_), 0.0);
    if (t == kApartment) {
      // Index 0 is "n/a"; apartments spread over the remaining floor bins.
      const auto upper = bump(cats(floor_) - 1, kApartmentFloor);
      std::copy(upper.begin(), upper.end(), floor.begin() + 1);
    } else {
      floor[0] = 1.0;
    }
    floor_given_type_.push_back(std::move(floor));
  }
  d1_p_ = bump(cats(d1_), kPhase1);
  d2_p_ = bump(cats(d2_), kPhase2);
  dg_p_ = bump(cats(dg_), kGreenfield);

  output_tables_.resize(kClasses);
  for (std::size_t k = 0; k < kClasses; ++k) {
    auto& t = output_tables_[k];
    t.resize(schema_.output_count());
    t[age_] = bump(cats(age_), kAgeByClass[k]);
    t[gender_] = binary(kFemaleByClass[k]);
    t[nationality_] = fixed_table(kNationalityByClass[k], cats(nationality_), "nationality");
    t[investor_] = binary(kInvestorByClass[k]);
    t[prior_home_] = fixed_table(kPriorHomeByClass[k], cats(prior_home_), "prior_home");
  }
}

AgentRecord PlantedPopulation::draw_conditionals(SeededRng& rng) const {
  AgentRecord r{std::vector<CategoryIndex>(schema_.size(), 0)};
  const auto t = rng.categorical(type_p_);
  const auto s = rng.categorical(size_given_type_[t]);
  r.values[type_] = static_cast<CategoryIndex>(t);
  r.values[size_] = static_cast<CategoryIndex>(s);
  r.values[price_] = static_cast<CategoryIndex>(rng.categorical(price_given_type_size_[t][s]));
  r.values[floor_] = static_cast<CategoryIndex>(rng.categorical(floor_given_type_[t]));
  r.values[d1_] = static_cast<CategoryIndex>(rng.categorical(d1_p_));
  r.values[d2_] = static_cast<CategoryIndex>(rng.categorical(d2_p_));
  r.values[dg_] = static_cast<CategoryIndex>(rng.categorical(dg_p_));
  return r;
}

void PlantedPopulation::draw_outputs(AgentRecord& record, SeededRng& rng) const {
  const auto posterior = class_posterior(record);
  const auto k = rng.categorical(posterior);
  for (std::size_t f = 0; f < schema_.output_count(); ++f) {
    record.values[f] = static_cast<CategoryIndex>(rng.categorical(output_tables_[k][f]));
  }
}

AgentRecord PlantedPopulation::draw(SeededRng& rng) const {
  auto r = draw_conditionals(rng);
  draw_outputs(r, rng);
  return r;
}

double PlantedPopulation::conditional_probability(const AgentRecord& r) const {
  const auto t = r.values.at(type_);
  const auto s = r.values.at(size_);
  return type_p_.at(t) * size_given_type_[t].at(s) * price_given_type_size_[t][s].at(r.values.at(price_)) *
         floor_given_type_[t].at(r.values.at(floor_)) * d1_p_.at(r.values.at(d1_)) * d2_p_.at(r.values.at(d2_)) *
         dg_p_.at(r.values.at(dg_));
}

PlantedPopulation::ClassWeights PlantedPopulation::class_posterior(const AgentRecord& r) const {
  auto pos = [&](std::size_t f) { return position(r.values.at(f), schema_.feature(f).categories()) - 0.5; };
  const auto t = r.values.at(type_);
  if (t >= 3) throw EncodingError("property_type index out of range");
  ClassWeights logits{};
  for (std::size_t k = 0; k < kClasses; ++k) {
    logits[k] = kBase[k] + kPriceSlope[k] * pos(price_) + kSizeSlope[k] * pos(size_) +
                kFloorSlope[k] * pos(floor_) + kPhase1Slope[k] * pos(d1_) + kPhase2Slope[k] * pos(d2_) +
                kGreenfieldSlope[k] * pos(dg_) + kTypeEffect[t][k];
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - peak);
    total += l;
  }
  for (auto& l : logits) l /= total;
  return logits;
}

const std::vector<double>& PlantedPopulation::output_table(std::size_t klass, std::size_t output_feature) const {
  return output_tables_.at(klass).at(output_feature);
}

DistributionTable PlantedPopulation::conditional_distribution(const AgentRecord& conditionals,
                                                              std::span<const std::size_t> subset) const {
  if (subset.empty()) throw ValidationError("empty output subset");
  std::vector<std::size_t> radices;
  for (std::size_t f : subset) {
    if (f >= schema_.output_count()) {
      throw ValidationError("feature index " + std::to_string(f) + " is not an output feature");
    }
    radices.push_back(schema_.feature(f).categories());
  }
  const auto posterior = class_posterior(conditionals);
  std::vector<double> probs(bin_count(radices), 0.0);
  std::vector<CategoryIndex> tuple(subset.size(), 0);
  for (std::size_t bin = 0; bin < probs.size(); ++bin) {
    // Decode mixed radix, last feature fastest.
    std::size_t rest = bin;
    for (std::size_t i = subset.size(); i-- > 0;) {
      tuple[i] = static_cast<CategoryIndex>(rest % radices[i]);
      rest /= radices[i];
    }
    double p = 0.0;
    for (std::size_t k = 0; k < kClasses; ++k) {
      double term = posterior[k];
      for (std::size_t i = 0; i < subset.size(); ++i) term *= output_tables_[k][subset[i]][tuple[i]];
      p += term;
    }
    probs[bin] = p;
  }
  return DistributionTable(std::vector<std::size_t>(subset.begin(), subset.end()), std::move(radices),
                           std::move(probs));
}

PlantedPopulation::SingleValueMarginals PlantedPopulation::single_value_marginals() const {
  const std::size_t n_out = schema_.output_count();
  const std::size_t n_cond = schema_.conditional_count();
  // joint[g][v][k] = p(c_g = v, class = k)
  std::vector<std::vector<ClassWeights>> joint(n_cond);
  for (std::size_t g = 0; g < n_cond; ++g) joint[g].assign(schema_.feature(n_out + g).categories(), ClassWeights{});

  auto cats = [&](std::size_t f) { return schema_.feature(f).categories(); };
  AgentRecord r{std::vector<CategoryIndex>(schema_.size(), 0)};
  for (std::size_t t = 0; t < cats(type_); ++t) {
    r.values[type_] = static_cast<CategoryIndex>(t);
    for (std::size_t s = 0; s < cats(size_); ++s) {
      r.values[size_] = static_cast<CategoryIndex>(s);
      for (std::size_t p = 0; p < cats(price_); ++p) {
        r.values[price_] = static_cast<CategoryIndex>(p);
        for (std::size_t fl = 0; fl < cats(floor_); ++fl) {
          if (floor_given_type_[t][fl] == 0.0) continue;
          r.values[floor_] = static_cast<CategoryIndex>(fl);
          for (std::size_t a = 0; a < cats(d1_); ++a) {
            r.values[d1_] = static_cast<CategoryIndex>(a);
            for (std::size_t b = 0; b < cats(d2_); ++b) {
              r.values[d2_] = static_cast<CategoryIndex>(b);
              for (std::size_t c = 0; c < cats(dg_); ++c) {
                r.values[dg_] = static_cast<CategoryIndex>(c);
                const double pc = conditional_probability(r);
                const auto post = class_posterior(r);
                for (std::size_t g = 0; g < n_cond; ++g) {
                  auto& slot = joint[g][r.values[n_out + g]];
                  for (std::size_t k = 0; k < kClasses; ++k) slot[k] += pc * post[k];
                }
              }
            }
          }
        }
      }
    }
  }

  SingleValueMarginals m;
  m.value_probability.resize(n_cond);
  m.output_given_value.resize(n_cond);
  for (std::size_t g = 0; g < n_cond; ++g) {
    for (const auto& slot : joint[g]) {
      const double pv = std::accumulate(slot.begin(), slot.end(), 0.0);
      m.value_probability[g].push_back(pv);
      std::vector<std::vector<double>> per_feature(n_out);
      for (std::size_t f = 0; f < n_out; ++f) {
        per_feature[f].assign(cats(f), 0.0);
        if (pv <= 0.0) continue;
        for (std::size_t k = 0; k < kClasses; ++k) {
          for (std::size_t x = 0; x < cats(f); ++x) per_feature[f][x] += slot[k] / pv * output_tables_[k][f][x];
        }
      }
      m.output_given_value[g].push_back(std::move(per_feature));
    }
  }
  return m;
}

std::vector<AgentRecord> generate_synthetic_dataset(const Schema& schema, std::size_t n, SeededRng& rng) {
  const PlantedPopulation population(schema);
  std::vector<AgentRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) records.push_back(population.draw(rng));
  return records;
}

DistributionTable true_conditional_distribution(const Schema& schema, const AgentRecord& conditionals,
                                                const std::vector<std::string>& output_subset) {
  const PlantedPopulation population(schema);
  std::vector<std::size_t> subset;
  for (const auto& name : output_subset) subset.push_back(schema.index_of(name));
  return population.conditional_distribution(conditionals, subset);
}

}  // namespace popsyn
