#pragma once

// Shared fixtures and independent oracles for the test and acceptance binaries.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "popsyn/cgan.hpp"
#include "popsyn/cvae.hpp"
#include "popsyn/dataset.hpp"
#include "popsyn/mlp.hpp"
#include "popsyn/rng.hpp"
#include "popsyn/schema.hpp"

namespace testing {

using namespace popsyn;

inline FeatureSpec feat(std::string name, FeatureRole role, std::size_t n) {
  FeatureSpec f{std::move(name), role, {}};
  for (std::size_t i = 0; i < n; ++i) f.labels.push_back("v" + std::to_string(i));
  return f;
}

// 3 outputs (2, 3, 4 categories) and 2 conditionals (2, 3).
inline Schema toy_schema() {
  return Schema({feat("o1", FeatureRole::output, 2), feat("o2", FeatureRole::output, 3),
                 feat("o3", FeatureRole::output, 4), feat("c1", FeatureRole::conditional, 2),
                 feat("c2", FeatureRole::conditional, 3)},
                SchemaVariant::custom);
}

inline AgentRecord random_record(const Schema& schema, SeededRng& rng) {
  AgentRecord r;
  for (std::size_t f = 0; f < schema.size(); ++f) {
    r.values.push_back(static_cast<CategoryIndex>(rng.below(schema.feature(f).categories())));
  }
  return r;
}

inline std::vector<AgentRecord> random_records(const Schema& schema, std::size_t n, SeededRng& rng) {
  std::vector<AgentRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_record(schema, rng));
  return out;
}

// Central differences of loss() over every parameter of net.
inline std::vector<double> numeric_gradient(Mlp& net, const std::function<double()>& loss, double h = 1e-5) {
  auto params = net.flat_parameters();
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    net.set_flat_parameters(params);
    const double up = loss();
    params[i] = keep - h;
    net.set_flat_parameters(params);
    const double down = loss();
    params[i] = keep;
    grad[i] = (up - down) / (2 * h);
  }
  net.set_flat_parameters(params);
  return grad;
}

// Relative error with a small absolute floor so that near-zero entries,
// where central differences are dominated by rounding, do not dominate.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i]));
  return worst;
}

struct GradientReport {
  double cvae = 0.0;
  double discriminator = 0.0;
  double generator = 0.0;
  bool discriminator_untouched_by_generator = true;
};

// Toy networks (at most 3 layers, at most 16 units) on the toy schema;
// analytic gradients of the three training objectives versus central
// differences, for one seed.
inline GradientReport gradient_check(std::uint64_t seed) {
  const Schema schema = toy_schema();
  SeededRng rng(seed);
  const std::size_t batch = 2 + rng.below(5);
  const auto records = random_records(schema, batch, rng);
  const auto enc = encode_batch(records, schema);
  const Activation acts[] = {Activation::elu, Activation::sigmoid, Activation::identity};

  GradientReport report;
  {
    CvaeTrainConfig cfg;
    cfg.hidden_layers = 1 + rng.below(2);
    cfg.hidden_units = 4 + rng.below(13);
    cfg.bottleneck_dim = 2 + rng.below(4);
    cfg.hidden_activation = acts[rng.below(3)];
    cfg.beta = 0.5;
    cfg.seed = seed;
    auto model = make_cvae(schema, cfg);
    const Matrix eps = normal_matrix(batch, cfg.bottleneck_dim, rng);
    model.encoder.zero_grad();
    model.decoder.zero_grad();
    cvae_batch_objective(model, enc.outputs, enc.conditionals, eps, true);
    const auto ge = model.encoder.flat_gradients();
    const auto gd = model.decoder.flat_gradients();
    auto loss = [&] { return cvae_batch_objective(model, enc.outputs, enc.conditionals, eps, false); };
    report.cvae = std::max(max_relative_error(ge, numeric_gradient(model.encoder, loss)),
                           max_relative_error(gd, numeric_gradient(model.decoder, loss)));
  }
  {
    CganTrainConfig cfg;
    cfg.hidden_layers = 1 + rng.below(2);
    cfg.hidden_units = 4 + rng.below(13);
    cfg.noise_dim = 2 + rng.below(4);
    cfg.hidden_activation = acts[rng.below(3)];
    cfg.seed = seed;
    auto model = make_cgan(schema, cfg);
    const Matrix z = normal_matrix(batch, cfg.noise_dim, rng);

    model.discriminator.zero_grad();
    discriminator_objective(model, enc.outputs, enc.conditionals, z, true);
    const auto gdisc = model.discriminator.flat_gradients();
    auto dloss = [&] { return discriminator_objective(model, enc.outputs, enc.conditionals, z, false); };
    report.discriminator = max_relative_error(gdisc, numeric_gradient(model.discriminator, dloss));

    model.generator.zero_grad();
    generator_objective(model, enc.conditionals, z, true);
    report.discriminator_untouched_by_generator = model.discriminator.flat_gradients() == gdisc;
    const auto ggen = model.generator.flat_gradients();
    auto gloss = [&] { return generator_objective(model, enc.conditionals, z, false); };
    report.generator = max_relative_error(ggen, numeric_gradient(model.generator, gloss));
  }
  return report;
}

}  // namespace testing
