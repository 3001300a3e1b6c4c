#include "popsyn/cgan.hpp"

#include "popsyn/error.hpp"
#include "popsyn/losses.hpp"
#include "popsyn/metrics.hpp"

namespace popsyn {

void CganTrainConfig::validate() const {
  if (hidden_units == 0 || batch_size == 0 || noise_dim == 0 || validation_every == 0) {
    throw ValidationError("CGAN hidden_units, batch_size, noise_dim and validation_every must be positive");
  }
  if (!(learning_rate > 0.0)) throw ValidationError("CGAN learning_rate must be positive");
}

CganModel make_cgan(const Schema& schema, const CganTrainConfig& config) {
  config.validate();
  SeededRng init = SeededRng(config.seed).fork(1);
  const std::vector<std::size_t> hidden(config.hidden_layers, config.hidden_units);
  CganModel m{schema, config, {}, {}};
  m.generator = Mlp::initialized({config.noise_dim + schema.conditional_width(), hidden, config.hidden_activation,
                                  schema.output_width(), Activation::softmax_blocks, schema.output_blocks()},
                                 init);
  m.discriminator = Mlp::initialized({schema.output_width() + schema.conditional_width(), hidden,
                                      config.hidden_activation, 1, Activation::sigmoid, {}},
                                     init);
  return m;
}

Matrix cgan_generate(const CganModel& model, const Matrix& z, const Matrix& c) {
  return model.generator.predict(hconcat(z, c));
}

namespace {

// d(mean_i f(D_i))/dD_i for the clamped losses; zero where the clamp is active.
Matrix score_gradient(const Matrix& d, double (*slope)(double), double scale) {
  Matrix g(d.rows(), 1);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const double p = d(i, 0);
    if (p <= kProbClamp || p >= 1.0 - kProbClamp) continue;
    g(i, 0) = scale * slope(p);
  }
  return g;
}

double mean_of(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v;
  return s / static_cast<double>(m.size());
}

}  // namespace

double discriminator_objective(CganModel& model, const Matrix& x, const Matrix& c, const Matrix& z, bool accumulate,
                               double* d_real_mean, double* d_fake_mean) {
  const double inv_b = 1.0 / static_cast<double>(x.rows());
  const Matrix fake = cgan_generate(model, z, c);

  const Matrix d_real = model.discriminator.forward(hconcat(x, c));
  if (accumulate) {
    // -ln D(real)
    model.discriminator.backward(score_gradient(d_real, [](double p) { return -1.0 / p; }, inv_b));
  }
  const Matrix d_fake = model.discriminator.forward(hconcat(fake, c));
  if (accumulate) {
    // -ln(1 - D(fake))
    model.discriminator.backward(score_gradient(d_fake, [](double p) { return 1.0 / (1.0 - p); }, inv_b));
  }
  if (d_real_mean) *d_real_mean = mean_of(d_real);
  if (d_fake_mean) *d_fake_mean = mean_of(d_fake);
  return discriminator_loss(d_real.values(), d_fake.values());
}

double generator_objective(CganModel& model, const Matrix& c, const Matrix& z, bool accumulate) {
  const double inv_b = 1.0 / static_cast<double>(c.rows());
  const std::size_t out_w = model.schema.output_width();
  const Matrix fake = model.generator.forward(hconcat(z, c));
  const Matrix d_fake = model.discriminator.forward(hconcat(fake, c));
  const bool ns = model.config.non_saturating;
  const double loss = generator_loss(d_fake.values(), ns);
  if (!accumulate) return loss;

  const Matrix g_score = ns ? score_gradient(d_fake, [](double p) { return -1.0 / p; }, inv_b)
                            : score_gradient(d_fake, [](double p) { return -1.0 / (1.0 - p); }, inv_b);
  // Backpropagate through D for the input gradient, then restore D's buffers.
  auto saved = model.discriminator.flat_gradients();
  const Matrix g_d_in = model.discriminator.backward(g_score);
  {
    std::size_t k = 0;
    for (auto& layer : model.discriminator.layers()) {
      for (auto& g : layer.grad_weights.values()) g = saved[k++];
      for (auto& g : layer.grad_bias) g = saved[k++];
    }
  }
  model.generator.backward(column_slice(g_d_in, 0, out_w));
  return loss;
}

CganStepStats cgan_train_step(CganModel& model, RmsProp& d_opt, RmsProp& g_opt, const Matrix& x, const Matrix& c,
                              const Matrix& z) {
  CganStepStats s;
  s.discriminator_loss = discriminator_objective(model, x, c, z, true, &s.d_real_mean, &s.d_fake_mean);
  d_opt.step(model.discriminator);
  s.generator_loss = generator_objective(model, c, z, true);
  g_opt.step(model.generator);
  return s;
}

std::vector<AgentRecord> sample_cgan(const CganModel& model, std::span<const AgentRecord> conditionals,
                                     std::size_t per_row, SeededRng& rng) {
  if (conditionals.empty() || per_row == 0) return {};
  const Matrix c = repeated_conditionals(conditionals, per_row, model.schema);
  const Matrix z = normal_matrix(c.rows(), model.noise_dim(), rng);
  return draw_from_blocks(cgan_generate(model, z, c), conditionals, per_row, model.schema, rng);
}

CganTrainResult train_cgan(std::span<const AgentRecord> train, const Schema& schema, const CganTrainConfig& config,
                           std::span<const AgentRecord> validation) {
  if (train.empty()) throw ValidationError("train_cgan needs at least one training record");
  CganTrainResult result{make_cgan(schema, config), {}};
  auto& model = result.model;
  const EncodedBatch data = encode_batch(train, schema);
  const EncodedBatch val = validation.empty() ? EncodedBatch{} : encode_batch(validation, schema);

  const SeededRng root(config.seed);
  SeededRng order_rng = root.fork(2);
  SeededRng noise_rng = root.fork(3);
  SeededRng val_rng = root.fork(4);
  RmsPropConfig opt{config.learning_rate, 0.9, 1e-8};
  RmsProp d_opt(model.discriminator, opt);
  RmsProp g_opt(model.generator, opt);

  auto& trace = result.trace;
  BestCheckpoint best;
  std::size_t iteration = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& idx : shuffled_batches(train.size(), config.batch_size, order_rng)) {
      const Matrix x = gather_rows(data.outputs, idx);
      const Matrix c = gather_rows(data.conditionals, idx);
      const Matrix z = normal_matrix(idx.size(), config.noise_dim, noise_rng);
      const auto s = cgan_train_step(model, d_opt, g_opt, x, c, z);
      ++iteration;
      require_finite(s.discriminator_loss, "CGAN discriminator loss", epoch, iteration);
      require_finite(s.generator_loss, "CGAN generator loss", epoch, iteration);
      trace.batch_loss.push_back(s.discriminator_loss);
      trace.generator_loss.push_back(s.generator_loss);
      trace.d_real_mean.push_back(s.d_real_mean);
      trace.d_fake_mean.push_back(s.d_fake_mean);

      if (!validation.empty() && iteration % config.validation_every == 0) {
        ValidationPoint p;
        p.iteration = iteration;
        const Matrix vz = normal_matrix(val.outputs.rows(), config.noise_dim, val_rng);
        p.loss = discriminator_objective(model, val.outputs, val.conditionals, vz, false);
        const auto samples = sample_cgan(model, validation, 1, val_rng);
        p.marginal_srmse = pooled_marginal_srmse(samples, validation, schema);
        trace.validation.push_back(p);
        if (config.early_stopping) best.offer(p.marginal_srmse, iteration, {&model.generator, &model.discriminator});
      }
    }
  }
  if (best.restore({&model.generator, &model.discriminator})) trace.restored_iteration = best.iteration;
  return result;
}

}  // namespace popsyn
