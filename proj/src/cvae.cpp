#include "popsyn/cvae.hpp"

#include <cmath>
#include <limits>

#include "popsyn/error.hpp"
#include "popsyn/losses.hpp"
#include "popsyn/metrics.hpp"

namespace popsyn {

void CvaeTrainConfig::validate() const {
  if (hidden_units == 0 || bottleneck_dim == 0 || batch_size == 0 || validation_every == 0) {
    throw ValidationError("CVAE hidden_units, bottleneck_dim, batch_size and validation_every must be positive");
  }
  if (!(learning_rate > 0.0)) throw ValidationError("CVAE learning_rate must be positive");
  if (!(beta >= 0.0)) throw ValidationError("CVAE beta must be nonnegative");
}

CvaeModel make_cvae(const Schema& schema, const CvaeTrainConfig& config) {
  config.validate();
  SeededRng init = SeededRng(config.seed).fork(1);
  const std::vector<std::size_t> hidden(config.hidden_layers, config.hidden_units);
  CvaeModel m{schema, config, {}, {}};
  m.encoder = Mlp::initialized({schema.output_width() + schema.conditional_width(), hidden, config.hidden_activation,
                                2 * config.bottleneck_dim, Activation::identity, {}},
                               init);
  m.decoder = Mlp::initialized({config.bottleneck_dim + schema.conditional_width(), hidden, config.hidden_activation,
                                schema.output_width(), Activation::softmax_blocks, schema.output_blocks()},
                               init);
  return m;
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> sigma,
                                   std::span<const double> epsilon) {
  if (mu.size() != sigma.size() || mu.size() != epsilon.size()) {
    throw ShapeError("reparameterize: mu, sigma and epsilon lengths differ (" + std::to_string(mu.size()) + ", " +
                     std::to_string(sigma.size()) + ", " + std::to_string(epsilon.size()) + ")");
  }
  std::vector<double> z(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) z[k] = mu[k] + sigma[k] * epsilon[k];
  return z;
}

double cvae_loss(const Matrix& x, const Matrix& xhat, const Matrix& mu, const Matrix& variance, double beta) {
  if (x.rows() == 0 || x.rows() != xhat.rows() || x.rows() != mu.rows() || mu.rows() != variance.rows()) {
    throw ShapeError("cvae_loss: batch sizes differ");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    total += cross_entropy(x.row(r), xhat.row(r)) + beta * kl_divergence(mu.row(r), variance.row(r));
  }
  return total / static_cast<double>(x.rows());
}

double cvae_batch_objective(CvaeModel& model, const Matrix& x, const Matrix& c, const Matrix& epsilon,
                            bool accumulate) {
  const std::size_t dz = model.bottleneck_dim();
  const std::size_t batch = x.rows();
  if (epsilon.rows() != batch || epsilon.cols() != dz) {
    throw ShapeError("noise matrix " + epsilon.shape_string() + " does not match batch " + std::to_string(batch) +
                     " x latent " + std::to_string(dz));
  }
  const Matrix head = model.encoder.forward(hconcat(x, c));
  Matrix mu = column_slice(head, 0, dz);
  Matrix logvar = column_slice(head, dz, dz);
  Matrix variance = logvar;
  Matrix sigma = logvar;
  Matrix z(batch, dz);
  for (std::size_t k = 0; k < logvar.size(); ++k) {
    variance.values()[k] = std::exp(logvar.values()[k]);
    sigma.values()[k] = std::exp(0.5 * logvar.values()[k]);
    z.values()[k] = mu.values()[k] + sigma.values()[k] * epsilon.values()[k];
  }
  // A diverged encoder (non-finite head, or a variance that under/overflows)
  // is reported as a non-finite loss so the trainer can name the iteration.
  for (double v : variance.values()) {
    if (!(v > 0.0) || !std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
  }
  const Matrix xhat = model.decoder.forward(hconcat(z, c));
  const double beta = model.config.beta;
  const double loss = cvae_loss(x, xhat, mu, variance, beta);
  if (!accumulate) return loss;

  const double inv_b = 1.0 / static_cast<double>(batch);
  Matrix g_xhat(batch, xhat.cols());
  for (std::size_t k = 0; k < xhat.size(); ++k) {
    const double p = xhat.values()[k];
    const double t = x.values()[k];
    // Clamped entries have zero slope.
    if (p <= kProbClamp || p >= 1.0 - kProbClamp) continue;
    g_xhat.values()[k] = inv_b * (-t / p + (1.0 - t) / (1.0 - p));
  }
  const Matrix g_dec_in = model.decoder.backward(g_xhat);

  Matrix g_head(batch, 2 * dz);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t k = 0; k < dz; ++k) {
      const double gz = g_dec_in(r, k);
      g_head(r, k) = gz + beta * inv_b * mu(r, k);
      g_head(r, dz + k) = gz * epsilon(r, k) * 0.5 * sigma(r, k) - 0.5 * beta * inv_b * (1.0 - variance(r, k));
    }
  }
  model.encoder.backward(g_head);
  return loss;
}

Matrix cvae_decode(const CvaeModel& model, const Matrix& z, const Matrix& c) {
  return model.decoder.predict(hconcat(z, c));
}

std::vector<AgentRecord> sample_cvae(const CvaeModel& model, std::span<const AgentRecord> conditionals,
                                     std::size_t per_row, SeededRng& rng) {
  if (conditionals.empty() || per_row == 0) return {};
  const Matrix c = repeated_conditionals(conditionals, per_row, model.schema);
  const Matrix z = normal_matrix(c.rows(), model.bottleneck_dim(), rng);
  return draw_from_blocks(cvae_decode(model, z, c), conditionals, per_row, model.schema, rng);
}

namespace {

double validation_objective(CvaeModel& model, const EncodedBatch& data, SeededRng& rng) {
  const Matrix eps = normal_matrix(data.outputs.rows(), model.bottleneck_dim(), rng);
  return cvae_batch_objective(model, data.outputs, data.conditionals, eps, false);
}

}  // namespace

CvaeTrainResult train_cvae(std::span<const AgentRecord> train, const Schema& schema, const CvaeTrainConfig& config,
                           std::span<const AgentRecord> validation) {
  if (train.empty()) throw ValidationError("train_cvae needs at least one training record");
  CvaeTrainResult result{make_cvae(schema, config), {}};
  auto& model = result.model;
  const EncodedBatch data = encode_batch(train, schema);
  const EncodedBatch val = validation.empty() ? EncodedBatch{} : encode_batch(validation, schema);

  const SeededRng root(config.seed);
  SeededRng order_rng = root.fork(2);
  SeededRng noise_rng = root.fork(3);
  SeededRng val_rng = root.fork(4);
  RmsPropConfig opt{config.learning_rate, 0.9, 1e-8};
  RmsProp enc_opt(model.encoder, opt);
  RmsProp dec_opt(model.decoder, opt);

  BestCheckpoint best;
  std::size_t iteration = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& idx : shuffled_batches(train.size(), config.batch_size, order_rng)) {
      const Matrix x = gather_rows(data.outputs, idx);
      const Matrix c = gather_rows(data.conditionals, idx);
      const Matrix eps = normal_matrix(idx.size(), config.bottleneck_dim, noise_rng);
      const double loss = cvae_batch_objective(model, x, c, eps, true);
      ++iteration;
      require_finite(loss, "CVAE loss", epoch, iteration);
      enc_opt.step(model.encoder);
      dec_opt.step(model.decoder);
      result.trace.batch_loss.push_back(loss);

      if (!validation.empty() && iteration % config.validation_every == 0) {
        ValidationPoint p;
        p.iteration = iteration;
        p.loss = validation_objective(model, val, val_rng);
        const auto samples = sample_cvae(model, validation, 1, val_rng);
        p.marginal_srmse = pooled_marginal_srmse(samples, validation, schema);
        result.trace.validation.push_back(p);
        if (config.early_stopping) best.offer(p.marginal_srmse, iteration, {&model.encoder, &model.decoder});
      }
    }
  }
  if (best.restore({&model.encoder, &model.decoder})) result.trace.restored_iteration = best.iteration;
  return result;
}

}  // namespace popsyn
