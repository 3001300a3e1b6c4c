#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "popsyn/dataset.hpp"
#include "popsyn/generative.hpp"
#include "popsyn/layer.hpp"
#include "popsyn/mlp.hpp"
#include "popsyn/rng.hpp"
#include "popsyn/schema.hpp"

namespace popsyn {

/// Defaults are the best configuration found on the housing data:
/// one hidden layer of 50 ELU units, 25 latent dimensions, batch 32,
/// RMSProp at 0.001, beta 0.5, 500 epochs.
struct CvaeTrainConfig {
  std::size_t hidden_layers = 1;
  std::size_t hidden_units = 50;
  std::size_t bottleneck_dim = 25;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;
  double beta = 0.5;
  std::size_t epochs = 500;
  std::uint64_t seed = 1;
  Activation hidden_activation = Activation::elu;
  std::size_t validation_every = 100;
  // With validation data: keep the parameters from the validation point
  // with the lowest pooled marginal SRMSE.
  bool early_stopping = true;

  void validate() const;
};

/// Encoder: (x | c) -> (mu | log-variance), linear head of width 2 * D_z.
/// Decoder: (z | c) -> one softmax block per output feature.
struct CvaeModel {
  Schema schema;
  CvaeTrainConfig config;
  Mlp encoder;
  Mlp decoder;

  std::size_t bottleneck_dim() const { return config.bottleneck_dim; }
};

CvaeModel make_cvae(const Schema& schema, const CvaeTrainConfig& config);

/// z = mu + sigma * epsilon, elementwise.
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> sigma,
                                   std::span<const double> epsilon);

/// Batch mean of CE(x_i, xhat_i) + beta * KL(mu_i, variance_i); rows are samples.
double cvae_loss(const Matrix& x, const Matrix& xhat, const Matrix& mu, const Matrix& variance, double beta);

/// Forward pass with fixed noise; when `accumulate` is set, runs backward and
/// adds d(loss)/d(params) into both networks' gradient buffers.
double cvae_batch_objective(CvaeModel& model, const Matrix& x, const Matrix& c, const Matrix& epsilon,
                            bool accumulate);

struct CvaeTrainResult {
  CvaeModel model;
  TrainTrace trace;
};

/// RMSProp on shuffled mini-batches. When validation records are given, the
/// validation objective and pooled marginal SRMSE are logged every
/// config.validation_every iterations. Throws TrainingError on a
/// non-finite loss and ValidationError on empty data.
CvaeTrainResult train_cvae(std::span<const AgentRecord> train, const Schema& schema, const CvaeTrainConfig& config,
                           std::span<const AgentRecord> validation = {});

/// Samples per_row agents for each conditional record: z ~ N(0, I), decode,
/// then one categorical draw per output block.
std::vector<AgentRecord> sample_cvae(const CvaeModel& model, std::span<const AgentRecord> conditionals,
                                     std::size_t per_row, SeededRng& rng);

/// Decoder output probabilities for given latent rows and conditional rows.
Matrix cvae_decode(const CvaeModel& model, const Matrix& z, const Matrix& c);

}  // namespace popsyn
