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

/// Defaults are the best configuration found on the housing data: one
/// hidden layer of 1,200 units in both networks, batch 64, RMSProp at
/// 0.001, 51 epochs. noise_dim 25 mirrors the CVAE bottleneck.
struct CganTrainConfig {
  std::size_t hidden_layers = 1;
  std::size_t hidden_units = 1200;
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  std::size_t epochs = 51;
  std::size_t noise_dim = 25;
  std::uint64_t seed = 1;
  Activation hidden_activation = Activation::elu;
  bool non_saturating = false;
  std::size_t validation_every = 100;
  // With validation data: keep the parameters from the validation point
  // with the lowest pooled marginal SRMSE.
  bool early_stopping = false;

  void validate() const;
};

/// Generator: (z | c) -> softmax blocks over the output features.
/// Discriminator: (x | c) -> sigmoid score.
struct CganModel {
  Schema schema;
  CganTrainConfig config;
  Mlp generator;
  Mlp discriminator;

  std::size_t noise_dim() const { return config.noise_dim; }
};

CganModel make_cgan(const Schema& schema, const CganTrainConfig& config);

/// Discriminator objective on real (x, c) and fakes G(z | c). With
/// `accumulate`, adds gradients into the discriminator only.
double discriminator_objective(CganModel& model, const Matrix& x, const Matrix& c, const Matrix& z, bool accumulate,
                               double* d_real_mean = nullptr, double* d_fake_mean = nullptr);

/// Generator objective on G(z | c). With `accumulate`, gradients flow
/// through the discriminator into the generator's buffers; the
/// discriminator's buffers are left untouched.
double generator_objective(CganModel& model, const Matrix& c, const Matrix& z, bool accumulate);

struct CganStepStats {
  double discriminator_loss = 0.0;
  double generator_loss = 0.0;
  double d_real_mean = 0.0;
  double d_fake_mean = 0.0;
};

/// One discriminator RMSProp step followed by one generator RMSProp step on
/// the same noise.
CganStepStats cgan_train_step(CganModel& model, RmsProp& d_opt, RmsProp& g_opt, const Matrix& x, const Matrix& c,
                              const Matrix& z);

struct CganTrainResult {
  CganModel model;
  TrainTrace trace;
};

CganTrainResult train_cgan(std::span<const AgentRecord> train, const Schema& schema, const CganTrainConfig& config,
                           std::span<const AgentRecord> validation = {});

std::vector<AgentRecord> sample_cgan(const CganModel& model, std::span<const AgentRecord> conditionals,
                                     std::size_t per_row, SeededRng& rng);

/// Generator output probabilities for given noise and conditional rows.
Matrix cgan_generate(const CganModel& model, const Matrix& z, const Matrix& c);

}  // namespace popsyn
