#pragma once

// Pieces shared by the CVAE and CGAN trainers and samplers.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popsyn/dataset.hpp"
#include "popsyn/matrix.hpp"
#include "popsyn/mlp.hpp"
#include "popsyn/rng.hpp"
#include "popsyn/schema.hpp"

namespace popsyn {

struct ValidationPoint {
  std::size_t iteration = 0;
  double loss = 0.0;            // CVAE objective on the validation set; CGAN discriminator loss
  double marginal_srmse = 0.0;  // pooled marginal SRMSE of one sample per validation row
};

struct TrainTrace {
  std::vector<double> batch_loss;         // CVAE objective, or CGAN discriminator loss
  std::vector<double> generator_loss;     // CGAN only
  std::vector<double> d_real_mean;        // CGAN only
  std::vector<double> d_fake_mean;        // CGAN only
  std::vector<ValidationPoint> validation;
  std::optional<std::size_t> restored_iteration;  // set when early stopping restored a checkpoint

  /// CSV with one row per batch (iteration starting at 1).
  std::string batch_csv() const;
  /// CSV with one row per validation point.
  std::string validation_csv() const;
};

/// Mini-batch index lists over a reshuffled order of 0..n-1; the last
/// partial batch is kept.
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, SeededRng& rng);

/// Writes one categorical draw per output block of each probability row into
/// the output features of conditionals[i / per_row]. probabilities has
/// conditionals.size() * per_row rows.
std::vector<AgentRecord> draw_from_blocks(const Matrix& probabilities, std::span<const AgentRecord> conditionals,
                                          std::size_t per_row, const Schema& schema, SeededRng& rng);

/// Conditional one-hot rows, each repeated per_row times.
Matrix repeated_conditionals(std::span<const AgentRecord> conditionals, std::size_t per_row, const Schema& schema);

/// Matrix of independent standard normal draws.
Matrix normal_matrix(std::size_t rows, std::size_t cols, SeededRng& rng);

/// Parameters of a group of networks at the lowest validation SRMSE seen.
struct BestCheckpoint {
  double score = std::numeric_limits<double>::infinity();
  std::size_t iteration = 0;
  std::vector<std::vector<double>> parameters;

  void offer(double value, std::size_t at, std::initializer_list<const Mlp*> networks);
  /// Returns false when nothing was ever offered.
  bool restore(std::initializer_list<Mlp*> networks) const;
};

/// Throws TrainingError with context when value is not finite.
void require_finite(double value, const std::string& what, std::size_t epoch, std::size_t iteration);

}  // namespace popsyn
