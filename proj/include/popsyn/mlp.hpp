#pragma once

#include <cstddef>
#include <vector>

#include "popsyn/layer.hpp"
#include "popsyn/matrix.hpp"
#include "popsyn/rng.hpp"

namespace popsyn {

/// Shape of a fully connected network: hidden layers share one activation,
/// the head has its own (with optional softmax blocks).
struct MlpShape {
  std::size_t input_width = 0;
  std::vector<std::size_t> hidden_widths;
  Activation hidden_activation = Activation::elu;
  std::size_t output_width = 0;
  Activation output_activation = Activation::identity;
  std::vector<std::size_t> output_blocks;
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  static Mlp initialized(const MlpShape& shape, SeededRng& rng);

  std::size_t input_width() const;
  std::size_t output_width() const;
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Training forward pass; caches activations for backward().
  Matrix forward(const Matrix& input);

  /// Inference pass, no caching.
  Matrix predict(const Matrix& input) const;

  /// Accumulates parameter gradients and returns d(loss)/d(input).
  /// Throws StateError unless forward() ran since the last backward().
  Matrix backward(const Matrix& grad_output);

  void zero_grad();

  /// Flat copy of all parameters in layer order (weights row-major, then bias).
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);
  std::vector<double> flat_gradients() const;

 private:
  std::vector<DenseLayer> layers_;
};

/// RMSProp hyperparameters. Defaults: lr 0.001, decay 0.9, epsilon 1e-8.
struct RmsPropConfig {
  double learning_rate = 0.001;
  double decay = 0.9;
  double epsilon = 1e-8;
};

/// acc <- decay*acc + (1-decay)*g^2;  p <- p - lr*g/(sqrt(acc)+eps);  g <- 0
void rmsprop_update(const RmsPropConfig& config, std::span<double> params, std::span<double> grads,
                    std::span<double> accumulators);

/// Per-network RMSProp state; accumulators mirror the network's parameters.
class RmsProp {
 public:
  RmsProp() = default;
  RmsProp(const Mlp& network, RmsPropConfig config);

  /// Applies one update from the network's gradient buffers, then zeroes them.
  void step(Mlp& network);

  const RmsPropConfig& config() const { return config_; }
  const std::vector<Matrix>& weight_accumulators() const { return weight_acc_; }
  const std::vector<std::vector<double>>& bias_accumulators() const { return bias_acc_; }

 private:
  RmsPropConfig config_;
  std::vector<Matrix> weight_acc_;
  std::vector<std::vector<double>> bias_acc_;
};

}  // namespace popsyn
