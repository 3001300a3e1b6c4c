#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "popsyn/matrix.hpp"
#include "popsyn/rng.hpp"

namespace popsyn {

enum class Activation { identity, elu, relu, sigmoid, softmax_blocks };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// ELU with alpha = 1.
double elu(double x);

/// Applies the activation in place. For softmax_blocks, `blocks` lists the
/// widths of consecutive column groups; each group is normalized separately.
void apply_activation(Activation act, std::span<const std::size_t> blocks, Matrix& values);

/// Fully connected layer with an elementwise (or per-block) activation.
///
/// forward() caches its input and pre-activation; backward() consumes that
/// cache, accumulates into grad_weights / grad_bias, and returns the
/// gradient with respect to the layer input.
struct DenseLayer {
  Matrix weights;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::identity;
  std::vector<std::size_t> blocks;  // softmax_blocks only; sums to out width

  Matrix grad_weights;
  std::vector<double> grad_bias;

  DenseLayer() = default;
  DenseLayer(Matrix weights, std::vector<double> bias, Activation activation,
             std::vector<std::size_t> blocks = {});

  /// Glorot-uniform weights in +-sqrt(6 / (in + out)), zero bias.
  static DenseLayer initialized(std::size_t in, std::size_t out, Activation activation, SeededRng& rng,
                                std::vector<std::size_t> blocks = {});

  std::size_t in_width() const { return weights.cols(); }
  std::size_t out_width() const { return weights.rows(); }

  Matrix forward(const Matrix& input);
  Matrix backward(const Matrix& grad_output);
  void zero_grad();
  bool has_cache() const { return has_cache_; }

 private:
  Matrix cached_input_;
  Matrix cached_preactivation_;
  Matrix cached_output_;
  bool has_cache_ = false;
};

/// Stateless forward pass: input * W^T + b, then the activation.
Matrix linear_forward(const DenseLayer& layer, const Matrix& input);

}  // namespace popsyn
