#include "popsyn/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "popsyn/error.hpp"

namespace popsyn {

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].in_width() != layers_[i - 1].out_width()) {
      throw ShapeError("layer " + std::to_string(i) + " expects width " +
                       std::to_string(layers_[i].in_width()) + " but previous layer emits " +
                       std::to_string(layers_[i - 1].out_width()));
    }
  }
}

Mlp Mlp::initialized(const MlpShape& shape, SeededRng& rng) {
  std::vector<DenseLayer> layers;
  std::size_t width = shape.input_width;
  for (std::size_t h : shape.hidden_widths) {
    layers.push_back(DenseLayer::initialized(width, h, shape.hidden_activation, rng));
    width = h;
  }
  layers.push_back(DenseLayer::initialized(width, shape.output_width, shape.output_activation, rng,
                                           shape.output_blocks));
  return Mlp(std::move(layers));
}

std::size_t Mlp::input_width() const { return layers_.empty() ? 0 : layers_.front().in_width(); }
std::size_t Mlp::output_width() const { return layers_.empty() ? 0 : layers_.back().out_width(); }

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

Matrix Mlp::forward(const Matrix& input) {
  Matrix x = input;
  for (auto& layer : layers_) x = layer.forward(x);
  return x;
}

Matrix Mlp::predict(const Matrix& input) const {
  Matrix x = input;
  for (const auto& layer : layers_) x = linear_forward(layer, x);
  return x;
}

Matrix Mlp::backward(const Matrix& grad_output) {
  Matrix g = grad_output;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
  return g;
}

void Mlp::zero_grad() {
  for (auto& l : layers_) l.zero_grad();
}

std::vector<double> Mlp::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    out.insert(out.end(), l.weights.values().begin(), l.weights.values().end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void Mlp::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw ShapeError("expected " + std::to_string(parameter_count()) + " parameters, got " +
                     std::to_string(values.size()));
  }
  std::size_t k = 0;
  for (auto& l : layers_) {
    for (auto& w : l.weights.values()) w = values[k++];
    for (auto& b : l.bias) b = values[k++];
  }
}

std::vector<double> Mlp::flat_gradients() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    out.insert(out.end(), l.grad_weights.values().begin(), l.grad_weights.values().end());
    out.insert(out.end(), l.grad_bias.begin(), l.grad_bias.end());
  }
  return out;
}

void rmsprop_update(const RmsPropConfig& config, std::span<double> params, std::span<double> grads,
                    std::span<double> accumulators) {
  if (params.size() != grads.size() || params.size() != accumulators.size()) {
    throw ShapeError("rmsprop_update: parameter, gradient and accumulator lengths differ");
  }
  const double keep = config.decay;
  const double blend = 1.0 - config.decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    accumulators[i] = keep * accumulators[i] + blend * g * g;
    params[i] -= config.learning_rate * g / (std::sqrt(accumulators[i]) + config.epsilon);
    grads[i] = 0.0;
  }
}

RmsProp::RmsProp(const Mlp& network, RmsPropConfig config) : config_(config) {
  if (!(config.learning_rate > 0.0) || !(config.decay > 0.0 && config.decay < 1.0) ||
      !(config.epsilon > 0.0)) {
    throw ValidationError("RMSProp needs learning_rate > 0, decay in (0,1), epsilon > 0");
  }
  for (const auto& l : network.layers()) {
    weight_acc_.emplace_back(l.weights.rows(), l.weights.cols());
    bias_acc_.emplace_back(l.bias.size(), 0.0);
  }
}

void RmsProp::step(Mlp& network) {
  auto& layers = network.layers();
  if (layers.size() != weight_acc_.size()) {
    throw ShapeError("RMSProp state was built for a network with " + std::to_string(weight_acc_.size()) +
                     " layers, got " + std::to_string(layers.size()));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    rmsprop_update(config_, layers[i].weights.values(), layers[i].grad_weights.values(),
                   weight_acc_[i].values());
    rmsprop_update(config_, layers[i].bias, layers[i].grad_bias, bias_acc_[i]);
  }
}

}  // namespace popsyn
