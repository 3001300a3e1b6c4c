#include "popsyn/layer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "popsyn/error.hpp"
#include "popsyn/kernels.hpp"

namespace popsyn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::elu: return "elu";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax_blocks: return "softmax_blocks";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& name) {
  for (auto a : {Activation::identity, Activation::elu, Activation::relu, Activation::sigmoid,
                 Activation::softmax_blocks}) {
    if (to_string(a) == name) return a;
  }
  throw ValidationError("unknown activation '" + name + "'");
}

double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_in_place(std::span<double> v) {
  const double peak = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (auto& x : v) {
    x = std::exp(x - peak);
    total += x;
  }
  for (auto& x : v) x /= total;
}

void check_blocks(Activation act, std::span<const std::size_t> blocks, std::size_t width) {
  if (act != Activation::softmax_blocks) return;
  const std::size_t total = std::accumulate(blocks.begin(), blocks.end(), std::size_t{0});
  if (blocks.empty() || total != width) {
    throw ShapeError("softmax block widths sum to " + std::to_string(total) + " but layer width is " +
                     std::to_string(width));
  }
}

}  // namespace

void apply_activation(Activation act, std::span<const std::size_t> blocks, Matrix& values) {
  check_blocks(act, blocks, values.cols());
  switch (act) {
    case Activation::identity:
      return;
    case Activation::elu:
      for (auto& v : values.values()) v = elu(v);
      return;
    case Activation::relu:
      for (auto& v : values.values()) v = std::max(v, 0.0);
      return;
    case Activation::sigmoid:
      for (auto& v : values.values()) v = sigmoid(v);
      return;
    case Activation::softmax_blocks:
      for (std::size_t r = 0; r < values.rows(); ++r) {
        auto row = values.row(r);
        std::size_t offset = 0;
        for (std::size_t width : blocks) {
          softmax_in_place(row.subspan(offset, width));
          offset += width;
        }
      }
      return;
  }
}

DenseLayer::DenseLayer(Matrix w, std::vector<double> b, Activation act, std::vector<std::size_t> blk)
    : weights(std::move(w)),
      bias(std::move(b)),
      activation(act),
      blocks(std::move(blk)),
      grad_weights(weights.rows(), weights.cols()),
      grad_bias(bias.size(), 0.0) {
  if (bias.size() != weights.rows()) {
    throw ShapeError("bias length " + std::to_string(bias.size()) + " does not match weights " +
                     weights.shape_string());
  }
  check_blocks(activation, blocks, weights.rows());
}

DenseLayer DenseLayer::initialized(std::size_t in, std::size_t out, Activation act, SeededRng& rng,
                                   std::vector<std::size_t> blocks) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Matrix w(out, in);
  for (auto& v : w.values()) v = (2.0 * rng.uniform() - 1.0) * limit;
  return DenseLayer(std::move(w), std::vector<double>(out, 0.0), act, std::move(blocks));
}

Matrix linear_forward(const DenseLayer& layer, const Matrix& input) {
  if (input.cols() != layer.in_width()) {
    throw ShapeError("linear_forward: input " + input.shape_string() + " does not match weights " +
                     layer.weights.shape_string());
  }
  Matrix out(input.rows(), layer.out_width());
  kernels::parallel::affine(input, layer.weights, layer.bias, out);
  apply_activation(layer.activation, layer.blocks, out);
  return out;
}

Matrix DenseLayer::forward(const Matrix& input) {
  if (input.cols() != in_width()) {
    throw ShapeError("forward: input " + input.shape_string() + " does not match weights " +
                     weights.shape_string());
  }
  cached_input_ = input;
  cached_preactivation_ = Matrix(input.rows(), out_width());
  kernels::parallel::affine(input, weights, bias, cached_preactivation_);
  cached_output_ = cached_preactivation_;
  apply_activation(activation, blocks, cached_output_);
  has_cache_ = true;
  return cached_output_;
}

Matrix DenseLayer::backward(const Matrix& grad_output) {
  if (!has_cache_) throw StateError("backward called without a preceding forward pass");
  if (grad_output.rows() != cached_output_.rows() || grad_output.cols() != cached_output_.cols()) {
    throw ShapeError("backward: gradient " + grad_output.shape_string() + " does not match output " +
                     cached_output_.shape_string());
  }

  // Gradient with respect to the pre-activation.
  Matrix grad_pre = grad_output;
  const auto& y = cached_output_;
  const auto& z = cached_preactivation_;
  switch (activation) {
    case Activation::identity:
      break;
    case Activation::elu:
      for (std::size_t k = 0; k < grad_pre.size(); ++k) {
        if (z.values()[k] < 0.0) grad_pre.values()[k] *= std::exp(z.values()[k]);
      }
      break;
    case Activation::relu:
      for (std::size_t k = 0; k < grad_pre.size(); ++k) {
        if (z.values()[k] <= 0.0) grad_pre.values()[k] = 0.0;
      }
      break;
    case Activation::sigmoid:
      for (std::size_t k = 0; k < grad_pre.size(); ++k) {
        const double s = y.values()[k];
        grad_pre.values()[k] *= s * (1.0 - s);
      }
      break;
    case Activation::softmax_blocks:
      for (std::size_t r = 0; r < grad_pre.rows(); ++r) {
        auto g = grad_pre.row(r);
        auto s = y.row(r);
        std::size_t offset = 0;
        for (std::size_t width : blocks) {
          double dot = 0.0;
          for (std::size_t j = offset; j < offset + width; ++j) dot += g[j] * s[j];
          for (std::size_t j = offset; j < offset + width; ++j) g[j] = s[j] * (g[j] - dot);
          offset += width;
        }
      }
      break;
  }

  kernels::parallel::accumulate_weight_grad(grad_pre, cached_input_, grad_weights, grad_bias);
  Matrix grad_input(grad_pre.rows(), in_width());
  kernels::parallel::backprop_input(grad_pre, weights, grad_input);
  has_cache_ = false;
  return grad_input;
}

void DenseLayer::zero_grad() {
  grad_weights.fill(0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

}  // namespace popsyn
