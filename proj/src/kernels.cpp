#include "popsyn/kernels.hpp"

#include <algorithm>
#include <cstdint>

#include "popsyn/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace popsyn::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::int64_t kParallelThreshold = 1 << 16;

void check_affine(const Matrix& input, const Matrix& weights, std::span<const double> bias,
                  const Matrix& out) {
  if (input.cols() != weights.cols() || bias.size() != weights.rows() ||
      out.rows() != input.rows() || out.cols() != weights.rows()) {
    throw ShapeError("affine: input " + input.shape_string() + " incompatible with weights " +
                     weights.shape_string() + " (bias " + std::to_string(bias.size()) + ", out " +
                     out.shape_string() + ")");
  }
}

void check_backprop_input(const Matrix& grad_out, const Matrix& weights, const Matrix& grad_input) {
  if (grad_out.cols() != weights.rows() || grad_input.rows() != grad_out.rows() ||
      grad_input.cols() != weights.cols()) {
    throw ShapeError("backprop_input: grad " + grad_out.shape_string() + " incompatible with weights " +
                     weights.shape_string() + " (grad_input " + grad_input.shape_string() + ")");
  }
}

void check_weight_grad(const Matrix& grad_out, const Matrix& input, const Matrix& grad_weights,
                       std::span<double> grad_bias) {
  if (grad_out.rows() != input.rows() || grad_weights.rows() != grad_out.cols() ||
      grad_weights.cols() != input.cols() || grad_bias.size() != grad_out.cols()) {
    throw ShapeError("accumulate_weight_grad: grad " + grad_out.shape_string() + " and input " +
                     input.shape_string() + " incompatible with grad_weights " +
                     grad_weights.shape_string());
  }
}

}  // namespace

namespace serial {

void affine(const Matrix& input, const Matrix& weights, std::span<const double> bias, Matrix& out) {
  check_affine(input, weights, bias, out);
  for (std::size_t b = 0; b < input.rows(); ++b) {
    for (std::size_t o = 0; o < weights.rows(); ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < input.cols(); ++i) acc += input(b, i) * weights(o, i);
      out(b, o) = acc;
    }
  }
}

void backprop_input(const Matrix& grad_out, const Matrix& weights, Matrix& grad_input) {
  check_backprop_input(grad_out, weights, grad_input);
  for (std::size_t b = 0; b < grad_out.rows(); ++b) {
    for (std::size_t i = 0; i < weights.cols(); ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < weights.rows(); ++o) acc += grad_out(b, o) * weights(o, i);
      grad_input(b, i) = acc;
    }
  }
}

void accumulate_weight_grad(const Matrix& grad_out, const Matrix& input, Matrix& grad_weights,
                            std::span<double> grad_bias) {
  check_weight_grad(grad_out, input, grad_weights, grad_bias);
  for (std::size_t o = 0; o < grad_out.cols(); ++o) {
    for (std::size_t i = 0; i < input.cols(); ++i) {
      double acc = 0.0;
      for (std::size_t b = 0; b < input.rows(); ++b) acc += grad_out(b, o) * input(b, i);
      grad_weights(o, i) += acc;
    }
    double acc = 0.0;
    for (std::size_t b = 0; b < grad_out.rows(); ++b) acc += grad_out(b, o);
    grad_bias[o] += acc;
  }
}

}  // namespace serial

namespace parallel {

void affine(const Matrix& input, const Matrix& weights, std::span<const double> bias, Matrix& out) {
  check_affine(input, weights, bias, out);
  const auto batch = static_cast<std::int64_t>(input.rows());
  const std::size_t n_out = weights.rows();
  const std::size_t n_in = input.cols();
  const double* x = input.data();
  const double* w = weights.data();
  double* y = out.data();
  const std::int64_t work = batch * static_cast<std::int64_t>(n_out * n_in);

#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (std::int64_t b = 0; b < batch; ++b) {
    const double* xr = x + b * static_cast<std::int64_t>(n_in);
    double* yr = y + b * static_cast<std::int64_t>(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* wr = w + o * n_in;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t i = 0; i < n_in; ++i) acc += xr[i] * wr[i];
      yr[o] = acc + bias[o];
    }
  }
}

void backprop_input(const Matrix& grad_out, const Matrix& weights, Matrix& grad_input) {
  check_backprop_input(grad_out, weights, grad_input);
  const auto batch = static_cast<std::int64_t>(grad_out.rows());
  const std::size_t n_out = weights.rows();
  const std::size_t n_in = weights.cols();
  const double* g = grad_out.data();
  const double* w = weights.data();
  double* gi = grad_input.data();
  const std::int64_t work = batch * static_cast<std::int64_t>(n_out * n_in);

#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (std::int64_t b = 0; b < batch; ++b) {
    const double* gr = g + b * static_cast<std::int64_t>(n_out);
    double* dst = gi + b * static_cast<std::int64_t>(n_in);
    std::fill(dst, dst + n_in, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double scale = gr[o];
      if (scale == 0.0) continue;
      const double* wr = w + o * n_in;
#pragma omp simd
      for (std::size_t i = 0; i < n_in; ++i) dst[i] += scale * wr[i];
    }
  }
}

void accumulate_weight_grad(const Matrix& grad_out, const Matrix& input, Matrix& grad_weights,
                            std::span<double> grad_bias) {
  check_weight_grad(grad_out, input, grad_weights, grad_bias);
  const std::size_t batch = grad_out.rows();
  const auto n_out = static_cast<std::int64_t>(grad_out.cols());
  const std::size_t n_in = input.cols();
  const double* g = grad_out.data();
  const double* x = input.data();
  double* gw = grad_weights.data();
  const std::int64_t work = n_out * static_cast<std::int64_t>(batch * n_in);

#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
  for (std::int64_t o = 0; o < n_out; ++o) {
    double* dst = gw + o * static_cast<std::int64_t>(n_in);
    double bias_acc = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const double scale = g[b * static_cast<std::size_t>(n_out) + static_cast<std::size_t>(o)];
      bias_acc += scale;
      if (scale == 0.0) continue;
      const double* xr = x + b * n_in;
#pragma omp simd
      for (std::size_t i = 0; i < n_in; ++i) dst[i] += scale * xr[i];
    }
    grad_bias[static_cast<std::size_t>(o)] += bias_acc;
  }
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace popsyn::kernels
