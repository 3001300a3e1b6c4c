#pragma once

// Dense kernels behind the layer forward/backward passes.
//
// Two implementations with identical contracts:
//   serial::   straightforward loops, the reference the tests check against
//   parallel:: OpenMP over independent output rows, SIMD inner loops
//
// Every output element is produced by exactly one thread with a fixed
// summation order, so parallel results do not depend on the thread count.
// They can differ from serial:: in the last few ulps.

#include <span>

#include "popsyn/matrix.hpp"

namespace popsyn::kernels {

namespace serial {

// out = input * weights^T + bias   (batch x in) (out x in) -> (batch x out)
void affine(const Matrix& input, const Matrix& weights, std::span<const double> bias, Matrix& out);

// grad_input = grad_out * weights   (batch x out) (out x in) -> (batch x in)
void backprop_input(const Matrix& grad_out, const Matrix& weights, Matrix& grad_input);

// grad_weights += grad_out^T * input; grad_bias += column sums of grad_out
void accumulate_weight_grad(const Matrix& grad_out, const Matrix& input, Matrix& grad_weights,
                            std::span<double> grad_bias);

}  // namespace serial

namespace parallel {

void affine(const Matrix& input, const Matrix& weights, std::span<const double> bias, Matrix& out);
void backprop_input(const Matrix& grad_out, const Matrix& weights, Matrix& grad_input);
void accumulate_weight_grad(const Matrix& grad_out, const Matrix& input, Matrix& grad_weights,
                            std::span<double> grad_bias);

}  // namespace parallel

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace popsyn::kernels
