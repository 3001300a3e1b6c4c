#pragma once

#include <span>

namespace popsyn {

/// Probabilities entering a logarithm are clamped into [kProbClamp, 1 - kProbClamp].
inline constexpr double kProbClamp = 1e-12;

double clamp_probability(double p);

/// Element-wise binary cross-entropy summed over all positions:
///   -sum_i [x_i log xhat_i + (1 - x_i) log(1 - xhat_i)]
double cross_entropy(std::span<const double> x, std::span<const double> xhat);

/// Gaussian KL to the standard normal prior, with `variance` the per-dimension
/// variance:  -1/2 sum_k (1 + log var_k - mu_k^2 - var_k)
double kl_divergence(std::span<const double> mu, std::span<const double> variance);

/// Batch mean of -[ln d_real + ln(1 - d_fake)].
double discriminator_loss(std::span<const double> d_real, std::span<const double> d_fake);

/// Batch mean of ln(1 - d_fake) (saturating form), or of -ln d_fake when
/// non_saturating is set.
double generator_loss(std::span<const double> d_fake, bool non_saturating = false);

}  // namespace popsyn
