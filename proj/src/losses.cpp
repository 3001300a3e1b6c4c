#include "popsyn/losses.hpp"

#include <algorithm>
#include <cmath>

#include "popsyn/error.hpp"

namespace popsyn {

double clamp_probability(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

namespace {

// ln(1 - p) with 1 - p clamped to [1e-12, 1 - 1e-12]. Above one half the
// subtraction is exact, so the upper clamp lands exactly on ln(1e-12).
double log_one_minus(double p) {
  if (p <= 0.5) return std::log1p(-std::max(p, kProbClamp));
  return std::log(std::max(1.0 - p, kProbClamp));
}

}  // namespace

double cross_entropy(std::span<const double> x, std::span<const double> xhat) {
  if (x.size() != xhat.size()) throw ShapeError("cross_entropy: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = clamp_probability(xhat[i]);
    total -= x[i] * std::log(p) + (1.0 - x[i]) * log_one_minus(xhat[i]);
  }
  return total;
}

double kl_divergence(std::span<const double> mu, std::span<const double> variance) {
  if (mu.size() != variance.size()) throw ShapeError("kl_divergence: length mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (!(variance[k] > 0.0)) throw ValidationError("kl_divergence: variance must be positive");
    total += 1.0 + std::log(variance[k]) - mu[k] * mu[k] - variance[k];
  }
  return -0.5 * total;
}

double discriminator_loss(std::span<const double> d_real, std::span<const double> d_fake) {
  if (d_real.size() != d_fake.size() || d_real.empty()) {
    throw ShapeError("discriminator_loss: real and fake batches must be nonempty and equal in size");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    total -= std::log(clamp_probability(d_real[i])) + log_one_minus(d_fake[i]);
  }
  return total / static_cast<double>(d_real.size());
}

double generator_loss(std::span<const double> d_fake, bool non_saturating) {
  if (d_fake.empty()) throw ShapeError("generator_loss: empty batch");
  double total = 0.0;
  for (double d : d_fake) {
    total += non_saturating ? -std::log(clamp_probability(d)) : log_one_minus(d);
  }
  return total / static_cast<double>(d_fake.size());
}

}  // namespace popsyn
