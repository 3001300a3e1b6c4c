#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace popsyn {

/// Seeded pseudo-random stream.
///
/// Bits come from mt19937_64, which the standard pins exactly. The
/// transforms on top (uniform, normal, categorical, shuffle) are written
/// out here rather than taken from <random> distributions, whose outputs
/// differ between standard library implementations.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

  std::uint64_t next_u64() {
    ++draws_;
    return engine_();
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound).
  std::size_t below(std::size_t bound);

  /// Standard normal draw (Box-Muller, both halves used).
  double normal();

  /// Index drawn with probability proportional to weights[i].
  std::size_t categorical(std::span<const double> weights);

  /// Independent stream whose seed is a hash of this seed and a tag.
  SeededRng fork(std::uint64_t tag) const;

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// n independent standard normal draws; n must be positive.
std::vector<double> sample_standard_normal(SeededRng& rng, std::size_t n);

/// splitmix64 finalizer, used for deriving seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace popsyn
