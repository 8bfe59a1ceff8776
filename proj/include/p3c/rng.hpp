#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>

namespace p3c::rng {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Child seed for worker / replication / scope `index` under `root`.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return mix64(root ^ index);
}

/// Uniform in the open interval (0, 1) from the top 53 bits.
inline double to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Counter-based standard normal: a pure function of (key, a, b).
inline double counter_normal(std::uint64_t key, std::uint64_t a, std::uint64_t b) {
  const std::uint64_t h1 = mix64(key ^ mix64(a ^ mix64(b)));
  const std::uint64_t h2 = mix64(h1 ^ 0xD1B54A32D192ED03ULL);
  const double u1 = to_unit_open(h1);
  const double u2 = to_unit_open(h2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential stream of standard normals (Box-Muller over mt19937_64).
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = to_unit_open(engine_());
    const double u2 = to_unit_open(engine_());
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  void fill(std::span<double> out) {
    for (double& v : out) v = (*this)();
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_index(std::mt19937_64& eng, std::uint64_t n) {
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t v;
  do {
    v = eng();
  } while (v >= limit);
  return v % n;
}

/// Fisher-Yates with a fixed algorithm so results do not depend on the
/// standard library implementation.
template <class T>
void shuffle(std::span<T> items, std::mt19937_64& eng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_index(eng, i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace p3c::rng
