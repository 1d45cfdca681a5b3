#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fedcf {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for the stream owned by (vehicle, round). Depends only on its three
/// arguments, so streams are independent of execution order.
constexpr std::uint64_t derive_seed(std::uint64_t base_seed,
                                    std::uint64_t vehicle_index,
                                    std::uint64_t round_index) noexcept {
  return mix64(mix64(mix64(base_seed) ^ vehicle_index) ^ round_index);
}

/// Stable 64-bit key of a vehicle id (FNV-1a), the vehicle component of
/// per-vehicle stream seeds.
constexpr std::uint64_t vehicle_stream_key(std::string_view vehicle_id) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : vehicle_id) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound) by rejection; bound > 0. Independent of
  /// the standard library's distribution implementations.
  std::uint64_t uniform_index(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return r % bound;
  }

  /// Standard normal via Box-Muller on 53-bit uniforms.
  double normal();

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fedcf
