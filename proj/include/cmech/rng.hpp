#pragma once

#include <cstdint>

#include "cmech/matrix.hpp"

namespace cmech {

// Small counter-based generator (splitmix64 core). Streams are derived by
// hashing (seed, stream), so parallel work items can draw independent,
// reproducible randomness without shared state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix64(seed + kGamma)) {}

  static Rng keyed(std::uint64_t seed, std::uint64_t stream) {
    Rng r(seed);
    r.state_ = mix64(r.state_ ^ mix64(stream + kGamma));
    return r;
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix64(state_);
  }

  // Uniform in (0, 1].
  double next_double() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (explicit formulas; no dependence on the
  // implementation-defined std::normal_distribution).
  double next_gaussian();

  Vector gaussian_vector(std::size_t n);

 private:
  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace cmech
