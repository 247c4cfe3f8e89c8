// Copyright 2026 The moslora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace moslora {

/// Deterministic pseudo-random source with named independent streams.
///
/// The generator is xoshiro256++ seeded through SplitMix64 (the reference
/// construction of Blackman & Vigna). Streams are derived from a root seed
/// and a text label via FNV-1a hashing, so every tensor in a model can draw
/// from its own stream: identical (seed, label) pairs give identical draw
/// sequences across runs. Integer and uniform draws are platform-independent;
/// normal draws additionally depend on the platform's log().
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent child stream. Different labels under the same root seed
  /// produce unrelated sequences; the same label always produces the same one.
  Rng stream(std::string_view label) const;

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 bits of mantissa.
  double uniform01();

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);

  /// Standard normal via the Marsaglia polar method.
  double normal();

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t root_seed_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace moslora
