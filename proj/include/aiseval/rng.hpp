#pragma once

#include "aiseval/types.hpp"

#include <cstdint>
#include <random>

namespace aiseval {

using Rng = std::mt19937_64;

/// Purpose tags for derived random streams. Forward AIS chain k and KDE
/// sample k deliberately share `forward` so the two estimators see identical
/// initial draws.
enum class StreamKind : std::uint64_t {
  forward = 1,
  reverse = 2,
  simulate = 3,
  encoder = 4,
  resample = 5,
  data = 6,
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed for the stream identified by (master, example, index, kind). Distinct
/// keys give unrelated streams, and the result does not depend on the order
/// in which streams are created.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t example, std::uint64_t index,
                          StreamKind kind);

inline Rng make_stream(std::uint64_t master, std::uint64_t example, std::uint64_t index,
                       StreamKind kind) {
  return Rng(derive_seed(master, example, index, kind));
}

/// d independent N(0,1) draws. A fresh distribution object per call keeps the
/// number of engine draws a function of d alone.
Vector standard_normal(Rng& rng, int d);

double uniform01(Rng& rng);

}  // namespace aiseval
