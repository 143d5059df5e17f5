#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace tiered {

using Rng = std::mt19937_64;

// 64-bit FNV-1a over an arbitrary byte span. Also used for config hashing
// and trajectory identity, so the constants must never change.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64(std::string_view text);

// SplitMix64 finalizer; decorrelates structured inputs (small integers,
// hashes that share prefixes) before they seed an engine.
std::uint64_t mix64(std::uint64_t x);

// Derives the seed of a named substream. Every random decision in the
// library draws from a stream obtained here, keyed by (root seed, stream
// name, zero or more integer keys); there is no global RNG. Identical keys
// always yield identical streams, and streams with different names or keys
// are decorrelated, which is what makes runs replayable piecewise.
std::uint64_t substream_seed(std::uint64_t root, std::string_view name,
                             std::span<const std::uint64_t> keys = {});

Rng make_rng(std::uint64_t root, std::string_view name,
             std::span<const std::uint64_t> keys = {});

inline Rng make_rng(std::uint64_t root, std::string_view name,
                    std::initializer_list<std::uint64_t> keys) {
  return make_rng(root, name, std::span<const std::uint64_t>(keys.begin(), keys.size()));
}

// One draw from N(0, sigma^2). Constructs the distribution fresh per call so
// the result depends only on the engine state, never on leftover internal
// distribution state.
double gaussian(Rng& rng, double sigma);

// One draw from U[0, 1).
double uniform01(Rng& rng);

}  // namespace tiered
