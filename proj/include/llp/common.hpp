#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace llp {

// Invalid input or configuration. The CLI maps this to exit code 2.
class usage_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A well-formed request that cannot be computed (degenerate pairs,
// exhausted class pools, ...). The CLI maps this to exit code 1.
class compute_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Label : int { negative = -1, positive = 1 };

inline constexpr Label opposite(Label s) {
  return s == Label::positive ? Label::negative : Label::positive;
}

inline constexpr int sign_of(Label s) { return static_cast<int>(s); }

inline Label label_from_int(int v) {
  if (v == 1) return Label::positive;
  if (v == -1) return Label::negative;
  throw usage_error("label must be +1 or -1, got " + std::to_string(v));
}

using Rng = std::mt19937_64;

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for a named pipeline stage: FNV-1a of the stage name folded into the
// top-level seed. Every stage of a run draws from its own stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stage) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(seed ^ mix64(h));
}

inline Rng make_rng(std::uint64_t seed) { return Rng{mix64(seed)}; }

}  // namespace llp
