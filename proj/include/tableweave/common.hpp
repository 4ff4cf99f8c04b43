#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace tableweave {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

/// A table whose header structure cannot be represented as a bi-tree.
class StructureError : public Error {
public:
  using Error::Error;
};

// Structural constants shared by the tree, tokenizer and embedding code.
inline constexpr int kTreeDepth = 4;                                 // L
inline constexpr std::array<int, kTreeDepth> kMaxDegree = {32, 32, 64, 256};  // G
inline constexpr int kTreeInputSize = 32 + 32 + 64 + 256;           // sum of G
inline constexpr int kMaxRowCol = kMaxDegree[kTreeDepth - 1];       // G_{L-1}
inline constexpr int kFormatFeatures = 11;                           // F
inline constexpr int kMaxSpanFeature = 8;
inline constexpr int kNumberBuckets = 11;   // values 0..10, 10 = not-a-number
inline constexpr int kNotANumber = 10;
inline constexpr int kMaxCellTokens = 8;
inline constexpr int kMaxTextTokens = 64;
inline constexpr int kInCellPositions = 64;  // I
inline constexpr int kUnboundedDistance = std::numeric_limits<int>::max();

/// Deterministic pseudo-random source whose derived draws are identical on
/// every standard library (std distributions are implementation-defined).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

  int range(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  template <class Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

private:
  std::uint64_t state_;
};

/// Mixes a base seed with a stream index so that per-item seeds are decorrelated.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
  return r.next();
}

}  // namespace tableweave
