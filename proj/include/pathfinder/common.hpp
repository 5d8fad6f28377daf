#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pathfinder {

// Error taxonomy. The CLI maps these onto exit codes: DataError -> 4,
// BackendError (and subclasses) -> 3. Precondition violations on in-memory
// values use std::invalid_argument / std::out_of_range.

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network-level failure after the retry budget is spent.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// The backend answered, but with something the engine cannot use.
class MalformedResponse : public BackendError {
 public:
  using BackendError::BackendError;
};

/// SplitMix64 finalizer; used for seed derivation and hash-based textures.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a parent seed and a stream index.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(parent ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// FNV-1a; stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 0xCBF29CE484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seeded PRNG. mt19937_64 output is fixed by the standard; the conversions
/// below avoid std distributions, whose algorithms vary between libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

/// Grid cell; `row` is i, `col` is j.
struct Cell {
  int row = 0;
  int col = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// G x G selection flags, row-major.
class CellMask {
 public:
  CellMask() = default;
  explicit CellMask(int side);

  int side() const { return side_; }
  bool contains(Cell c) const;
  bool test(Cell c) const;
  void set(Cell c);
  int count() const;
  std::vector<Cell> cells() const;
  const std::vector<std::uint8_t>& flags() const { return flags_; }
  static CellMask from_flags(int side, std::vector<std::uint8_t> flags);

  friend bool operator==(const CellMask&, const CellMask&) = default;

 private:
  std::size_t index(Cell c) const;

  int side_ = 0;
  std::vector<std::uint8_t> flags_;
};

/// Pixel span [begin, end) of grid index k when `extent` pixels are split
/// into `side` parts. Boundaries are floor(k * extent / side).
struct Span {
  int begin = 0;
  int end = 0;
};
Span grid_span(int k, int extent, int side);

}  // namespace pathfinder
