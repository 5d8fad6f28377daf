#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pathfinder/slide_io.hpp"

namespace pathfinder {

inline constexpr int kDefaultEmbeddingDim = 768;

/// N patch feature vectors of identical dimension, aligned with their
/// spatially sorted patch coordinates.
struct FeatureMatrix {
  int dim = 0;
  std::vector<double> values;  // row-major, rows() * dim
  std::vector<PatchCoord> coords;

  std::size_t rows() const { return dim > 0 ? values.size() / dim : 0; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * dim, static_cast<std::size_t>(dim)};
  }
};

/// Square-grid layout of N rows: side H is the smallest integer with
/// H*H >= N, and M = H*H - N rows of padding.
struct GridDims {
  int side = 0;
  int pad_count = 0;
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// H*H feature rows; the last M rows repeat the first M.
struct PaddedGrid {
  int side = 0;
  int pad_count = 0;
  int dim = 0;
  std::vector<double> values;  // row-major, side * side * dim

  std::size_t rows() const { return static_cast<std::size_t>(side) * side; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * dim, static_cast<std::size_t>(dim)};
  }
  friend bool operator==(const PaddedGrid&, const PaddedGrid&) = default;
};

GridDims grid_dims(long long n);
PaddedGrid pad_features(const FeatureMatrix& features);

}  // namespace pathfinder
