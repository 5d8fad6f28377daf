#include "pathfinder/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pathfinder {

GridDims grid_dims(long long n) {
  if (n < 1) throw std::invalid_argument("grid_dims: N must be >= 1");
  auto h = static_cast<long long>(std::sqrt(static_cast<double>(n)));
  while (h * h < n) ++h;
  while (h > 1 && (h - 1) * (h - 1) >= n) --h;
  return {static_cast<int>(h), static_cast<int>(h * h - n)};
}

PaddedGrid pad_features(const FeatureMatrix& f) {
  if (f.dim < 1) throw std::invalid_argument("feature dimension must be >= 1");
  if (f.values.size() % f.dim != 0) {
    throw std::invalid_argument("feature buffer is not a whole number of rows");
  }
  const auto n = static_cast<long long>(f.rows());
  const GridDims dims = grid_dims(n);
  PaddedGrid g;
  g.side = dims.side;
  g.pad_count = dims.pad_count;
  g.dim = f.dim;
  g.values = f.values;
  // M <= N always holds, so the padding source lies inside the original rows.
  g.values.insert(g.values.end(), f.values.begin(),
                  f.values.begin() + static_cast<std::ptrdiff_t>(dims.pad_count) * f.dim);
  return g;
}

}  // namespace pathfinder
