#include "pathfinder/common.hpp"

#include <algorithm>

namespace pathfinder {

CellMask::CellMask(int side) : side_(side) {
  if (side < 1) throw std::invalid_argument("grid side must be >= 1");
  flags_.assign(static_cast<std::size_t>(side) * side, 0);
}

CellMask CellMask::from_flags(int side, std::vector<std::uint8_t> flags) {
  CellMask mask(side);
  if (flags.size() != mask.flags_.size()) {
    throw std::invalid_argument("mask flag count does not match grid side");
  }
  for (auto& f : flags) f = f ? 1 : 0;
  mask.flags_ = std::move(flags);
  return mask;
}

bool CellMask::contains(Cell c) const {
  return c.row >= 0 && c.col >= 0 && c.row < side_ && c.col < side_;
}

std::size_t CellMask::index(Cell c) const {
  if (!contains(c)) {
    throw std::out_of_range("cell (" + std::to_string(c.row) + "," +
                            std::to_string(c.col) + ") outside " +
                            std::to_string(side_) + "x" +
                            std::to_string(side_) + " grid");
  }
  return static_cast<std::size_t>(c.row) * side_ + c.col;
}

bool CellMask::test(Cell c) const { return flags_[index(c)] != 0; }

void CellMask::set(Cell c) { flags_[index(c)] = 1; }

int CellMask::count() const {
  return static_cast<int>(std::count(flags_.begin(), flags_.end(), 1));
}

std::vector<Cell> CellMask::cells() const {
  std::vector<Cell> out;
  for (int i = 0; i < side_; ++i) {
    for (int j = 0; j < side_; ++j) {
      if (flags_[static_cast<std::size_t>(i) * side_ + j]) out.push_back({i, j});
    }
  }
  return out;
}

Span grid_span(int k, int extent, int side) {
  const auto e = static_cast<long long>(extent);
  return {static_cast<int>(k * e / side), static_cast<int>((k + 1) * e / side)};
}

}  // namespace pathfinder
