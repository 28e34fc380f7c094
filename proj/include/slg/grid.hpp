#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "slg/error.hpp"
#include "slg/geometry.hpp"

namespace slg {

struct Cell {
  int row = 0;
  int col = 0;
  friend constexpr bool operator==(Cell, Cell) = default;
};

// Row r, column c has its center at origin + ((c + 0.5) res, (r + 0.5) res):
// rows grow northward, columns eastward.
struct GridSpec {
  int rows = 0;
  int cols = 0;
  double resolution = 1.0;
  Vec2 origin{};

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  bool contains(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < rows && c.col < cols; }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.row) * cols + c.col; }
  Cell cell(std::size_t index) const {
    return {static_cast<int>(index / cols), static_cast<int>(index % cols)};
  }
  Vec2 center(Cell c) const {
    return {origin.x + (c.col + 0.5) * resolution, origin.y + (c.row + 0.5) * resolution};
  }
  Vec2 center(std::size_t index) const { return center(cell(index)); }

  // Cell containing p; may lie outside the grid.
  Cell locate(Vec2 p) const {
    return {static_cast<int>(std::floor((p.y - origin.y) / resolution)),
            static_cast<int>(std::floor((p.x - origin.x) / resolution))};
  }

  // Smallest grid at `resolution` covering a width x height extent.
  static GridSpec covering(double width, double height, double resolution = 1.0) {
    if (!(resolution > 0.0)) throw GridError("grid resolution must be positive");
    return {static_cast<int>(std::ceil(height / resolution - 1e-9)),
            static_cast<int>(std::ceil(width / resolution - 1e-9)), resolution, {}};
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// Dense row-major 2-D array.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

// Rotate a square grid 90 degrees counter-clockwise in the map frame
// (north up): the value at (r, c) moves to (c, n - 1 - r).
template <class T>
Grid<T> rotate90(const Grid<T>& g) {
  Grid<T> out(g.cols(), g.rows());
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) out(c, g.rows() - 1 - r) = g(r, c);
  return out;
}

}  // namespace slg
