#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <queue>
#include <vector>

#include "slg/error.hpp"
#include "slg/grid.hpp"

namespace slg {

class PlanError : public Error {
 public:
  using Error::Error;
};

// Path length as (axial moves, diagonal moves); the metric value is
// axial + diagonal * sqrt(2). Comparisons are exact in integer arithmetic.
struct PathCost {
  std::int64_t axial = 0;
  std::int64_t diagonal = 0;

  double value() const { return static_cast<double>(axial) + static_cast<double>(diagonal) * std::sqrt(2.0); }

  friend PathCost operator+(PathCost a, PathCost b) { return {a.axial + b.axial, a.diagonal + b.diagonal}; }
  friend bool operator==(PathCost, PathCost) = default;

  // Sign of (da + db*sqrt2) decided without floating point.
  friend std::strong_ordering operator<=>(PathCost a, PathCost b) {
    const std::int64_t da = a.axial - b.axial, db = a.diagonal - b.diagonal;
    if (da == 0 && db == 0) return std::strong_ordering::equal;
    if (da >= 0 && db >= 0) return std::strong_ordering::greater;
    if (da <= 0 && db <= 0) return std::strong_ordering::less;
    // Opposite signs: compare da^2 with 2 db^2.
    const std::int64_t lhs = da * da, rhs = 2 * db * db;
    if (da > 0) return lhs > rhs ? std::strong_ordering::greater : std::strong_ordering::less;
    return lhs > rhs ? std::strong_ordering::less : std::strong_ordering::greater;
  }
};

// Octile distance between two cells.
inline PathCost octile(Cell a, Cell b) {
  const std::int64_t dr = std::abs(a.row - b.row), dc = std::abs(a.col - b.col);
  return {std::max(dr, dc) - std::min(dr, dc), std::min(dr, dc)};
}

struct Move {
  int dr;
  int dc;
};

inline constexpr std::array<Move, 8> kMoves = {{{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

// 8-connected neighbourhood over free cells. A diagonal step needs both
// adjacent axial cells free, so paths never cut a building corner.
inline bool can_move(const Grid<unsigned char>& free, Cell from, Move m) {
  const Cell to{from.row + m.dr, from.col + m.dc};
  if (to.row < 0 || to.col < 0 || to.row >= free.rows() || to.col >= free.cols() || !free(to.row, to.col))
    return false;
  if (m.dr != 0 && m.dc != 0) return free(from.row + m.dr, from.col) && free(from.row, from.col + m.dc);
  return true;
}

struct Path {
  std::vector<Cell> cells;  // start first, goal last
  PathCost cost;
};

// A* with the octile heuristic (consistent, so the first goal pop is optimal).
inline Path plan_path(const Grid<unsigned char>& free, Cell start, Cell goal) {
  const auto inside = [&](Cell c) { return c.row >= 0 && c.col >= 0 && c.row < free.rows() && c.col < free.cols(); };
  if (!inside(start) || !inside(goal) || !free(start.row, start.col) || !free(goal.row, goal.col))
    throw PlanError("NoPath", "start or goal is not a free cell");
  const int cols = free.cols();
  const auto idx = [cols](Cell c) { return static_cast<std::size_t>(c.row) * cols + c.col; };
  const std::size_t n = free.size();
  constexpr std::uint32_t kNone = 0xffffffffu;
  std::vector<PathCost> g(n);
  std::vector<unsigned char> seen(n, 0), closed(n, 0);
  std::vector<std::uint32_t> parent(n, kNone);

  struct Node {
    PathCost f;
    PathCost g;
    std::uint32_t index;
  };
  // Ties on f prefer larger g (deeper nodes), then the lower index.
  const auto worse = [](const Node& a, const Node& b) {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g < b.g;
    return a.index > b.index;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> open(worse);
  const std::size_t s = idx(start), t = idx(goal);
  seen[s] = 1;
  open.push({octile(start, goal), {}, static_cast<std::uint32_t>(s)});
  while (!open.empty()) {
    const Node cur = open.top();
    open.pop();
    if (closed[cur.index]) continue;
    closed[cur.index] = 1;
    if (cur.index == t) break;
    const Cell c{static_cast<int>(cur.index / cols), static_cast<int>(cur.index % cols)};
    for (const Move m : kMoves) {
      if (!can_move(free, c, m)) continue;
      const Cell nb{c.row + m.dr, c.col + m.dc};
      const std::size_t j = idx(nb);
      if (closed[j]) continue;
      const PathCost step = (m.dr != 0 && m.dc != 0) ? PathCost{0, 1} : PathCost{1, 0};
      const PathCost ng = cur.g + step;
      if (!seen[j] || ng < g[j]) {
        seen[j] = 1;
        g[j] = ng;
        parent[j] = cur.index;
        open.push({ng + octile(nb, goal), ng, static_cast<std::uint32_t>(j)});
      }
    }
  }
  if (!closed[t]) throw PlanError("NoPath", "goal is unreachable from the start cell");
  Path p;
  p.cost = g[t];
  for (std::size_t i = t; i != kNone; i = parent[i])
    p.cells.push_back({static_cast<int>(i / cols), static_cast<int>(i % cols)});
  std::reverse(p.cells.begin(), p.cells.end());
  return p;
}

}  // namespace slg
