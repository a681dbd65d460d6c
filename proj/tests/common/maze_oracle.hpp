/*
 * Copyright 2026 The VPO Maze Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdlib>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vpo/maze.hpp"

namespace vpo::testing {

/// Every maze invariant, checked from the rendered glyphs with the reference
/// BFS. Returns human-readable failures.
inline std::vector<std::string> oracle_violations(const Maze& m) {
  std::vector<std::string> bad;
  const auto g = glyph_rows(render_ascii(m));
  if (g.size() != 9) return {"grid is not 9 rows"};
  for (const auto& row : g) {
    if (row.size() != 9) return {"grid row is not 9 wide"};
  }
  auto at = [&](Pos p) { return g[static_cast<size_t>(p.r)][static_cast<size_t>(p.c)]; };
  const bool pair_a = m.start == Pos{0, 0} && m.exit == Pos{8, 8};
  const bool pair_b = m.start == Pos{0, 8} && m.exit == Pos{8, 0};
  if (!pair_a && !pair_b) bad.push_back("start/exit not an allowed corner pair");
  if (at(m.start) != 'S' || at(m.exit) != 'E') bad.push_back("S/E glyphs misplaced");
  if (at({4, 4}) != 'B') bad.push_back("bonus not at (4,4)");
  const std::vector<Pos> corners{{0, 0}, {0, 8}, {8, 0}, {8, 8}};
  int other = 0;
  for (Pos c : corners) {
    if (c != m.start && c != m.exit && (c == m.gold_corner || c == m.diamond_corner)) ++other;
  }
  if (other != 2 || m.gold_corner == m.diamond_corner) bad.push_back("item corners are not the two free corners");

  int ng = 0, nd = 0, nl = 0;
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) {
      const char ch = at({r, c});
      auto manhattan = [&](Pos p) { return std::abs(p.r - r) + std::abs(p.c - c); };
      if (ch == 'G') {
        ++ng;
        if (manhattan(m.gold_corner) > 2) bad.push_back("gold outside its ball");
      } else if (ch == 'D') {
        ++nd;
        if (manhattan(m.diamond_corner) > 2) bad.push_back("diamond outside its ball");
      } else if (ch == 'L') {
        ++nl;
        if (r < 2 || r > 6 || c < 2 || c > 6) bad.push_back("lava outside the interior");
      }
      if (ch != '#' && !bfs_distance(g, m.start.r, m.start.c, r, c, false)) {
        bad.push_back("open cell unreachable from start");
      }
    }
  }
  if (ng != m.n_gold || nd != m.n_diamond || nl != m.n_lava) bad.push_back("item counts disagree with the grid");
  for (int n : {ng, nd, nl}) {
    if (n < 3 || n > 5) bad.push_back("item count outside 3..5");
  }
  if (m.n_cycles < 18 || m.n_cycles > 28) bad.push_back("cycle count outside 18..28");

  auto d = [&](Pos a, Pos b) { return bfs_distance(g, a.r, a.c, b.r, b.c, false).value_or(-1000); };
  const int vg = d(m.start, m.gold_corner) + d(m.gold_corner, m.exit);
  const int vd = d(m.start, m.diamond_corner) + d(m.diamond_corner, m.exit);
  const int vb = d(m.start, m.gold_corner) + d(m.gold_corner, m.diamond_corner) + d(m.diamond_corner, m.exit);
  if (vg != m.via_gold || vd != m.via_diamond || vb != m.via_both) bad.push_back("via_* disagree with reference BFS");
  if (m.budget != std::max(vg, vd) + 7) bad.push_back("budget != max(via_gold, via_diamond) + 7");
  if (!(vb > m.budget)) bad.push_back("via_both <= budget");
  const auto safe = bfs_distance(g, m.start.r, m.start.c, m.exit.r, m.exit.c, true);
  if (!safe || *safe > m.budget) bad.push_back("no lava-free path within budget");
  return bad;
}

}  // namespace vpo::testing
