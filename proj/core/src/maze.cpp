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

#include "vpo/maze.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vpo/parallel.hpp"
#include "vpo/rng.hpp"

namespace vpo {

namespace {

constexpr std::array<Pos, 4> kOffsets{Pos{-1, 0}, Pos{1, 0}, Pos{0, -1}, Pos{0, 1}};

template <typename Fn>
void for_each_neighbor(Pos p, Fn&& fn) {
  for (const Pos& d : kOffsets) {
    const Pos q{p.r + d.r, p.c + d.c};
    if (q.in_grid()) fn(q);
  }
}

int open_neighbors(const Maze& maze, Pos p) {
  int n = 0;
  for_each_neighbor(p, [&](Pos q) { n += maze.at(q) != Cell::Wall; });
  return n;
}

int manhattan(Pos a, Pos b) { return std::abs(a.r - b.r) + std::abs(a.c - b.c); }

// Opens `target` and, if it has become an isolated pocket, carves the
// shortest wall path from it to the existing open region.
void open_and_connect(Maze& maze, Pos target) {
  if (maze.at(target) != Cell::Wall) return;
  maze.at(target) = Cell::Empty;
  if (open_neighbors(maze, target) > 0) return;
  std::array<int, kMazeCells> parent;
  parent.fill(-2);
  std::deque<Pos> queue{target};
  parent[static_cast<size_t>(target.index())] = -1;
  while (!queue.empty()) {
    const Pos p = queue.front();
    queue.pop_front();
    if (!(p == target) && maze.at(p) != Cell::Wall) {
      for (int i = parent[static_cast<size_t>(p.index())]; i >= 0 && i != target.index();
           i = parent[static_cast<size_t>(i)]) {
        maze.grid[static_cast<size_t>(i)] = Cell::Empty;
      }
      return;
    }
    for_each_neighbor(p, [&](Pos q) {
      if (parent[static_cast<size_t>(q.index())] == -2) {
        parent[static_cast<size_t>(q.index())] = p.index();
        queue.push_back(q);
      }
    });
  }
}

// Picks `n` distinct cells from `pool` (order-preserving candidates).
std::vector<Pos> pick(Rng& rng, std::vector<Pos> pool, int n) {
  for (int i = 0; i < n; ++i) {
    const auto j = static_cast<size_t>(i) + rng.below(pool.size() - static_cast<size_t>(i));
    std::swap(pool[static_cast<size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<size_t>(n));
  return pool;
}

std::vector<Pos> empty_cells_where(const Maze& maze, auto&& pred) {
  std::vector<Pos> out;
  for (int i = 0; i < kMazeCells; ++i) {
    const Pos p = Pos::from_index(i);
    if (maze.at(p) == Cell::Empty && pred(p)) out.push_back(p);
  }
  return out;
}

int dist_or_unreachable(const DistanceMap& d, Pos p) { return d[static_cast<size_t>(p.index())]; }

}  // namespace

char glyph(Cell cell) {
  switch (cell) {
    case Cell::Empty: return '.';
    case Cell::Wall: return '#';
    case Cell::Start: return 'S';
    case Cell::Exit: return 'E';
    case Cell::Gold: return 'G';
    case Cell::Diamond: return 'D';
    case Cell::Lava: return 'L';
    case Cell::Bonus: return 'B';
  }
  return '?';
}

std::optional<Cell> cell_from_glyph(char g) {
  switch (g) {
    case '.': return Cell::Empty;
    case '#': return Cell::Wall;
    case 'S': return Cell::Start;
    case 'E': return Cell::Exit;
    case 'G': return Cell::Gold;
    case 'D': return Cell::Diamond;
    case 'L': return Cell::Lava;
    case 'B': return Cell::Bonus;
    default: return std::nullopt;
  }
}

const char* move_name(Move m) {
  switch (m) {
    case Move::Up: return "UP";
    case Move::Down: return "DOWN";
    case Move::Left: return "LEFT";
    case Move::Right: return "RIGHT";
  }
  return "?";
}

std::optional<Move> move_from_name(std::string_view name) {
  for (Move m : kMoves) {
    if (name == move_name(m)) return m;
  }
  return std::nullopt;
}

std::string moves_to_string(std::span<const Move> moves) {
  std::string out;
  for (Move m : moves) {
    if (!out.empty()) out += ' ';
    out += move_name(m);
  }
  return out;
}

std::vector<Move> moves_from_string(std::string_view text) {
  std::vector<Move> out;
  std::istringstream in{std::string(text)};
  std::string token;
  while (in >> token) {
    auto m = move_from_name(token);
    if (!m) throw std::invalid_argument("unknown move '" + token + "'");
    out.push_back(*m);
  }
  return out;
}

const char* reject_reason_name(RejectReason reason) {
  switch (reason) {
    case RejectReason::ViaBothWithinBudget: return "via_both";
    case RejectReason::NoLavaFreePath: return "lava_path";
    case RejectReason::ItemPlacement: return "item_placement";
  }
  return "?";
}

std::optional<Rejection> screen_budget(int via_both, int budget) {
  if (via_both > budget) return std::nullopt;
  return Rejection{RejectReason::ViaBothWithinBudget,
                   "via_both=" + std::to_string(via_both) + " <= budget=" + std::to_string(budget)};
}

DistanceMap distance_map(const Maze& maze, Pos from, bool avoid_lava) {
  DistanceMap dist;
  dist.fill(kUnreachable);
  auto blocked = [&](Pos p) {
    const Cell c = maze.at(p);
    return c == Cell::Wall || (avoid_lava && c == Cell::Lava);
  };
  if (!from.in_grid() || blocked(from)) return dist;
  std::array<Pos, kMazeCells> queue;
  size_t head = 0;
  size_t tail = 0;
  queue[tail++] = from;
  dist[static_cast<size_t>(from.index())] = 0;
  while (head < tail) {
    const Pos p = queue[head++];
    const int next = dist[static_cast<size_t>(p.index())] + 1;
    for_each_neighbor(p, [&](Pos q) {
      auto& dq = dist[static_cast<size_t>(q.index())];
      if (dq == kUnreachable && !blocked(q)) {
        dq = next;
        queue[tail++] = q;
      }
    });
  }
  return dist;
}

std::optional<int> shortest_path_len(const Maze& maze, Pos from, Pos to, bool avoid_lava) {
  if (!to.in_grid()) return std::nullopt;
  const int d = dist_or_unreachable(distance_map(maze, from, avoid_lava), to);
  if (d == kUnreachable) return std::nullopt;
  return d;
}

GenerateResult generate_maze(uint64_t seed, const GenParams& params) {
  Rng rng(derive_stream(seed, "maze"));
  Maze maze;
  maze.seed = seed;
  maze.grid.fill(Cell::Wall);

  // Randomized Prim over cells: a frontier wall is carved iff it touches
  // exactly one open cell, which keeps the open region a tree.
  std::vector<Pos> frontier;
  std::bitset<kMazeCells> in_frontier;
  auto carve = [&](Pos p) {
    maze.at(p) = Cell::Empty;
    for_each_neighbor(p, [&](Pos q) {
      if (maze.at(q) == Cell::Wall && !in_frontier[static_cast<size_t>(q.index())]) {
        in_frontier.set(static_cast<size_t>(q.index()));
        frontier.push_back(q);
      }
    });
  };
  carve(Pos::from_index(static_cast<int>(rng.below(kMazeCells))));
  while (!frontier.empty()) {
    const auto i = rng.below(frontier.size());
    const Pos p = frontier[i];
    frontier[i] = frontier.back();
    frontier.pop_back();
    in_frontier.reset(static_cast<size_t>(p.index()));
    if (maze.at(p) == Cell::Wall && open_neighbors(maze, p) == 1) carve(p);
  }

  maze.n_cycles = rng.uniform_int(params.cycles_min, params.cycles_max);
  for (int k = 0; k < maze.n_cycles; ++k) {
    std::vector<Pos> sites;
    for (int i = 0; i < kMazeCells; ++i) {
      const Pos p = Pos::from_index(i);
      if (maze.at(p) == Cell::Wall && open_neighbors(maze, p) >= 2) sites.push_back(p);
    }
    if (sites.empty()) break;
    maze.at(sites[rng.below(sites.size())]) = Cell::Empty;
  }

  constexpr int kLast = kMazeSize - 1;
  const std::array<Pos, 4> corners{Pos{0, 0}, Pos{kLast, kLast}, Pos{0, kLast}, Pos{kLast, 0}};
  const bool main_diagonal = rng.below(2) == 0;
  maze.start = main_diagonal ? corners[0] : corners[2];
  maze.exit = main_diagonal ? corners[1] : corners[3];
  const Pos other_a = main_diagonal ? corners[2] : corners[0];
  const Pos other_b = main_diagonal ? corners[3] : corners[1];
  const bool gold_first = rng.below(2) == 0;
  maze.gold_corner = gold_first ? other_a : other_b;
  maze.diamond_corner = gold_first ? other_b : other_a;
  const Pos bonus{kMazeSize / 2, kMazeSize / 2};
  for (Pos p : {maze.start, maze.exit, maze.gold_corner, maze.diamond_corner, bonus}) {
    open_and_connect(maze, p);
  }
  maze.at(maze.start) = Cell::Start;
  maze.at(maze.exit) = Cell::Exit;
  maze.at(bonus) = Cell::Bonus;

  const DistanceMap from_start = distance_map(maze, maze.start);
  const DistanceMap from_exit = distance_map(maze, maze.exit);
  const DistanceMap from_gold = distance_map(maze, maze.gold_corner);
  const int s_gold = dist_or_unreachable(from_start, maze.gold_corner);
  const int s_diam = dist_or_unreachable(from_start, maze.diamond_corner);
  const int gold_e = dist_or_unreachable(from_exit, maze.gold_corner);
  const int diam_e = dist_or_unreachable(from_exit, maze.diamond_corner);
  const int gold_diam = dist_or_unreachable(from_gold, maze.diamond_corner);
  maze.via_gold = s_gold + gold_e;
  maze.via_diamond = s_diam + diam_e;
  maze.via_both = s_gold + gold_diam + diam_e;
  maze.budget = budget_for(maze.via_gold, maze.via_diamond, params.budget_slack);
  if (auto rejected = screen_budget(maze.via_both, maze.budget)) return *std::move(rejected);

  auto place = [&](Cell kind, int n, std::vector<Pos> pool) -> std::optional<Rejection> {
    if (static_cast<int>(pool.size()) < n) {
      return Rejection{RejectReason::ItemPlacement,
                       std::string("need ") + std::to_string(n) + " '" + glyph(kind) + "' cells, " +
                           std::to_string(pool.size()) + " free"};
    }
    for (Pos p : pick(rng, std::move(pool), n)) maze.at(p) = kind;
    return std::nullopt;
  };
  auto ball = [&](Pos centre) {
    return empty_cells_where(maze, [&](Pos p) { return manhattan(p, centre) <= params.item_radius; });
  };
  maze.n_gold = rng.uniform_int(params.items_min, params.items_max);
  if (auto r = place(Cell::Gold, maze.n_gold, ball(maze.gold_corner))) return *std::move(r);
  maze.n_diamond = rng.uniform_int(params.items_min, params.items_max);
  if (auto r = place(Cell::Diamond, maze.n_diamond, ball(maze.diamond_corner))) return *std::move(r);
  maze.n_lava = rng.uniform_int(params.lava_min, params.lava_max);
  auto interior = empty_cells_where(maze, [&](Pos p) {
    return p.r >= params.interior_lo && p.r <= params.interior_hi && p.c >= params.interior_lo &&
           p.c <= params.interior_hi;
  });
  if (auto r = place(Cell::Lava, maze.n_lava, std::move(interior))) return *std::move(r);

  const auto safe = shortest_path_len(maze, maze.start, maze.exit, /*avoid_lava=*/true);
  if (!safe || *safe > maze.budget) {
    return Rejection{RejectReason::NoLavaFreePath,
                     safe ? "lava-free path " + std::to_string(*safe) + " > budget " +
                                std::to_string(maze.budget)
                          : std::string("no lava-free path")};
  }
  return maze;
}

std::vector<std::string> validate_maze(const Maze& maze, const GenParams& params) {
  std::vector<std::string> errors;
  auto fail = [&](std::string msg) { errors.push_back(std::move(msg)); };
  constexpr int kLast = kMazeSize - 1;

  const bool diag_a = maze.start == Pos{0, 0} && maze.exit == Pos{kLast, kLast};
  const bool diag_b = maze.start == Pos{0, kLast} && maze.exit == Pos{kLast, 0};
  if (!diag_a && !diag_b) fail("start/exit are not an allowed corner pair");
  const std::array<Pos, 4> corners{Pos{0, 0}, Pos{kLast, kLast}, Pos{0, kLast}, Pos{kLast, 0}};
  auto is_corner = [&](Pos p) { return std::find(corners.begin(), corners.end(), p) != corners.end(); };
  if (!is_corner(maze.gold_corner) || !is_corner(maze.diamond_corner) ||
      maze.gold_corner == maze.diamond_corner || maze.gold_corner == maze.start ||
      maze.gold_corner == maze.exit || maze.diamond_corner == maze.start ||
      maze.diamond_corner == maze.exit) {
    fail("gold/diamond corners must be the two remaining corners");
  }
  if (maze.at(maze.start) != Cell::Start) fail("start cell glyph");
  if (maze.at(maze.exit) != Cell::Exit) fail("exit cell glyph");
  if (maze.at({kMazeSize / 2, kMazeSize / 2}) != Cell::Bonus) fail("bonus tile missing at centre");

  int gold = 0, diamond = 0, lava = 0, starts = 0, exits = 0, bonus = 0;
  for (int i = 0; i < kMazeCells; ++i) {
    const Pos p = Pos::from_index(i);
    switch (maze.at(p)) {
      case Cell::Gold:
        ++gold;
        if (manhattan(p, maze.gold_corner) > params.item_radius) fail("gold outside corner ball");
        break;
      case Cell::Diamond:
        ++diamond;
        if (manhattan(p, maze.diamond_corner) > params.item_radius) fail("diamond outside corner ball");
        break;
      case Cell::Lava:
        ++lava;
        if (p.r < params.interior_lo || p.r > params.interior_hi || p.c < params.interior_lo ||
            p.c > params.interior_hi) {
          fail("lava outside interior");
        }
        break;
      case Cell::Start: ++starts; break;
      case Cell::Exit: ++exits; break;
      case Cell::Bonus: ++bonus; break;
      default: break;
    }
  }
  if (starts != 1 || exits != 1 || bonus != 1) fail("expected exactly one S, E and B");
  if (gold != maze.n_gold) fail("n_gold does not match grid");
  if (diamond != maze.n_diamond) fail("n_diamond does not match grid");
  if (lava != maze.n_lava) fail("n_lava does not match grid");
  auto in_range = [](int v, int lo, int hi) { return v >= lo && v <= hi; };
  if (!in_range(maze.n_gold, params.items_min, params.items_max)) fail("n_gold out of range");
  if (!in_range(maze.n_diamond, params.items_min, params.items_max)) fail("n_diamond out of range");
  if (!in_range(maze.n_lava, params.lava_min, params.lava_max)) fail("n_lava out of range");
  if (maze.n_cycles != 0 && !in_range(maze.n_cycles, params.cycles_min, params.cycles_max)) {
    fail("n_cycles out of range");
  }

  const DistanceMap from_start = distance_map(maze, maze.start);
  for (int i = 0; i < kMazeCells; ++i) {
    if (maze.grid[static_cast<size_t>(i)] != Cell::Wall && from_start[static_cast<size_t>(i)] == kUnreachable) {
      fail("open cell unreachable from start");
      break;
    }
  }
  auto d = [&](Pos a, Pos b) { return shortest_path_len(maze, a, b).value_or(kUnreachable); };
  const int via_gold = d(maze.start, maze.gold_corner) + d(maze.gold_corner, maze.exit);
  const int via_diamond = d(maze.start, maze.diamond_corner) + d(maze.diamond_corner, maze.exit);
  const int via_both =
      d(maze.start, maze.gold_corner) + d(maze.gold_corner, maze.diamond_corner) + d(maze.diamond_corner, maze.exit);
  if (via_gold != maze.via_gold) fail("via_gold does not match BFS");
  if (via_diamond != maze.via_diamond) fail("via_diamond does not match BFS");
  if (via_both != maze.via_both) fail("via_both does not match BFS");
  if (maze.budget != budget_for(via_gold, via_diamond, params.budget_slack)) fail("budget != max(via)+slack");
  if (screen_budget(via_both, maze.budget)) fail("via_both <= budget");
  const auto safe = shortest_path_len(maze, maze.start, maze.exit, true);
  if (!safe || *safe > maze.budget) fail("no lava-free path within budget");
  return errors;
}

std::vector<Maze> accepted_mazes(uint64_t first_seed, int count, const GenParams& params, int max_scan,
                                 int threads) {
  if (count <= 0) throw std::invalid_argument("split size must be positive");
  if (max_scan <= 0) max_scan = 100 * count + 1000;
  std::vector<Maze> out;
  out.reserve(static_cast<size_t>(count));
  // Generate in fixed-size chunks so the accepted prefix is independent of
  // the thread count.
  constexpr int kChunk = 256;
  for (int offset = 0; offset < max_scan && static_cast<int>(out.size()) < count; offset += kChunk) {
    const int n = std::min(kChunk, max_scan - offset);
    std::vector<std::optional<Maze>> chunk(static_cast<size_t>(n));
    parallel_for(n, threads, [&](int i) {
      auto result = generate_maze(first_seed + static_cast<uint64_t>(offset + i), params);
      if (auto* m = std::get_if<Maze>(&result)) chunk[static_cast<size_t>(i)] = std::move(*m);
    });
    for (auto& m : chunk) {
      if (m && static_cast<int>(out.size()) < count) out.push_back(std::move(*m));
    }
  }
  if (static_cast<int>(out.size()) < count) {
    throw std::runtime_error("seed scan exhausted: " + std::to_string(out.size()) + " of " +
                             std::to_string(count) + " mazes accepted in " + std::to_string(max_scan) +
                             " seeds from " + std::to_string(first_seed));
  }
  return out;
}

Splits make_splits(int train_n, int test_n, const GenParams& params, int threads) {
  Splits splits{accepted_mazes(kTrainSeedBase, train_n, params, 0, threads),
                accepted_mazes(kTestSeedBase, test_n, params, 0, threads)};
  for (const Maze& a : splits.test) {
    for (const Maze& b : splits.train) {
      if (a.grid == b.grid) {
        throw std::runtime_error("train/test overlap: seeds " + std::to_string(b.seed) + " and " +
                                 std::to_string(a.seed) + " produce the same grid");
      }
    }
  }
  return splits;
}

Walker::Walker(const Maze& maze) : maze_(&maze), position_(maze.start) {
  trajectory_.visited.push_back(position_);
  touched_.set(static_cast<size_t>(position_.index()));
}

bool Walker::apply(Move m) {
  if (done()) return false;
  const Pos next = step(position_, m);
  if (maze_->open(next)) position_ = next;
  trajectory_.moves.push_back(m);
  trajectory_.visited.push_back(position_);
  ++trajectory_.steps_used;
  if (position_ == maze_->exit) {
    trajectory_.reached_exit = true;
    return true;
  }
  const auto idx = static_cast<size_t>(position_.index());
  if (!touched_[idx]) {
    touched_.set(idx);
    switch (maze_->at(position_)) {
      case Cell::Gold: ++trajectory_.gold_collected; break;
      case Cell::Diamond: ++trajectory_.diamonds_collected; break;
      case Cell::Lava: ++trajectory_.lava_stepped; break;
      default: break;
    }
  }
  return true;
}

Trajectory simulate(const Maze& maze, std::span<const Move> moves) {
  Walker walker(maze);
  for (Move m : moves) {
    if (!walker.apply(m)) break;
  }
  return std::move(walker).take();
}

RewardVector reward_vector(const Maze& maze, const Trajectory& t) {
  if (!t.reached_exit) return {0.0, 0.0, 0.0, 0.0};
  auto frac = [](int n, int total) { return total > 0 ? static_cast<double>(n) / total : 0.0; };
  return {1.0, frac(t.gold_collected, maze.n_gold), frac(t.diamonds_collected, maze.n_diamond),
          maze.n_lava > 0 ? 1.0 - frac(t.lava_stepped, maze.n_lava) : 1.0};
}

MazeParseError::MazeParseError(const std::string& what, int row, int col)
    : std::runtime_error(row >= 0 ? what + " (row " + std::to_string(row) +
                                        (col >= 0 ? ", column " + std::to_string(col) : std::string()) + ")"
                                  : what),
      row_(row),
      col_(col) {}

std::string render_ascii(const Maze& maze) {
  std::string out;
  out.reserve(kMazeCells * 2);
  for (int r = 0; r < kMazeSize; ++r) {
    for (int c = 0; c < kMazeSize; ++c) {
      if (c > 0) out += ' ';
      out += glyph(maze.at({r, c}));
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> grid_lines(std::string_view text, size_t* consumed) {
  std::vector<std::string> lines;
  size_t pos = 0;
  while (pos < text.size() && lines.size() < static_cast<size_t>(kMazeSize) + 1) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank && lines.empty()) {
      pos = end + 1;
      continue;
    }
    if (blank || line.front() == '{') break;
    lines.push_back(std::move(line));
    pos = end + 1;
  }
  if (consumed) *consumed = std::min(pos, text.size());
  return lines;
}

Pos nearest_corner(Pos p) {
  constexpr int kLast = kMazeSize - 1;
  return {p.r <= kLast / 2 ? 0 : kLast, p.c <= kLast / 2 ? 0 : kLast};
}

Maze parse_grid(const std::vector<std::string>& lines) {
  if (lines.size() != static_cast<size_t>(kMazeSize)) {
    throw MazeParseError("expected " + std::to_string(kMazeSize) + " grid rows, found " +
                             std::to_string(lines.size()),
                         static_cast<int>(lines.size()));
  }
  Maze maze;
  std::vector<Pos> starts, exits;
  for (int r = 0; r < kMazeSize; ++r) {
    std::istringstream row(lines[static_cast<size_t>(r)]);
    std::string token;
    int c = 0;
    while (row >> token) {
      if (c >= kMazeSize) throw MazeParseError("too many columns", r, c);
      if (token.size() != 1) throw MazeParseError("bad glyph '" + token + "'", r, c);
      auto cell = cell_from_glyph(token[0]);
      if (!cell) throw MazeParseError("unknown glyph '" + token + "'", r, c);
      maze.at({r, c}) = *cell;
      if (*cell == Cell::Start) starts.push_back({r, c});
      if (*cell == Cell::Exit) exits.push_back({r, c});
      switch (*cell) {
        case Cell::Gold: ++maze.n_gold; break;
        case Cell::Diamond: ++maze.n_diamond; break;
        case Cell::Lava: ++maze.n_lava; break;
        default: break;
      }
      ++c;
    }
    if (c != kMazeSize) throw MazeParseError("expected 9 columns, found " + std::to_string(c), r, c);
  }
  if (starts.size() != 1) {
    throw MazeParseError("expected exactly one S, found " + std::to_string(starts.size()),
                         starts.size() > 1 ? starts[1].r : -1, starts.size() > 1 ? starts[1].c : -1);
  }
  if (exits.size() != 1) {
    throw MazeParseError("expected exactly one E, found " + std::to_string(exits.size()),
                         exits.size() > 1 ? exits[1].r : -1, exits.size() > 1 ? exits[1].c : -1);
  }
  maze.start = starts[0];
  maze.exit = exits[0];
  return maze;
}

void derive_metadata(Maze& maze) {
  constexpr int kLast = kMazeSize - 1;
  // The remaining corners; which one is gold is read off the items.
  const Pos a{maze.start.r, kLast - maze.start.c};
  const Pos b{kLast - maze.start.r, maze.start.c};
  maze.gold_corner = a;
  maze.diamond_corner = b;
  for (int i = 0; i < kMazeCells; ++i) {
    const Pos p = Pos::from_index(i);
    if (maze.at(p) == Cell::Gold) {
      const Pos corner = nearest_corner(p);
      if (corner == b) std::swap(maze.gold_corner, maze.diamond_corner);
      break;
    }
  }
  auto d = [&](Pos x, Pos y) { return shortest_path_len(maze, x, y).value_or(kUnreachable); };
  maze.via_gold = d(maze.start, maze.gold_corner) + d(maze.gold_corner, maze.exit);
  maze.via_diamond = d(maze.start, maze.diamond_corner) + d(maze.diamond_corner, maze.exit);
  maze.via_both = d(maze.start, maze.gold_corner) + d(maze.gold_corner, maze.diamond_corner) +
                  d(maze.diamond_corner, maze.exit);
  maze.budget = budget_for(maze.via_gold, maze.via_diamond);
}

nlohmann::json pos_json(Pos p) { return nlohmann::json::array({p.r, p.c}); }

Pos json_pos(const nlohmann::json& j) {
  Pos p{j.at(0).get<int>(), j.at(1).get<int>()};
  if (!p.in_grid()) throw MazeParseError("sidecar corner outside the grid");
  return p;
}

}  // namespace

Maze parse_ascii(std::string_view text) {
  Maze maze = parse_grid(grid_lines(text, nullptr));
  derive_metadata(maze);
  return maze;
}

std::string serialize_maze(const Maze& maze) {
  nlohmann::ordered_json side;
  side["seed"] = maze.seed;
  side["budget"] = maze.budget;
  side["via_gold"] = maze.via_gold;
  side["via_diamond"] = maze.via_diamond;
  side["via_both"] = maze.via_both;
  side["counts"] = {{"gold", maze.n_gold}, {"diamond", maze.n_diamond}, {"lava", maze.n_lava},
                    {"cycles", maze.n_cycles}};
  side["corners"] = {{"start", pos_json(maze.start)},
                     {"exit", pos_json(maze.exit)},
                     {"gold", pos_json(maze.gold_corner)},
                     {"diamond", pos_json(maze.diamond_corner)}};
  return render_ascii(maze) + "\n" + side.dump() + "\n";
}

Maze deserialize_maze(std::string_view text) {
  size_t consumed = 0;
  Maze maze = parse_grid(grid_lines(text, &consumed));
  const auto rest = text.substr(consumed);
  if (rest.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    derive_metadata(maze);
    return maze;
  }
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(rest);
    maze.seed = side.at("seed").get<uint64_t>();
    maze.budget = side.at("budget").get<int>();
    maze.via_gold = side.at("via_gold").get<int>();
    maze.via_diamond = side.at("via_diamond").get<int>();
    maze.via_both = side.at("via_both").get<int>();
    const auto& counts = side.at("counts");
    maze.n_cycles = counts.value("cycles", 0);
    const auto& corners = side.at("corners");
    if (json_pos(corners.at("start")) != maze.start || json_pos(corners.at("exit")) != maze.exit) {
      throw MazeParseError("sidecar start/exit disagree with the grid");
    }
    maze.gold_corner = json_pos(corners.at("gold"));
    maze.diamond_corner = json_pos(corners.at("diamond"));
    if (counts.at("gold").get<int>() != maze.n_gold || counts.at("diamond").get<int>() != maze.n_diamond ||
        counts.at("lava").get<int>() != maze.n_lava) {
      throw MazeParseError("sidecar item counts disagree with the grid");
    }
  } catch (const nlohmann::json::exception& e) {
    throw MazeParseError(std::string("bad sidecar: ") + e.what());
  }
  return maze;
}

}  // namespace vpo
