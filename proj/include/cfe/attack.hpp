#pragma once

// Ciphertext-only jigsaw attack on MB scrambling: an MGC-lite greedy solver.
// It only tries to undo mb_perm; SB-level transforms are treated as unknown,
// so a reference for scoring should carry the same SB transforms (encrypt
// with an identity MB permutation) when the goal is to isolate scrambling.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "cfe/error.hpp"
#include "cfe/geometry.hpp"

namespace cfe {

enum class Side { Right, Down };

// SSD between the two abutting 1-pixel borders, all channels. Blocks are
// h*w*3 interleaved buffers of equal dims.
inline std::uint64_t pairwise_cost(const std::vector<std::uint8_t>& a,
                                   const std::vector<std::uint8_t>& b, int h,
                                   int w, Side side) {
  if (a.size() != b.size() || a.size() != static_cast<std::size_t>(h) * w * kChannels)
    throw DimensionError("pairwise_cost: block dims mismatch");
  std::uint64_t acc = 0;
  if (side == Side::Right) {
    for (int y = 0; y < h; ++y)
      for (int c = 0; c < kChannels; ++c) {
        const int d = static_cast<int>(a[(static_cast<std::size_t>(y) * w + w - 1) * kChannels + c]) -
                      static_cast<int>(b[(static_cast<std::size_t>(y) * w) * kChannels + c]);
        acc += static_cast<std::uint64_t>(d) * d;
      }
  } else {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < kChannels; ++c) {
        const int d = static_cast<int>(a[(static_cast<std::size_t>(h - 1) * w + x) * kChannels + c]) -
                      static_cast<int>(b[static_cast<std::size_t>(x) * kChannels + c]);
        acc += static_cast<std::uint64_t>(d) * d;
      }
  }
  return acc;
}

namespace detail {

struct CostTables {
  int n = 0;
  std::vector<std::uint64_t> right, down;  // [i*n+j]: j right of / below i

  std::uint64_t r(int i, int j) const { return right[static_cast<std::size_t>(i) * n + j]; }
  std::uint64_t d(int i, int j) const { return down[static_cast<std::size_t>(i) * n + j]; }
};

inline CostTables cost_tables(const std::vector<std::vector<std::uint8_t>>& blocks,
                              int h, int w) {
  CostTables t;
  t.n = static_cast<int>(blocks.size());
  t.right.assign(static_cast<std::size_t>(t.n) * t.n, 0);
  t.down.assign(static_cast<std::size_t>(t.n) * t.n, 0);
  for (int i = 0; i < t.n; ++i)
    for (int j = 0; j < t.n; ++j) {
      if (i == j) continue;
      t.right[static_cast<std::size_t>(i) * t.n + j] =
          pairwise_cost(blocks[i], blocks[j], h, w, Side::Right);
      t.down[static_cast<std::size_t>(i) * t.n + j] =
          pairwise_cost(blocks[i], blocks[j], h, w, Side::Down);
    }
  return t;
}

}  // namespace detail

// Greedy frontier assembly. Seeds with the globally cheapest ordered pair,
// then repeatedly places the unplaced block whose average border cost against
// already-placed neighbors is minimal, keeping the bounding box inside the
// grid dims. Ties resolve by cell (y, x) then block index, so the result is
// deterministic. Returns place[row*cols+col] = block index.
inline std::vector<int> greedy_assemble(const std::vector<std::vector<std::uint8_t>>& blocks,
                                        int h, int w, int grid_rows, int grid_cols) {
  const int n = grid_rows * grid_cols;
  if (static_cast<int>(blocks.size()) != n)
    throw DimensionError("greedy_assemble: block count does not match grid");
  if (n == 1) return {0};

  const detail::CostTables cost = detail::cost_tables(blocks, h, w);

  // seed: cheapest ordered pair, Right preferred over Down on ties
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  int seed_a = 0, seed_b = 1;
  Side seed_side = Side::Right;
  for (int pass = 0; pass < 2; ++pass)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const std::uint64_t c = pass == 0 ? cost.r(i, j) : cost.d(i, j);
        if (c < best) {
          best = c;
          seed_a = i;
          seed_b = j;
          seed_side = pass == 0 ? Side::Right : Side::Down;
        }
      }

  std::map<std::pair<int, int>, int> canvas;  // (y,x) -> block
  std::vector<bool> placed(static_cast<std::size_t>(n), false);
  canvas[{0, 0}] = seed_a;
  canvas[seed_side == Side::Right ? std::pair{0, 1} : std::pair{1, 0}] = seed_b;
  placed[seed_a] = placed[seed_b] = true;
  int min_y = 0, max_y = seed_side == Side::Down ? 1 : 0;
  int min_x = 0, max_x = seed_side == Side::Right ? 1 : 0;

  for (int filled = 2; filled < n; ++filled) {
    // candidate cells: empty neighbors of the placed set that keep the
    // bounding box legal
    std::set<std::pair<int, int>> cells;
    for (const auto& [cell, blk] : canvas) {
      (void)blk;
      const int y = cell.first, x = cell.second;
      const std::pair<int, int> around[4] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& c : around) {
        if (canvas.count(c)) continue;
        const int ny0 = std::min(min_y, c.first), ny1 = std::max(max_y, c.first);
        const int nx0 = std::min(min_x, c.second), nx1 = std::max(max_x, c.second);
        if (ny1 - ny0 + 1 <= grid_rows && nx1 - nx0 + 1 <= grid_cols) cells.insert(c);
      }
    }

    bool found = false;
    std::pair<int, int> best_cell{0, 0};
    int best_block = -1;
    std::uint64_t best_sum = 0, best_cnt = 1;
    for (const auto& cell : cells) {
      const int y = cell.first, x = cell.second;
      for (int b = 0; b < n; ++b) {
        if (placed[b]) continue;
        std::uint64_t sum = 0, cnt = 0;
        if (auto it = canvas.find({y - 1, x}); it != canvas.end()) {
          sum += cost.d(it->second, b);
          ++cnt;
        }
        if (auto it = canvas.find({y + 1, x}); it != canvas.end()) {
          sum += cost.d(b, it->second);
          ++cnt;
        }
        if (auto it = canvas.find({y, x - 1}); it != canvas.end()) {
          sum += cost.r(it->second, b);
          ++cnt;
        }
        if (auto it = canvas.find({y, x + 1}); it != canvas.end()) {
          sum += cost.r(b, it->second);
          ++cnt;
        }
        if (cnt == 0) continue;
        // exact rational comparison of sum/cnt, first hit wins ties
        if (!found || sum * best_cnt < best_sum * cnt) {
          found = true;
          best_cell = cell;
          best_block = b;
          best_sum = sum;
          best_cnt = cnt;
        }
      }
    }

    if (!found) break;  // defensive; the frontier cannot legally stall
    canvas[best_cell] = best_block;
    placed[static_cast<std::size_t>(best_block)] = true;
    min_y = std::min(min_y, best_cell.first);
    max_y = std::max(max_y, best_cell.first);
    min_x = std::min(min_x, best_cell.second);
    max_x = std::max(max_x, best_cell.second);
  }

  std::vector<int> place(static_cast<std::size_t>(n), -1);
  for (const auto& [cell, blk] : canvas)
    place[static_cast<std::size_t>(cell.first - min_y) * grid_cols +
          (cell.second - min_x)] = blk;
  // any stragglers (unreachable in practice) fill empty cells in raster order
  int next = 0;
  for (int b = 0; b < n; ++b) {
    if (placed[b]) continue;
    while (place[next] != -1) ++next;
    place[next] = b;
  }
  return place;
}

// Reassemble every frame of an encrypted clip independently.
inline Clip assemble_clip(const Clip& enc, const BlockGrid& grid) {
  if (!grid.matches(enc)) throw DimensionError("assemble_clip: grid mismatch");
  Clip out(enc.frames, enc.height, enc.width);
  const int n = grid.mb_count();
  for (int f = 0; f < enc.frames; ++f) {
    std::vector<std::vector<std::uint8_t>> blocks(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m)
      blocks[static_cast<std::size_t>(m)] = extract_region(enc, f, mb_region(grid, m));
    const std::vector<int> place =
        greedy_assemble(blocks, grid.mb_h, grid.mb_w, grid.grid_rows, grid.grid_cols);
    for (int cell = 0; cell < n; ++cell)
      insert_region(out, f, mb_region(grid, cell),
                    blocks[static_cast<std::size_t>(place[static_cast<std::size_t>(cell)])]);
  }
  return out;
}

// Fraction of adjacent MB pairs of the reconstruction that are adjacent with
// the same orientation in the reference. Reconstruction cells are labeled by
// nearest reference MB (SSD argmin, smaller index on ties), per frame.
inline double attack_score(const Clip& original, const Clip& reconstructed,
                           const BlockGrid& grid) {
  if (!original.same_dims(reconstructed))
    throw DimensionError("attack_score: clip dimensions differ");
  if (!grid.matches(original)) throw DimensionError("attack_score: grid mismatch");
  const int R = grid.grid_rows, C = grid.grid_cols, n = R * C;
  std::uint64_t hits = 0, pairs = 0;
  for (int f = 0; f < original.frames; ++f) {
    std::vector<std::vector<std::uint8_t>> ref(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m)
      ref[static_cast<std::size_t>(m)] = extract_region(original, f, mb_region(grid, m));
    std::vector<int> label(static_cast<std::size_t>(n), 0);
    for (int cell = 0; cell < n; ++cell) {
      const auto blk = extract_region(reconstructed, f, mb_region(grid, cell));
      std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
      for (int m = 0; m < n; ++m) {
        std::uint64_t ssd = 0;
        const auto& r = ref[static_cast<std::size_t>(m)];
        for (std::size_t i = 0; i < blk.size(); ++i) {
          const int d = static_cast<int>(blk[i]) - r[i];
          ssd += static_cast<std::uint64_t>(d) * d;
        }
        if (ssd < best) {
          best = ssd;
          label[static_cast<std::size_t>(cell)] = m;
        }
      }
    }
    for (int r = 0; r < R; ++r)
      for (int c = 0; c + 1 < C; ++c) {
        const int a = label[static_cast<std::size_t>(r) * C + c];
        const int b = label[static_cast<std::size_t>(r) * C + c + 1];
        ++pairs;
        if (b == a + 1 && a % C != C - 1) ++hits;
      }
    for (int r = 0; r + 1 < R; ++r)
      for (int c = 0; c < C; ++c) {
        const int a = label[static_cast<std::size_t>(r) * C + c];
        const int b = label[static_cast<std::size_t>(r + 1) * C + c];
        ++pairs;
        if (b == a + C) ++hits;
      }
  }
  return pairs == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(pairs);
}

// Expected attack_score of a uniformly random placement.
inline double chance_level(const BlockGrid& grid) {
  const double R = grid.grid_rows, C = grid.grid_cols;
  const double g = R * C;
  if (g < 2) return 0.0;
  const double hp = R * (C - 1), vp = C * (R - 1);
  return (hp * hp + vp * vp) / ((hp + vp) * g * (g - 1));
}

}  // namespace cfe
