#pragma once

// Block-wise clip encryption: keyed SB-level transformations, SB scrambling
// within each MB, and MB scrambling within each frame. The same plan is
// applied to every frame, which is what makes the positional-embedding fix
// in the adaptation module time-invariant.
//
// Also carries the frame-wide pixel-shuffle baseline used for comparisons.

#include <cstdint>
#include <utility>
#include <vector>

#include "cfe/error.hpp"
#include "cfe/geometry.hpp"
#include "cfe/keyschedule.hpp"

namespace cfe {

enum class Direction { Forward, Inverse };

namespace detail {

// Source coordinate for the forward spatial composite rotate -> flip.
// Rotations are clockwise quarter turns and require square blocks.
inline std::pair<int, int> spatial_src(int y, int x, int h, int w, int rotation,
                                       Flip flip) {
  // undo the flip first (flips are involutions)
  switch (flip) {
    case Flip::Horizontal: x = w - 1 - x; break;
    case Flip::Vertical: y = h - 1 - y; break;
    case Flip::None: break;
  }
  // then undo the rotation
  switch (rotation & 3) {
    case 1: return {h - 1 - x, y};  // out(y,x) = in(h-1-x, y), 90 cw
    case 2: return {h - 1 - y, w - 1 - x};
    case 3: return {x, w - 1 - y};
    default: return {y, x};
  }
}

}  // namespace detail

// One SB, h*w*3 interleaved. Forward order: rotate -> flip -> invert ->
// channel permute; Inverse applies the exact inverse composite.
inline std::vector<std::uint8_t> transform_sb(const std::vector<std::uint8_t>& block,
                                              int h, int w, const SbParams& params,
                                              Direction dir) {
  if (block.size() != static_cast<std::size_t>(h) * w * kChannels)
    throw DimensionError("transform_sb: block buffer does not match dimensions");
  const SbParams p = dir == Direction::Forward ? params : inverse(params);
  if ((p.rotation & 1) != 0 && h != w)
    throw ConfigError("quarter rotations require square sub-blocks");
  const auto& perm = kChannelPerms[p.channel_perm];
  std::vector<std::uint8_t> out(block.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto [sy, sx] = detail::spatial_src(y, x, h, w, p.rotation, p.flip);
      const std::size_t src = (static_cast<std::size_t>(sy) * w + sx) * kChannels;
      const std::size_t dst = (static_cast<std::size_t>(y) * w + x) * kChannels;
      for (int c = 0; c < kChannels; ++c) {
        std::uint8_t v = block[src + perm[c]];
        if (p.invert) v = static_cast<std::uint8_t>(255 - v);
        out[dst + c] = v;
      }
    }
  return out;
}

// Per frame: transform every SB with its MB's params, scramble SB slots by
// sb_perm, then move MB m to grid position mb_perm[m].
inline Clip encrypt(const Clip& in, const TransformPlan& plan) {
  if (!plan.grid.matches(in))
    throw DimensionError("encrypt: clip does not match plan grid");
  const BlockGrid& g = plan.grid;
  Clip out(in.frames, in.height, in.width);
  for (int f = 0; f < in.frames; ++f)
    for (int m = 0; m < g.mb_count(); ++m) {
      const auto& params = plan.params_for(m);
      const auto& sigma = plan.sb_perm_for(m);
      const int dest_mb = plan.mb_perm[m];
      for (int s = 0; s < g.sbs_per_mb(); ++s) {
        auto blk = extract_region(in, f, sb_region(g, m, s));
        blk = transform_sb(blk, g.sb_h, g.sb_w, params[s], Direction::Forward);
        insert_region(out, f, sb_region(g, dest_mb, sigma[s]), blk);
      }
    }
  return out;
}

// Exact inverse of encrypt: decrypt(encrypt(x, p), p) == x bit-exactly.
inline Clip decrypt(const Clip& in, const TransformPlan& plan) {
  if (!plan.grid.matches(in))
    throw DimensionError("decrypt: clip does not match plan grid");
  const BlockGrid& g = plan.grid;
  Clip out(in.frames, in.height, in.width);
  for (int f = 0; f < in.frames; ++f)
    for (int m = 0; m < g.mb_count(); ++m) {
      const auto& params = plan.params_for(m);
      const auto& sigma = plan.sb_perm_for(m);
      const int src_mb = plan.mb_perm[m];
      for (int s = 0; s < g.sbs_per_mb(); ++s) {
        auto blk = extract_region(in, f, sb_region(g, src_mb, sigma[s]));
        blk = transform_sb(blk, g.sb_h, g.sb_w, params[s], Direction::Inverse);
        insert_region(out, f, sb_region(g, m, s), blk);
      }
    }
  return out;
}

// Frame-wide keyed pixel shuffle (channels travel together), the same
// permutation for every frame of the clip. Stands in for shuffle-based
// perceptual encryption baselines.
inline Clip pixel_shuffle(const Clip& in, std::uint64_t seed, Direction dir) {
  SplitMix64 gen(seed);
  const int n = in.height * in.width;
  const std::vector<int> perm = keyed_permutation(n, gen);
  Clip out(in.frames, in.height, in.width);
  for (int f = 0; f < in.frames; ++f) {
    const std::size_t base = static_cast<std::size_t>(f) * n * kChannels;
    for (int i = 0; i < n; ++i) {
      const std::size_t src = base + static_cast<std::size_t>(i) * kChannels;
      const std::size_t dst = base + static_cast<std::size_t>(perm[i]) * kChannels;
      if (dir == Direction::Forward)
        for (int c = 0; c < kChannels; ++c) out.samples[dst + c] = in.samples[src + c];
      else
        for (int c = 0; c < kChannels; ++c) out.samples[src + c] = in.samples[dst + c];
    }
  }
  return out;
}

}  // namespace cfe
