#pragma once

// Clips, block grids and partition arithmetic shared by every other header.
//
// A Clip stores decoded 8-bit RGB video, frame-major, row-major, channels
// interleaved. A BlockGrid describes the two-level main-block / sub-block
// partition of a frame; all scrambling and adaptation code works in terms
// of the row-major MB and SB indices defined here.

#include <cmath>
#include <cstdint>
#include <vector>

#include "cfe/error.hpp"

namespace cfe {

inline constexpr int kChannels = 3;

struct Clip {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> samples;  // frames*height*width*3

  Clip() = default;
  Clip(int f, int h, int w)
      : frames(f), height(h), width(w) {
    if (f < 0 || h < 0 || w < 0) throw DimensionError("negative clip dimension");
    samples.resize(static_cast<std::size_t>(f) * h * w * kChannels);
  }

  std::size_t index(int f, int y, int x, int c) const {
    return ((static_cast<std::size_t>(f) * height + y) * width + x) * kChannels + c;
  }
  std::uint8_t at(int f, int y, int x, int c) const { return samples[index(f, y, x, c)]; }
  std::uint8_t& at(int f, int y, int x, int c) { return samples[index(f, y, x, c)]; }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(frames) * height * width;
  }
  bool same_dims(const Clip& o) const {
    return frames == o.frames && height == o.height && width == o.width;
  }
  bool empty() const { return samples.empty(); }
};

struct BlockGrid {
  int mb_h = 16, mb_w = 16;  // main-block size in pixels
  int sb_h = 8, sb_w = 8;    // sub-block size in pixels
  int grid_rows = 0, grid_cols = 0;  // MBs per frame
  int sb_rows = 2, sb_cols = 2;      // SBs per MB, per axis

  int mb_count() const { return grid_rows * grid_cols; }
  int sbs_per_mb() const { return sb_rows * sb_cols; }

  static BlockGrid for_frame(int height, int width, int mb_h, int mb_w,
                             int sb_h, int sb_w) {
    if (mb_h <= 0 || mb_w <= 0 || sb_h <= 0 || sb_w <= 0)
      throw DimensionError("block sizes must be positive");
    if (mb_h % sb_h != 0 || mb_w % sb_w != 0)
      throw DimensionError("MB size must be a multiple of SB size");
    if (height % mb_h != 0 || width % mb_w != 0)
      throw DimensionError("frame size not divisible by MB size; resize first");
    BlockGrid g;
    g.mb_h = mb_h;
    g.mb_w = mb_w;
    g.sb_h = sb_h;
    g.sb_w = sb_w;
    g.grid_rows = height / mb_h;
    g.grid_cols = width / mb_w;
    g.sb_rows = mb_h / sb_h;
    g.sb_cols = mb_w / sb_w;
    return g;
  }
  static BlockGrid for_frame(int height, int width, int mb = 16, int sb = 8) {
    return for_frame(height, width, mb, mb, sb, sb);
  }

  bool matches(const Clip& c) const {
    return c.height == grid_rows * mb_h && c.width == grid_cols * mb_w;
  }
};

// Rectangular pixel region inside one frame.
struct BlockRegion {
  int y0 = 0, x0 = 0, h = 0, w = 0;
};

// MB indices are row-major over the frame; SB indices row-major within the MB.
inline BlockRegion mb_region(const BlockGrid& g, int mb) {
  const int row = mb / g.grid_cols, col = mb % g.grid_cols;
  return {row * g.mb_h, col * g.mb_w, g.mb_h, g.mb_w};
}

inline BlockRegion sb_region(const BlockGrid& g, int mb, int sb) {
  const BlockRegion m = mb_region(g, mb);
  const int row = sb / g.sb_cols, col = sb % g.sb_cols;
  return {m.y0 + row * g.sb_h, m.x0 + col * g.sb_w, g.sb_h, g.sb_w};
}

// Region pixels as a dense h*w*3 interleaved buffer.
inline std::vector<std::uint8_t> extract_region(const Clip& c, int frame,
                                                const BlockRegion& r) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(r.h) * r.w * kChannels);
  std::size_t k = 0;
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x)
      for (int ch = 0; ch < kChannels; ++ch)
        out[k++] = c.at(frame, r.y0 + y, r.x0 + x, ch);
  return out;
}

inline void insert_region(Clip& c, int frame, const BlockRegion& r,
                          const std::vector<std::uint8_t>& data) {
  std::size_t k = 0;
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x)
      for (int ch = 0; ch < kChannels; ++ch)
        c.at(frame, r.y0 + y, r.x0 + x, ch) = data[k++];
}

namespace detail {

// Catmull-Rom cubic kernel (a = -0.5).
inline double bicubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::fabs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * a;
  return 0.0;
}

struct ResampleTaps {
  std::vector<int> idx;     // 4 clamped source indices per output coord
  std::vector<double> wgt;  // 4 weights per output coord
};

inline ResampleTaps make_taps(int in_n, int out_n) {
  ResampleTaps t;
  t.idx.resize(static_cast<std::size_t>(out_n) * 4);
  t.wgt.resize(static_cast<std::size_t>(out_n) * 4);
  const double scale = static_cast<double>(in_n) / out_n;
  for (int o = 0; o < out_n; ++o) {
    const double src = (o + 0.5) * scale - 0.5;  // center-aligned mapping
    const double base = std::floor(src);
    const double frac = src - base;
    for (int k = 0; k < 4; ++k) {
      int i = static_cast<int>(base) - 1 + k;
      if (i < 0) i = 0;
      if (i > in_n - 1) i = in_n - 1;  // edge clamp
      t.idx[o * 4 + k] = i;
      t.wgt[o * 4 + k] = bicubic_weight(frac - (k - 1));
    }
  }
  return t;
}

inline std::uint8_t clamp_u8(double v) {
  const long long r = std::llround(v);
  if (r < 0) return 0;
  if (r > 255) return 255;
  return static_cast<std::uint8_t>(r);
}

}  // namespace detail

// Catmull-Rom bicubic resampling, channels independent, edges clamped.
// Same-size calls are exact pass-throughs.
inline Clip resize_bicubic(const Clip& in, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw DimensionError("resize target must be >= 1");
  const auto tx = detail::make_taps(in.width, out_w);
  const auto ty = detail::make_taps(in.height, out_h);
  Clip out(in.frames, out_h, out_w);
  // horizontal pass buffer, one frame at a time
  std::vector<double> row(static_cast<std::size_t>(in.height) * out_w * kChannels);
  for (int f = 0; f < in.frames; ++f) {
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < out_w; ++x)
        for (int c = 0; c < kChannels; ++c) {
          double acc = 0.0;
          for (int k = 0; k < 4; ++k)
            acc += tx.wgt[x * 4 + k] * in.at(f, y, tx.idx[x * 4 + k], c);
          row[(static_cast<std::size_t>(y) * out_w + x) * kChannels + c] = acc;
        }
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x)
        for (int c = 0; c < kChannels; ++c) {
          double acc = 0.0;
          for (int k = 0; k < 4; ++k)
            acc += ty.wgt[y * 4 + k] *
                   row[(static_cast<std::size_t>(ty.idx[y * 4 + k]) * out_w + x) * kChannels + c];
          out.at(f, y, x, c) = detail::clamp_u8(acc);
        }
  }
  return out;
}

// Uniform temporal sampling: picks floor(i*frames/n) for i in 0..n-1.
// Duplicates indices when the clip is shorter than n.
inline Clip sample_frames_uniform(const Clip& in, int n) {
  if (in.frames < 1) throw DimensionError("cannot sample an empty clip");
  if (n < 1) throw DimensionError("sample count must be >= 1");
  Clip out(n, in.height, in.width);
  const std::size_t frame_bytes = static_cast<std::size_t>(in.height) * in.width * kChannels;
  for (int i = 0; i < n; ++i) {
    const int src = static_cast<int>((static_cast<std::int64_t>(i) * in.frames) / n);
    std::copy_n(in.samples.begin() + static_cast<std::size_t>(src) * frame_bytes,
                frame_bytes,
                out.samples.begin() + static_cast<std::size_t>(i) * frame_bytes);
  }
  return out;
}

}  // namespace cfe
