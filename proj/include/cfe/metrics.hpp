#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "cfe/error.hpp"
#include "cfe/geometry.hpp"

namespace cfe {

inline double mse(const Clip& a, const Clip& b) {
  if (!a.same_dims(b)) throw DimensionError("mse: clip dimensions differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const double d = static_cast<double>(a.samples[i]) - b.samples[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.samples.size());
}

// Over all samples of all frames; identical clips report +infinity.
inline double psnr(const Clip& a, const Clip& b) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / m);
}

struct CorrelationResult {
  double score = 0.0;
  bool degenerate = false;  // every boundary pair had zero variance
};

namespace detail {

// Pearson r; false when either side has zero variance.
inline bool pearson(const std::vector<double>& u, const std::vector<double>& v,
                    double& out) {
  const double n = static_cast<double>(u.size());
  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= n;
  mv /= n;
  double suu = 0.0, svv = 0.0, suv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double du = u[i] - mu, dv = v[i] - mv;
    suu += du * du;
    svv += dv * dv;
    suv += du * dv;
  }
  if (suu <= 0.0 || svv <= 0.0) return false;
  out = suv / std::sqrt(suu * svv);
  return true;
}

}  // namespace detail

// Mean Pearson correlation of the pixel lines facing each other across every
// interior MB boundary of one frame, all channels pooled per boundary.
inline CorrelationResult neighbor_correlation(const Clip& clip, int frame,
                                              const BlockGrid& grid) {
  if (!grid.matches(clip)) throw DimensionError("neighbor_correlation: grid mismatch");
  std::vector<double> u, v;
  double sum = 0.0;
  int used = 0;
  const auto add_pair = [&] {
    double r;
    if (detail::pearson(u, v, r)) {
      sum += r;
      ++used;
    }
  };
  for (int bc = 1; bc < grid.grid_cols; ++bc) {
    const int x = bc * grid.mb_w;
    u.clear();
    v.clear();
    for (int y = 0; y < clip.height; ++y)
      for (int c = 0; c < kChannels; ++c) {
        u.push_back(clip.at(frame, y, x - 1, c));
        v.push_back(clip.at(frame, y, x, c));
      }
    add_pair();
  }
  for (int br = 1; br < grid.grid_rows; ++br) {
    const int y = br * grid.mb_h;
    u.clear();
    v.clear();
    for (int x = 0; x < clip.width; ++x)
      for (int c = 0; c < kChannels; ++c) {
        u.push_back(clip.at(frame, y - 1, x, c));
        v.push_back(clip.at(frame, y, x, c));
      }
    add_pair();
  }
  if (used == 0) return {0.0, true};
  return {sum / used, false};
}

inline CorrelationResult neighbor_correlation(const Clip& clip, const BlockGrid& grid) {
  double sum = 0.0;
  int used = 0;
  for (int f = 0; f < clip.frames; ++f) {
    const CorrelationResult r = neighbor_correlation(clip, f, grid);
    if (!r.degenerate) {
      sum += r.score;
      ++used;
    }
  }
  if (used == 0) return {0.0, true};
  return {sum / used, false};
}

}  // namespace cfe
