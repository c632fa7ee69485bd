#pragma once

// Key-dependent domain adaptation: rewrite the cube-embedding kernel and the
// positional rows so the model consumes encrypted clips natively.
//
// Samples are normalized symmetrically, v = (2p - 255)/255, which turns NP
// inversion into a sign flip. Under that convention every per-SB transform is
// a signed permutation of kernel elements, and MB scrambling is a permutation
// of positional rows, so <E'_g, encrypt(x)> == <E, x> holds exactly in real
// arithmetic.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "cfe/cipher.hpp"
#include "cfe/error.hpp"
#include "cfe/geometry.hpp"
#include "cfe/keyschedule.hpp"
#include "cfe/weights.hpp"

namespace cfe {

namespace detail {

// One MB's signed permutation applied to a rank-5 kernel (D, 3, T, mb, mb):
// rotate/flip each kernel SB, negate inverted SBs, gather the input-channel
// axis, then move SB slot s to sigma[s].
inline Tensor adapt_kernel_single(const Tensor& E, const BlockGrid& g,
                                  const std::vector<SbParams>& params,
                                  const std::vector<int>& sigma) {
  const int D = static_cast<int>(E.dims[0]);
  const int T = static_cast<int>(E.dims[2]);
  Tensor out(E.dims);
  for (int s = 0; s < g.sbs_per_mb(); ++s) {
    const SbParams& p = params[s];
    if ((p.rotation & 1) != 0 && g.sb_h != g.sb_w)
      throw ConfigError("quarter rotations require square sub-blocks");
    const auto& perm = kChannelPerms[p.channel_perm];
    const float sign = p.invert ? -1.0f : 1.0f;
    const int sy0 = (s / g.sb_cols) * g.sb_h;
    const int sx0 = (s % g.sb_cols) * g.sb_w;
    const int dst = sigma[s];
    const int dy0 = (dst / g.sb_cols) * g.sb_h;
    const int dx0 = (dst % g.sb_cols) * g.sb_w;
    for (int d = 0; d < D; ++d)
      for (int c = 0; c < 3; ++c)
        for (int t = 0; t < T; ++t)
          for (int y = 0; y < g.sb_h; ++y)
            for (int x = 0; x < g.sb_w; ++x) {
              const auto [ry, rx] =
                  spatial_src(y, x, g.sb_h, g.sb_w, p.rotation, p.flip);
              out.at(d, c, t, dy0 + y, dx0 + x) =
                  sign * E.at(d, perm[c], t, sy0 + ry, sx0 + rx);
            }
  }
  return out;
}

inline void check_plan_matches(const VtConfig& cfg, const TransformPlan& plan) {
  const BlockGrid& g = plan.grid;
  if (g.mb_h != cfg.mb || g.mb_w != cfg.mb || g.grid_rows != cfg.grid_rows() ||
      g.grid_cols != cfg.grid_cols())
    throw DimensionError("adapt: plan grid does not match model config");
}

}  // namespace detail

// Kernel adaptation only; positional rows are left alone (see
// adapt_pos_embed). A V1 plan over a shared kernel stays rank 5; everything
// else is emitted per grid position, indexed by ciphertext location g and
// built from the plaintext MB m = mb_perm^-1(g) that lands there.
inline AdaptedWeights adapt_kernel(const ModelWeights& w, const TransformPlan& plan) {
  detail::check_plan_matches(w.config, plan);
  const Tensor& E = w.at("embed.kernel");
  const bool per_pos_in = E.dims.size() == 6;
  if (!per_pos_in && E.dims.size() != 5)
    throw DimensionError("adapt: kernel must have rank 5 or 6");
  if (static_cast<int>(E.dims[per_pos_in ? 4 : 3]) != plan.grid.mb_h ||
      static_cast<int>(E.dims[per_pos_in ? 5 : 4]) != plan.grid.mb_w)
    throw DimensionError("adapt: kernel spatial extent does not match MB size");
  const int G = plan.grid.mb_count();
  if (per_pos_in && static_cast<int>(E.dims[0]) != G)
    throw DimensionError("adapt: per-position kernel count does not match grid");

  AdaptedWeights out = w;
  const auto inv_mb = invert_permutation(plan.mb_perm);

  if (plan.mode == KeyMode::V1 && !per_pos_in) {
    out.tensors["embed.kernel"] = detail::adapt_kernel_single(
        E, plan.grid, plan.params_for(0), plan.sb_perm_for(0));
    return out;
  }

  std::vector<std::uint32_t> slice_dims(E.dims.begin() + (per_pos_in ? 1 : 0),
                                        E.dims.end());
  std::vector<std::uint32_t> out_dims;
  out_dims.push_back(static_cast<std::uint32_t>(G));
  out_dims.insert(out_dims.end(), slice_dims.begin(), slice_dims.end());
  Tensor adapted(out_dims);
  Tensor slice(slice_dims);
  const std::size_t slice_n = slice.size();
  for (int g = 0; g < G; ++g) {
    const int m = inv_mb[g];
    const float* src = E.data.data() + (per_pos_in ? m * slice_n : 0);
    std::copy(src, src + slice_n, slice.data.begin());
    Tensor t = detail::adapt_kernel_single(slice, plan.grid, plan.params_for(m),
                                           plan.sb_perm_for(m));
    std::copy(t.data.begin(), t.data.end(),
              adapted.data.begin() + g * slice_n);
  }
  out.tensors["embed.kernel"] = std::move(adapted);
  return out;
}

// New positional tensor: within every temporal slice, row for ciphertext
// position g takes the plain row of mb_perm^-1(g); class-token row unchanged.
inline Tensor adapt_pos_embed(const ModelWeights& w, const TransformPlan& plan) {
  detail::check_plan_matches(w.config, plan);
  const Tensor& pos = w.at("pos");
  const VtConfig& cfg = w.config;
  const int G = cfg.grid_cells();
  if (static_cast<int>(plan.mb_perm.size()) != G)
    throw DimensionError("adapt: mb_perm length does not match grid");
  if (static_cast<int>(pos.dims[0]) != 1 + cfg.n_tokens())
    throw DimensionError("adapt: pos row count does not match token count");
  const auto inv_mb = invert_permutation(plan.mb_perm);
  const int D = static_cast<int>(pos.dims[1]);
  Tensor out(pos.dims);
  for (int d = 0; d < D; ++d) out.at(0, d) = pos.at(0, d);
  for (int t = 0; t < cfg.t_tokens(); ++t)
    for (int g = 0; g < G; ++g) {
      const int src_row = 1 + t * G + inv_mb[g];
      const int dst_row = 1 + t * G + g;
      for (int d = 0; d < D; ++d) out.at(dst_row, d) = pos.at(src_row, d);
    }
  return out;
}

inline AdaptedWeights adapt(const ModelWeights& w, const TransformPlan& plan) {
  AdaptedWeights out = adapt_kernel(w, plan);
  out.tensors["pos"] = adapt_pos_embed(w, plan);
  return out;
}

inline AdaptedWeights adapt(const ModelWeights& w, const KeyMaterial& keys) {
  const VtConfig& cfg = w.config;
  const BlockGrid grid =
      BlockGrid::for_frame(cfg.height, cfg.width, keys.mb, keys.mb, keys.sb, keys.sb);
  return adapt(w, expand(keys, grid));
}

}  // namespace cfe
