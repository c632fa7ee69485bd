#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cfe/adaptation.hpp"
#include "cfe/cipher.hpp"
#include "cfe/vtcore.hpp"
#include "support/synth.hpp"

using cfe::BlockGrid;
using cfe::Clip;
using cfe::KeyMaterial;
using cfe::KeyMode;
using cfe::ModelWeights;
using cfe::SplitMix64;
using cfe::Tensor;
using cfe::TransformPlan;
using cfe::VtConfig;

namespace {

VtConfig small_config() {
  VtConfig cfg;
  cfg.frames = 4;
  cfg.height = 32;
  cfg.width = 32;
  cfg.seed = 3;
  return cfg;
}

BlockGrid grid_for(const VtConfig& cfg, int sb = 8) {
  return BlockGrid::for_frame(cfg.height, cfg.width, cfg.mb, cfg.mb, sb, sb);
}

double max_logit_gap(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace

TEST_CASE("identity plan adapts to the same weights") {
  const VtConfig cfg = small_config();
  const ModelWeights w = cfe::init_weights(cfg);
  const BlockGrid g = grid_for(cfg);
  TransformPlan plan;
  plan.grid = g;
  plan.mode = KeyMode::V1;
  plan.sb_params = {std::vector<cfe::SbParams>(static_cast<std::size_t>(g.sbs_per_mb()))};
  plan.sb_perm.resize(1);
  for (int s = 0; s < g.sbs_per_mb(); ++s) plan.sb_perm[0].push_back(s);
  for (int m = 0; m < g.mb_count(); ++m) plan.mb_perm.push_back(m);

  const cfe::AdaptedWeights a = cfe::adapt(w, plan);
  CHECK(a.at("embed.kernel").dims == w.at("embed.kernel").dims);
  CHECK(a.at("embed.kernel").data == w.at("embed.kernel").data);
  CHECK(a.at("pos").data == w.at("pos").data);
}

TEST_CASE("inversion-only plan negates the kernel") {
  const VtConfig cfg = small_config();
  const ModelWeights w = cfe::init_weights(cfg);
  const BlockGrid g = grid_for(cfg);
  TransformPlan plan;
  plan.grid = g;
  plan.mode = KeyMode::V1;
  std::vector<cfe::SbParams> row(static_cast<std::size_t>(g.sbs_per_mb()));
  for (auto& p : row) p.invert = true;
  plan.sb_params = {row};
  plan.sb_perm.resize(1);
  for (int s = 0; s < g.sbs_per_mb(); ++s) plan.sb_perm[0].push_back(s);
  for (int m = 0; m < g.mb_count(); ++m) plan.mb_perm.push_back(m);

  const cfe::AdaptedWeights a = cfe::adapt(w, plan);
  const auto& e = w.at("embed.kernel").data;
  const auto& ae = a.at("embed.kernel").data;
  REQUIRE(ae.size() == e.size());
  for (std::size_t i = 0; i < e.size(); ++i) REQUIRE(ae[i] == -e[i]);

  const Clip c = testsupport::natural_clip(40, cfg.frames, cfg.height, cfg.width);
  const Clip enc = cfe::encrypt(c, plan);
  const Tensor plain_tok = cfe::embed(c, w);
  const Tensor adapted_tok = cfe::embed(enc, a);
  REQUIRE(plain_tok.data.size() == adapted_tok.data.size());
  for (std::size_t i = 0; i < plain_tok.data.size(); ++i)
    REQUIRE_THAT(adapted_tok.data[i],
                 Catch::Matchers::WithinAbs(plain_tok.data[i], 1e-5));
}

TEST_CASE("adapted kernel elements correspond through the cipher") {
  // Flip one plaintext sample, find the one ciphertext sample that moved,
  // and require the adapted kernel to carry exactly the plain coefficient
  // (with the inversion sign) at that location.
  const VtConfig cfg = small_config();
  const ModelWeights w = cfe::init_weights(cfg);
  const BlockGrid g = grid_for(cfg);
  const TransformPlan plan = cfe::expand({KeyMode::V2, 616, 617, cfg.mb, 8}, g);
  const cfe::AdaptedWeights a = cfe::adapt(w, plan);
  const Tensor& E = w.at("embed.kernel");
  const Tensor& A = a.at("embed.kernel");
  REQUIRE(A.dims.size() == 6);

  const Clip base = testsupport::constant_clip(1, cfg.height, cfg.width, 0);
  const Clip enc_base = cfe::encrypt(base, plan);
  SplitMix64 pick(4242);
  for (int trial = 0; trial < 24; ++trial) {
    const int y = static_cast<int>(pick.next_below(static_cast<std::uint32_t>(cfg.height)));
    const int x = static_cast<int>(pick.next_below(static_cast<std::uint32_t>(cfg.width)));
    const int c = static_cast<int>(pick.next_below(3));
    Clip mod = base;
    mod.at(0, y, x, c) = 255;
    const Clip enc = cfe::encrypt(mod, plan);

    int qy = -1, qx = -1, qc = -1;
    int changed = 0;
    for (int yy = 0; yy < cfg.height; ++yy)
      for (int xx = 0; xx < cfg.width; ++xx)
        for (int cc = 0; cc < 3; ++cc)
          if (enc.at(0, yy, xx, cc) != enc_base.at(0, yy, xx, cc)) {
            qy = yy; qx = xx; qc = cc;
            ++changed;
          }
    REQUIRE(changed == 1);

    const int vp = 2 * static_cast<int>(mod.at(0, y, x, c)) - 255;
    const int vp0 = 2 * 0 - 255;
    const int vq = 2 * static_cast<int>(enc.at(0, qy, qx, qc)) - 255;
    const int vq0 = 2 * static_cast<int>(enc_base.at(0, qy, qx, qc)) - 255;
    REQUIRE(std::abs(vq - vq0) == std::abs(vp - vp0));
    const float sign = (vq - vq0) == (vp - vp0) ? 1.0f : -1.0f;

    const int gq = (qy / cfg.mb) * g.grid_cols + (qx / cfg.mb);
    const int gm = (y / cfg.mb) * g.grid_cols + (x / cfg.mb);
    REQUIRE(plan.mb_perm[static_cast<std::size_t>(gm)] == gq);
    for (int d = 0; d < cfg.embed_dim; ++d)
      for (int t = 0; t < cfg.T; ++t)
        REQUIRE(A.at(gq, d, qc, t, qy % cfg.mb, qx % cfg.mb) ==
                sign * E.at(d, c, t, y % cfg.mb, x % cfg.mb));
  }
}

TEST_CASE("positional rows are permuted, never rewritten") {
  const VtConfig cfg = small_config();
  const ModelWeights w = cfe::init_weights(cfg);
  const TransformPlan plan = cfe::expand({KeyMode::V1, 88, 89, cfg.mb, 8}, grid_for(cfg));
  const Tensor adapted = cfe::adapt_pos_embed(w, plan);
  const Tensor& pos = w.at("pos");
  REQUIRE(adapted.dims == pos.dims);

  const int D = cfg.embed_dim, G = cfg.grid_cells();
  for (int d = 0; d < D; ++d) REQUIRE(adapted.at(0, d) == pos.at(0, d));
  const auto inv = cfe::invert_permutation(plan.mb_perm);
  bool moved = false;
  for (int t = 0; t < cfg.t_tokens(); ++t)
    for (int g = 0; g < G; ++g) {
      const int dst = 1 + t * G + g;
      const int src = 1 + t * G + inv[static_cast<std::size_t>(g)];
      if (src != dst) moved = true;
      for (int d = 0; d < D; ++d) REQUIRE(adapted.at(dst, d) == pos.at(src, d));
    }
  CHECK(moved);

  auto sorted_a = adapted.data, sorted_p = pos.data;
  std::sort(sorted_a.begin(), sorted_a.end());
  std::sort(sorted_p.begin(), sorted_p.end());
  CHECK(sorted_a == sorted_p);
}

TEST_CASE("adapted model matches the plain model on encrypted input") {
  const VtConfig cfg = small_config();
  const ModelWeights w = cfe::init_weights(cfg);
  const BlockGrid g = grid_for(cfg);
  SplitMix64 seeds(2024);
  for (const KeyMode mode : {KeyMode::V1, KeyMode::V2}) {
    for (int trial = 0; trial < 4; ++trial) {
      const KeyMaterial keys{mode, seeds.next(), seeds.next(), cfg.mb, 8};
      const TransformPlan plan = cfe::expand(keys, g);
      const cfe::AdaptedWeights a = cfe::adapt(w, plan);
      const Clip c = testsupport::natural_clip(seeds.next(), cfg.frames, cfg.height,
                                               cfg.width);
      const auto ref = cfe::forward(c, w);
      const auto got = cfe::forward(cfe::encrypt(c, plan), a);
      REQUIRE(max_logit_gap(ref, got) <= 1e-4);
      REQUIRE(cfe::argmax(ref) == cfe::argmax(got));
    }
  }
}

TEST_CASE("re-adapting with the inverse plan restores the bundle") {
  const VtConfig cfg = small_config();
  const ModelWeights w = cfe::init_weights(cfg);
  const TransformPlan plan = cfe::expand({KeyMode::V2, 5150, 5151, cfg.mb, 8},
                                         grid_for(cfg));
  const cfe::AdaptedWeights a = cfe::adapt(w, plan);
  const cfe::AdaptedWeights back = cfe::adapt(a, cfe::inverse_plan(plan));
  const Tensor& k = back.at("embed.kernel");
  REQUIRE(k.dims.size() == 6);
  const Tensor& E = w.at("embed.kernel");
  const std::size_t n = E.size();
  for (int g = 0; g < cfg.grid_cells(); ++g)
    for (std::size_t i = 0; i < n; ++i)
      REQUIRE(k.data[static_cast<std::size_t>(g) * n + i] == E.data[i]);
  CHECK(back.at("pos").data == w.at("pos").data);
}

TEST_CASE("keys with no MB scrambling leave pos rows in place") {
  const VtConfig cfg = small_config();
  const ModelWeights w = cfe::init_weights(cfg);
  TransformPlan plan = cfe::expand({KeyMode::V2, 99, 100, cfg.mb, 8}, grid_for(cfg));
  for (std::size_t m = 0; m < plan.mb_perm.size(); ++m)
    plan.mb_perm[m] = static_cast<int>(m);
  const Tensor adapted = cfe::adapt_pos_embed(w, plan);
  CHECK(adapted.data == w.at("pos").data);
}

TEST_CASE("plan and config must agree") {
  const VtConfig cfg = small_config();
  const ModelWeights w = cfe::init_weights(cfg);
  const BlockGrid wrong = BlockGrid::for_frame(64, 64, 16, 16, 8, 8);
  const TransformPlan plan = cfe::expand({KeyMode::V1, 1, 2, 16, 8}, wrong);
  CHECK_THROWS_AS(cfe::adapt(w, plan), cfe::DimensionError);
}
