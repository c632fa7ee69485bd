#pragma once

// Minimal deterministic video transformer: cube embedding, pre-norm encoder
// blocks (LN -> MHSA -> residual, LN -> MLP/GELU -> residual), final LN and
// a linear head on the class token. Inference only, 32-bit state, serial
// reduction order throughout so repeated runs are bit-identical.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cfe/error.hpp"
#include "cfe/geometry.hpp"
#include "cfe/keyschedule.hpp"
#include "cfe/weights.hpp"

namespace cfe {

namespace detail {

// Gaussian draws via Box-Muller on explicit splitmix uniforms; redraw beyond
// two sigma. std:: distributions are not bit-stable across library
// implementations, this is.
class TruncNormal {
 public:
  explicit TruncNormal(std::uint64_t seed) : gen_(seed) {}

  double next() {
    constexpr double two_pi = 6.283185307179586476925286766559;
    for (;;) {
      const double u1 = to_unit(gen_.next());
      const double u2 = to_unit(gen_.next());
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
      if (std::fabs(z) <= 2.0) return z;
    }
  }

 private:
  static double to_unit(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
  }
  SplitMix64 gen_;
};

inline void fill_trunc_normal(Tensor& t, TruncNormal& g, double std_dev) {
  for (auto& v : t.data) v = static_cast<float>(g.next() * std_dev);
}

inline void fill_const(Tensor& t, float v) {
  for (auto& x : t.data) x = v;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

}  // namespace detail

// Seeded bundle: trunc-normal(0.02) projection/attention/MLP/head weights,
// positional rows and class token; zero biases; unit LN gains.
inline ModelWeights init_weights(const VtConfig& cfg) {
  cfg.validate();
  ModelWeights w;
  w.config = cfg;
  detail::TruncNormal gen(cfg.seed);
  const auto D = static_cast<std::uint32_t>(cfg.embed_dim);
  const auto H = static_cast<std::uint32_t>(cfg.mlp_ratio * cfg.embed_dim);

  // draw order is fixed: embed, cls, pos, encoder layers in order, ln_f, head
  Tensor kernel({D, 3, static_cast<std::uint32_t>(cfg.T),
                 static_cast<std::uint32_t>(cfg.mb), static_cast<std::uint32_t>(cfg.mb)});
  detail::fill_trunc_normal(kernel, gen, 0.02);
  w.tensors["embed.kernel"] = std::move(kernel);
  w.tensors["embed.bias"] = Tensor({D});
  Tensor cls({D});
  detail::fill_trunc_normal(cls, gen, 0.02);
  w.tensors["cls"] = std::move(cls);
  Tensor pos({static_cast<std::uint32_t>(1 + cfg.n_tokens()), D});
  detail::fill_trunc_normal(pos, gen, 0.02);
  w.tensors["pos"] = std::move(pos);

  for (int i = 0; i < cfg.n_layers; ++i) {
    const std::string p = "enc." + std::to_string(i) + ".";
    Tensor g1({D});
    detail::fill_const(g1, 1.0f);
    w.tensors[p + "ln1.g"] = std::move(g1);
    w.tensors[p + "ln1.b"] = Tensor({D});
    for (const char* name : {"wq", "wk", "wv", "wo"}) {
      Tensor t({D, D});
      detail::fill_trunc_normal(t, gen, 0.02);
      w.tensors[p + "attn." + name] = std::move(t);
    }
    for (const char* name : {"bq", "bk", "bv", "bo"})
      w.tensors[p + "attn." + name] = Tensor({D});
    Tensor g2({D});
    detail::fill_const(g2, 1.0f);
    w.tensors[p + "ln2.g"] = std::move(g2);
    w.tensors[p + "ln2.b"] = Tensor({D});
    Tensor w1({H, D});
    detail::fill_trunc_normal(w1, gen, 0.02);
    w.tensors[p + "mlp.w1"] = std::move(w1);
    w.tensors[p + "mlp.b1"] = Tensor({H});
    Tensor w2({D, H});
    detail::fill_trunc_normal(w2, gen, 0.02);
    w.tensors[p + "mlp.w2"] = std::move(w2);
    w.tensors[p + "mlp.b2"] = Tensor({D});
  }

  Tensor gf({D});
  detail::fill_const(gf, 1.0f);
  w.tensors["ln_f.g"] = std::move(gf);
  w.tensors["ln_f.b"] = Tensor({D});
  Tensor hw({static_cast<std::uint32_t>(cfg.n_classes), D});
  detail::fill_trunc_normal(hw, gen, 0.02);
  w.tensors["head.w"] = std::move(hw);
  w.tensors["head.b"] = Tensor({static_cast<std::uint32_t>(cfg.n_classes)});
  return w;
}

// Symmetric sample normalization; inversion of a pixel becomes a sign flip.
inline float normalize_sample(std::uint8_t p) {
  return static_cast<float>(2 * static_cast<int>(p) - 255) / 255.0f;
}

// Token tensor (1 + n_tokens, embed_dim); row 0 is the class token. Token
// (t, g) lives at row 1 + t*grid_cells + g.
inline Tensor embed(const Clip& clip, const ModelWeights& w) {
  const VtConfig& cfg = w.config;
  if (clip.frames != cfg.frames || clip.height != cfg.height || clip.width != cfg.width)
    throw DimensionError("embed: clip does not match model config");
  const Tensor& kernel = w.at("embed.kernel");
  const Tensor& bias = w.at("embed.bias");
  const Tensor& pos = w.at("pos");
  const Tensor& cls = w.at("cls");
  const bool per_pos = kernel.dims.size() == 6;
  if (!per_pos && kernel.dims.size() != 5)
    throw DimensionError("embed: kernel must have rank 5 or 6");
  if (per_pos && kernel.dims[0] != static_cast<std::uint32_t>(cfg.grid_cells()))
    throw DimensionError("embed: per-position kernel count does not match grid");
  if (pos.dims[0] != static_cast<std::uint32_t>(1 + cfg.n_tokens()))
    throw DimensionError("embed: pos row count does not match token count");

  const int D = cfg.embed_dim, G = cfg.grid_cells();
  Tensor tokens({static_cast<std::uint32_t>(1 + cfg.n_tokens()),
                 static_cast<std::uint32_t>(D)});
  for (int d = 0; d < D; ++d) tokens.at(0, d) = cls.at(d) + pos.at(0, d);

  const std::size_t kernel_block =
      static_cast<std::size_t>(3) * cfg.T * cfg.mb * cfg.mb;
  for (int t = 0; t < cfg.t_tokens(); ++t)
    for (int g = 0; g < G; ++g) {
      const int gy = (g / cfg.grid_cols()) * cfg.mb;
      const int gx = (g % cfg.grid_cols()) * cfg.mb;
      const int row = 1 + t * G + g;
      for (int d = 0; d < D; ++d) {
        const float* k = kernel.data.data() +
                         (per_pos ? (static_cast<std::size_t>(g) * D + d)
                                  : static_cast<std::size_t>(d)) *
                             kernel_block;
        double acc = 0.0;
        std::size_t ki = 0;
        for (int c = 0; c < 3; ++c)
          for (int tau = 0; tau < cfg.T; ++tau)
            for (int y = 0; y < cfg.mb; ++y)
              for (int x = 0; x < cfg.mb; ++x)
                acc += static_cast<double>(k[ki++]) *
                       normalize_sample(clip.at(t * cfg.T + tau, gy + y, gx + x, c));
        tokens.at(row, d) =
            static_cast<float>(acc) + bias.at(d) + pos.at(row, d);
      }
    }
  return tokens;
}

namespace detail {

inline void layer_norm(const std::vector<float>& in, const Tensor& gain,
                       const Tensor& bias, int rows, int dim, std::vector<float>& out) {
  constexpr double eps = 1e-5;
  out.resize(in.size());
  for (int r = 0; r < rows; ++r) {
    const float* x = in.data() + static_cast<std::size_t>(r) * dim;
    double mean = 0.0;
    for (int d = 0; d < dim; ++d) mean += x[d];
    mean /= dim;
    double var = 0.0;
    for (int d = 0; d < dim; ++d) var += (x[d] - mean) * (x[d] - mean);
    var /= dim;
    const double inv = 1.0 / std::sqrt(var + eps);
    float* y = out.data() + static_cast<std::size_t>(r) * dim;
    for (int d = 0; d < dim; ++d)
      y[d] = static_cast<float>((x[d] - mean) * inv * gain.at(d) + bias.at(d));
  }
}

// y = x W^T + b, W is (out_dim, in_dim)
inline void linear(const std::vector<float>& in, const Tensor& W, const Tensor& b,
                   int rows, std::vector<float>& out) {
  const int out_dim = static_cast<int>(W.dims[0]);
  const int in_dim = static_cast<int>(W.dims[1]);
  out.assign(static_cast<std::size_t>(rows) * out_dim, 0.0f);
  for (int r = 0; r < rows; ++r) {
    const float* x = in.data() + static_cast<std::size_t>(r) * in_dim;
    float* y = out.data() + static_cast<std::size_t>(r) * out_dim;
    for (int o = 0; o < out_dim; ++o) {
      double acc = b.size() ? b.at(o) : 0.0;
      const float* wrow = W.data.data() + static_cast<std::size_t>(o) * in_dim;
      for (int i = 0; i < in_dim; ++i) acc += static_cast<double>(wrow[i]) * x[i];
      y[o] = static_cast<float>(acc);
    }
  }
}

}  // namespace detail

inline void check_finite(const ModelWeights& w) {
  for (const auto& [name, t] : w.tensors)
    for (float v : t.data)
      if (std::isnan(v) || std::isinf(v))
        throw Error("non-finite value in tensor: " + name);
}

inline std::vector<float> forward(const Clip& clip, const ModelWeights& w) {
  const VtConfig& cfg = w.config;
  cfg.validate();
  check_finite(w);
  Tensor tokens = embed(clip, w);
  const int N = static_cast<int>(tokens.dims[0]);
  const int D = cfg.embed_dim;
  const int heads = cfg.n_heads;
  const int hd = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  std::vector<float> x = std::move(tokens.data);
  std::vector<float> normed, q, k, v, attn_out, proj, h1, h2;
  std::vector<double> scores(static_cast<std::size_t>(N));

  for (int layer = 0; layer < cfg.n_layers; ++layer) {
    const std::string p = "enc." + std::to_string(layer) + ".";
    detail::layer_norm(x, w.at(p + "ln1.g"), w.at(p + "ln1.b"), N, D, normed);
    detail::linear(normed, w.at(p + "attn.wq"), w.at(p + "attn.bq"), N, q);
    detail::linear(normed, w.at(p + "attn.wk"), w.at(p + "attn.bk"), N, k);
    detail::linear(normed, w.at(p + "attn.wv"), w.at(p + "attn.bv"), N, v);

    attn_out.assign(static_cast<std::size_t>(N) * D, 0.0f);
    for (int h = 0; h < heads; ++h) {
      const int off = h * hd;
      for (int i = 0; i < N; ++i) {
        const float* qi = q.data() + static_cast<std::size_t>(i) * D + off;
        double max_s = -1e300;
        for (int j = 0; j < N; ++j) {
          const float* kj = k.data() + static_cast<std::size_t>(j) * D + off;
          double s = 0.0;
          for (int d = 0; d < hd; ++d) s += static_cast<double>(qi[d]) * kj[d];
          s *= scale;
          scores[j] = s;
          if (s > max_s) max_s = s;
        }
        double denom = 0.0;
        for (int j = 0; j < N; ++j) {
          scores[j] = std::exp(scores[j] - max_s);
          denom += scores[j];
        }
        float* out = attn_out.data() + static_cast<std::size_t>(i) * D + off;
        for (int d = 0; d < hd; ++d) {
          double acc = 0.0;
          for (int j = 0; j < N; ++j)
            acc += scores[j] * v[static_cast<std::size_t>(j) * D + off + d];
          out[d] = static_cast<float>(acc / denom);
        }
      }
    }
    detail::linear(attn_out, w.at(p + "attn.wo"), w.at(p + "attn.bo"), N, proj);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += proj[i];

    detail::layer_norm(x, w.at(p + "ln2.g"), w.at(p + "ln2.b"), N, D, normed);
    detail::linear(normed, w.at(p + "mlp.w1"), w.at(p + "mlp.b1"), N, h1);
    for (auto& t : h1) t = static_cast<float>(detail::gelu(t));
    detail::linear(h1, w.at(p + "mlp.w2"), w.at(p + "mlp.b2"), N, h2);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += h2[i];
  }

  detail::layer_norm(x, w.at("ln_f.g"), w.at("ln_f.b"), N, D, normed);
  std::vector<float> cls_row(normed.begin(), normed.begin() + D);
  std::vector<float> logits;
  detail::linear(cls_row, w.at("head.w"), w.at("head.b"), 1, logits);
  return logits;
}

inline int argmax(const std::vector<float>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace cfe
