#pragma once

// Named-tensor weight bundles and the ".cfew" container.
//
// Layout: magic "CFEW", little-endian u32 version=1, u32 tensor count, then
// per tensor: u32 name length, UTF-8 name, u32 rank, u32 dims[rank], raw
// little-endian 32-bit floats. Tensors are stored in lexicographic name
// order. The model config record travels as a pseudo-tensor named "config".
//
// Canonical tensor names:
//   embed.kernel   (embed_dim, 3, T, mb, mb), or per-grid-position
//                  (grid_rows*grid_cols, embed_dim, 3, T, mb, mb) after
//                  V2 adaptation
//   embed.bias     (embed_dim)
//   cls            (embed_dim)
//   pos            (1 + t_tokens*grid_rows*grid_cols, embed_dim), row 0 = class token
//   enc.{i}.ln1.{g,b}, enc.{i}.attn.{wq,bq,wk,bk,wv,bv,wo,bo},
//   enc.{i}.ln2.{g,b}, enc.{i}.mlp.{w1,b1,w2,b2}
//   ln_f.{g,b}
//   head.{w,b}     (n_classes, embed_dim), (n_classes)

#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "cfe/error.hpp"

namespace cfe {

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::uint32_t> d) : dims(std::move(d)) {
    std::size_t n = 1;
    for (auto v : dims) n *= v;
    data.assign(n, 0.0f);
  }

  std::size_t size() const { return data.size(); }

  template <class... Ix>
  std::size_t offset(Ix... ix) const {
    const std::size_t idx[] = {static_cast<std::size_t>(ix)...};
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizeof...(Ix); ++k) off = off * dims[k] + idx[k];
    return off;
  }
  template <class... Ix>
  float& at(Ix... ix) { return data[offset(ix...)]; }
  template <class... Ix>
  float at(Ix... ix) const { return data[offset(ix...)]; }
};

struct VtConfig {
  int frames = 8, height = 64, width = 64;
  int T = 2;        // cube depth in frames
  int mb = 16;      // spatial patch (MB) size
  int embed_dim = 32;
  int n_layers = 2;
  int n_heads = 4;
  int mlp_ratio = 2;
  int n_classes = 10;
  std::uint64_t seed = 1;

  int t_tokens() const { return frames / T; }
  int grid_rows() const { return height / mb; }
  int grid_cols() const { return width / mb; }
  int grid_cells() const { return grid_rows() * grid_cols(); }
  int n_tokens() const { return t_tokens() * grid_cells(); }

  void validate() const {
    if (frames <= 0 || height <= 0 || width <= 0)
      throw DimensionError("vt config: dimensions must be positive");
    if (T <= 0 || frames % T != 0)
      throw DimensionError("vt config: frames must be a multiple of T");
    if (mb <= 0 || height % mb != 0 || width % mb != 0)
      throw DimensionError("vt config: frame size must be a multiple of the MB size");
    if (n_heads <= 0 || embed_dim % n_heads != 0)
      throw DimensionError("vt config: embed_dim must be a multiple of n_heads");
    if (n_layers < 0 || mlp_ratio <= 0 || n_classes <= 0)
      throw DimensionError("vt config: bad layer/mlp/class counts");
  }
};

struct ModelWeights {
  VtConfig config;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("missing tensor: " + name);
    return it->second;
  }
  Tensor& at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("missing tensor: " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return tensors.count(name) != 0; }

  // Rank 6 means one kernel per grid position (V2 adaptation).
  bool per_position_kernel() const { return at("embed.kernel").dims.size() == 6; }
};

// Adapted bundles share the schema; only the kernel rank and pos rows differ.
using AdaptedWeights = ModelWeights;

namespace detail {

inline void put_u32le_w(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
               static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}

inline std::uint32_t get_u32le_w(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(std::string("cfew: truncated while reading ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline Tensor config_tensor(const VtConfig& c) {
  Tensor t({10});
  const int v[10] = {c.frames, c.height, c.width, c.T, c.mb, c.embed_dim,
                     c.n_layers, c.n_heads, c.mlp_ratio, c.n_classes};
  for (int i = 0; i < 10; ++i) t.data[i] = static_cast<float>(v[i]);
  return t;
}

inline VtConfig config_from_tensor(const Tensor& t) {
  if (t.size() != 10) throw FormatError("cfew: malformed config tensor");
  VtConfig c;
  int v[10];
  for (int i = 0; i < 10; ++i) v[i] = static_cast<int>(t.data[i]);
  c.frames = v[0]; c.height = v[1]; c.width = v[2]; c.T = v[3]; c.mb = v[4];
  c.embed_dim = v[5]; c.n_layers = v[6]; c.n_heads = v[7]; c.mlp_ratio = v[8];
  c.n_classes = v[9];
  return c;
}

}  // namespace detail

inline void save_weights(const std::string& path, const ModelWeights& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  os.write("CFEW", 4);
  detail::put_u32le_w(os, 1);  // version
  std::map<std::string, const Tensor*> all;
  for (const auto& [name, t] : w.tensors) all[name] = &t;
  const Tensor cfg = detail::config_tensor(w.config);
  all["config"] = &cfg;
  detail::put_u32le_w(os, static_cast<std::uint32_t>(all.size()));
  for (const auto& [name, t] : all) {
    detail::put_u32le_w(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32le_w(os, static_cast<std::uint32_t>(t->dims.size()));
    for (auto d : t->dims) detail::put_u32le_w(os, d);
    os.write(reinterpret_cast<const char*>(t->data.data()),
             static_cast<std::streamsize>(t->data.size() * sizeof(float)));
  }
  if (!os) throw Error("write failed: " + path);
}

inline ModelWeights load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "CFEW")
    throw FormatError("cfew: bad magic in " + path);
  const std::uint32_t version = detail::get_u32le_w(is, "version");
  if (version != 1) throw FormatError("cfew: unsupported version in " + path);
  const std::uint32_t count = detail::get_u32le_w(is, "tensor count");
  ModelWeights w;
  bool have_config = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = detail::get_u32le_w(is, "name length");
    if (name_len > 4096) throw FormatError("cfew: implausible tensor name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw FormatError("cfew: truncated tensor name");
    const std::uint32_t rank = detail::get_u32le_w(is, "rank");
    if (rank > 8) throw FormatError("cfew: implausible tensor rank");
    Tensor t;
    t.dims.resize(rank);
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims[r] = detail::get_u32le_w(is, "dim");
      n *= t.dims[r];
    }
    if (n > (1ull << 31)) throw FormatError("cfew: implausible tensor size");
    t.data.resize(n);
    if (!is.read(reinterpret_cast<char*>(t.data.data()),
                 static_cast<std::streamsize>(n * sizeof(float))))
      throw FormatError("cfew: truncated tensor data for " + name);
    if (name == "config") {
      w.config = detail::config_from_tensor(t);
      have_config = true;
    } else {
      w.tensors.emplace(std::move(name), std::move(t));
    }
  }
  if (!have_config) throw FormatError("cfew: missing config tensor in " + path);
  w.config.validate();
  return w;
}

}  // namespace cfe
