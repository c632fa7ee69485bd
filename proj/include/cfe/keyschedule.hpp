#pragma once

// Deterministic expansion of the two secret seeds into a TransformPlan.
//
// The draw order is part of the wire contract: ciphertexts and adapted
// weights are only interoperable if every implementation replays it
// identically. Per MB (once in V1): four parameter draws per SB
// (rotation %4, flip %3, invert %2, channel_perm %6), then a descending
// Fisher-Yates over SB slots from the same stream. The MB permutation
// comes from a fresh stream seeded with k_ms, so it depends on k_ms only.

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfe/error.hpp"
#include "cfe/geometry.hpp"

namespace cfe {

// SplitMix64. Bit-exact by definition; see next_u64.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Bounded draw; modulo bias is irrelevant at these ranges.
  std::uint32_t next_below(std::uint32_t n) {
    return static_cast<std::uint32_t>(next() % n);
  }

 private:
  std::uint64_t state_;
};

// Descending Fisher-Yates over 0..n-1.
inline std::vector<int> keyed_permutation(int n, SplitMix64& gen) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i >= 1; --i) {
    const int j = static_cast<int>(gen.next() % static_cast<std::uint64_t>(i + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

inline std::vector<int> invert_permutation(const std::vector<int>& p) {
  std::vector<int> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = static_cast<int>(i);
  return inv;
}

enum class KeyMode { V1, V2 };

inline const char* to_string(KeyMode m) { return m == KeyMode::V1 ? "V1" : "V2"; }

struct KeyMaterial {
  KeyMode mode = KeyMode::V1;
  std::uint64_t k_st = 0;  // SB-level transformations
  std::uint64_t k_ms = 0;  // MB scrambling
  int mb = 16;
  int sb = 8;
};

enum class Flip : std::uint8_t { None = 0, Horizontal = 1, Vertical = 2 };

// The 6 permutations of (R,G,B) in lexicographic order. Applied as a
// gather: out[c] = in[perm[c]].
inline constexpr std::array<std::array<int, 3>, 6> kChannelPerms = {{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

struct SbParams {
  int rotation = 0;              // quarter turns clockwise, 0..3
  Flip flip = Flip::None;
  bool invert = false;           // negative-positive inversion p -> 255-p
  int channel_perm = 0;          // index into kChannelPerms

  bool is_identity() const {
    return rotation == 0 && flip == Flip::None && !invert && channel_perm == 0;
  }
  bool operator==(const SbParams&) const = default;
};

// Inverse of a forward composite rotate -> flip -> invert -> channel perm.
// With a reflection present the spatial part is an involution; otherwise the
// rotation simply reverses. Inversion is its own inverse and the channel
// gather inverts to the inverse permutation, so the result is again SbParams.
inline SbParams inverse(const SbParams& p) {
  SbParams inv;
  inv.rotation = (p.flip == Flip::None) ? (4 - p.rotation) % 4 : p.rotation;
  inv.flip = p.flip;
  inv.invert = p.invert;
  const auto& fwd = kChannelPerms[p.channel_perm];
  std::array<int, 3> back{};
  for (int c = 0; c < 3; ++c) back[fwd[c]] = c;
  for (int i = 0; i < 6; ++i)
    if (kChannelPerms[i] == back) inv.channel_perm = i;
  return inv;
}

// Fully expanded per-block parameters. sb_params/sb_perm hold one entry in
// V1 (shared by all MBs) and mb_count entries in V2. mb_perm maps plaintext
// MB index m to its ciphertext grid position.
struct TransformPlan {
  BlockGrid grid;
  KeyMode mode = KeyMode::V1;
  std::vector<std::vector<SbParams>> sb_params;
  std::vector<std::vector<int>> sb_perm;
  std::vector<int> mb_perm;

  const std::vector<SbParams>& params_for(int mb) const {
    return sb_params[mode == KeyMode::V1 ? 0 : mb];
  }
  const std::vector<int>& sb_perm_for(int mb) const {
    return sb_perm[mode == KeyMode::V1 ? 0 : mb];
  }
};

inline TransformPlan expand(const KeyMaterial& keys, const BlockGrid& grid) {
  TransformPlan plan;
  plan.grid = grid;
  plan.mode = keys.mode;
  const int n_mb = grid.mb_count();
  const int n_sb = grid.sbs_per_mb();
  const int sets = keys.mode == KeyMode::V1 ? 1 : n_mb;

  SplitMix64 st(keys.k_st);
  plan.sb_params.resize(sets);
  plan.sb_perm.resize(sets);
  for (int m = 0; m < sets; ++m) {
    plan.sb_params[m].resize(n_sb);
    for (int s = 0; s < n_sb; ++s) {
      SbParams& p = plan.sb_params[m][s];
      p.rotation = static_cast<int>(st.next_below(4));
      p.flip = static_cast<Flip>(st.next_below(3));
      p.invert = st.next_below(2) != 0;
      p.channel_perm = static_cast<int>(st.next_below(6));
    }
    plan.sb_perm[m] = keyed_permutation(n_sb, st);
  }

  SplitMix64 ms(keys.k_ms);
  plan.mb_perm = keyed_permutation(n_mb, ms);
  return plan;
}

// Plan that undoes this one: encrypt(x, inverse_plan(p)) == decrypt(x, p).
// The inverse indexes by ciphertext MB position, so it is per-MB (V2 layout)
// whenever the MB permutation is nontrivial.
inline TransformPlan inverse_plan(const TransformPlan& plan) {
  TransformPlan inv;
  inv.grid = plan.grid;
  inv.mode = KeyMode::V2;
  const int n_mb = plan.grid.mb_count();
  const int n_sb = plan.grid.sbs_per_mb();
  inv.mb_perm = invert_permutation(plan.mb_perm);
  inv.sb_params.resize(n_mb);
  inv.sb_perm.resize(n_mb);
  for (int g = 0; g < n_mb; ++g) {
    const int m = inv.mb_perm[g];  // plaintext MB that landed at position g
    const auto& params = plan.params_for(m);
    const auto sigma_inv = invert_permutation(plan.sb_perm_for(m));
    inv.sb_perm[g] = sigma_inv;
    inv.sb_params[g].resize(n_sb);
    for (int q = 0; q < n_sb; ++q)
      inv.sb_params[g][q] = inverse(params[sigma_inv[q]]);
  }
  return inv;
}

// Key file: JSON with u64 seeds as decimal strings to sidestep integer
// precision pitfalls in consumers.
inline void write_key_file(const std::string& path, const KeyMaterial& k) {
  nlohmann::json j;
  j["mode"] = to_string(k.mode);
  j["k_st"] = std::to_string(k.k_st);
  j["k_ms"] = std::to_string(k.k_ms);
  j["mb"] = k.mb;
  j["sb"] = k.sb;
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
}

inline KeyMaterial read_key_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("key file: " + std::string(e.what()));
  }
  KeyMaterial k;
  try {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "V1")
      k.mode = KeyMode::V1;
    else if (mode == "V2")
      k.mode = KeyMode::V2;
    else
      throw FormatError("key file: unknown mode " + mode);
    auto seed = [&](const char* name) -> std::uint64_t {
      const auto& v = j.at(name);
      if (v.is_string()) return std::stoull(v.get<std::string>());
      return v.get<std::uint64_t>();  // lenient: plain numbers accepted
    };
    k.k_st = seed("k_st");
    k.k_ms = seed("k_ms");
    k.mb = j.value("mb", 16);
    k.sb = j.value("sb", 8);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("key file: " + std::string(e.what()));
  } catch (const std::invalid_argument&) {
    throw FormatError("key file: seed is not a decimal integer");
  } catch (const std::out_of_range&) {
    throw FormatError("key file: seed out of u64 range");
  }
  return k;
}

}  // namespace cfe
