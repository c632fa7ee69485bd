#pragma once

// Experiment-grid harness: clips × methods × rate points, one CSV row per
// cell. Cells are pure and may run on a thread pool; rows are emitted in
// config order so identical configs produce byte-identical reports.
//
// Config is a flat key = value document ('#' comments, comma-separated
// lists):
//
//   clips    = a.cfvr, frames_dir      (required)
//   methods  = plain, cfe-v1, cfe-v2, pixel-shuffle   (required)
//   codec    = toy | external          (default toy)
//   codec_cmd = <template>             (external only; {w} {h} {f} {q} {coded})
//   qualities = 90, 50                 (exactly one of qualities/targets)
//   targets   = 0.8, 0.6, 0.4          (bpp targets, resolved on plain clips)
//   key_seed  = 42                     (default 1)
//   mb = 16                            (default 16)
//   sb = 8                             (default 8)
//   weights   = model.cfew             (optional; CFE_GRID_WEIGHTS overrides)
//   weights_seed = 1                   (used when no weights path; default 1)
//
// Per-cell keys are derived as splitmix(key_seed ^ (clip_index << 32) ^
// method_id) with method ids plain=0 cfe-v1=1 cfe-v2=2 pixel-shuffle=3, so
// reordering the method list does not change any cell's key stream.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cfe/adaptation.hpp"
#include "cfe/cipher.hpp"
#include "cfe/clip_io.hpp"
#include "cfe/codec.hpp"
#include "cfe/error.hpp"
#include "cfe/external_codec.hpp"
#include "cfe/keyschedule.hpp"
#include "cfe/metrics.hpp"
#include "cfe/vtcore.hpp"
#include "cfe/weights.hpp"

namespace cfe {

enum class Method { Plain = 0, CfeV1 = 1, CfeV2 = 2, PixelShuffle = 3 };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Plain: return "plain";
    case Method::CfeV1: return "cfe-v1";
    case Method::CfeV2: return "cfe-v2";
    case Method::PixelShuffle: return "pixel-shuffle";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "plain") return Method::Plain;
  if (s == "cfe-v1") return Method::CfeV1;
  if (s == "cfe-v2") return Method::CfeV2;
  if (s == "pixel-shuffle") return Method::PixelShuffle;
  throw ConfigError("unknown method: " + s);
}

struct GridConfig {
  std::vector<std::string> clips;
  std::vector<Method> methods;
  std::string codec = "toy";
  std::string codec_cmd;
  std::vector<int> qualities;
  std::vector<double> targets;
  std::uint64_t key_seed = 1;
  int mb = 16, sb = 8;
  std::string weights_path;
  std::uint64_t weights_seed = 1;
};

struct GridRow {
  std::string clip;
  std::string method;
  std::string codec;
  int quality = 0;
  std::optional<double> target_bpp;
  double bpp = 0.0;
  double psnr_compressed = 0.0;
  double psnr_decrypted = 0.0;
  double logit_delta = 0.0;
  int argmax_match = 0;
  std::string status = "ok";
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::string unquote(std::string v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
    v = v.substr(1, v.size() - 2);
  return v;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(unquote(item));
  }
  return out;
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const std::uint64_t r = std::stoull(v, &pos, 10);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": " + v);
  }
}

}  // namespace detail

inline GridConfig parse_grid_config(std::istream& is) {
  GridConfig cfg;
  bool saw_clips = false, saw_methods = false;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("grid config line " + std::to_string(line_no) +
                        ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "clips") {
      cfg.clips = detail::split_list(value);
      saw_clips = true;
    } else if (key == "methods") {
      cfg.methods.clear();
      for (const auto& m : detail::split_list(value))
        cfg.methods.push_back(method_from_string(m));
      saw_methods = true;
    } else if (key == "codec") {
      cfg.codec = detail::unquote(value);
    } else if (key == "codec_cmd") {
      cfg.codec_cmd = detail::unquote(value);
    } else if (key == "qualities") {
      for (const auto& q : detail::split_list(value))
        cfg.qualities.push_back(static_cast<int>(detail::parse_u64(q, key)));
    } else if (key == "targets") {
      for (const auto& t : detail::split_list(value)) {
        try {
          cfg.targets.push_back(std::stod(t));
        } catch (const std::exception&) {
          throw ConfigError("bad target bpp: " + t);
        }
      }
    } else if (key == "key_seed") {
      cfg.key_seed = detail::parse_u64(value, key);
    } else if (key == "mb") {
      cfg.mb = static_cast<int>(detail::parse_u64(value, key));
    } else if (key == "sb") {
      cfg.sb = static_cast<int>(detail::parse_u64(value, key));
    } else if (key == "weights") {
      cfg.weights_path = detail::unquote(value);
    } else if (key == "weights_seed") {
      cfg.weights_seed = detail::parse_u64(value, key);
    } else {
      throw ConfigError("grid config line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    }
  }
  if (!saw_clips || cfg.clips.empty()) throw ConfigError("grid config: no clips");
  if (!saw_methods || cfg.methods.empty()) throw ConfigError("grid config: no methods");
  if (cfg.qualities.empty() == cfg.targets.empty())
    throw ConfigError("grid config: exactly one of qualities/targets required");
  if (cfg.codec != "toy" && cfg.codec != "external")
    throw ConfigError("grid config: codec must be toy or external");
  if (cfg.codec == "external" && cfg.codec_cmd.empty())
    throw ConfigError("grid config: codec_cmd required for external codec");
  if (cfg.codec == "external" && !cfg.targets.empty())
    throw ConfigError("grid config: targets require the toy codec");
  if (const char* env = std::getenv("CFE_GRID_WEIGHTS"); env && *env)
    cfg.weights_path = env;
  return cfg;
}

inline GridConfig load_grid_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open grid config: " + path);
  return parse_grid_config(is);
}

namespace detail {

inline std::string fmt_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct CodecOutput {
  Clip decoded;
  double bpp = 0.0;
};

inline CodecOutput run_cell_codec(const GridConfig& cfg, const Clip& enc, int quality) {
  if (cfg.codec == "toy") {
    const CodedStream s = encode_intra(enc, quality);
    return {decode_intra(s), s.bpp()};
  }
  std::string cmd = cfg.codec_cmd;
  cmd = substitute(cmd, "{q}", std::to_string(quality));
  ExternalResult r = run_external(enc, cmd);
  return {std::move(r.decoded), r.bpp};
}

}  // namespace detail

// All grid cells in config order. Weights are loaded from cfg.weights_path
// when given, otherwise freshly initialized from cfg.weights_seed with the
// model geometry taken from the first clip and the grid MB size.
inline std::vector<GridRow> run_grid(const GridConfig& cfg, int jobs = 1) {
  std::vector<Clip> clips;
  clips.reserve(cfg.clips.size());
  for (const auto& path : cfg.clips) clips.push_back(load_clip(path));
  for (const auto& c : clips)
    if (!c.same_dims(clips[0]))
      throw DimensionError("grid: clips must share dimensions");

  ModelWeights plain_model;
  if (!cfg.weights_path.empty()) {
    plain_model = load_weights(cfg.weights_path);
  } else {
    VtConfig mc;
    mc.frames = clips[0].frames;
    mc.height = clips[0].height;
    mc.width = clips[0].width;
    mc.mb = cfg.mb;
    mc.seed = cfg.weights_seed;
    plain_model = init_weights(mc);
  }
  const VtConfig& mc = plain_model.config;
  if (mc.frames != clips[0].frames || mc.height != clips[0].height ||
      mc.width != clips[0].width || mc.mb != cfg.mb)
    throw ConfigError("grid: weights geometry does not match clips/mb");

  const int n_rates = static_cast<int>(
      cfg.targets.empty() ? cfg.qualities.size() : cfg.targets.size());

  // rate points resolve on the plain clip and are shared by all methods
  std::vector<std::vector<int>> quality_of(clips.size(),
                                           std::vector<int>(n_rates, 0));
  for (std::size_t ci = 0; ci < clips.size(); ++ci)
    for (int ri = 0; ri < n_rates; ++ri)
      quality_of[ci][ri] = cfg.targets.empty()
                               ? cfg.qualities[ri]
                               : rate_search(clips[ci], cfg.targets[ri]).quality;

  std::vector<std::vector<float>> ref_logits(clips.size());
  for (std::size_t ci = 0; ci < clips.size(); ++ci)
    ref_logits[ci] = forward(clips[ci], plain_model);

  struct Cell {
    std::size_t ci;
    std::size_t mi;
    int ri;
  };
  std::vector<Cell> cells;
  for (std::size_t ci = 0; ci < clips.size(); ++ci)
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi)
      for (int ri = 0; ri < n_rates; ++ri) cells.push_back({ci, mi, ri});

  std::vector<GridRow> rows(cells.size());
  const auto run_cell = [&](std::size_t idx) {
    const Cell& cell = cells[idx];
    const Clip& clip = clips[cell.ci];
    const Method method = cfg.methods[cell.mi];
    GridRow row;
    row.clip = cfg.clips[cell.ci];
    row.method = to_string(method);
    row.codec = cfg.codec;
    row.quality = quality_of[cell.ci][cell.ri];
    if (!cfg.targets.empty()) row.target_bpp = cfg.targets[cell.ri];
    try {
      SplitMix64 kdf(cfg.key_seed ^ (static_cast<std::uint64_t>(cell.ci) << 32) ^
                     static_cast<std::uint64_t>(method));
      const std::uint64_t k_st = kdf.next();
      const std::uint64_t k_ms = kdf.next();

      Clip enc;
      TransformPlan plan;
      if (method == Method::CfeV1 || method == Method::CfeV2) {
        const KeyMaterial keys{method == Method::CfeV1 ? KeyMode::V1 : KeyMode::V2,
                               k_st, k_ms, cfg.mb, cfg.sb};
        plan = expand(keys, BlockGrid::for_frame(clip.height, clip.width,
                                                 cfg.mb, cfg.mb, cfg.sb, cfg.sb));
        enc = encrypt(clip, plan);
      } else if (method == Method::PixelShuffle) {
        enc = pixel_shuffle(clip, k_st, Direction::Forward);
      } else {
        enc = clip;
      }

      const detail::CodecOutput coded = detail::run_cell_codec(cfg, enc, row.quality);
      row.bpp = coded.bpp;
      row.psnr_compressed = psnr(enc, coded.decoded);

      Clip recovered;
      std::vector<float> logits;
      switch (method) {
        case Method::Plain:
          recovered = coded.decoded;
          logits = forward(coded.decoded, plain_model);
          break;
        case Method::PixelShuffle:
          recovered = pixel_shuffle(coded.decoded, k_st, Direction::Inverse);
          logits = forward(recovered, plain_model);
          break;
        case Method::CfeV1:
        case Method::CfeV2: {
          recovered = decrypt(coded.decoded, plan);
          const AdaptedWeights adapted = adapt(plain_model, plan);
          logits = forward(coded.decoded, adapted);
          break;
        }
      }
      row.psnr_decrypted = psnr(clip, recovered);

      double delta = 0.0;
      const auto& ref = ref_logits[cell.ci];
      for (std::size_t i = 0; i < ref.size(); ++i)
        delta = std::max(delta, std::fabs(static_cast<double>(logits[i]) - ref[i]));
      row.logit_delta = delta;
      row.argmax_match = argmax(logits) == argmax(ref) ? 1 : 0;
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    rows[idx] = std::move(row);
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int nt = std::min<int>(jobs, static_cast<int>(cells.size()));
    pool.reserve(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cells.size()) return;
          run_cell(i);
        }
      });
    for (auto& t : pool) t.join();
  }
  return rows;
}

inline const char* kGridCsvHeader =
    "clip,method,codec,quality,target_bpp,bpp,psnr_compressed,psnr_decrypted,"
    "logit_delta,argmax_match,status";

inline void write_grid_csv(std::ostream& os, const std::vector<GridRow>& rows) {
  os << kGridCsvHeader << "\n";
  for (const auto& r : rows) {
    os << r.clip << ',' << r.method << ',' << r.codec << ',' << r.quality << ','
       << (r.target_bpp ? detail::fmt_metric(*r.target_bpp) : std::string()) << ','
       << detail::fmt_metric(r.bpp) << ',' << detail::fmt_metric(r.psnr_compressed)
       << ',' << detail::fmt_metric(r.psnr_decrypted) << ','
       << detail::fmt_metric(r.logit_delta) << ',' << r.argmax_match << ','
       << r.status << "\n";
  }
}

inline nlohmann::json grid_json(const std::vector<GridRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j;
    j["clip"] = r.clip;
    j["method"] = r.method;
    j["codec"] = r.codec;
    j["quality"] = r.quality;
    if (r.target_bpp) j["target_bpp"] = *r.target_bpp;
    j["bpp"] = r.bpp;
    j["psnr_compressed"] = detail::fmt_metric(r.psnr_compressed);
    j["psnr_decrypted"] = detail::fmt_metric(r.psnr_decrypted);
    j["logit_delta"] = r.logit_delta;
    j["argmax_match"] = r.argmax_match == 1;
    j["status"] = r.status;
    arr.push_back(std::move(j));
  }
  return arr;
}

// CSV rows back into structs; line numbers reported on malformed input.
inline std::vector<GridRow> read_grid_csv(std::istream& is) {
  std::string line;
  int line_no = 0;
  if (!std::getline(is, line)) throw FormatError("csv: empty input");
  ++line_no;
  if (detail::trim(line) != kGridCsvHeader)
    throw FormatError("csv line 1: unexpected header");
  std::vector<GridRow> rows;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    // status may contain commas; rejoin the tail
    if (f.size() < 11)
      throw FormatError("csv line " + std::to_string(line_no) + ": expected 11 fields");
    if (f.size() > 11)
      for (std::size_t i = 11; i < f.size(); ++i) f[10] += "," + f[i];
    GridRow r;
    try {
      r.clip = f[0];
      r.method = f[1];
      r.codec = f[2];
      r.quality = std::stoi(f[3]);
      if (!f[4].empty()) r.target_bpp = std::stod(f[4]);
      const auto num = [](const std::string& s) {
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        return std::stod(s);
      };
      r.bpp = num(f[5]);
      r.psnr_compressed = num(f[6]);
      r.psnr_decrypted = num(f[7]);
      r.logit_delta = num(f[8]);
      r.argmax_match = std::stoi(f[9]);
      r.status = f[10];
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError("csv line " + std::to_string(line_no) + ": malformed field");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// Method x quality summary: mean bpp and PSNR, logit pass rate at 1e-4 and
// argmax agreement, in first-appearance order. Markdown-ish fixed layout.
inline std::string render_report(const std::vector<GridRow>& rows) {
  struct Agg {
    std::string method, codec;
    int quality = 0;
    int n = 0, ok = 0, logit_pass = 0, argmax_pass = 0;
    double bpp = 0, psnr_c = 0, psnr_d = 0;
  };
  std::vector<Agg> groups;
  for (const auto& r : rows) {
    Agg* g = nullptr;
    for (auto& cand : groups)
      if (cand.method == r.method && cand.codec == r.codec && cand.quality == r.quality) {
        g = &cand;
        break;
      }
    if (!g) {
      groups.push_back({r.method, r.codec, r.quality, 0, 0, 0, 0, 0, 0, 0});
      g = &groups.back();
    }
    ++g->n;
    if (r.status == "ok") {
      ++g->ok;
      g->bpp += r.bpp;
      g->psnr_c += std::isinf(r.psnr_compressed) ? 99.0 : r.psnr_compressed;
      g->psnr_d += std::isinf(r.psnr_decrypted) ? 99.0 : r.psnr_decrypted;
      if (r.logit_delta <= 1e-4) ++g->logit_pass;
      if (r.argmax_match == 1) ++g->argmax_pass;
    }
  }
  std::ostringstream os;
  os << "| method | codec | quality | cells | bpp | psnr_comp | psnr_decr | "
        "logit<=1e-4 | argmax |\n";
  os << "|---|---|---|---|---|---|---|---|---|\n";
  char buf[256];
  for (const auto& g : groups) {
    const double n = g.ok > 0 ? g.ok : 1;
    std::snprintf(buf, sizeof buf,
                  "| %s | %s | %d | %d/%d | %.4f | %.2f | %.2f | %d/%d | %d/%d |\n",
                  g.method.c_str(), g.codec.c_str(), g.quality, g.ok, g.n,
                  g.bpp / n, g.psnr_c / n, g.psnr_d / n, g.logit_pass, g.ok,
                  g.argmax_pass, g.ok);
    os << buf;
  }
  return os.str();
}

}  // namespace cfe
