#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "cfe/cfe.hpp"

namespace {

std::uint64_t fresh_u64() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string fmt6(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct PrepArgs {
  std::string resize;       // "WxH"
  int sample_frames = 0;    // 0 = keep all
  std::string order = "sample-first";
};

cfe::Clip apply_prep(cfe::Clip clip, const PrepArgs& prep) {
  const auto do_resize = [&](cfe::Clip c) {
    if (prep.resize.empty()) return c;
    int w = 0, h = 0;
    if (std::sscanf(prep.resize.c_str(), "%dx%d", &w, &h) != 2 || w < 1 || h < 1)
      throw cfe::ConfigError("bad --resize, expected WxH");
    return cfe::resize_bicubic(c, h, w);
  };
  const auto do_sample = [&](cfe::Clip c) {
    if (prep.sample_frames <= 0) return c;
    return cfe::sample_frames_uniform(c, prep.sample_frames);
  };
  if (prep.order == "sample-first") return do_resize(do_sample(std::move(clip)));
  if (prep.order == "resize-first") return do_sample(do_resize(std::move(clip)));
  throw cfe::ConfigError("bad --prep-order, expected sample-first or resize-first");
}

cfe::TransformPlan plan_for(const cfe::KeyMaterial& keys, const cfe::Clip& clip) {
  return cfe::expand(keys, cfe::BlockGrid::for_frame(clip.height, clip.width,
                                                     keys.mb, keys.mb, keys.sb,
                                                     keys.sb));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compression-friendly video encryption toolkit"};
  app.require_subcommand(1);

  // keygen
  auto* keygen = app.add_subcommand("keygen", "generate a key file");
  std::string kg_mode = "v1", kg_out;
  std::uint64_t kg_seed = 0;
  bool kg_seeded = false;
  int kg_mb = 16, kg_sb = 8;
  keygen->add_option("--mode", kg_mode, "v1 or v2")->check(CLI::IsMember({"v1", "v2"}));
  keygen->add_option("--out", kg_out, "output key file")->required();
  keygen->add_option("--seed", kg_seed, "derive seeds deterministically")
      ->each([&](const std::string&) { kg_seeded = true; });
  keygen->add_option("--mb", kg_mb, "main-block size");
  keygen->add_option("--sb", kg_sb, "sub-block size");

  // encrypt / decrypt
  auto* encrypt = app.add_subcommand("encrypt", "encrypt a clip");
  std::string en_in, en_key, en_out, en_baseline;
  PrepArgs en_prep;
  encrypt->add_option("--in", en_in)->required();
  encrypt->add_option("--key", en_key)->required();
  encrypt->add_option("--out", en_out)->required();
  encrypt->add_option("--resize", en_prep.resize, "resize to WxH before encryption");
  encrypt->add_option("--sample-frames", en_prep.sample_frames,
                      "uniformly sample N frames first");
  encrypt->add_option("--prep-order", en_prep.order,
                      "sample-first (default) or resize-first");
  encrypt->add_option("--baseline", en_baseline,
                      "pixel-shuffle: LCVE stand-in keyed by k_st");

  auto* decrypt = app.add_subcommand("decrypt", "decrypt a clip");
  std::string de_in, de_key, de_out, de_baseline;
  decrypt->add_option("--in", de_in)->required();
  decrypt->add_option("--key", de_key)->required();
  decrypt->add_option("--out", de_out)->required();
  decrypt->add_option("--baseline", de_baseline,
                      "pixel-shuffle: LCVE stand-in keyed by k_st");

  // adapt / infer / init-weights
  auto* adapt_cmd = app.add_subcommand("adapt", "adapt model weights to a key");
  std::string ad_weights, ad_key, ad_out;
  adapt_cmd->add_option("--weights", ad_weights)->required();
  adapt_cmd->add_option("--key", ad_key)->required();
  adapt_cmd->add_option("--out", ad_out)->required();

  auto* infer = app.add_subcommand("infer", "run the transformer on a clip");
  std::string in_weights, in_clip;
  infer->add_option("--weights", in_weights)->required();
  infer->add_option("--in", in_clip)->required();

  auto* initw = app.add_subcommand("init-weights", "create a seeded model");
  std::string iw_out;
  cfe::VtConfig iw_cfg;
  initw->add_option("--out", iw_out)->required();
  initw->add_option("--seed", iw_cfg.seed);
  initw->add_option("--frames", iw_cfg.frames);
  initw->add_option("--height", iw_cfg.height);
  initw->add_option("--width", iw_cfg.width);
  initw->add_option("--cube-depth", iw_cfg.T);
  initw->add_option("--mb", iw_cfg.mb);
  initw->add_option("--embed", iw_cfg.embed_dim);
  initw->add_option("--layers", iw_cfg.n_layers);
  initw->add_option("--heads", iw_cfg.n_heads);
  initw->add_option("--mlp", iw_cfg.mlp_ratio);
  initw->add_option("--classes", iw_cfg.n_classes);

  // compress / decompress / psnr / bpp
  auto* compress = app.add_subcommand("compress", "encode a clip");
  std::string co_in, co_out, co_codec = "toy", co_cmd, co_decoded;
  int co_q = 0;
  double co_target = 0.0;
  compress->add_option("--in", co_in)->required();
  compress->add_option("--out", co_out, "coded stream path")->required();
  compress->add_option("--q", co_q, "quality 1..100");
  compress->add_option("--target-bpp", co_target, "search quality for this bpp");
  compress->add_option("--codec", co_codec)->check(CLI::IsMember({"toy", "external"}));
  compress->add_option("--cmd", co_cmd, "external codec template");
  compress->add_option("--decoded", co_decoded, "also save the decoded round trip");

  auto* decompress = app.add_subcommand("decompress", "decode a coded stream");
  std::string dc_in, dc_out;
  decompress->add_option("--in", dc_in)->required();
  decompress->add_option("--out", dc_out)->required();

  auto* psnr_cmd = app.add_subcommand("psnr", "PSNR between two clips");
  std::string ps_a, ps_b;
  psnr_cmd->add_option("--a", ps_a)->required();
  psnr_cmd->add_option("--b", ps_b)->required();

  auto* bpp_cmd = app.add_subcommand("bpp", "bits per pixel of a coded stream");
  std::string bp_in;
  bpp_cmd->add_option("--in", bp_in)->required();

  // attack / grid / report
  auto* attack_cmd = app.add_subcommand("attack", "jigsaw attack on a ciphertext");
  std::string at_in, at_report, at_dump, at_ref;
  int at_grid = 16;
  attack_cmd->add_option("--in", at_in)->required();
  attack_cmd->add_option("--grid", at_grid, "MB size in pixels");
  attack_cmd->add_option("--report", at_report, "JSON report path");
  attack_cmd->add_option("--dump", at_dump, "save the reconstruction");
  attack_cmd->add_option("--ref", at_ref, "reference clip for scoring");

  auto* grid_cmd = app.add_subcommand("grid", "run an experiment grid");
  std::string gr_config, gr_out, gr_json;
  int gr_jobs = 1;
  grid_cmd->add_option("--config", gr_config)->required();
  grid_cmd->add_option("--out", gr_out, "CSV output path")->required();
  grid_cmd->add_option("--json", gr_json, "JSON output path");
  grid_cmd->add_option("--jobs", gr_jobs, "concurrent cells");

  auto* report_cmd = app.add_subcommand("report", "summarize a grid CSV");
  std::string re_csv, re_out;
  report_cmd->add_option("--csv", re_csv)->required();
  report_cmd->add_option("--out", re_out, "write table here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (keygen->parsed()) {
      cfe::KeyMaterial k;
      k.mode = kg_mode == "v2" ? cfe::KeyMode::V2 : cfe::KeyMode::V1;
      k.mb = kg_mb;
      k.sb = kg_sb;
      if (kg_seeded) {
        cfe::SplitMix64 g(kg_seed);
        k.k_st = g.next();
        k.k_ms = g.next();
      } else {
        k.k_st = fresh_u64();
        k.k_ms = fresh_u64();
      }
      cfe::write_key_file(kg_out, k);
      std::cout << "wrote " << kg_out << " (mode " << to_string(k.mode) << ")\n";
    } else if (encrypt->parsed()) {
      if (!en_baseline.empty() && en_baseline != "pixel-shuffle")
        throw cfe::ConfigError("unknown baseline: " + en_baseline);
      const cfe::KeyMaterial keys = cfe::read_key_file(en_key);
      const cfe::Clip clip = apply_prep(cfe::load_clip(en_in), en_prep);
      const cfe::Clip out =
          en_baseline.empty()
              ? cfe::encrypt(clip, plan_for(keys, clip))
              : cfe::pixel_shuffle(clip, keys.k_st, cfe::Direction::Forward);
      cfe::save_clip(en_out, out);
      std::cout << "wrote " << en_out << "\n";
    } else if (decrypt->parsed()) {
      if (!de_baseline.empty() && de_baseline != "pixel-shuffle")
        throw cfe::ConfigError("unknown baseline: " + de_baseline);
      const cfe::KeyMaterial keys = cfe::read_key_file(de_key);
      const cfe::Clip clip = cfe::load_clip(de_in);
      const cfe::Clip out =
          de_baseline.empty()
              ? cfe::decrypt(clip, plan_for(keys, clip))
              : cfe::pixel_shuffle(clip, keys.k_st, cfe::Direction::Inverse);
      cfe::save_clip(de_out, out);
      std::cout << "wrote " << de_out << "\n";
    } else if (adapt_cmd->parsed()) {
      const cfe::ModelWeights w = cfe::load_weights(ad_weights);
      const cfe::KeyMaterial keys = cfe::read_key_file(ad_key);
      cfe::save_weights(ad_out, cfe::adapt(w, keys));
      std::cout << "wrote " << ad_out << "\n";
    } else if (infer->parsed()) {
      const cfe::ModelWeights w = cfe::load_weights(in_weights);
      const std::vector<float> logits = cfe::forward(cfe::load_clip(in_clip), w);
      std::cout << "logits:";
      for (float v : logits) std::cout << ' ' << fmt6(v);
      std::cout << "\nargmax: " << cfe::argmax(logits) << "\n";
    } else if (initw->parsed()) {
      cfe::save_weights(iw_out, cfe::init_weights(iw_cfg));
      std::cout << "wrote " << iw_out << "\n";
    } else if (compress->parsed()) {
      const cfe::Clip clip = cfe::load_clip(co_in);
      if (co_codec == "external") {
        if (co_cmd.empty()) throw cfe::ConfigError("--cmd required for external codec");
        std::string cmd = co_cmd;
        if (co_q > 0) cmd = cfe::detail::substitute(cmd, "{q}", std::to_string(co_q));
        const cfe::ExternalResult r = cfe::run_external(clip, cmd, "", co_out);
        if (!co_decoded.empty()) cfe::save_clip(co_decoded, r.decoded);
        std::cout << "command: " << r.command << "\n";
        std::cout << "bpp: " << fmt6(r.bpp) << "\n";
      } else {
        int q = co_q;
        if (q == 0 && co_target > 0) {
          const cfe::RateSearchResult rs = cfe::rate_search(clip, co_target);
          q = rs.quality;
          if (rs.warning)
            std::cout << "warning: nearest achievable bpp " << fmt6(rs.bpp)
                      << " is outside 5% of target " << fmt6(co_target) << "\n";
        }
        if (q < 1 || q > 100)
          throw cfe::ConfigError("provide --q 1..100 or --target-bpp");
        const cfe::CodedStream s = cfe::encode_intra(clip, q);
        cfe::save_stream(co_out, s);
        if (!co_decoded.empty()) cfe::save_clip(co_decoded, cfe::decode_intra(s));
        std::cout << "quality: " << q << "\n";
        std::cout << "bpp: " << fmt6(s.bpp()) << "\n";
      }
    } else if (decompress->parsed()) {
      cfe::save_clip(dc_out, cfe::decode_intra(cfe::load_stream(dc_in)));
      std::cout << "wrote " << dc_out << "\n";
    } else if (psnr_cmd->parsed()) {
      std::cout << "psnr: " << fmt6(cfe::psnr(cfe::load_clip(ps_a), cfe::load_clip(ps_b)))
                << "\n";
    } else if (bpp_cmd->parsed()) {
      std::cout << "bpp: " << fmt6(cfe::load_stream(bp_in).bpp()) << "\n";
    } else if (attack_cmd->parsed()) {
      const cfe::Clip enc = cfe::load_clip(at_in);
      const cfe::BlockGrid grid = cfe::BlockGrid::for_frame(
          enc.height, enc.width, at_grid, at_grid, at_grid, at_grid);
      const cfe::Clip recon = cfe::assemble_clip(enc, grid);
      if (!at_dump.empty()) cfe::save_clip(at_dump, recon);
      nlohmann::json j;
      j["mb"] = at_grid;
      j["grid_rows"] = grid.grid_rows;
      j["grid_cols"] = grid.grid_cols;
      j["frames"] = enc.frames;
      j["chance_level"] = cfe::chance_level(grid);
      if (!at_ref.empty()) {
        const double score = cfe::attack_score(cfe::load_clip(at_ref), recon, grid);
        j["score"] = score;
        std::cout << "score: " << fmt6(score) << "\n";
      }
      std::cout << "chance_level: " << fmt6(cfe::chance_level(grid)) << "\n";
      if (!at_report.empty()) {
        std::ofstream os(at_report);
        if (!os) throw cfe::Error("cannot open for writing: " + at_report);
        os << j.dump(2) << "\n";
      }
    } else if (grid_cmd->parsed()) {
      const cfe::GridConfig cfg = cfe::load_grid_config(gr_config);
      const std::vector<cfe::GridRow> rows = cfe::run_grid(cfg, gr_jobs);
      std::ofstream os(gr_out);
      if (!os) throw cfe::Error("cannot open for writing: " + gr_out);
      cfe::write_grid_csv(os, rows);
      if (!gr_json.empty()) {
        std::ofstream js(gr_json);
        if (!js) throw cfe::Error("cannot open for writing: " + gr_json);
        js << cfe::grid_json(rows).dump(2) << "\n";
      }
      std::cout << "wrote " << rows.size() << " rows to " << gr_out << "\n";
    } else if (report_cmd->parsed()) {
      std::ifstream is(re_csv);
      if (!is) throw cfe::Error("cannot open: " + re_csv);
      const std::string table = cfe::render_report(cfe::read_grid_csv(is));
      if (re_out.empty()) {
        std::cout << table;
      } else {
        std::ofstream os(re_out);
        if (!os) throw cfe::Error("cannot open for writing: " + re_out);
        os << table;
      }
    }
  } catch (const cfe::FeatureUnavailable& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const cfe::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
