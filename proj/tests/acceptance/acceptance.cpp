// Acceptance gate. Runs the seven release criteria end to end and prints one
// PASS/FAIL line per criterion; exits nonzero if any criterion fails.
//
// Thresholds are frozen. Criteria 3, 4 and 6 operate on seeded synthetic
// scenes, so the measured margins are deterministic on a given platform.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cfe/cfe.hpp"
#include "support/synth.hpp"
#include "support/tmpdir.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int g_failures = 0;

void report(int n, bool ok, const std::string& text) {
  std::printf("%s: criterion %d - %s\n", ok ? "PASS" : "FAIL", n, text.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// --- criterion 1: encrypt/decrypt round trip ------------------------------

void criterion1() {
  const auto t0 = Clock::now();
  cfe::SplitMix64 rng(0xACCE5501ULL);
  int bad = -1;
  for (int trial = 0; trial < 100; ++trial) {
    const int frames = 1 + static_cast<int>(rng.next_below(8));
    const int h = 16 * (1 + static_cast<int>(rng.next_below(4)));
    const int w = 16 * (1 + static_cast<int>(rng.next_below(4)));
    const cfe::Clip clip = testsupport::noise_clip(rng.next(), frames, h, w);
    cfe::KeyMaterial keys;
    keys.mode = rng.next_below(2) ? cfe::KeyMode::V2 : cfe::KeyMode::V1;
    keys.k_st = rng.next();
    keys.k_ms = rng.next();
    const auto grid = cfe::BlockGrid::for_frame(h, w, keys.mb, keys.sb);
    const auto plan = cfe::expand(keys, grid);
    const cfe::Clip back = cfe::decrypt(cfe::encrypt(clip, plan), plan);
    if (!back.same_dims(clip) || back.samples != clip.samples) {
      bad = trial;
      break;
    }
  }
  const double dt = seconds_since(t0);
  const bool ok = bad < 0 && dt < 10.0;
  std::string msg = "round-trip law, 100 random (clip, key, mode) triples";
  if (bad >= 0) msg += ", mismatch at trial " + std::to_string(bad);
  msg += " (" + fmt(dt, 2) + " s, limit 10 s)";
  report(1, ok, msg);
}

// --- criterion 2: adaptation equivalence ----------------------------------

void criterion2() {
  const auto t0 = Clock::now();
  cfe::SplitMix64 rng(0xACCE5502ULL);
  cfe::VtConfig cfg;
  cfg.frames = 4;
  cfg.height = 32;
  cfg.width = 32;
  const auto grid = cfe::BlockGrid::for_frame(cfg.height, cfg.width, 16, 8);

  double worst = 0.0;
  int argmax_miss = 0;
  for (int pair = 0; pair < 50; ++pair) {
    cfg.seed = rng.next();
    const cfe::ModelWeights model = cfe::init_weights(cfg);
    const cfe::Clip clip =
        testsupport::natural_clip(rng.next(), cfg.frames, cfg.height, cfg.width);
    const std::vector<float> ref = cfe::forward(clip, model);

    for (const cfe::KeyMode mode : {cfe::KeyMode::V1, cfe::KeyMode::V2}) {
      cfe::KeyMaterial keys;
      keys.mode = mode;
      keys.k_st = rng.next();
      keys.k_ms = rng.next();
      const auto plan = cfe::expand(keys, grid);
      const cfe::Clip enc = cfe::encrypt(clip, plan);
      const cfe::AdaptedWeights adapted = cfe::adapt(model, plan);
      const std::vector<float> out = cfe::forward(enc, adapted);
      for (std::size_t i = 0; i < ref.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(out[i]) - ref[i]));
      if (cfe::argmax(out) != cfe::argmax(ref)) ++argmax_miss;
    }
  }
  const double dt = seconds_since(t0);
  const bool ok = worst <= 1e-4 && argmax_miss == 0 && dt < 120.0;
  std::ostringstream msg;
  msg << "adaptation equivalence, 50 pairs x {V1,V2}, max |dlogit| "
      << std::scientific << worst << " (limit 1e-4), argmax misses "
      << argmax_miss << " (" << fmt(dt, 1) << " s, limit 120 s)";
  report(2, ok, msg.str());
}

// --- criteria 3 and 4: rate/distortion ordering ---------------------------

struct RdCell {
  double target = 0.0;
  double plain_bpp = 0.0, cfe_bpp = 0.0, shuffle_bpp = 0.0;
  double plain_psnr = 0.0, cfe_psnr = 0.0, shuffle_psnr = 0.0;
};

struct RdSweep {
  std::vector<RdCell> cells;
};

RdSweep rd_sweep() {
  RdSweep sweep;
  cfe::SplitMix64 rng(0xACCE5503ULL);
  const double targets[] = {0.8, 0.6, 0.4};
  for (int ci = 0; ci < 5; ++ci) {
    const cfe::Clip clip = testsupport::smooth_clip(900 + ci, 4, 128, 128);
    const auto grid = cfe::BlockGrid::for_frame(128, 128, 16, 8);

    cfe::KeyMaterial keys;
    keys.mode = cfe::KeyMode::V1;
    keys.k_st = rng.next();
    keys.k_ms = rng.next();
    const auto plan = cfe::expand(keys, grid);
    const cfe::Clip enc = cfe::encrypt(clip, plan);
    const std::uint64_t shuffle_seed = rng.next();
    const cfe::Clip shuffled =
        cfe::pixel_shuffle(clip, shuffle_seed, cfe::Direction::Forward);

    for (const double target : targets) {
      RdCell cell;
      cell.target = target;
      const int q = cfe::rate_search(clip, target).quality;

      const cfe::CodedStream plain_coded = cfe::encode_intra(clip, q);
      cell.plain_bpp = plain_coded.bpp();
      cell.plain_psnr = cfe::psnr(clip, cfe::decode_intra(plain_coded));

      const cfe::CodedStream cfe_coded = cfe::encode_intra(enc, q);
      cell.cfe_bpp = cfe_coded.bpp();
      cell.cfe_psnr = cfe::psnr(clip, cfe::decrypt(cfe::decode_intra(cfe_coded), plan));

      cell.shuffle_bpp = cfe::encode_intra(shuffled, q).bpp();
      const int qs = cfe::rate_search(shuffled, cell.cfe_bpp).quality;
      const cfe::Clip shuffle_dec = cfe::decode_intra(cfe::encode_intra(shuffled, qs));
      cell.shuffle_psnr =
          cfe::psnr(clip, cfe::pixel_shuffle(shuffle_dec, shuffle_seed,
                                             cfe::Direction::Inverse));
      sweep.cells.push_back(cell);
    }
  }
  return sweep;
}

void criterion3(const RdSweep& sweep) {
  double worst_gap = -1e9;    // plain_psnr - cfe_psnr, must stay <= 3 dB
  double worst_margin = 1e9;  // cfe_psnr - shuffle_psnr, must stay >= 6 dB
  for (const RdCell& c : sweep.cells) {
    worst_gap = std::max(worst_gap, c.plain_psnr - c.cfe_psnr);
    worst_margin = std::min(worst_margin, c.cfe_psnr - c.shuffle_psnr);
  }
  const bool ok = worst_gap <= 3.0 && worst_margin >= 6.0;
  report(3, ok,
         "rate/distortion ordering over 5 clips x {0.8, 0.6, 0.4} bpp, "
         "plain-vs-CFE gap " +
             fmt(worst_gap, 2) + " dB (limit 3), CFE-vs-shuffle margin " +
             fmt(worst_margin, 2) + " dB (limit 6)");
}

void criterion4(const RdSweep& sweep) {
  double worst_ratio_cfe = 0.0;
  double worst_ratio_shuffle = 1e9;
  for (const RdCell& c : sweep.cells) {
    worst_ratio_cfe = std::max(worst_ratio_cfe, c.cfe_bpp / c.plain_bpp);
    worst_ratio_shuffle = std::min(worst_ratio_shuffle, c.shuffle_bpp / c.plain_bpp);
  }
  const bool ok = worst_ratio_cfe <= 1.15 && worst_ratio_shuffle >= 2.0;
  report(4, ok,
         "bpp fidelity at equal quality, CFE/plain <= " + fmt(worst_ratio_cfe) +
             " (limit 1.15), shuffle/plain >= " + fmt(worst_ratio_shuffle) +
             " (limit 2)");
}

// --- criterion 5: PSNR anchor ---------------------------------------------

void criterion5() {
  const cfe::Clip a = testsupport::constant_clip(2, 16, 16, 100);
  const cfe::Clip b = testsupport::constant_clip(2, 16, 16, 101);
  const double v = cfe::psnr(a, b);
  const double expect = 48.130803609;
  const bool ok = std::abs(v - expect) <= 1e-3;
  report(5, ok,
         "PSNR unit anchor, off-by-one clip = " + fmt(v, 6) + " dB (48.1308 +- 1e-3)");
}

// --- criterion 6: reassembly attack ordering ------------------------------

void criterion6() {
  const auto t0 = Clock::now();
  cfe::SplitMix64 rng(0xACCE5506ULL);
  const auto grid = cfe::BlockGrid::for_frame(64, 64, 16, 8);
  const double chance = cfe::chance_level(grid);

  double v1_plain = 0.0, v1_comp = 0.0, v2_plain = 0.0;
  const int n_clips = 5;
  int frames_seen = 0, q_low = 100;
  for (int ci = 0; ci < n_clips; ++ci) {
    const cfe::Clip clip = testsupport::smooth_clip(700 + ci, 4, 64, 64);
    frames_seen += clip.frames;
    // lowest quality in this sweep's rate grid, resolved on the plain clip
    const int ql = cfe::rate_search(clip, 0.4).quality;
    q_low = std::min(q_low, ql);

    cfe::KeyMaterial keys;
    keys.k_st = rng.next();
    keys.k_ms = rng.next();

    for (const cfe::KeyMode mode : {cfe::KeyMode::V1, cfe::KeyMode::V2}) {
      keys.mode = mode;
      const auto plan = cfe::expand(keys, grid);
      cfe::TransformPlan ref_plan = plan;
      std::iota(ref_plan.mb_perm.begin(), ref_plan.mb_perm.end(), 0);
      const cfe::Clip reference = cfe::encrypt(clip, ref_plan);
      const cfe::Clip enc = cfe::encrypt(clip, plan);

      const double score =
          cfe::attack_score(reference, cfe::assemble_clip(enc, grid), grid);
      if (mode == cfe::KeyMode::V1) {
        v1_plain += score;
        const cfe::Clip dec = cfe::decode_intra(cfe::encode_intra(enc, ql));
        v1_comp += cfe::attack_score(reference, cfe::assemble_clip(dec, grid), grid);
      } else {
        v2_plain += score;
      }
    }
  }
  v1_plain /= n_clips;
  v1_comp /= n_clips;
  v2_plain /= n_clips;

  const double dt = seconds_since(t0);
  const bool ok = v1_plain > v1_comp && v1_plain > v2_plain &&
                  v2_plain <= 2.0 * chance && frames_seen >= 20 && dt < 120.0;
  report(6, ok,
         "attack ordering over " + std::to_string(frames_seen) +
             " frames, V1 uncompressed " + fmt(v1_plain) + " > V1 at q<=" +
             std::to_string(q_low) + " " + fmt(v1_comp) + " and > V2 " +
             fmt(v2_plain) + ", chance " + fmt(chance) + " (V2 limit 2x chance, " +
             fmt(dt, 1) + " s)");
}

// --- criterion 7: determinism ---------------------------------------------

struct SbVec {
  int rotation, flip, invert, channel_perm;
};

bool params_match(const std::vector<cfe::SbParams>& got, const SbVec (&want)[4]) {
  for (int s = 0; s < 4; ++s) {
    const cfe::SbParams& p = got[static_cast<std::size_t>(s)];
    if (p.rotation != want[s].rotation ||
        static_cast<int>(p.flip) != want[s].flip ||
        static_cast<int>(p.invert) != want[s].invert ||
        p.channel_perm != want[s].channel_perm)
      return false;
  }
  return true;
}

bool keyschedule_vectors_ok(std::string& why) {
  // splitmix64, seed 0, first outputs.
  const std::uint64_t sm0[4] = {0xE220A8397B1DCDAFULL, 0x6E789E6AA1B965F4ULL,
                                0x06C45D188009454FULL, 0xF88BB8A8724C81ECULL};
  cfe::SplitMix64 g(0);
  for (int i = 0; i < 4; ++i)
    if (g.next() != sm0[i]) {
      why = "splitmix64 seed-0 vector mismatch at index " + std::to_string(i);
      return false;
    }

  // Full expansion for k_st=7, k_ms=7 on a 32x32 frame (2x2 MBs, 2x2 SBs).
  const auto grid = cfe::BlockGrid::for_frame(32, 32, 16, 8);
  cfe::KeyMaterial keys;
  keys.mode = cfe::KeyMode::V2;
  keys.k_st = 7;
  keys.k_ms = 7;
  const auto plan = cfe::expand(keys, grid);

  const SbVec want_params[4][4] = {
      {{3, 0, 0, 3}, {2, 0, 0, 0}, {1, 2, 1, 4}, {2, 1, 0, 0}},
      {{0, 1, 1, 5}, {3, 2, 1, 0}, {3, 0, 1, 4}, {0, 0, 0, 3}},
      {{3, 1, 1, 1}, {0, 2, 0, 4}, {3, 0, 0, 2}, {2, 2, 0, 2}},
      {{3, 2, 0, 0}, {2, 1, 0, 3}, {3, 0, 1, 1}, {2, 1, 1, 4}}};
  const std::vector<std::vector<int>> want_sb_perm = {
      {0, 1, 2, 3}, {0, 1, 2, 3}, {2, 0, 1, 3}, {2, 3, 0, 1}};
  const std::vector<int> want_mb_perm = {1, 2, 0, 3};

  for (int m = 0; m < 4; ++m) {
    if (!params_match(plan.sb_params[static_cast<std::size_t>(m)], want_params[m])) {
      why = "V2 SB params mismatch at MB " + std::to_string(m);
      return false;
    }
    if (plan.sb_perm[static_cast<std::size_t>(m)] !=
        want_sb_perm[static_cast<std::size_t>(m)]) {
      why = "V2 SB permutation mismatch at MB " + std::to_string(m);
      return false;
    }
  }
  if (plan.mb_perm != want_mb_perm) {
    why = "MB permutation mismatch for k_ms=7";
    return false;
  }

  keys.mode = cfe::KeyMode::V1;
  const auto plan1 = cfe::expand(keys, grid);
  if (plan1.sb_params.size() != 1 || plan1.sb_perm.size() != 1 ||
      !params_match(plan1.sb_params[0], want_params[0]) ||
      plan1.sb_perm[0] != want_sb_perm[0]) {
    why = "V1 expansion does not match the shared first draw set";
    return false;
  }

  keys.k_ms = 99;
  const auto plan99 = cfe::expand(keys, grid);
  if (plan99.mb_perm != std::vector<int>{2, 1, 0, 3}) {
    why = "MB permutation mismatch for k_ms=99";
    return false;
  }
  return true;
}

void criterion7() {
  std::string why;
  const bool vectors_ok = keyschedule_vectors_ok(why);

  testsupport::TmpDir tmp;
  cfe::save_clip(tmp.file("a.cfvr"), testsupport::natural_clip(31, 4, 32, 32));
  cfe::save_clip(tmp.file("b.cfvr"), testsupport::natural_clip(32, 4, 32, 32));

  cfe::GridConfig cfg;
  cfg.clips = {tmp.file("a.cfvr"), tmp.file("b.cfvr")};
  cfg.methods = {cfe::Method::Plain, cfe::Method::CfeV1, cfe::Method::CfeV2,
                 cfe::Method::PixelShuffle};
  cfg.qualities = {45, 75};
  cfg.key_seed = 11;
  cfg.weights_seed = 5;

  const auto csv_of = [](const std::vector<cfe::GridRow>& rows) {
    std::ostringstream os;
    cfe::write_grid_csv(os, rows);
    return os.str();
  };
  const std::string first = csv_of(cfe::run_grid(cfg, 1));
  const std::string second = csv_of(cfe::run_grid(cfg, 2));
  const bool csv_ok = !first.empty() && first == second;

  std::string msg = "determinism, ";
  msg += csv_ok ? "grid CSV byte-identical across reruns"
                : "grid CSV differs between reruns";
  msg += vectors_ok ? ", key-schedule vectors match"
                    : ", key-schedule vectors: " + why;
  report(7, csv_ok && vectors_ok, msg);
}

}  // namespace

int main() {
  RdSweep sweep;
  bool sweep_ok = false;
  std::string sweep_err;

  const auto guarded = [&](int n, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(n, false, std::string("unexpected exception: ") + e.what());
    }
  };

  guarded(1, [] { criterion1(); });
  guarded(2, [] { criterion2(); });
  try {
    sweep = rd_sweep();
    sweep_ok = true;
  } catch (const std::exception& e) {
    sweep_err = e.what();
  }
  if (sweep_ok) {
    guarded(3, [&] { criterion3(sweep); });
    guarded(4, [&] { criterion4(sweep); });
  } else {
    report(3, false, "rate sweep failed: " + sweep_err);
    report(4, false, "rate sweep failed: " + sweep_err);
  }
  guarded(5, [] { criterion5(); });
  guarded(6, [] { criterion6(); });
  guarded(7, [] { criterion7(); });

  return g_failures == 0 ? 0 : 1;
}
