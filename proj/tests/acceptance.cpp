// Acceptance suite: one pass/fail line per criterion, exit 0 iff all pass.
// Everything here runs on generated data at desk scale.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "segkit/pipeline.hpp"

using namespace segkit;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, bool ok, const std::string& name, const std::string& detail = "") {
  std::printf("%s - criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", id, name.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return "<missing:" + path + ">";
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  auto p = fs::temp_directory_path() / "segkit_acceptance";
  return p;
}

// --- 1: published (P, R) pairs reproduce the published F1 and R-value ---------
void criterion_1() {
  struct Row {
    double p, r, f1, rv;
  };
  const std::vector<Row> rows = {
      // TIMIT and Buckeye rows of the conventional-metric comparison
      {0.9110, 0.8810, 0.8960, 0.9080}, {0.9403, 0.9046, 0.9222, 0.9279},
      {0.9342, 0.9596, 0.9467, 0.9518}, {0.9488, 0.9588, 0.9538, 0.9605},
      {0.9563, 0.9477, 0.9520, 0.9582}, {0.8780, 0.8330, 0.8550, 0.8717},
      {0.8540, 0.8912, 0.8723, 0.8876}, {0.8849, 0.9033, 0.8940, 0.9090},
      {0.8981, 0.9246, 0.9112, 0.9224}, {0.8992, 0.8994, 0.8993, 0.9140},
  };
  bool ok = true;
  double worst = 0;
  for (const auto& row : rows) {
    const double df = std::abs(f1_score(row.p, row.r) - row.f1);
    const double dr = std::abs(r_value(row.p, row.r) - row.rv);
    worst = std::max({worst, df, dr});
    if (df > 0.001 || dr > 0.001) ok = false;
  }
  // spot anchors
  ok = ok && std::abs(f1_score(0.9563, 0.9477) - 0.9520) <= 0.001;
  ok = ok && std::abs(r_value(0.9563, 0.9477) - 0.9582) <= 0.001;
  ok = ok && std::abs(f1_score(0.9110, 0.8810) - 0.8960) <= 0.001;
  ok = ok && std::abs(r_value(0.9110, 0.8810) - 0.9080) <= 0.001;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "max |error| %.5f over %zu rows", worst, rows.size());
  report(1, ok, "published P/R pairs reproduce F1 and R-value within 0.001", buf);
}

// --- 2: greedy sequential matching equals maximum bipartite matching ----------
void criterion_2() {
  std::mt19937_64 rng(2024);
  auto random_set = [&rng]() {
    const int n = static_cast<int>(rng() % 9);
    std::vector<bool> taken(21, false);
    std::vector<std::int64_t> out;
    while (static_cast<int>(out.size()) < n) {
      const auto f = static_cast<std::int64_t>(rng() % 21);
      if (!taken[static_cast<std::size_t>(f)]) {
        taken[static_cast<std::size_t>(f)] = true;
        out.push_back(f);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  const int n_instances = 20000;
  bool ok = true;
  for (int it = 0; it < n_instances && ok; ++it) {
    const auto a = random_set();
    const auto b = random_set();
    const Tolerance g(static_cast<std::int64_t>(rng() % 4));
    const auto opt = oracle_max_matching(a, b, g);
    if (proposed_hit_ratio(a, b, g).n_hit != opt) ok = false;
    if (proposed_hit_ratio(b, a, g).n_hit != opt) ok = false;
  }
  report(2, ok, "sequential matching equals max bipartite matching",
         std::to_string(n_instances) + " random instances, both argument orders");
}

// --- 3: over-segmentation penalty ---------------------------------------------
void criterion_3() {
  const Tolerance gamma(2);
  std::vector<std::int64_t> truth, pred;
  for (int k = 0; k < 50; ++k) {
    const std::int64_t b = 10 + 10 * k;  // spacing 10 > 2*gamma
    truth.push_back(b);
    pred.push_back(b - 1);
    pred.push_back(b);
    pred.push_back(b + 1);
  }
  const double conv_p = conventional_hit_ratio(pred, truth, gamma).ratio;
  const double prop_p = proposed_hit_ratio(pred, truth, gamma).ratio;
  const bool ok = conv_p == 1.0 && prop_p == 1.0 / 3.0;
  char buf[80];
  std::snprintf(buf, sizeof(buf), "tripled predictions: conventional P=%g, sequential P=%g",
                conv_p, prop_p);
  report(3, ok, "independent counting saturates, sequential scores exactly 1/3", buf);
}

// --- 4: analytic gradients vs central finite differences ----------------------
void criterion_4() {
  SuperSegConfig cfg;
  cfg.d_mel = 5;
  cfg.d_l = 8;
  cfg.d_h = 6;
  cfg.d_e = 4;
  cfg.n_blocks = 2;
  cfg.kernel = 3;
  cfg.dilations = {1, 2};
  cfg.dropout = 0.0;
  cfg.decoder_hidden = 8;
  cfg.autoregressive = true;
  auto p = init_params<double>(cfg, 31);
  const std::int64_t T = 3;
  MelFrames m;
  m.n_frames = T;
  m.d_mel = cfg.d_mel;
  m.values.resize(static_cast<std::size_t>(T) * cfg.d_mel);
  std::mt19937_64 mr(5);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  for (auto& v : m.values) v = u(mr);
  std::vector<std::uint8_t> labels = {0, 1, 0};

  auto loss = [&]() {
    auto probs = forward_teacher_forced(p, m, FrameLabelSequence(labels));
    return static_cast<double>(bce_loss(probs, labels));
  };
  std::mt19937_64 rng(0);
  ForwardCache<double> cache;
  encode(p, mel_to_input<double>(m), T, false, rng, cache);
  decode_teacher_forced(p, labels, cache);
  std::vector<double> grad(p.data.size(), 0.0);
  backward(p, cache, labels, nullptr, 1.0 / static_cast<double>(T), grad);

  const double eps = 1e-5;
  double worst = 0;
  for (std::size_t j = 0; j < p.data.size(); ++j) {
    const double orig = p.data[j];
    p.data[j] = orig + eps;
    const double lp = loss();
    p.data[j] = orig - eps;
    const double lm = loss();
    p.data[j] = orig;
    const double num = (lp - lm) / (2 * eps);
    const double rel =
        std::abs(grad[j] - num) / std::max({std::abs(grad[j]), std::abs(num), 1e-8});
    worst = std::max(worst, rel);
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "worst relative error %.2e over %zu parameters", worst,
                p.data.size());
  report(4, worst <= 1e-4, "analytic gradients match finite differences (rel err <= 1e-4)", buf);
}

// --- 5: causality / teacher-forcing probes ------------------------------------
void criterion_5() {
  SuperSegConfig cfg;
  cfg.d_mel = 5;
  cfg.d_l = 8;
  cfg.d_h = 6;
  cfg.d_e = 4;
  cfg.n_blocks = 2;
  cfg.dilations = {1, 2};
  cfg.dropout = 0.0;
  cfg.decoder_hidden = 8;
  auto p = init_params<float>(cfg, 17);
  const std::int64_t T = 6;
  MelFrames m;
  m.n_frames = T;
  m.d_mel = cfg.d_mel;
  m.values.resize(static_cast<std::size_t>(T) * cfg.d_mel);
  std::mt19937_64 mr(21);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  for (auto& v : m.values) v = u(mr);

  bool ok = true;
  std::vector<std::uint8_t> base(static_cast<std::size_t>(T), 0);
  auto probs0 = forward_teacher_forced(p, m, FrameLabelSequence(base));
  for (std::size_t t = 0; t < base.size(); ++t) {
    auto flipped = base;
    flipped[t] = 1;
    auto probs = forward_teacher_forced(p, m, FrameLabelSequence(flipped));
    for (std::size_t s = 0; s <= t; ++s)
      if (probs[s] != probs0[s]) ok = false;  // label_t must not reach p_{<=t}
    if (t + 1 < base.size() && probs[t + 1] == probs0[t + 1]) ok = false;  // must reach p_{t+1}
  }

  cfg.autoregressive = false;
  auto q = init_params<float>(cfg, 17);
  auto nprobs0 = forward_teacher_forced(q, m, FrameLabelSequence(base));
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(T));
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng() % 2);
    if (forward_teacher_forced(q, m, FrameLabelSequence(labels)) != nprobs0) ok = false;
  }
  report(5, ok, "label_{t-1} reaches p_t, label_t never does, non-AR ignores labels");
}

// --- 6: end-to-end synthetic reproduction -------------------------------------
RunConfig synthetic_run_config(const fs::path& root, bool autoregressive) {
  RunConfig cfg;
  cfg.seed = 2;
  cfg.corpus = "synthetic";
  cfg.corpus_root = (root / "corpus").string();
  cfg.cache_dir = (root / "cache").string();
  cfg.out_dir = (root / (autoregressive ? "run_ar" : "run_nar")).string();
  cfg.synth.n_utterances = 300;
  cfg.synth.duration_lo_s = 0.3;
  cfg.synth.duration_hi_s = 0.6;
  cfg.synth.segment_median_s = 0.05;
  cfg.synth.seed = cfg.seed;
  cfg.model.d_l = 48;
  cfg.model.d_h = 32;
  cfg.model.d_e = 16;
  cfg.model.decoder_hidden = 48;
  cfg.model.dropout = 0.2;
  cfg.model.autoregressive = autoregressive;
  cfg.train.seed = cfg.seed;
  cfg.train.lr = 0.001;
  cfg.train.batch_size = 16;
  cfg.train.max_epochs = 20;
  cfg.train.augment.freq_mask_enabled = false;
  cfg.train.augment.pitch_formant_enabled = false;
  return cfg;
}

void criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto root = work_dir() / "c6";
  fs::remove_all(root);
  fs::create_directories(root);

  auto ar = synthetic_run_config(root, true);
  cmd_synth(ar);
  cmd_prepare(ar);
  const auto manifest = load_prepared_manifest(ar);
  const bool split_ok = manifest.split_entries(Split::train).size() == 240 &&
                        manifest.split_entries(Split::val).size() == 30 &&
                        manifest.split_entries(Split::test).size() == 30;

  cmd_train(ar);
  cmd_tune(ar, default_threshold_grid());
  const auto ar_eval = cmd_evaluate(ar, Split::test, std::nullopt);

  auto nar = synthetic_run_config(root, false);
  cmd_train(nar);
  cmd_tune(nar, default_threshold_grid());
  const auto nar_eval = cmd_evaluate(nar, Split::test, std::nullopt);

  const double ar_gap = ar_eval.conventional.score.r_value - ar_eval.proposed.score.r_value;
  const double nar_gap = nar_eval.conventional.score.r_value - nar_eval.proposed.score.r_value;
  const double minutes = std::chrono::duration_cast<std::chrono::duration<double>>(
                             std::chrono::steady_clock::now() - t0)
                             .count() /
                         60.0;

  const bool ok = split_ok && ar_eval.proposed.score.r_value >= 0.90 && nar_gap > ar_gap &&
                  minutes <= 30.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "300 utts (240/30/30), 20 epochs: AR proposed R=%.4f, gap AR=%.4f < non-AR=%.4f, "
                "%.1f min",
                ar_eval.proposed.score.r_value, ar_gap, nar_gap, minutes);
  report(6, ok, "synthetic end-to-end: tuned AR R>=0.90, non-AR scheme gap exceeds AR's", buf);
}

// --- 7: full-corpus numbers are out of scope but the paths exist --------------
void criterion_7() {
  // Licensed TIMIT/Buckeye audio and 1000+-epoch runs are not available here, so
  // the published absolute scores are not asserted. We verify the ingestion
  // paths work on miniature corpus trees of the same layout.
  const auto root = work_dir() / "c7";
  fs::remove_all(root);
  bool ok = true;
  try {
    // TIMIT-shaped tree
    for (const char* split : {"TRAIN", "TEST"}) {
      for (int i = 0; i < (split[0] == 'T' && split[1] == 'R' ? 10 : 3); ++i) {
        const auto dir = root / "timit" / split / "DR1" / ("spk" + std::to_string(i % 3));
        fs::create_directories(dir);
        std::ofstream phn(dir / ("sa" + std::to_string(i) + ".phn"));
        phn << "0 1600 h#\n1600 4800 iy\n4800 8000 h#\n";
        std::vector<double> tone(8000);
        for (std::size_t s = 0; s < tone.size(); ++s)
          tone[s] = 0.2 * std::sin(0.1 * static_cast<double>(s));
        write_wav((dir / ("sa" + std::to_string(i) + ".wav")).string(), tone, 16000);
      }
    }
    RunConfig cfg;
    cfg.corpus = "timit";
    cfg.corpus_root = (root / "timit").string();
    cfg.cache_dir = (root / "cache_timit").string();
    auto stats = cmd_prepare(cfg);
    ok = ok && stats.n_utterances == 13 && stats.n_boundaries > 0;

    // Buckeye-shaped tree
    for (int s = 0; s < 4; ++s) {
      const auto dir = root / "buckeye" / ("s0" + std::to_string(s + 1));
      fs::create_directories(dir);
      std::ofstream ph(dir / ("s0" + std::to_string(s + 1) + "01a.phones"));
      ph << "header\n#\n  0.200 121 ah\n  0.400 121 iy\n  0.600 121 eh\n";
      std::vector<double> tone(9600);
      for (std::size_t t = 0; t < tone.size(); ++t)
        tone[t] = 0.2 * std::sin(0.05 * static_cast<double>(t));
      write_wav((dir / ("s0" + std::to_string(s + 1) + "01a.wav")).string(), tone, 16000);
    }
    RunConfig bcfg;
    bcfg.corpus = "buckeye";
    bcfg.corpus_root = (root / "buckeye").string();
    bcfg.cache_dir = (root / "cache_buckeye").string();
    auto bstats = cmd_prepare(bcfg);
    ok = ok && bstats.n_utterances == 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "criterion 7: %s\n", e.what());
    ok = false;
  }
  report(7, ok,
         "published TIMIT/Buckeye scores not asserted (licensed data, week-scale training); "
         "ingestion verified on miniature corpus trees");
}

// --- 8: determinism ------------------------------------------------------------
void criterion_8() {
  const auto root = work_dir() / "c8";
  fs::remove_all(root);
  auto make_run = [&](const char* tag) {
    RunConfig cfg;
    cfg.seed = 11;
    cfg.corpus = "synthetic";
    cfg.corpus_root = (root / tag / "corpus").string();
    cfg.cache_dir = (root / tag / "cache").string();
    cfg.out_dir = (root / tag / "run").string();
    cfg.synth.n_utterances = 12;
    cfg.synth.duration_lo_s = 0.3;
    cfg.synth.duration_hi_s = 0.5;
    cfg.synth.seed = cfg.seed;
    cfg.model.d_mel = 40;
    cfg.model.d_l = 16;
    cfg.model.d_h = 12;
    cfg.model.d_e = 4;
    cfg.model.n_blocks = 2;
    cfg.model.dilations = {1, 2};
    cfg.model.dropout = 0.1;
    cfg.model.decoder_hidden = 16;
    cfg.train.seed = cfg.seed;
    cfg.train.max_epochs = 3;
    cfg.train.batch_size = 4;
    cfg.train.lr = 0.002;
    cmd_synth(cfg);
    cmd_prepare(cfg);
    cmd_train(cfg);
    cmd_tune(cfg, default_threshold_grid());
    cmd_evaluate(cfg, Split::test, std::nullopt);
    return cfg;
  };
  const auto a = make_run("a");
  const auto b = make_run("b");
  bool ok = true;
  auto same = [&](const std::string& rel) {
    auto strip = [&](const char* tag) {
      auto text = slurp((root / tag / rel).string());
      // The manifest stores absolute audio paths, so erase the per-run root
      // before comparing; every other artifact must match byte for byte.
      const auto prefix = (root / tag).string();
      for (std::size_t pos; (pos = text.find(prefix)) != std::string::npos;)
        text.erase(pos, prefix.size());
      return text;
    };
    const bool s = strip("a") == strip("b");
    if (!s) std::fprintf(stderr, "criterion 8: mismatch in %s\n", rel.c_str());
    ok = ok && s;
  };
  same("corpus/utt0000.wav");
  same("corpus/utt0011.phn");
  same("cache/manifest.txt");
  same("cache/feat/utt0000.mel");
  same("run/best.ckpt");
  same("run/last.ckpt");
  same("run/history.txt");
  same("run/nu.txt");
  same("run/eval_test_records.txt");
  same("run/eval_test.txt");
  (void)a;
  (void)b;
  report(8, ok, "identical config and seed give byte-identical artifacts",
         "corpus, features, checkpoints, history, threshold, evaluation records");
}

// --- 9: 2x2 augmentation ablation through the CLI ------------------------------
void criterion_9() {
  const auto root = work_dir() / "c9";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = SEGKIT_CLI_PATH;

  RunConfig base;
  base.seed = 6;
  base.corpus = "synthetic";
  base.corpus_root = (root / "corpus").string();
  base.cache_dir = (root / "cache").string();
  base.synth.n_utterances = 12;
  base.synth.duration_lo_s = 0.3;
  base.synth.duration_hi_s = 0.5;
  base.synth.seed = base.seed;
  base.model.d_mel = 40;
  base.model.d_l = 16;
  base.model.d_h = 12;
  base.model.d_e = 4;
  base.model.n_blocks = 2;
  base.model.dilations = {1, 2};
  base.model.dropout = 0.1;
  base.model.decoder_hidden = 16;
  base.train.seed = base.seed;
  base.train.max_epochs = 2;
  base.train.batch_size = 4;
  base.train.lr = 0.002;

  bool ok = true;
  auto run = [&](const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    if (rc != 0) {
      std::fprintf(stderr, "criterion 9: command failed (%d): %s\n", rc, cmd.c_str());
      ok = false;
    }
  };

  std::vector<std::string> run_dirs;
  bool first = true;
  for (const bool fmask : {false, true}) {
    for (const bool pform : {false, true}) {
      auto cfg = base;
      cfg.train.augment.freq_mask_enabled = fmask;
      cfg.train.augment.pitch_formant_enabled = pform;
      cfg.out_dir =
          (root / ("run_" + std::to_string(fmask) + std::to_string(pform))).string();
      const auto cfg_path = cfg.out_dir + ".json";
      save_run_config(cfg, cfg_path);
      if (first) {
        run(cli + " synth --config " + cfg_path + " > /dev/null");
        run(cli + " prepare --config " + cfg_path + " > /dev/null");
        first = false;
      }
      run(cli + " train --config " + cfg_path + " > /dev/null");
      run(cli + " tune --config " + cfg_path + " > /dev/null");
      run(cli + " evaluate --config " + cfg_path + " --split test > /dev/null");
      run_dirs.push_back(cfg.out_dir);
    }
  }
  const auto report_path = (root / "ablation.txt").string();
  std::string report_cmd = cli + " report --out " + report_path + " --runs";
  for (const auto& d : run_dirs) report_cmd += " " + d;
  run(report_cmd + " > /dev/null");

  // Well-formedness: versioned header, column line, 4 cells x 2 schemes, and
  // all four augmentation combinations present.
  const auto text = slurp(report_path);
  std::istringstream ss(text);
  std::string line;
  std::getline(ss, line);
  ok = ok && line == "#segkit-ablation\tv1";
  std::getline(ss, line);
  ok = ok && line.rfind("freq_mask\tpitch_formant\tscheme", 0) == 0;
  int rows = 0;
  std::vector<std::string> cells;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    ++rows;
    cells.push_back(line.substr(0, 3));
  }
  ok = ok && rows == 8;
  for (const char* want : {"0\t0", "0\t1", "1\t0", "1\t1"}) {
    int hits = 0;
    for (const auto& c : cells)
      if (c == want) ++hits;
    ok = ok && hits == 2;  // one row per scheme
  }
  report(9, ok, "2x2 augmentation ablation runs via the CLI and emits a well-formed table",
         std::to_string(rows) + " result rows");
}

}  // namespace

int main() {
  fs::create_directories(work_dir());
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  fs::remove_all(work_dir());
  if (g_failures == 0) {
    std::printf("all 9 criteria passed\n");
    return 0;
  }
  std::printf("%d criteria FAILED\n", g_failures);
  return 1;
}
