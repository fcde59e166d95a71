#include "segkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "segkit/dsp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace segkit {

namespace {
std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string sanitize_id(std::string id) {
  for (auto& c : id)
    if (c == '/' || c == '#' || c == '\\') c = '_';
  return id;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw runtime_failure("cannot create directory " + dir);
}
}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw runtime_failure("cannot open config " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw validation_error("bad config " + path + ": " + e.what());
  }
  RunConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.corpus = j.value("corpus", cfg.corpus);
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    cfg.corpus_root = p.value("corpus_root", "");
    cfg.cache_dir = p.value("cache_dir", "");
    cfg.out_dir = p.value("out_dir", "");
  }
  cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
  cfg.gamma_ms = j.value("gamma_ms", cfg.gamma_ms);
  if (j.contains("model")) {
    const auto& m = j["model"];
    auto& c = cfg.model;
    c.d_mel = m.value("d_mel", c.d_mel);
    c.d_l = m.value("d_l", c.d_l);
    c.d_h = m.value("d_h", c.d_h);
    c.d_e = m.value("d_e", c.d_e);
    c.n_blocks = m.value("n_blocks", c.n_blocks);
    c.kernel = m.value("kernel", c.kernel);
    if (m.contains("dilations")) c.dilations = m["dilations"].get<std::vector<int>>();
    c.dropout = m.value("dropout", c.dropout);
    c.decoder_hidden = m.value("decoder_hidden", c.decoder_hidden);
    c.autoregressive = m.value("autoregressive", c.autoregressive);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    auto& c = cfg.train;
    c.lr = t.value("lr", c.lr);
    c.weight_decay = t.value("weight_decay", c.weight_decay);
    c.batch_size = t.value("batch_size", c.batch_size);
    c.max_epochs = t.value("max_epochs", c.max_epochs);
    c.val_nu = t.value("val_nu", c.val_nu);
    if (t.contains("threshold_metric"))
      c.threshold_metric_scheme = t["threshold_metric"] == "conventional"
                                      ? HitScheme::conventional
                                      : HitScheme::proposed;
    if (t.contains("augment")) {
      const auto& a = t["augment"];
      c.augment.freq_mask_enabled = a.value("freq_mask", c.augment.freq_mask_enabled);
      c.augment.pitch_formant_enabled =
          a.value("pitch_formant", c.augment.pitch_formant_enabled);
      c.augment.freq_mask_max = a.value("freq_mask_max", c.augment.freq_mask_max);
    }
  }
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    auto& c = cfg.synth;
    c.n_utterances = s.value("n_utterances", c.n_utterances);
    c.duration_lo_s = s.value("duration_lo_s", c.duration_lo_s);
    c.duration_hi_s = s.value("duration_hi_s", c.duration_hi_s);
    c.segment_median_s = s.value("segment_median_s", c.segment_median_s);
    c.segment_sigma = s.value("segment_sigma", c.segment_sigma);
  }
  cfg.train.seed = cfg.seed;
  cfg.train.gamma = cfg.gamma();
  cfg.synth.seed = cfg.seed;
  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  json j;
  j["seed"] = cfg.seed;
  j["corpus"] = cfg.corpus;
  j["paths"] = {{"corpus_root", cfg.corpus_root},
                {"cache_dir", cfg.cache_dir},
                {"out_dir", cfg.out_dir}};
  j["val_fraction"] = cfg.val_fraction;
  j["gamma_ms"] = cfg.gamma_ms;
  j["model"] = {{"d_mel", cfg.model.d_mel},
                {"d_l", cfg.model.d_l},
                {"d_h", cfg.model.d_h},
                {"d_e", cfg.model.d_e},
                {"n_blocks", cfg.model.n_blocks},
                {"kernel", cfg.model.kernel},
                {"dilations", cfg.model.dilations},
                {"dropout", cfg.model.dropout},
                {"decoder_hidden", cfg.model.decoder_hidden},
                {"autoregressive", cfg.model.autoregressive}};
  j["train"] = {
      {"lr", cfg.train.lr},
      {"weight_decay", cfg.train.weight_decay},
      {"batch_size", cfg.train.batch_size},
      {"max_epochs", cfg.train.max_epochs},
      {"val_nu", cfg.train.val_nu},
      {"threshold_metric",
       cfg.train.threshold_metric_scheme == HitScheme::proposed ? "proposed" : "conventional"},
      {"augment",
       {{"freq_mask", cfg.train.augment.freq_mask_enabled},
        {"pitch_formant", cfg.train.augment.pitch_formant_enabled},
        {"freq_mask_max", cfg.train.augment.freq_mask_max}}}};
  j["synth"] = {{"n_utterances", cfg.synth.n_utterances},
                {"duration_lo_s", cfg.synth.duration_lo_s},
                {"duration_hi_s", cfg.synth.duration_hi_s},
                {"segment_median_s", cfg.synth.segment_median_s},
                {"segment_sigma", cfg.synth.segment_sigma}};
  std::ofstream f(path);
  if (!f) throw runtime_failure("cannot write config " + path);
  f << j.dump(2) << "\n";
}

void cmd_synth(const RunConfig& cfg) {
  if (cfg.corpus_root.empty()) throw validation_error("synth: corpus_root not set");
  ensure_dir(cfg.corpus_root);
  if (!cfg.out_dir.empty()) {
    ensure_dir(cfg.out_dir);
    save_run_config(cfg, cfg.out_dir + "/config.json");
  }
  synth_corpus(cfg.synth, cfg.corpus_root);
}

namespace {
Manifest build_synthetic_manifest(const RunConfig& cfg) {
  std::vector<fs::path> phns;
  for (const auto& e : fs::directory_iterator(cfg.corpus_root))
    if (e.path().extension() == ".phn") phns.push_back(e.path());
  std::sort(phns.begin(), phns.end());
  if (phns.empty())
    throw validation_error("prepare: no .phn files in " + cfg.corpus_root);

  std::vector<std::size_t> order(phns.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = order.size();
  const auto n_val =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n))));
  const auto n_test = n_val;

  std::vector<Split> assign(n, Split::train);
  for (std::size_t i = 0; i < n_val && i < n; ++i) assign[order[i]] = Split::val;
  for (std::size_t i = n_val; i < n_val + n_test && i < n; ++i) assign[order[i]] = Split::test;

  Manifest m;
  m.seed = cfg.seed;
  for (std::size_t i = 0; i < n; ++i) {
    ManifestEntry e;
    e.utterance_id = phns[i].stem().string();
    e.annotation_path = phns[i].string();
    fs::path wav = phns[i];
    wav.replace_extension(".wav");
    if (!fs::exists(wav)) throw validation_error("prepare: missing audio " + wav.string());
    e.audio_path = wav.string();
    e.speaker_id = e.utterance_id;
    e.split = assign[i];
    m.entries.push_back(std::move(e));
  }
  return m;
}

struct RawUtterance {
  std::string id;
  std::vector<double> audio;
  int sample_rate = 16000;
  std::vector<Interval> intervals;
};

// One manifest entry can yield several utterance chunks (Buckeye).
std::vector<RawUtterance> load_raw(const RunConfig& cfg, const ManifestEntry& entry) {
  AudioClip clip = read_audio(entry.audio_path);
  if (clip.sample_rate != 16000)
    throw validation_error("expected 16 kHz audio, got " + std::to_string(clip.sample_rate) +
                           " Hz in " + entry.audio_path);
  std::ifstream ann(entry.annotation_path);
  if (!ann) throw runtime_failure("cannot open annotation " + entry.annotation_path);

  std::vector<RawUtterance> out;
  if (cfg.corpus == "buckeye") {
    const auto phones = parse_buckeye_phones(ann);
    const auto intervals = buckeye_intervals(phones, clip.sample_rate);
    const auto chunks = chunk_at_pauses(intervals, clip.sample_rate);
    int k = 0;
    for (const auto& chunk : chunks) {
      if (chunk.empty()) continue;
      RawUtterance u;
      u.id = entry.utterance_id + "#" + std::to_string(k++);
      u.sample_rate = clip.sample_rate;
      const std::int64_t begin = chunk.front().start_sample;
      const std::int64_t end = std::min<std::int64_t>(
          chunk.back().end_sample, static_cast<std::int64_t>(clip.samples.size()));
      if (end - begin < clip.sample_rate / 10) continue;  // drop chunks under 100 ms
      u.audio.assign(clip.samples.begin() + begin, clip.samples.begin() + end);
      for (auto iv : chunk) {
        iv.start_sample -= begin;
        iv.end_sample = std::min(iv.end_sample - begin, end - begin);
        if (iv.end_sample > iv.start_sample) u.intervals.push_back(iv);
      }
      out.push_back(std::move(u));
    }
  } else {
    RawUtterance u;
    u.id = entry.utterance_id;
    u.sample_rate = clip.sample_rate;
    u.audio = std::move(clip.samples);
    u.intervals = parse_timit_phn(ann);
    out.push_back(std::move(u));
  }
  return out;
}

TrainExample make_example(const RunConfig& cfg, const RawUtterance& raw, bool use_cache) {
  const FrameGrid grid = cfg.grid();
  const auto total_frames =
      static_cast<std::int64_t>(raw.audio.size()) / grid.hop_samples();
  if (total_frames <= 0)
    throw validation_error("utterance too short for one frame: " + raw.id);
  const auto truth = intervals_to_boundaries(raw.intervals, grid, total_frames);
  TrainExample ex;
  ex.id = raw.id;
  ex.audio = raw.audio;
  ex.sample_rate = raw.sample_rate;
  ex.labels = boundaries_to_labels(truth).labels;

  const std::string cache_path =
      cfg.cache_dir.empty() ? "" : cfg.cache_dir + "/feat/" + sanitize_id(raw.id) + ".mel";
  if (use_cache && !cache_path.empty() && fs::exists(cache_path)) {
    ex.mel = load_mel(cache_path);
    if (ex.mel.n_frames != total_frames)
      throw validation_error("stale feature cache for " + raw.id);
  } else {
    ex.mel = align_to_length(logmel(raw.audio, raw.sample_rate, grid, cfg.model.d_mel),
                             total_frames);
    if (use_cache && !cache_path.empty()) save_mel(ex.mel, cache_path);
  }
  return ex;
}
}  // namespace

Manifest load_prepared_manifest(const RunConfig& cfg) {
  if (cfg.cache_dir.empty()) throw validation_error("cache_dir not set");
  return load_manifest(cfg.cache_dir + "/manifest.txt");
}

PrepareStats cmd_prepare(const RunConfig& cfg) {
  if (cfg.cache_dir.empty()) throw validation_error("prepare: cache_dir not set");
  ensure_dir(cfg.cache_dir);
  ensure_dir(cfg.cache_dir + "/feat");
  save_run_config(cfg, cfg.cache_dir + "/config.json");

  Manifest manifest;
  if (cfg.corpus == "synthetic")
    manifest = build_synthetic_manifest(cfg);
  else if (cfg.corpus == "timit")
    manifest = build_timit_manifest(cfg.corpus_root, cfg.val_fraction, cfg.seed);
  else if (cfg.corpus == "buckeye")
    manifest = build_buckeye_manifest(cfg.corpus_root, cfg.seed);
  else
    throw validation_error("prepare: unknown corpus kind " + cfg.corpus);
  save_manifest(manifest, cfg.cache_dir + "/manifest.txt");

  PrepareStats stats;
  for (const auto& entry : manifest.entries) {
    for (const auto& raw : load_raw(cfg, entry)) {
      const auto ex = make_example(cfg, raw, true);
      ++stats.n_utterances;
      for (auto l : ex.labels) stats.n_boundaries += l;
      stats.total_duration_s +=
          static_cast<double>(raw.audio.size()) / raw.sample_rate;
    }
  }
  return stats;
}

std::vector<TrainExample> load_split(const RunConfig& cfg, const Manifest& manifest, Split split,
                                     bool load_audio) {
  std::vector<TrainExample> out;
  for (const auto& entry : manifest.split_entries(split)) {
    for (const auto& raw : load_raw(cfg, entry)) {
      auto ex = make_example(cfg, raw, true);
      if (!load_audio) ex.audio.clear();
      out.push_back(std::move(ex));
    }
  }
  return out;
}

TrainResult cmd_train(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw validation_error("train: out_dir not set");
  ensure_dir(cfg.out_dir);
  save_run_config(cfg, cfg.out_dir + "/config.json");

  const Manifest manifest = load_prepared_manifest(cfg);
  const bool need_audio = cfg.train.augment.pitch_formant_enabled;
  auto train_set = load_split(cfg, manifest, Split::train, need_audio);
  auto val_set = load_split(cfg, manifest, Split::val, false);
  if (train_set.empty()) throw validation_error("train: empty training split");

  std::int64_t n_boundary = 0, n_frames = 0;
  for (const auto& ex : train_set) {
    n_frames += static_cast<std::int64_t>(ex.labels.size());
    for (auto l : ex.labels) n_boundary += l;
  }
  const double rate =
      n_frames > 0 ? static_cast<double>(n_boundary) / static_cast<double>(n_frames) : 0.5;

  auto params = init_params<float>(cfg.model, cfg.seed, rate);
  return train(std::move(params), cfg.train, train_set, val_set, cfg.out_dir);
}

double cmd_tune(const RunConfig& cfg, const std::vector<double>& grid) {
  const Manifest manifest = load_prepared_manifest(cfg);
  const auto val_set = load_split(cfg, manifest, Split::val, false);
  const auto params = load_checkpoint(cfg.out_dir + "/best.ckpt");
  const double nu = tune_threshold(params, val_set, cfg.gamma(),
                                   cfg.train.threshold_metric_scheme, grid);
  std::ofstream f(cfg.out_dir + "/nu.txt");
  if (!f) throw runtime_failure("cannot write " + cfg.out_dir + "/nu.txt");
  f << "#segkit-nu\tv1\n";
  f << "nu\t" << fmt(nu) << "\n";
  f << "scheme\t"
    << (cfg.train.threshold_metric_scheme == HitScheme::proposed ? "proposed" : "conventional")
    << "\n";
  f << "gamma_frames\t" << cfg.gamma().gamma_frames << "\n";
  return nu;
}

double load_tuned_nu(const std::string& run_dir) {
  std::ifstream f(run_dir + "/nu.txt");
  if (!f) throw runtime_failure("no tuned threshold at " + run_dir + "/nu.txt (run tune first)");
  std::string line;
  std::getline(f, line);
  while (std::getline(f, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "nu") {
      double nu = 0;
      ls >> nu;
      return nu;
    }
  }
  throw validation_error("malformed nu.txt in " + run_dir);
}

EvalResult cmd_evaluate(const RunConfig& cfg, Split split, std::optional<double> nu_override) {
  if (cfg.out_dir.empty()) throw validation_error("evaluate: out_dir not set");
  ensure_dir(cfg.out_dir);
  const Manifest manifest = load_prepared_manifest(cfg);
  const auto examples = load_split(cfg, manifest, split, false);
  if (examples.empty()) throw validation_error("evaluate: empty split " + split_name(split));
  const auto params = load_checkpoint(cfg.out_dir + "/best.ckpt");
  const double nu = nu_override ? *nu_override : load_tuned_nu(cfg.out_dir);
  const Tolerance gamma = cfg.gamma();

  std::vector<std::pair<BoundarySequence, BoundarySequence>> pairs;
  std::vector<BoundarySequence> preds;
  pairs.reserve(examples.size());
  for (const auto& ex : examples) {
    BoundarySequence truth = labels_to_boundaries(FrameLabelSequence(ex.labels));
    BoundarySequence pred = infer(params, ex.mel, nu);
    preds.push_back(pred);
    pairs.emplace_back(std::move(truth), std::move(pred));
  }

  EvalResult res;
  res.nu = nu;
  res.n_utterances = examples.size();
  res.conventional = score_corpus(pairs, gamma, HitScheme::conventional);
  res.proposed = score_corpus(pairs, gamma, HitScheme::proposed);
  res.duplicate_fraction = duplicate_boundary_fraction(preds, gamma);

  const std::string rec_path =
      cfg.out_dir + "/eval_" + split_name(split) + "_records.txt";
  std::ofstream rec(rec_path);
  if (!rec) throw runtime_failure("cannot write " + rec_path);
  rec << "#segkit-eval-records\tv1\n";
  auto put_score = [&rec](const std::string& id, const char* scheme, const PairScore& s) {
    rec << id << '\t' << scheme << '\t' << fmt(s.precision) << '\t' << fmt(s.recall) << '\t'
        << fmt(s.f1) << '\t' << fmt(s.r_value) << '\t' << s.n_ref << '\t' << s.n_pred << '\n';
  };
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto conv = score_pair(pairs[i].first, pairs[i].second, gamma, HitScheme::conventional);
    const auto prop = score_pair(pairs[i].first, pairs[i].second, gamma, HitScheme::proposed);
    // independent-element counting can only add hits relative to sequential matching
    if (conv.precision + 1e-12 < prop.precision || conv.recall + 1e-12 < prop.recall ||
        conv.f1 + 1e-12 < prop.f1)
      throw runtime_failure("dominance violated for utterance " + examples[i].id);
    put_score(examples[i].id, "conventional", conv);
    put_score(examples[i].id, "proposed", prop);
  }
  put_score("__corpus__", "conventional", res.conventional.score);
  put_score("__corpus__", "proposed", res.proposed.score);

  const std::string report_path = cfg.out_dir + "/eval_" + split_name(split) + ".txt";
  std::ofstream rep(report_path);
  if (!rep) throw runtime_failure("cannot write " + report_path);
  rep << "#segkit-eval\tv1\n";
  rep << "split\t" << split_name(split) << "\tutterances\t" << res.n_utterances << "\tnu\t"
      << fmt(nu) << "\tgamma_frames\t" << gamma.gamma_frames << "\n";
  rep << "scheme\tprecision\trecall\tf1\tr_value\n";
  auto put_row = [&rep](const char* scheme, const PairScore& s) {
    rep << scheme << '\t' << fmt(s.precision) << '\t' << fmt(s.recall) << '\t' << fmt(s.f1)
        << '\t' << fmt(s.r_value) << '\n';
  };
  put_row("conventional", res.conventional.score);
  put_row("proposed", res.proposed.score);
  rep << "duplicate_boundary_fraction\t" << fmt(res.duplicate_fraction) << "\n";
  rep << "r_value_gap\t" << fmt(res.conventional.score.r_value - res.proposed.score.r_value)
      << "\n";
  return res;
}

namespace {
void write_plot_ppm(const MelFrames& mel, const BoundarySequence& bounds,
                    const std::string& path) {
  const int width = static_cast<int>(mel.n_frames);
  const int height = mel.d_mel;
  float lo = mel.values.empty() ? 0.0f : mel.values[0], hi = lo;
  for (float v : mel.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const float span = hi - lo > 1e-6f ? hi - lo : 1.0f;
  std::vector<bool> is_boundary(static_cast<std::size_t>(width), false);
  for (auto f : bounds.frames) is_boundary[static_cast<std::size_t>(f)] = true;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw runtime_failure("cannot write plot " + path);
  f << "P6\n" << width << " " << height << "\n255\n";
  for (int y = 0; y < height; ++y) {
    const int c = height - 1 - y;  // high channels on top
    for (int x = 0; x < width; ++x) {
      const auto g = static_cast<unsigned char>(255.0f * (mel.at(x, c) - lo) / span);
      unsigned char rgb[3] = {g, g, g};
      if (is_boundary[static_cast<std::size_t>(x)]) {
        rgb[0] = 255;
        rgb[1] = g / 2;
        rgb[2] = g / 2;
      }
      f.write(reinterpret_cast<const char*>(rgb), 3);
    }
  }
}
}  // namespace

std::vector<double> cmd_segment(const RunConfig& cfg, const std::string& checkpoint,
                                const std::string& audio_path, double nu,
                                const std::string& out_path, bool plot) {
  const auto params = load_checkpoint(checkpoint);
  const AudioClip clip = read_audio(audio_path);
  if (clip.sample_rate != 16000)
    throw validation_error("segment: expected 16 kHz audio in " + audio_path);
  const FrameGrid grid = cfg.grid();
  const auto mel = logmel(clip.samples, clip.sample_rate, grid, params.cfg.d_mel);
  const auto bounds = infer(params, mel, nu);

  std::ofstream f(out_path);
  if (!f) throw runtime_failure("cannot write " + out_path);
  std::vector<double> seconds;
  for (auto frame : bounds.frames) {
    const double s = static_cast<double>(frame) * grid.hop_s;
    seconds.push_back(s);
    f << fmt(s, 3) << "\n";
  }
  if (plot) write_plot_ppm(mel, bounds, out_path + ".ppm");
  return seconds;
}

void cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_path) {
  if (run_dirs.empty()) throw validation_error("report: no run directories given");
  std::ofstream f(out_path);
  if (!f) throw runtime_failure("cannot write " + out_path);
  f << "#segkit-ablation\tv1\n";
  f << "freq_mask\tpitch_formant\tscheme\tprecision\trecall\tf1\tr_value\n";
  for (const auto& dir : run_dirs) {
    const RunConfig cfg = load_run_config(dir + "/config.json");
    std::ifstream rec(dir + "/eval_test_records.txt");
    if (!rec) throw runtime_failure("report: missing eval_test_records.txt in " + dir);
    std::string line;
    while (std::getline(rec, line)) {
      if (line.rfind("__corpus__\t", 0) != 0) continue;
      std::istringstream ls(line);
      std::string id, scheme;
      double p, r, f1v, rv;
      ls >> id >> scheme >> p >> r >> f1v >> rv;
      f << (cfg.train.augment.freq_mask_enabled ? 1 : 0) << '\t'
        << (cfg.train.augment.pitch_formant_enabled ? 1 : 0) << '\t' << scheme << '\t' << fmt(p)
        << '\t' << fmt(r) << '\t' << fmt(f1v) << '\t' << fmt(rv) << '\n';
    }
  }
}

}  // namespace segkit
