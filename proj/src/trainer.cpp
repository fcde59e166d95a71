#include "segkit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace segkit {

namespace {
// splitmix64; used to derive independent per-(epoch, utterance) rng streams
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t item,
                          std::uint64_t purpose) {
  return mix(mix(mix(seed ^ 0x5eedULL) ^ epoch) ^ (item * 0x100000001b3ULL + purpose));
}
}  // namespace

void adamw_step(std::vector<float>& params, const std::vector<float>& grad, AdamWState& state,
                const TrainConfig& cfg) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0f);
    state.v.assign(params.size(), 0.0f);
    state.step = 0;
  }
  ++state.step;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    double w = params[i];
    w -= cfg.lr * cfg.weight_decay * w;
    w -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    params[i] = static_cast<float>(w);
  }
}

namespace {
MelFrames augment_features(const TrainExample& ex, const AugmentConfig& aug,
                           std::mt19937_64& rng) {
  MelFrames mel = ex.mel;
  if (aug.pitch_formant_enabled && !ex.audio.empty()) {
    std::uniform_real_distribution<double> pitch(aug.pitch_lo, aug.pitch_hi);
    std::uniform_real_distribution<double> formant(aug.formant_lo, aug.formant_hi);
    const double pm = pitch(rng), fm = formant(rng);
    const auto audio = pitch_formant_perturb(ex.audio, ex.sample_rate, pm, fm, aug);
    mel = align_to_length(logmel(audio, ex.sample_rate, ex.mel.grid, ex.mel.d_mel),
                          static_cast<std::int64_t>(ex.labels.size()));
  }
  if (aug.freq_mask_enabled) mel = freq_mask(mel, aug, rng);
  return mel;
}

std::pair<PairScore, PairScore> validate_epoch(const SuperSegParams<float>& params,
                                               const std::vector<TrainExample>& val_set,
                                               Tolerance gamma, double nu) {
  std::vector<std::pair<BoundarySequence, BoundarySequence>> pairs;
  pairs.reserve(val_set.size());
  for (const auto& ex : val_set) {
    BoundarySequence truth = labels_to_boundaries(FrameLabelSequence(ex.labels));
    pairs.emplace_back(std::move(truth), infer(params, ex.mel, nu));
  }
  const auto conv = score_corpus(pairs, gamma, HitScheme::conventional).score;
  const auto prop = score_corpus(pairs, gamma, HitScheme::proposed).score;
  return {conv, prop};
}
}  // namespace

TrainResult train(SuperSegParams<float> params, const TrainConfig& cfg,
                  const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& val_set, const std::string& run_dir) {
  cfg.validate();
  if (train_set.empty()) throw validation_error("train: empty training set");

  AdamWState opt;
  int start_epoch = 0;
  const std::string last_path = run_dir.empty() ? "" : run_dir + "/last.ckpt";
  const std::string best_path = run_dir.empty() ? "" : run_dir + "/best.ckpt";
  const std::string hist_path = run_dir.empty() ? "" : run_dir + "/history.txt";

  TrainResult result;
  if (!run_dir.empty() && fs::exists(last_path)) {
    int epoch = 0;
    params = load_checkpoint(last_path, &opt, &epoch);
    start_epoch = epoch;
    result.history = load_history(hist_path);
    for (const auto& rec : result.history) {
      const double m = cfg.threshold_metric_scheme == HitScheme::proposed
                           ? rec.val_proposed.r_value
                           : rec.val_conventional.r_value;
      if (m > result.best_val_metric) {
        result.best_val_metric = m;
        result.best_epoch = rec.epoch;
      }
    }
    if (fs::exists(best_path)) result.best_params = load_checkpoint(best_path);
  }
  result.best_params.cfg = params.cfg;
  if (result.best_params.data.empty()) result.best_params = params;

  std::vector<float> grad(params.data.size(), 0.0f);
  std::vector<std::size_t> order(train_set.size());

  for (int epoch = start_epoch; epoch < cfg.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 order_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), 0, 1));
    std::shuffle(order.begin(), order.end(), order_rng);

    double epoch_loss_sum = 0;
    std::int64_t epoch_frames = 0;
    bool bad = false;

    for (std::size_t batch_start = 0; batch_start < order.size() && !bad;
         batch_start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(cfg.batch_size));
      std::int64_t batch_frames = 0;
      for (std::size_t i = batch_start; i < batch_end; ++i)
        batch_frames += static_cast<std::int64_t>(train_set[order[i]].labels.size());
      if (batch_frames == 0) continue;
      const float scale = 1.0f / static_cast<float>(batch_frames);

      std::fill(grad.begin(), grad.end(), 0.0f);
      for (std::size_t i = batch_start; i < batch_end; ++i) {
        const auto& ex = train_set[order[i]];
        std::mt19937_64 rng(
            derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), order[i] + 1, 2));
        AugmentConfig aug = cfg.augment;
        const MelFrames mel = augment_features(ex, aug, rng);

        ForwardCache<float> cache;
        encode(params, mel_to_input<float>(mel), mel.n_frames, true, rng, cache);
        decode_teacher_forced(params, ex.labels, cache);

        double loss_sum = 0;
        for (std::size_t t = 0; t < cache.probs.size(); ++t) {
          const double pc =
              std::min(std::max(static_cast<double>(cache.probs[t]), 1e-7), 1.0 - 1e-7);
          loss_sum += ex.labels[t] ? -std::log(pc) : -std::log(1.0 - pc);
        }
        if (!std::isfinite(loss_sum)) {
          bad = true;
          break;
        }
        epoch_loss_sum += loss_sum;
        epoch_frames += static_cast<std::int64_t>(ex.labels.size());
        backward(params, cache, ex.labels, nullptr, scale, grad);
      }
      if (!bad) adamw_step(params.data, grad, opt, cfg);
    }

    if (bad) {
      result.aborted = true;
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = epoch_frames > 0 ? epoch_loss_sum / static_cast<double>(epoch_frames) : 0;
    if (!val_set.empty()) {
      auto [conv, prop] = validate_epoch(params, val_set, cfg.gamma, cfg.val_nu);
      rec.val_conventional = conv;
      rec.val_proposed = prop;
    }
    result.history.push_back(rec);

    const double metric = cfg.threshold_metric_scheme == HitScheme::proposed
                              ? rec.val_proposed.r_value
                              : rec.val_conventional.r_value;
    const bool improved = val_set.empty() || metric > result.best_val_metric;
    if (improved) {
      result.best_val_metric = metric;
      result.best_epoch = rec.epoch;
      result.best_params = params;
    }

    if (!run_dir.empty()) {
      save_checkpoint(params, last_path, &opt, epoch + 1);
      if (improved) save_checkpoint(result.best_params, best_path);
      append_history(hist_path, rec);
    }
  }
  return result;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int i = 5; i <= 95; ++i) grid.push_back(i / 100.0);
  return grid;
}

double tune_threshold(const SuperSegParams<float>& params,
                      const std::vector<TrainExample>& val_set, Tolerance gamma,
                      HitScheme scheme, const std::vector<double>& grid) {
  if (val_set.empty()) throw validation_error("tune_threshold: empty validation set");
  if (grid.empty()) throw validation_error("tune_threshold: empty grid");
  double best_nu = grid.front();
  double best_metric = -1;
  for (const double nu : grid) {
    std::vector<std::pair<BoundarySequence, BoundarySequence>> pairs;
    pairs.reserve(val_set.size());
    for (const auto& ex : val_set) {
      BoundarySequence truth = labels_to_boundaries(FrameLabelSequence(ex.labels));
      pairs.emplace_back(std::move(truth), infer(params, ex.mel, nu));
    }
    const double metric = score_corpus(pairs, gamma, scheme).score.r_value;
    if (metric > best_metric) {  // strict: ties keep the smaller nu
      best_metric = metric;
      best_nu = nu;
    }
  }
  return best_nu;
}

namespace {
constexpr char kCkptMagic[4] = {'S', 'K', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void wpod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void rpod(std::ifstream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
}
void wstr(std::ofstream& f, const std::string& s) {
  wpod(f, static_cast<std::uint32_t>(s.size()));
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string rstr(std::ifstream& f) {
  std::uint32_t n = 0;
  rpod(f, n);
  std::string s(n, '\0');
  f.read(s.data(), n);
  return s;
}
void wfloats(std::ofstream& f, const std::vector<float>& v) {
  wpod(f, static_cast<std::uint64_t>(v.size()));
  f.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(float)));
}
std::vector<float> rfloats(std::ifstream& f) {
  std::uint64_t n = 0;
  rpod(f, n);
  std::vector<float> v(n);
  f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)));
  return v;
}
}  // namespace

void save_checkpoint(const SuperSegParams<float>& params, const std::string& path,
                     const AdamWState* opt, int epoch) {
  std::ofstream f(path + ".tmp", std::ios::binary);
  if (!f) throw runtime_failure("save_checkpoint: cannot open " + path);
  const auto& c = params.cfg;
  f.write(kCkptMagic, 4);
  wpod(f, kCkptVersion);
  wpod(f, static_cast<std::int32_t>(c.d_mel));
  wpod(f, static_cast<std::int32_t>(c.d_l));
  wpod(f, static_cast<std::int32_t>(c.d_h));
  wpod(f, static_cast<std::int32_t>(c.d_e));
  wpod(f, static_cast<std::int32_t>(c.n_blocks));
  wpod(f, static_cast<std::int32_t>(c.kernel));
  for (int d : c.dilations) wpod(f, static_cast<std::int32_t>(d));
  wpod(f, c.dropout);
  wpod(f, static_cast<std::int32_t>(c.decoder_hidden));
  wpod(f, static_cast<std::uint8_t>(c.autoregressive ? 1 : 0));

  wpod(f, static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    wstr(f, t.name);
    wpod(f, static_cast<std::uint64_t>(t.size));
    f.write(reinterpret_cast<const char*>(params.data.data() + t.offset),
            static_cast<std::streamsize>(t.size * sizeof(float)));
  }

  wpod(f, static_cast<std::uint8_t>(opt ? 1 : 0));
  if (opt) {
    wpod(f, opt->step);
    wfloats(f, opt->m);
    wfloats(f, opt->v);
  }
  wpod(f, static_cast<std::int32_t>(epoch));
  f.close();
  if (!f) throw runtime_failure("save_checkpoint: write failed for " + path);
  fs::rename(path + ".tmp", path);
}

SuperSegParams<float> load_checkpoint(const std::string& path, AdamWState* opt, int* epoch) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw runtime_failure("load_checkpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (std::memcmp(magic, kCkptMagic, 4) != 0)
    throw validation_error("load_checkpoint: bad magic in " + path);
  std::uint32_t version = 0;
  rpod(f, version);
  if (version != kCkptVersion)
    throw validation_error("load_checkpoint: unsupported version in " + path);

  SuperSegConfig c;
  std::int32_t v32 = 0;
  rpod(f, v32); c.d_mel = v32;
  rpod(f, v32); c.d_l = v32;
  rpod(f, v32); c.d_h = v32;
  rpod(f, v32); c.d_e = v32;
  rpod(f, v32); c.n_blocks = v32;
  rpod(f, v32); c.kernel = v32;
  c.dilations.resize(static_cast<std::size_t>(c.n_blocks));
  for (auto& d : c.dilations) {
    rpod(f, v32);
    d = v32;
  }
  rpod(f, c.dropout);
  rpod(f, v32); c.decoder_hidden = v32;
  std::uint8_t flag = 0;
  rpod(f, flag);
  c.autoregressive = flag != 0;

  auto params = SuperSegParams<float>::make(c);
  std::uint32_t n_tensors = 0;
  rpod(f, n_tensors);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = rstr(f);
    std::uint64_t size = 0;
    rpod(f, size);
    const auto& info = params.info(name);
    if (info.size != size)
      throw validation_error("load_checkpoint: size mismatch for tensor " + name);
    f.read(reinterpret_cast<char*>(params.data.data() + info.offset),
           static_cast<std::streamsize>(size * sizeof(float)));
  }

  rpod(f, flag);
  if (flag) {
    AdamWState state;
    rpod(f, state.step);
    state.m = rfloats(f);
    state.v = rfloats(f);
    if (opt) *opt = std::move(state);
  } else if (opt) {
    *opt = AdamWState{};
  }
  std::int32_t ep = 0;
  rpod(f, ep);
  if (epoch) *epoch = ep;
  if (!f) throw runtime_failure("load_checkpoint: truncated file " + path);
  return params;
}

void append_history(const std::string& path, const EpochRecord& rec) {
  const bool fresh = !fs::exists(path);
  std::ofstream f(path, std::ios::app);
  if (!f) throw runtime_failure("append_history: cannot open " + path);
  if (fresh) f << "#segkit-history\tv1\n";
  // Full double precision: resuming re-derives the best validation metric from
  // this file, so rounding here would change best-checkpoint decisions.
  f.precision(17);
  auto put = [&f](const PairScore& s) {
    f << '\t' << s.precision << '\t' << s.recall << '\t' << s.f1 << '\t' << s.r_value;
  };
  f << rec.epoch << '\t' << rec.train_loss;
  put(rec.val_conventional);
  put(rec.val_proposed);
  f << '\n';
}

std::vector<EpochRecord> load_history(const std::string& path) {
  std::vector<EpochRecord> out;
  std::ifstream f(path);
  if (!f) return out;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    EpochRecord rec;
    auto get = [&ls](PairScore& s) { ls >> s.precision >> s.recall >> s.f1 >> s.r_value; };
    ls >> rec.epoch >> rec.train_loss;
    get(rec.val_conventional);
    get(rec.val_proposed);
    out.push_back(rec);
  }
  return out;
}

}  // namespace segkit
