#include "segkit/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "segkit/dsp.hpp"
#include "segkit/error.hpp"

namespace segkit {

namespace {
constexpr double kLogFloor = 1e-5;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}
}  // namespace

std::vector<double> mel_center_frequencies(int n_mels, int /*sample_rate*/, double f_lo,
                                           double f_hi) {
  const double m_lo = hz_to_mel(f_lo), m_hi = hz_to_mel(f_hi);
  std::vector<double> centers(static_cast<std::size_t>(n_mels));
  for (int i = 0; i < n_mels; ++i)
    centers[static_cast<std::size_t>(i)] =
        mel_to_hz(m_lo + (m_hi - m_lo) * (i + 1) / static_cast<double>(n_mels + 1));
  return centers;
}

std::vector<std::vector<float>> mel_filterbank(int n_mels, int n_fft, int sample_rate,
                                               double f_lo, double f_hi) {
  const int n_bins = n_fft / 2 + 1;
  const double m_lo = hz_to_mel(f_lo), m_hi = hz_to_mel(f_hi);
  std::vector<double> edges(static_cast<std::size_t>(n_mels + 2));
  for (int i = 0; i < n_mels + 2; ++i)
    edges[static_cast<std::size_t>(i)] =
        mel_to_hz(m_lo + (m_hi - m_lo) * i / static_cast<double>(n_mels + 1));

  std::vector<std::vector<float>> fb(static_cast<std::size_t>(n_mels),
                                     std::vector<float>(static_cast<std::size_t>(n_bins), 0.0f));
  for (int m = 0; m < n_mels; ++m) {
    const double left = edges[static_cast<std::size_t>(m)];
    const double center = edges[static_cast<std::size_t>(m + 1)];
    const double right = edges[static_cast<std::size_t>(m + 2)];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f > left && f < center)
        w = (f - left) / (center - left);
      else if (f >= center && f < right)
        w = (right - f) / (right - center);
      fb[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] = static_cast<float>(w);
    }
  }
  return fb;
}

MelFrames logmel(const std::vector<double>& audio, int sample_rate, const FrameGrid& grid,
                 int d_mel) {
  if (audio.empty()) throw validation_error("logmel: empty audio");
  for (double s : audio)
    if (!std::isfinite(s)) throw validation_error("logmel: non-finite sample");

  dsp::StftConfig cfg;
  cfg.win_length = grid.window_samples();
  cfg.hop = grid.hop_samples();
  cfg.n_fft = next_pow2(cfg.win_length);
  const auto spec = dsp::stft(audio, cfg);
  const auto fb = mel_filterbank(d_mel, cfg.n_fft, sample_rate);

  const std::int64_t n_frames = static_cast<std::int64_t>(audio.size()) / cfg.hop;
  MelFrames out;
  out.n_frames = n_frames;
  out.d_mel = d_mel;
  out.grid = grid;
  out.grid.sample_rate = sample_rate;
  out.values.assign(static_cast<std::size_t>(n_frames) * d_mel, 0.0f);

  const int n_bins = cfg.n_fft / 2 + 1;
  std::vector<double> power(static_cast<std::size_t>(n_bins));
  for (std::int64_t t = 0; t < n_frames; ++t) {
    const auto& frame = spec.frames[static_cast<std::size_t>(t)];
    for (int k = 0; k < n_bins; ++k)
      power[static_cast<std::size_t>(k)] = std::norm(frame[static_cast<std::size_t>(k)]);
    for (int m = 0; m < d_mel; ++m) {
      double acc = 0.0;
      const auto& filt = fb[static_cast<std::size_t>(m)];
      for (int k = 0; k < n_bins; ++k)
        acc += filt[static_cast<std::size_t>(k)] * power[static_cast<std::size_t>(k)];
      out.at(t, m) = static_cast<float>(std::log(acc + kLogFloor));
    }
  }
  return out;
}

MelFrames align_to_length(MelFrames m, std::int64_t target_frames, std::int64_t max_slack) {
  const std::int64_t diff = m.n_frames - target_frames;
  if (diff > max_slack || diff < -max_slack)
    throw validation_error("align_to_length: feature length " + std::to_string(m.n_frames) +
                           " vs expected " + std::to_string(target_frames) +
                           " differs by more than " + std::to_string(max_slack) + " frames");
  if (diff > 0) {
    m.values.resize(static_cast<std::size_t>(target_frames) * m.d_mel);
  } else if (diff < 0) {
    // replicate the last frame
    const std::size_t row = static_cast<std::size_t>(m.d_mel);
    std::vector<float> last(row, 0.0f);
    if (m.n_frames > 0)
      std::copy(m.values.end() - static_cast<std::ptrdiff_t>(row), m.values.end(), last.begin());
    for (std::int64_t t = m.n_frames; t < target_frames; ++t)
      m.values.insert(m.values.end(), last.begin(), last.end());
  }
  m.n_frames = target_frames;
  return m;
}

MelFrames freq_mask(const MelFrames& m, const AugmentConfig& cfg, std::mt19937_64& rng) {
  if (cfg.freq_mask_max > m.d_mel)
    throw validation_error("freq_mask: mask range exceeds channel count");
  MelFrames out = m;
  std::uniform_int_distribution<int> width_dist(0, cfg.freq_mask_max - 1);
  const int w = width_dist(rng);
  if (w == 0) return out;
  std::uniform_int_distribution<int> start_dist(0, m.d_mel - w);
  const int start = start_dist(rng);

  double mean = 0.0;
  for (float v : m.values) mean += v;
  mean /= static_cast<double>(m.values.size());
  const auto fill = static_cast<float>(mean);

  for (std::int64_t t = 0; t < m.n_frames; ++t)
    for (int c = start; c < start + w; ++c) out.at(t, c) = fill;
  return out;
}

std::vector<double> pitch_formant_perturb(const std::vector<double>& audio, int sample_rate,
                                          double pitch_mult, double formant_mult,
                                          const AugmentConfig& cfg) {
  if (pitch_mult < cfg.pitch_lo - 1e-12 || pitch_mult > cfg.pitch_hi + 1e-12)
    throw validation_error("pitch_formant_perturb: pitch multiplier out of range");
  if (formant_mult < cfg.formant_lo - 1e-12 || formant_mult > cfg.formant_hi + 1e-12)
    throw validation_error("pitch_formant_perturb: formant multiplier out of range");

  std::vector<double> out = audio;
  if (pitch_mult != 1.0) {
    out = dsp::time_stretch(out, 1.0 / pitch_mult);
    out = dsp::resample(out, pitch_mult);
  }
  if (formant_mult != 1.0) out = dsp::formant_shift(out, sample_rate, formant_mult);
  return out;
}

namespace {
constexpr char kMagic[4] = {'S', 'K', 'F', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::ifstream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_mel(const MelFrames& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw runtime_failure("save_mel: cannot open " + path);
  f.write(kMagic, 4);
  write_pod(f, kVersion);
  write_pod(f, m.n_frames);
  write_pod(f, static_cast<std::int32_t>(m.d_mel));
  write_pod(f, m.grid.hop_s);
  write_pod(f, m.grid.window_s);
  write_pod(f, static_cast<std::int32_t>(m.grid.sample_rate));
  f.write(reinterpret_cast<const char*>(m.values.data()),
          static_cast<std::streamsize>(m.values.size() * sizeof(float)));
  if (!f) throw runtime_failure("save_mel: write failed for " + path);
}

MelFrames load_mel(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw runtime_failure("load_mel: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw validation_error("load_mel: bad magic in " + path);
  std::uint32_t version = 0;
  read_pod(f, version);
  if (version != kVersion) throw validation_error("load_mel: unsupported version in " + path);
  MelFrames m;
  std::int32_t d_mel = 0, rate = 0;
  read_pod(f, m.n_frames);
  read_pod(f, d_mel);
  read_pod(f, m.grid.hop_s);
  read_pod(f, m.grid.window_s);
  read_pod(f, rate);
  m.d_mel = d_mel;
  m.grid.sample_rate = rate;
  m.values.resize(static_cast<std::size_t>(m.n_frames) * m.d_mel);
  f.read(reinterpret_cast<char*>(m.values.data()),
         static_cast<std::streamsize>(m.values.size() * sizeof(float)));
  if (!f) throw runtime_failure("load_mel: truncated file " + path);
  return m;
}

}  // namespace segkit
