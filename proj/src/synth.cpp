#include "segkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "segkit/corpus.hpp"
#include "segkit/dsp.hpp"
#include "segkit/error.hpp"

namespace fs = std::filesystem;

namespace segkit {

double draw_segment_duration(const SyntheticSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  return spec.segment_median_s * std::exp(spec.segment_sigma * gauss(rng));
}

namespace {
int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct SegmentTemplate {
  double center_hz = 1000;
  double bandwidth_hz = 400;
  double f0 = 0;  // 0 = pure noise, otherwise harmonic stack
};

SegmentTemplate draw_template(std::mt19937_64& rng, double prev_center) {
  std::uniform_real_distribution<double> log_center(std::log(200.0), std::log(6000.0));
  std::uniform_real_distribution<double> bw(150.0, 900.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> f0_dist(90.0, 280.0);
  SegmentTemplate t;
  // keep adjacent segments spectrally distinct
  do {
    t.center_hz = std::exp(log_center(rng));
  } while (prev_center > 0 && std::abs(std::log2(t.center_hz / prev_center)) < 0.4);
  t.bandwidth_hz = bw(rng);
  t.f0 = unit(rng) < 0.4 ? f0_dist(rng) : 0.0;
  return t;
}

std::vector<double> render_segment(const SegmentTemplate& t, int length, int sample_rate,
                                   std::mt19937_64& rng) {
  const int n = next_pow2(std::max(length, 64));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * 3.14159265358979323846);
  std::vector<dsp::cplx> spec(static_cast<std::size_t>(n), dsp::cplx{0, 0});
  for (int k = 1; k < n / 2; ++k) {
    const double f = static_cast<double>(k) * sample_rate / n;
    const double z = (f - t.center_hz) / t.bandwidth_hz;
    double env = std::exp(-0.5 * z * z);
    if (t.f0 > 0) {
      // comb envelope: energy concentrated near harmonics of f0
      const double frac = f / t.f0 - std::floor(f / t.f0 + 0.5);
      env *= std::exp(-0.5 * (frac * t.f0 / 20.0) * (frac * t.f0 / 20.0));
    }
    if (env < 1e-6) continue;
    const auto v = std::polar(env, phase(rng));
    spec[static_cast<std::size_t>(k)] = v;
    spec[static_cast<std::size_t>(n - k)] = std::conj(v);
  }
  dsp::fft(spec, true);
  std::vector<double> out(static_cast<std::size_t>(length));
  double rms = 0;
  for (int i = 0; i < length; ++i) {
    out[static_cast<std::size_t>(i)] = spec[static_cast<std::size_t>(i)].real();
    rms += out[static_cast<std::size_t>(i)] * out[static_cast<std::size_t>(i)];
  }
  rms = std::sqrt(rms / std::max(1, length));
  const double gain = rms > 1e-12 ? 0.15 / rms : 0.0;
  for (auto& v : out) v *= gain;
  return out;
}
}  // namespace

SyntheticUtterance synth_utterance(const SyntheticSpec& spec, std::uint64_t utterance_seed) {
  std::mt19937_64 rng(utterance_seed);
  std::uniform_real_distribution<double> dur(spec.duration_lo_s, spec.duration_hi_s);
  const auto total = static_cast<std::int64_t>(dur(rng) * spec.sample_rate);

  SyntheticUtterance utt;
  utt.samples.reserve(static_cast<std::size_t>(total));
  std::int64_t pos = 0;
  double prev_center = -1;
  int seg_idx = 0;
  while (pos < total) {
    auto len = static_cast<std::int64_t>(draw_segment_duration(spec, rng) * spec.sample_rate);
    len = std::max<std::int64_t>(len, spec.sample_rate / 100);  // at least 10 ms
    len = std::min(len, total - pos);
    const auto tmpl = draw_template(rng, prev_center);
    prev_center = tmpl.center_hz;
    const auto seg = render_segment(tmpl, static_cast<int>(len), spec.sample_rate, rng);
    utt.samples.insert(utt.samples.end(), seg.begin(), seg.end());
    utt.intervals.push_back({pos, pos + len, "p" + std::to_string(seg_idx % 8)});
    pos += len;
    ++seg_idx;
  }
  return utt;
}

std::vector<std::string> synth_corpus(const SyntheticSpec& spec, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw runtime_failure("synth_corpus: cannot create directory " + out_dir);

  std::vector<std::string> ids;
  for (int u = 0; u < spec.n_utterances; ++u) {
    char name[32];
    std::snprintf(name, sizeof(name), "utt%04d", u);
    const std::uint64_t useed =
        spec.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(u) + 1;
    const auto utt = synth_utterance(spec, useed);

    const std::string wav_path = out_dir + "/" + name + ".wav";
    write_wav(wav_path, utt.samples, spec.sample_rate);

    std::ofstream phn(out_dir + "/" + name + ".phn");
    if (!phn) throw runtime_failure("synth_corpus: cannot write annotation for " + wav_path);
    for (const auto& iv : utt.intervals)
      phn << iv.start_sample << ' ' << iv.end_sample << ' ' << iv.label << '\n';
    ids.emplace_back(name);
  }
  return ids;
}

}  // namespace segkit
