#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "segkit/boundary.hpp"

namespace segkit {

// T x d_mel log-mel feature matrix, row-major.
struct MelFrames {
  std::vector<float> values;
  std::int64_t n_frames = 0;
  int d_mel = 80;
  FrameGrid grid;

  float& at(std::int64_t t, int c) { return values[static_cast<std::size_t>(t) * d_mel + c]; }
  float at(std::int64_t t, int c) const {
    return values[static_cast<std::size_t>(t) * d_mel + c];
  }
};

struct AugmentConfig {
  bool freq_mask_enabled = true;
  bool pitch_formant_enabled = true;
  int freq_mask_max = 35;  // mask width drawn from [0, freq_mask_max)
  double pitch_lo = 1.0 / 1.2, pitch_hi = 1.2;
  double formant_lo = 1.0 / 1.1, formant_hi = 1.1;
  std::uint64_t rng_seed = 0;
};

// Triangular mel filterbank on the HTK scale, spanning f_lo..f_hi Hz.
std::vector<std::vector<float>> mel_filterbank(int n_mels, int n_fft, int sample_rate,
                                               double f_lo = 0.0, double f_hi = 8000.0);

// Center frequencies (Hz) of the filters above; used by callers that need to map
// a spectral peak back to a channel.
std::vector<double> mel_center_frequencies(int n_mels, int sample_rate, double f_lo = 0.0,
                                           double f_hi = 8000.0);

// Power-spectrum log-mel features: STFT (periodic Hann, centered), 80 triangular
// mel filters, log(x + 1e-5). Produces floor(num_samples / hop) frames.
MelFrames logmel(const std::vector<double>& audio, int sample_rate, const FrameGrid& grid,
                 int d_mel = 80);

// Truncate or edge-replicate to target_frames; more than max_slack frames of
// mismatch is treated as a corpus problem.
MelFrames align_to_length(MelFrames m, std::int64_t target_frames, std::int64_t max_slack = 2);

// Replaces one contiguous block of channels (width ~ U{0..freq_mask_max-1}) with
// the per-utterance mean value.
MelFrames freq_mask(const MelFrames& m, const AugmentConfig& cfg, std::mt19937_64& rng);

// Pitch shift via phase-vocoder stretch + resampling, then formant shift via
// cepstral envelope warping. Output duration within one hop of the input.
std::vector<double> pitch_formant_perturb(const std::vector<double>& audio, int sample_rate,
                                          double pitch_mult, double formant_mult,
                                          const AugmentConfig& cfg);

// Feature cache binary: magic "SKFT", version, T, d_mel, hop_s, window_s,
// sample_rate, then row-major float32 values. Little-endian.
void save_mel(const MelFrames& m, const std::string& path);
MelFrames load_mel(const std::string& path);

}  // namespace segkit
