#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace segkit::dsp {

using cplx = std::complex<double>;

// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<cplx>& x, bool inverse);

// Periodic Hann window.
std::vector<double> hann_window(int length);

struct StftConfig {
  int win_length = 640;
  int hop = 160;
  int n_fft = 1024;
  bool center = true;  // reflect padding of win_length/2 on both ends
};

struct Stft {
  std::vector<std::vector<cplx>> frames;  // each of size n_fft/2+1
  StftConfig cfg;
  std::int64_t original_length = 0;
};

Stft stft(const std::vector<double>& audio, const StftConfig& cfg);

// Overlap-add inverse with squared-window normalization; returns original_length samples.
std::vector<double> istft(const Stft& s);

// Linear-interpolation resampling: y[m] = x[m * step].
std::vector<double> resample(const std::vector<double>& x, double step);

// Phase-vocoder time stretch; rate > 1 shortens, rate < 1 lengthens.
std::vector<double> time_stretch(const std::vector<double>& audio, double rate,
                                 const StftConfig& cfg = {});

// Warps the frequency axis of the cepstral spectral envelope by formant_mult,
// leaving the excitation residual and phase untouched. quefrency_cutoff_s bounds
// the envelope part of the cepstrum.
std::vector<double> formant_shift(const std::vector<double>& audio, int sample_rate,
                                  double formant_mult, double quefrency_cutoff_s = 1.0 / 400.0,
                                  const StftConfig& cfg = {});

}  // namespace segkit::dsp
