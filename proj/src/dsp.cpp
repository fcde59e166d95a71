#include "segkit/dsp.hpp"

#include <algorithm>
#include <cmath>

#include "segkit/error.hpp"

namespace segkit::dsp {

namespace {
constexpr double kPi = 3.14159265358979323846;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

double princarg(double phase) {
  return phase - 2.0 * kPi * std::round(phase / (2.0 * kPi));
}

// Reflect-padded read: x[-1] = x[1], x[n] = x[n-2].
double reflect_at(const std::vector<double>& x, std::int64_t i) {
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  if (n == 1) return x[0];
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return x[static_cast<std::size_t>(i)];
}

std::vector<cplx> analyze_frame(const std::vector<double>& audio, std::int64_t start,
                                const std::vector<double>& window, const StftConfig& cfg) {
  std::vector<cplx> buf(static_cast<std::size_t>(cfg.n_fft), cplx{0, 0});
  const std::int64_t pad = cfg.center ? cfg.win_length / 2 : 0;
  for (int i = 0; i < cfg.win_length; ++i)
    buf[static_cast<std::size_t>(i)] =
        reflect_at(audio, start + i - pad) * window[static_cast<std::size_t>(i)];
  fft(buf, false);
  buf.resize(static_cast<std::size_t>(cfg.n_fft / 2 + 1));
  return buf;
}
}  // namespace

void fft(std::vector<cplx>& x, bool inverse) {
  const std::size_t n = x.size();
  if (!is_pow2(n)) throw validation_error("fft: size must be a power of two");
  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const cplx wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1, 0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx u = x[i + k];
        const cplx v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& v : x) v /= static_cast<double>(n);
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i)
    w[static_cast<std::size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * kPi * i / static_cast<double>(length));
  return w;
}

Stft stft(const std::vector<double>& audio, const StftConfig& cfg) {
  if (audio.empty()) throw validation_error("stft: empty audio");
  const auto window = hann_window(cfg.win_length);
  const std::int64_t len = static_cast<std::int64_t>(audio.size());
  // With center padding frame m covers input samples [m*hop - win/2, m*hop + win/2).
  const std::int64_t n_frames = cfg.center
                                    ? len / cfg.hop + 1
                                    : std::max<std::int64_t>(0, (len - cfg.win_length) / cfg.hop + 1);
  Stft out;
  out.cfg = cfg;
  out.original_length = len;
  out.frames.reserve(static_cast<std::size_t>(n_frames));
  for (std::int64_t m = 0; m < n_frames; ++m)
    out.frames.push_back(analyze_frame(audio, m * cfg.hop, window, cfg));
  return out;
}

std::vector<double> istft(const Stft& s) {
  const auto& cfg = s.cfg;
  const auto window = hann_window(cfg.win_length);
  const std::int64_t pad = cfg.center ? cfg.win_length / 2 : 0;
  const std::int64_t padded_len =
      static_cast<std::int64_t>(s.frames.size() - 1) * cfg.hop + cfg.win_length;
  std::vector<double> acc(static_cast<std::size_t>(padded_len), 0.0);
  std::vector<double> norm(static_cast<std::size_t>(padded_len), 0.0);

  std::vector<cplx> buf;
  for (std::size_t m = 0; m < s.frames.size(); ++m) {
    buf.assign(static_cast<std::size_t>(cfg.n_fft), cplx{0, 0});
    for (int k = 0; k <= cfg.n_fft / 2; ++k) {
      buf[static_cast<std::size_t>(k)] = s.frames[m][static_cast<std::size_t>(k)];
      if (k > 0 && k < cfg.n_fft / 2)
        buf[static_cast<std::size_t>(cfg.n_fft - k)] =
            std::conj(s.frames[m][static_cast<std::size_t>(k)]);
    }
    fft(buf, true);
    const std::int64_t start = static_cast<std::int64_t>(m) * cfg.hop;
    for (int i = 0; i < cfg.win_length; ++i) {
      const double w = window[static_cast<std::size_t>(i)];
      acc[static_cast<std::size_t>(start + i)] += buf[static_cast<std::size_t>(i)].real() * w;
      norm[static_cast<std::size_t>(start + i)] += w * w;
    }
  }

  std::vector<double> out(static_cast<std::size_t>(s.original_length), 0.0);
  for (std::int64_t i = 0; i < s.original_length; ++i) {
    const std::int64_t j = i + pad;
    if (j < padded_len && norm[static_cast<std::size_t>(j)] > 1e-8)
      out[static_cast<std::size_t>(i)] =
          acc[static_cast<std::size_t>(j)] / norm[static_cast<std::size_t>(j)];
  }
  return out;
}

std::vector<double> resample(const std::vector<double>& x, double step) {
  if (step <= 0) throw validation_error("resample: step must be positive");
  const std::int64_t out_len =
      static_cast<std::int64_t>(std::floor(static_cast<double>(x.size() - 1) / step)) + 1;
  std::vector<double> y(static_cast<std::size_t>(out_len));
  for (std::int64_t m = 0; m < out_len; ++m) {
    const double pos = static_cast<double>(m) * step;
    const auto i0 = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i0);
    const double a = x[i0];
    const double b = i0 + 1 < x.size() ? x[i0 + 1] : x[i0];
    y[static_cast<std::size_t>(m)] = a + frac * (b - a);
  }
  return y;
}

std::vector<double> time_stretch(const std::vector<double>& audio, double rate,
                                 const StftConfig& cfg) {
  if (rate <= 0) throw validation_error("time_stretch: rate must be positive");
  if (audio.empty()) throw validation_error("time_stretch: empty audio");
  const auto window = hann_window(cfg.win_length);
  const std::int64_t in_len = static_cast<std::int64_t>(audio.size());
  const std::int64_t out_len =
      static_cast<std::int64_t>(std::llround(static_cast<double>(in_len) / rate));
  const std::int64_t n_out_frames = out_len / cfg.hop + 1;
  const int n_bins = cfg.n_fft / 2 + 1;

  Stft synth;
  synth.cfg = cfg;
  synth.original_length = out_len;
  synth.frames.reserve(static_cast<std::size_t>(n_out_frames));

  std::vector<double> prev_in_phase(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> out_phase(static_cast<std::size_t>(n_bins), 0.0);
  std::int64_t prev_pos = 0;

  for (std::int64_t m = 0; m < n_out_frames; ++m) {
    const std::int64_t pos = static_cast<std::int64_t>(
        std::llround(static_cast<double>(m) * cfg.hop * rate));
    const auto frame = analyze_frame(audio, pos, window, cfg);

    std::vector<cplx> out_frame(static_cast<std::size_t>(n_bins));
    if (m == 0) {
      for (int k = 0; k < n_bins; ++k) {
        out_phase[static_cast<std::size_t>(k)] = std::arg(frame[static_cast<std::size_t>(k)]);
        out_frame[static_cast<std::size_t>(k)] = frame[static_cast<std::size_t>(k)];
        prev_in_phase[static_cast<std::size_t>(k)] = out_phase[static_cast<std::size_t>(k)];
      }
    } else {
      const double da = static_cast<double>(std::max<std::int64_t>(1, pos - prev_pos));
      for (int k = 0; k < n_bins; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const double in_phase = std::arg(frame[ku]);
        const double bin_freq = 2.0 * kPi * k / static_cast<double>(cfg.n_fft);
        const double dev = princarg(in_phase - prev_in_phase[ku] - bin_freq * da);
        const double inst_freq = bin_freq + dev / da;
        out_phase[ku] += inst_freq * static_cast<double>(cfg.hop);
        out_frame[ku] = std::polar(std::abs(frame[ku]), out_phase[ku]);
        prev_in_phase[ku] = in_phase;
      }
    }
    prev_pos = pos;
    synth.frames.push_back(std::move(out_frame));
  }
  return istft(synth);
}

std::vector<double> formant_shift(const std::vector<double>& audio, int sample_rate,
                                  double formant_mult, double quefrency_cutoff_s,
                                  const StftConfig& cfg) {
  if (formant_mult <= 0) throw validation_error("formant_shift: multiplier must be positive");
  Stft s = stft(audio, cfg);
  const int n_bins = cfg.n_fft / 2 + 1;
  const int q_cut = static_cast<int>(quefrency_cutoff_s * sample_rate);
  constexpr double mag_floor = 1e-10;

  std::vector<cplx> spec(static_cast<std::size_t>(cfg.n_fft));
  for (auto& frame : s.frames) {
    // full hermitian log-magnitude spectrum
    for (int k = 0; k < cfg.n_fft; ++k) {
      const int kk = k <= cfg.n_fft / 2 ? k : cfg.n_fft - k;
      spec[static_cast<std::size_t>(k)] =
          cplx{std::log(std::abs(frame[static_cast<std::size_t>(kk)]) + mag_floor), 0.0};
    }
    fft(spec, true);  // real cepstrum
    // keep only low quefrencies (spectral envelope)
    for (int q = 0; q < cfg.n_fft; ++q) {
      const int qq = std::min(q, cfg.n_fft - q);
      if (qq >= q_cut) spec[static_cast<std::size_t>(q)] = cplx{0, 0};
    }
    fft(spec, false);

    std::vector<double> envelope(static_cast<std::size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k)
      envelope[static_cast<std::size_t>(k)] = spec[static_cast<std::size_t>(k)].real();

    for (int k = 0; k < n_bins; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const double logmag = std::log(std::abs(frame[ku]) + mag_floor);
      const double residual = logmag - envelope[ku];
      // envelope value at the source frequency k / formant_mult
      const double src = static_cast<double>(k) / formant_mult;
      double warped;
      if (src >= static_cast<double>(n_bins - 1)) {
        warped = envelope[static_cast<std::size_t>(n_bins - 1)];
      } else {
        const auto i0 = static_cast<std::size_t>(src);
        const double frac = src - static_cast<double>(i0);
        warped = envelope[i0] + frac * (envelope[i0 + 1] - envelope[i0]);
      }
      const double new_mag = std::max(std::exp(warped + residual) - mag_floor, 0.0);
      const double phase = std::arg(frame[ku]);
      frame[ku] = std::polar(new_mag, phase);
    }
  }
  return istft(s);
}

}  // namespace segkit::dsp
