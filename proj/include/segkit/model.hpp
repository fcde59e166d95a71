#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "segkit/boundary.hpp"
#include "segkit/error.hpp"
#include "segkit/features.hpp"
#include "segkit/kernels.hpp"

namespace segkit {

struct SuperSegConfig {
  int d_mel = 80;
  int d_l = 256;
  int d_h = 192;
  int d_e = 64;
  int n_blocks = 6;
  int kernel = 3;
  std::vector<int> dilations = {1, 2, 4, 1, 2, 4};
  double dropout = 0.4;
  int decoder_hidden = 256;
  bool autoregressive = true;

  void validate() const {
    if (static_cast<int>(dilations.size()) != n_blocks)
      throw validation_error("SuperSegConfig: dilations size must equal n_blocks");
    if (d_l < d_h) throw validation_error("SuperSegConfig: requires d_l >= d_h");
    if (d_mel <= 0 || d_l <= 0 || d_h <= 0 || d_e <= 0 || decoder_hidden <= 0 || kernel <= 0)
      throw validation_error("SuperSegConfig: dimensions must be positive");
    if (kernel % 2 == 0) throw validation_error("SuperSegConfig: kernel must be odd");
    if (dropout < 0 || dropout >= 1) throw validation_error("SuperSegConfig: bad dropout");
  }

  int lstm_input_dim() const { return autoregressive ? d_h + d_e : d_h; }
};

struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// All learnable weights in one flat buffer with a named layout, so the
// optimizer, serialization, and finite differencing all see the same view.
template <typename T>
struct SuperSegParams {
  SuperSegConfig cfg;
  std::vector<T> data;
  std::vector<TensorInfo> tensors;

  static SuperSegParams make(const SuperSegConfig& c) {
    c.validate();
    SuperSegParams p;
    p.cfg = c;
    auto add = [&p](const std::string& name, std::size_t size) {
      p.tensors.push_back({name, p.data.size(), size});
      p.data.resize(p.data.size() + size, T(0));
    };
    const auto dl = static_cast<std::size_t>(c.d_l);
    add("in_proj.w", dl * c.d_mel);
    add("in_proj.b", dl);
    for (int b = 0; b < c.n_blocks; ++b) {
      const std::string pre = "block" + std::to_string(b) + ".";
      add(pre + "conv.w", dl * dl * static_cast<std::size_t>(c.kernel));
      add(pre + "conv.b", dl);
      add(pre + "ln.g", dl);
      add(pre + "ln.b", dl);
    }
    add("out_proj.w", static_cast<std::size_t>(c.d_h) * c.d_l);
    add("out_proj.b", static_cast<std::size_t>(c.d_h));
    if (c.autoregressive) {
      add("embed.table", 2 * static_cast<std::size_t>(c.d_e));
      add("embed.start", static_cast<std::size_t>(c.d_e));
    }
    const auto h = static_cast<std::size_t>(c.decoder_hidden);
    add("lstm.wx", 4 * h * static_cast<std::size_t>(c.lstm_input_dim()));
    add("lstm.wh", 4 * h * h);
    add("lstm.b", 4 * h);
    add("head.w", h);
    add("head.b", 1);
    return p;
  }

  const TensorInfo& info(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    throw runtime_failure("SuperSegParams: unknown tensor " + name);
  }
  T* tensor(const std::string& name) { return data.data() + info(name).offset; }
  const T* tensor(const std::string& name) const { return data.data() + info(name).offset; }
};

// Weights uniform in +-1/sqrt(fan_in); layer-norm gain 1, bias 0; LSTM forget
// gate bias 1; output-head bias at the logit of boundary_rate.
template <typename T>
SuperSegParams<T> init_params(const SuperSegConfig& cfg, std::uint64_t seed,
                              double boundary_rate = 0.5) {
  auto p = SuperSegParams<T>::make(cfg);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  auto fill_uniform = [&](const std::string& name, int fan_in) {
    const auto& t = p.info(name);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size; ++i)
      p.data[t.offset + i] = static_cast<T>(unit(rng) * scale);
  };

  fill_uniform("in_proj.w", cfg.d_mel);
  fill_uniform("in_proj.b", cfg.d_mel);
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const std::string pre = "block" + std::to_string(b) + ".";
    fill_uniform(pre + "conv.w", cfg.d_l * cfg.kernel);
    fill_uniform(pre + "conv.b", cfg.d_l * cfg.kernel);
    T* g = p.tensor(pre + "ln.g");
    for (int i = 0; i < cfg.d_l; ++i) g[i] = T(1);
  }
  fill_uniform("out_proj.w", cfg.d_l);
  fill_uniform("out_proj.b", cfg.d_l);
  if (cfg.autoregressive) {
    fill_uniform("embed.table", cfg.d_e);
    fill_uniform("embed.start", cfg.d_e);
  }
  const int din = cfg.lstm_input_dim();
  fill_uniform("lstm.wx", din);
  fill_uniform("lstm.wh", cfg.decoder_hidden);
  fill_uniform("lstm.b", cfg.decoder_hidden);
  {
    // gate order i, f, g, o; forget-gate bias starts at 1
    T* b = p.tensor("lstm.b");
    for (int i = 0; i < cfg.decoder_hidden; ++i) b[cfg.decoder_hidden + i] = T(1);
  }
  fill_uniform("head.w", cfg.decoder_hidden);
  {
    const double r = std::min(std::max(boundary_rate, 1e-6), 1.0 - 1e-6);
    p.tensor("head.b")[0] = static_cast<T>(std::log(r / (1.0 - r)));
  }
  return p;
}

template <typename T>
struct ForwardCache {
  std::int64_t n_frames = 0;
  std::vector<T> input;   // T x d_mel
  std::vector<T> x_proj;  // T x d_l
  struct BlockCache {
    std::vector<T> conv_out, mean, rstd, ln_out, out;  // out = relu+dropout result
    std::vector<T> drop_mask;                          // scale factors (0 or 1/(1-p))
  };
  std::vector<BlockCache> blocks;
  std::vector<T> h;  // T x d_h
  // decoder (teacher forced)
  std::vector<T> z;                                   // T x lstm_input
  std::vector<T> gi, gf, gg, go, cell, tanh_c, hout;  // each T x H
  std::vector<T> probs;                               // T
  std::vector<std::uint8_t> prev_labels;              // label fed at each step (t-1), 2 = start
};

namespace detail {
template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}
}  // namespace detail

// Acoustic encoder: input projection, n_blocks of {dilated conv, layer norm,
// ReLU, dropout}, projection to d_h.
template <typename T>
void encode(const SuperSegParams<T>& p, const std::vector<T>& input, std::int64_t n_frames,
            bool training, std::mt19937_64& rng, ForwardCache<T>& cache) {
  const auto& cfg = p.cfg;
  cache.n_frames = n_frames;
  cache.input = input;
  const auto rows = static_cast<std::size_t>(n_frames);

  cache.x_proj.assign(rows * cfg.d_l, T(0));
  par::linear_forward(input.data(), p.tensor("in_proj.w"), p.tensor("in_proj.b"),
                      cache.x_proj.data(), n_frames, cfg.d_mel, cfg.d_l);

  cache.blocks.assign(static_cast<std::size_t>(cfg.n_blocks), {});
  const T* x = cache.x_proj.data();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int b = 0; b < cfg.n_blocks; ++b) {
    auto& bc = cache.blocks[static_cast<std::size_t>(b)];
    const std::string pre = "block" + std::to_string(b) + ".";
    bc.conv_out.assign(rows * cfg.d_l, T(0));
    par::conv1d_forward(x, p.tensor(pre + "conv.w"), p.tensor(pre + "conv.b"),
                        bc.conv_out.data(), n_frames, cfg.d_l, cfg.d_l, cfg.kernel,
                        cfg.dilations[static_cast<std::size_t>(b)]);
    bc.mean.assign(rows, T(0));
    bc.rstd.assign(rows, T(0));
    bc.ln_out.assign(rows * cfg.d_l, T(0));
    par::layernorm_forward(bc.conv_out.data(), p.tensor(pre + "ln.g"), p.tensor(pre + "ln.b"),
                           bc.ln_out.data(), bc.mean.data(), bc.rstd.data(), n_frames, cfg.d_l);
    bc.out.assign(rows * cfg.d_l, T(0));
    bc.drop_mask.assign(rows * cfg.d_l, T(1));
    const T keep_scale = T(1.0 / (1.0 - cfg.dropout));
    for (std::size_t i = 0; i < bc.out.size(); ++i) {
      T v = bc.ln_out[i] > T(0) ? bc.ln_out[i] : T(0);
      if (training && cfg.dropout > 0) {
        const bool keep = unit(rng) >= cfg.dropout;
        bc.drop_mask[i] = keep ? keep_scale : T(0);
        v *= bc.drop_mask[i];
      }
      bc.out[i] = v;
    }
    x = bc.out.data();
  }

  cache.h.assign(rows * cfg.d_h, T(0));
  par::linear_forward(x, p.tensor("out_proj.w"), p.tensor("out_proj.b"), cache.h.data(),
                      n_frames, cfg.d_l, cfg.d_h);
  for (const T v : cache.h)
    if (!std::isfinite(static_cast<double>(v)))
      throw runtime_failure("encode: non-finite activation");
}

// One LSTM step + sigmoid head. prev_label: 0/1 selects an embedding row, 2 the
// start embedding (only consulted in the AR variant).
template <typename T>
void decoder_step(const SuperSegParams<T>& p, const T* h_t, std::uint8_t prev_label,
                  const T* h_prev, const T* c_prev, T* z, T* gi, T* gf, T* gg, T* go, T* cell,
                  T* tanh_c, T* hout, T* prob) {
  const auto& cfg = p.cfg;
  const int H = cfg.decoder_hidden;
  const int din = cfg.lstm_input_dim();

  for (int i = 0; i < cfg.d_h; ++i) z[i] = h_t[i];
  if (cfg.autoregressive) {
    const T* e = prev_label == 2 ? p.tensor("embed.start")
                                 : p.tensor("embed.table") + static_cast<std::size_t>(prev_label) * cfg.d_e;
    for (int i = 0; i < cfg.d_e; ++i) z[cfg.d_h + i] = e[i];
  }

  std::vector<T> gates(static_cast<std::size_t>(4 * H)), gh(static_cast<std::size_t>(4 * H));
  ref::linear_forward(z, p.tensor("lstm.wx"), p.tensor("lstm.b"), gates.data(), 1, din, 4 * H);
  ref::linear_forward(h_prev, p.tensor("lstm.wh"), static_cast<const T*>(nullptr), gh.data(), 1, H, 4 * H);
  for (int i = 0; i < 4 * H; ++i) gates[static_cast<std::size_t>(i)] += gh[static_cast<std::size_t>(i)];

  for (int i = 0; i < H; ++i) {
    gi[i] = detail::sigmoid(gates[static_cast<std::size_t>(i)]);
    gf[i] = detail::sigmoid(gates[static_cast<std::size_t>(H + i)]);
    gg[i] = std::tanh(gates[static_cast<std::size_t>(2 * H + i)]);
    go[i] = detail::sigmoid(gates[static_cast<std::size_t>(3 * H + i)]);
    cell[i] = gf[i] * c_prev[i] + gi[i] * gg[i];
    tanh_c[i] = std::tanh(cell[i]);
    hout[i] = go[i] * tanh_c[i];
  }
  T logit = p.tensor("head.b")[0];
  const T* hw = p.tensor("head.w");
  for (int i = 0; i < H; ++i) logit += hw[i] * hout[i];
  *prob = detail::sigmoid(logit);
}

// Teacher-forced decoder: feeds the ground-truth label of frame t-1 at step t.
template <typename T>
void decode_teacher_forced(const SuperSegParams<T>& p, const std::vector<std::uint8_t>& labels,
                           ForwardCache<T>& cache) {
  const auto& cfg = p.cfg;
  const std::int64_t n = cache.n_frames;
  if (static_cast<std::int64_t>(labels.size()) != n)
    throw validation_error("decode_teacher_forced: label length mismatch");
  const int H = cfg.decoder_hidden;
  const auto rows = static_cast<std::size_t>(n);

  cache.z.assign(rows * static_cast<std::size_t>(cfg.lstm_input_dim()), T(0));
  cache.gi.assign(rows * H, T(0));
  cache.gf.assign(rows * H, T(0));
  cache.gg.assign(rows * H, T(0));
  cache.go.assign(rows * H, T(0));
  cache.cell.assign(rows * H, T(0));
  cache.tanh_c.assign(rows * H, T(0));
  cache.hout.assign(rows * H, T(0));
  cache.probs.assign(rows, T(0));
  cache.prev_labels.assign(rows, 2);

  std::vector<T> h_prev(static_cast<std::size_t>(H), T(0));
  std::vector<T> c_prev(static_cast<std::size_t>(H), T(0));
  for (std::int64_t t = 0; t < n; ++t) {
    const auto tu = static_cast<std::size_t>(t);
    const std::uint8_t prev = t == 0 ? std::uint8_t{2} : labels[tu - 1];
    cache.prev_labels[tu] = prev;
    decoder_step(p, cache.h.data() + t * cfg.d_h, prev, h_prev.data(), c_prev.data(),
                 cache.z.data() + t * cfg.lstm_input_dim(), cache.gi.data() + t * H,
                 cache.gf.data() + t * H, cache.gg.data() + t * H, cache.go.data() + t * H,
                 cache.cell.data() + t * H, cache.tanh_c.data() + t * H,
                 cache.hout.data() + t * H, &cache.probs[tu]);
    std::copy(cache.hout.begin() + static_cast<std::ptrdiff_t>(t * H),
              cache.hout.begin() + static_cast<std::ptrdiff_t>((t + 1) * H), h_prev.begin());
    std::copy(cache.cell.begin() + static_cast<std::ptrdiff_t>(t * H),
              cache.cell.begin() + static_cast<std::ptrdiff_t>((t + 1) * H), c_prev.begin());
  }
}

// Mean binary cross entropy over unmasked frames; probabilities clamped at 1e-7.
template <typename T>
T bce_loss(const std::vector<T>& probs, const std::vector<std::uint8_t>& labels,
           const std::vector<std::uint8_t>* mask = nullptr) {
  if (probs.size() != labels.size()) throw validation_error("bce_loss: length mismatch");
  double total = 0;
  std::int64_t count = 0;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (mask && !(*mask)[t]) continue;
    const double pc = std::min(std::max(static_cast<double>(probs[t]), 1e-7), 1.0 - 1e-7);
    total += labels[t] ? -std::log(pc) : -std::log(1.0 - pc);
    ++count;
  }
  return count == 0 ? T(0) : static_cast<T>(total / static_cast<double>(count));
}

// Backpropagates grad_scale * d(sum of per-frame BCE)/d(theta) into grad (same
// layout as params.data). The cache must come from encode + decode_teacher_forced.
template <typename T>
void backward(const SuperSegParams<T>& p, const ForwardCache<T>& cache,
              const std::vector<std::uint8_t>& labels, const std::vector<std::uint8_t>* mask,
              T grad_scale, std::vector<T>& grad) {
  const auto& cfg = p.cfg;
  const std::int64_t n = cache.n_frames;
  const int H = cfg.decoder_hidden;
  const int din = cfg.lstm_input_dim();
  if (grad.size() != p.data.size()) throw validation_error("backward: bad gradient buffer");

  SuperSegParams<T> gview;  // same layout over the grad buffer
  gview.cfg = cfg;
  gview.tensors = p.tensors;
  gview.data.swap(grad);

  std::vector<T> dh_enc(static_cast<std::size_t>(n) * cfg.d_h, T(0));
  {
    std::vector<T> dh_next(static_cast<std::size_t>(H), T(0));
    std::vector<T> dc_next(static_cast<std::size_t>(H), T(0));
    std::vector<T> da(static_cast<std::size_t>(4 * H), T(0));
    std::vector<T> dz(static_cast<std::size_t>(din), T(0));
    T* d_headw = gview.tensor("head.w");
    T* d_headb = gview.tensor("head.b");
    const T* headw = p.tensor("head.w");

    for (std::int64_t t = n - 1; t >= 0; --t) {
      const auto tu = static_cast<std::size_t>(t);
      const T* gi = cache.gi.data() + t * H;
      const T* gf = cache.gf.data() + t * H;
      const T* gg = cache.gg.data() + t * H;
      const T* go = cache.go.data() + t * H;
      const T* tc = cache.tanh_c.data() + t * H;
      const T* hv = cache.hout.data() + t * H;
      const T* zv = cache.z.data() + t * din;
      const T* c_prev = t == 0 ? nullptr : cache.cell.data() + (t - 1) * H;
      const T* h_prev = t == 0 ? nullptr : cache.hout.data() + (t - 1) * H;

      std::vector<T> dh(dh_next);
      std::vector<T> dc(dc_next);
      const bool valid = !mask || (*mask)[tu];
      if (valid) {
        const T dlogit = grad_scale * (cache.probs[tu] - T(labels[tu]));
        for (int i = 0; i < H; ++i) {
          dh[static_cast<std::size_t>(i)] += dlogit * headw[i];
          d_headw[i] += dlogit * hv[i];
        }
        d_headb[0] += dlogit;
      }

      for (int i = 0; i < H; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const T do_ = dh[iu] * tc[i];
        dc[iu] += dh[iu] * go[i] * (T(1) - tc[i] * tc[i]);
        const T di = dc[iu] * gg[i];
        const T df = dc[iu] * (t == 0 ? T(0) : c_prev[i]);
        const T dg = dc[iu] * gi[i];
        da[iu] = di * gi[i] * (T(1) - gi[i]);
        da[static_cast<std::size_t>(H + i)] = df * gf[i] * (T(1) - gf[i]);
        da[static_cast<std::size_t>(2 * H + i)] = dg * (T(1) - gg[i] * gg[i]);
        da[static_cast<std::size_t>(3 * H + i)] = do_ * go[i] * (T(1) - go[i]);
        dc_next[iu] = dc[iu] * gf[i];
      }

      std::fill(dz.begin(), dz.end(), T(0));
      ref::linear_backward(zv, p.tensor("lstm.wx"), da.data(), dz.data(),
                           gview.tensor("lstm.wx"), gview.tensor("lstm.b"), 1, din, 4 * H);
      std::fill(dh_next.begin(), dh_next.end(), T(0));
      if (t > 0)
        ref::linear_backward(h_prev, p.tensor("lstm.wh"), da.data(), dh_next.data(),
                             gview.tensor("lstm.wh"), static_cast<T*>(nullptr), 1, H, 4 * H);

      for (int i = 0; i < cfg.d_h; ++i) dh_enc[tu * cfg.d_h + static_cast<std::size_t>(i)] += dz[static_cast<std::size_t>(i)];
      if (cfg.autoregressive) {
        const std::uint8_t prev = cache.prev_labels[tu];
        T* de = prev == 2 ? gview.tensor("embed.start")
                          : gview.tensor("embed.table") + static_cast<std::size_t>(prev) * cfg.d_e;
        for (int i = 0; i < cfg.d_e; ++i) de[i] += dz[static_cast<std::size_t>(cfg.d_h + i)];
      }
    }
  }

  // encoder backward
  const T* last_out =
      cfg.n_blocks > 0 ? cache.blocks.back().out.data() : cache.x_proj.data();
  std::vector<T> dx(static_cast<std::size_t>(n) * cfg.d_l, T(0));
  par::linear_backward(last_out, p.tensor("out_proj.w"), dh_enc.data(), dx.data(),
                       gview.tensor("out_proj.w"), gview.tensor("out_proj.b"), n, cfg.d_l,
                       cfg.d_h);

  for (int b = cfg.n_blocks - 1; b >= 0; --b) {
    const auto& bc = cache.blocks[static_cast<std::size_t>(b)];
    const std::string pre = "block" + std::to_string(b) + ".";
    // dropout + relu
    std::vector<T> d_ln(static_cast<std::size_t>(n) * cfg.d_l, T(0));
    for (std::size_t i = 0; i < d_ln.size(); ++i) {
      T d = dx[i] * bc.drop_mask[i];
      d_ln[i] = bc.ln_out[i] > T(0) ? d : T(0);
    }
    std::vector<T> d_conv(static_cast<std::size_t>(n) * cfg.d_l, T(0));
    par::layernorm_backward(bc.conv_out.data(), p.tensor(pre + "ln.g"), bc.mean.data(),
                            bc.rstd.data(), d_ln.data(), d_conv.data(),
                            gview.tensor(pre + "ln.g"), gview.tensor(pre + "ln.b"), n, cfg.d_l);
    const T* block_in =
        b == 0 ? cache.x_proj.data() : cache.blocks[static_cast<std::size_t>(b - 1)].out.data();
    std::fill(dx.begin(), dx.end(), T(0));
    par::conv1d_backward(block_in, p.tensor(pre + "conv.w"), d_conv.data(), dx.data(),
                         gview.tensor(pre + "conv.w"), gview.tensor(pre + "conv.b"), n, cfg.d_l,
                         cfg.d_l, cfg.kernel, cfg.dilations[static_cast<std::size_t>(b)]);
  }

  par::linear_backward(cache.input.data(), p.tensor("in_proj.w"), dx.data(), static_cast<T*>(nullptr),
                       gview.tensor("in_proj.w"), gview.tensor("in_proj.b"), n, cfg.d_mel,
                       cfg.d_l);

  gview.data.swap(grad);
}

template <typename T>
std::vector<T> mel_to_input(const MelFrames& m) {
  std::vector<T> x(m.values.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<T>(m.values[i]);
  return x;
}

// Teacher-forced probabilities for a whole utterance (dropout off).
template <typename T>
std::vector<T> forward_teacher_forced(const SuperSegParams<T>& p, const MelFrames& m,
                                      const FrameLabelSequence& labels) {
  std::mt19937_64 rng(0);
  ForwardCache<T> cache;
  encode(p, mel_to_input<T>(m), m.n_frames, false, rng, cache);
  decode_teacher_forced(p, labels.labels, cache);
  return cache.probs;
}

// Autoregressive thresholded inference; the non-AR variant ignores fed-back labels.
template <typename T>
BoundarySequence infer(const SuperSegParams<T>& p, const MelFrames& m, double nu) {
  if (nu <= 0 || nu >= 1) throw validation_error("infer: threshold must be in (0,1)");
  const auto& cfg = p.cfg;
  const int H = cfg.decoder_hidden;
  std::mt19937_64 rng(0);
  ForwardCache<T> cache;
  encode(p, mel_to_input<T>(m), m.n_frames, false, rng, cache);

  std::vector<T> h_prev(static_cast<std::size_t>(H), T(0)), c_prev(h_prev);
  std::vector<T> z(static_cast<std::size_t>(cfg.lstm_input_dim()));
  std::vector<T> gi(h_prev), gf(h_prev), gg(h_prev), go(h_prev), cell(h_prev), tanh_c(h_prev),
      hout(h_prev);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(m.n_frames), 0);
  std::uint8_t prev = 2;
  for (std::int64_t t = 0; t < m.n_frames; ++t) {
    T prob = T(0);
    decoder_step(p, cache.h.data() + t * cfg.d_h, prev, h_prev.data(), c_prev.data(), z.data(),
                 gi.data(), gf.data(), gg.data(), go.data(), cell.data(), tanh_c.data(),
                 hout.data(), &prob);
    const std::uint8_t label = static_cast<double>(prob) > nu ? 1 : 0;
    labels[static_cast<std::size_t>(t)] = label;
    prev = label;
    h_prev = hout;
    c_prev = cell;
  }
  return labels_to_boundaries(FrameLabelSequence(std::move(labels)));
}

}  // namespace segkit
