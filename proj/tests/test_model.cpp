#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "segkit/model.hpp"

using namespace segkit;

namespace {

SuperSegConfig tiny_config(bool autoregressive) {
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
  cfg.autoregressive = autoregressive;
  return cfg;
}

MelFrames random_mel(const SuperSegConfig& cfg, std::int64_t n_frames, std::uint64_t seed) {
  MelFrames m;
  m.n_frames = n_frames;
  m.d_mel = cfg.d_mel;
  m.values.resize(static_cast<std::size_t>(n_frames) * cfg.d_mel);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  for (auto& v : m.values) v = u(rng);
  return m;
}

template <typename T>
T mean_bce(const SuperSegParams<T>& p, const MelFrames& m,
           const std::vector<std::uint8_t>& labels) {
  auto probs = forward_teacher_forced(p, m, FrameLabelSequence(labels));
  return bce_loss(probs, labels);
}

}  // namespace

TEST_CASE("config validation") {
  auto cfg = tiny_config(true);
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.dilations = {1};
  CHECK_THROWS_AS(bad.validate(), validation_error);
  bad = cfg;
  bad.d_h = 100;
  CHECK_THROWS_AS(bad.validate(), validation_error);
  bad = cfg;
  bad.kernel = 2;
  CHECK_THROWS_AS(bad.validate(), validation_error);
  bad = cfg;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), validation_error);
}

TEST_CASE("parameter counts are pinned") {
  SuperSegConfig full;  // full-size defaults
  auto p = SuperSegParams<float>::make(full);
  CHECK(p.data.size() == 1780097);
  full.autoregressive = false;
  auto q = SuperSegParams<float>::make(full);
  CHECK(q.data.size() == 1714369);
}

TEST_CASE("initialization is deterministic and shaped as documented") {
  auto cfg = tiny_config(true);
  auto p1 = init_params<float>(cfg, 99, 0.1);
  auto p2 = init_params<float>(cfg, 99, 0.1);
  CHECK(p1.data == p2.data);
  auto p3 = init_params<float>(cfg, 100, 0.1);
  CHECK(p1.data != p3.data);

  // Layer-norm gain 1, bias 0.
  const float* g = p1.tensor("block0.ln.g");
  const float* b = p1.tensor("block0.ln.b");
  for (int i = 0; i < cfg.d_l; ++i) {
    CHECK(g[i] == 1.0f);
    CHECK(b[i] == 0.0f);
  }
  // Forget-gate bias 1 in gate order i,f,g,o.
  const float* lb = p1.tensor("lstm.b");
  for (int i = 0; i < cfg.decoder_hidden; ++i)
    CHECK(lb[cfg.decoder_hidden + i] == 1.0f);
  // Head bias at the logit of the boundary rate.
  CHECK(p1.tensor("head.b")[0] ==
        doctest::Approx(std::log(0.1 / 0.9)).epsilon(1e-5));
}

TEST_CASE("analytic gradients match central finite differences") {
  for (bool ar : {true, false}) {
    CAPTURE(ar);
    auto cfg = tiny_config(ar);
    auto p = init_params<double>(cfg, 31);
    const std::int64_t T = 3;
    auto m = random_mel(cfg, T, 5);
    std::vector<std::uint8_t> labels = {0, 1, 0};

    std::mt19937_64 rng(0);
    ForwardCache<double> cache;
    encode(p, mel_to_input<double>(m), T, false, rng, cache);
    decode_teacher_forced(p, labels, cache);
    std::vector<double> grad(p.data.size(), 0.0);
    backward(p, cache, labels, nullptr, 1.0 / static_cast<double>(T), grad);

    // Step chosen to balance truncation against roundoff on the smallest
    // gradient entries (~1e-7); 1e-6 drowns those in cancellation noise.
    const double eps = 1e-5;
    double worst = 0;
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      const double orig = p.data[j];
      p.data[j] = orig + eps;
      const double lp = mean_bce(p, m, labels);
      p.data[j] = orig - eps;
      const double lm = mean_bce(p, m, labels);
      p.data[j] = orig;
      const double num = (lp - lm) / (2 * eps);
      const double rel =
          std::abs(grad[j] - num) / std::max({std::abs(grad[j]), std::abs(num), 1e-8});
      worst = std::max(worst, rel);
      if (rel > 1e-4) {
        CAPTURE(j);
        CAPTURE(grad[j]);
        CAPTURE(num);
      }
      REQUIRE(rel <= 1e-4);
    }
    MESSAGE("worst relative error (ar=", ar, "): ", worst);
  }
}

TEST_CASE("encoder handles T=1 and honors its receptive field") {
  SuperSegConfig cfg;  // full-size block stack, narrow channels for speed
  cfg.d_mel = 8;
  cfg.d_l = 12;
  cfg.d_h = 8;
  cfg.d_e = 4;
  cfg.decoder_hidden = 8;
  cfg.dropout = 0.0;
  auto p = init_params<float>(cfg, 41);

  auto one = random_mel(cfg, 1, 1);
  std::mt19937_64 rng(0);
  ForwardCache<float> c1;
  encode(p, mel_to_input<float>(one), 1, false, rng, c1);
  CHECK(c1.h.size() == static_cast<std::size_t>(cfg.d_h));

  // Receptive field is 1 + 2*(1+2+4+1+2+4) = 29 frames; frame 0 cannot reach
  // frame 40.
  auto m = random_mel(cfg, 60, 2);
  ForwardCache<float> base, poked;
  encode(p, mel_to_input<float>(m), 60, false, rng, base);
  auto m2 = m;
  for (int c = 0; c < cfg.d_mel; ++c) m2.at(0, c) += 5.0f;
  encode(p, mel_to_input<float>(m2), 60, false, rng, poked);
  bool near_changed = false;
  for (int c = 0; c < cfg.d_h; ++c) {
    CHECK(poked.h[40 * cfg.d_h + c] == base.h[40 * cfg.d_h + c]);
    if (poked.h[static_cast<std::size_t>(c)] != base.h[static_cast<std::size_t>(c)])
      near_changed = true;
  }
  CHECK(near_changed);
}

TEST_CASE("threshold extremes and head-bias initialization") {
  auto cfg = tiny_config(true);
  auto p = init_params<float>(cfg, 19, 0.5);
  auto m = random_mel(cfg, 25, 3);
  CHECK(infer(p, m, 0.999999).frames.empty());
  CHECK(infer(p, m, 1e-6).frames.size() == 25);

  // With the head bias at logit(rate), the initial mean output sits near rate.
  auto q = init_params<float>(cfg, 19, 0.08);
  std::vector<std::uint8_t> zeros(25, 0);
  auto probs = forward_teacher_forced(q, m, FrameLabelSequence(zeros));
  double mean = 0;
  for (float v : probs) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
    mean += v;
  }
  mean /= static_cast<double>(probs.size());
  CHECK(mean == doctest::Approx(0.08).epsilon(0.6));
}

TEST_CASE("masked frames contribute no gradient") {
  auto cfg = tiny_config(true);
  auto p = init_params<double>(cfg, 8);
  const std::int64_t T = 4;
  auto m = random_mel(cfg, T, 9);
  std::vector<std::uint8_t> labels = {0, 1, 0, 1};
  std::vector<std::uint8_t> mask = {1, 1, 0, 0};

  std::mt19937_64 rng(0);
  ForwardCache<double> cache;
  encode(p, mel_to_input<double>(m), T, false, rng, cache);
  decode_teacher_forced(p, labels, cache);
  std::vector<double> g1(p.data.size(), 0.0);
  backward(p, cache, labels, &mask, 1.0, g1);

  // Flipping a masked label changes nothing.
  auto labels2 = labels;
  labels2[3] = 0;
  decode_teacher_forced(p, labels2, cache);
  std::vector<double> g2(p.data.size(), 0.0);
  backward(p, cache, labels2, &mask, 1.0, g2);
  // label[3] only feeds step 4 (absent) and its own loss term (masked).
  for (std::size_t j = 0; j < g1.size(); ++j) CHECK(g1[j] == g2[j]);
}

TEST_CASE("teacher forcing respects causality") {
  auto cfg = tiny_config(true);
  auto p = init_params<float>(cfg, 17);
  const std::int64_t T = 6;
  auto m = random_mel(cfg, T, 21);
  std::vector<std::uint8_t> base(static_cast<std::size_t>(T), 0);
  auto probs0 = forward_teacher_forced(p, m, FrameLabelSequence(base));

  for (std::size_t t = 0; t < base.size(); ++t) {
    auto flipped = base;
    flipped[t] = 1;
    auto probs = forward_teacher_forced(p, m, FrameLabelSequence(flipped));
    // p_0..p_t cannot see label_t.
    for (std::size_t s = 0; s <= t; ++s) CHECK(probs[s] == probs0[s]);
    // p_{t+1} sees label_t through the embedder.
    if (t + 1 < base.size()) CHECK(probs[t + 1] != probs0[t + 1]);
  }
}

TEST_CASE("non-autoregressive outputs ignore all labels") {
  auto cfg = tiny_config(false);
  auto p = init_params<float>(cfg, 17);
  const std::int64_t T = 6;
  auto m = random_mel(cfg, T, 21);
  std::vector<std::uint8_t> zeros(static_cast<std::size_t>(T), 0);
  auto probs0 = forward_teacher_forced(p, m, FrameLabelSequence(zeros));
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(T));
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng() % 2);
    auto probs = forward_teacher_forced(p, m, FrameLabelSequence(labels));
    CHECK(probs == probs0);
  }
}

TEST_CASE("inference is a teacher-forcing fixed point") {
  for (bool ar : {true, false}) {
    auto cfg = tiny_config(ar);
    auto p = init_params<float>(cfg, 77);
    auto m = random_mel(cfg, 30, 13);
    const double nu = 0.5;
    auto pred = infer(p, m, nu);
    auto labels = boundaries_to_labels(pred);
    auto probs = forward_teacher_forced(p, m, labels);
    for (std::size_t t = 0; t < probs.size(); ++t) {
      const std::uint8_t expect = static_cast<double>(probs[t]) > nu ? 1 : 0;
      CHECK(labels.labels[t] == expect);
    }
  }
  auto cfg = tiny_config(true);
  auto p = init_params<float>(cfg, 77);
  auto m = random_mel(cfg, 10, 13);
  CHECK_THROWS_AS(infer(p, m, 0.0), validation_error);
  CHECK_THROWS_AS(infer(p, m, 1.0), validation_error);
}

TEST_CASE("dropout draws depend only on the supplied rng") {
  auto cfg = tiny_config(true);
  cfg.dropout = 0.4;
  auto p = init_params<float>(cfg, 3);
  auto m = random_mel(cfg, 12, 2);
  auto run = [&](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ForwardCache<float> cache;
    encode(p, mel_to_input<float>(m), m.n_frames, true, rng, cache);
    return cache.blocks[0].drop_mask;
  };
  CHECK(run(5) == run(5));
  CHECK(run(5) != run(6));
}

TEST_CASE("bce_loss values and masking") {
  std::vector<float> probs = {0.5f, 0.5f};
  std::vector<std::uint8_t> labels = {0, 1};
  CHECK(bce_loss(probs, labels) == doctest::Approx(std::log(2.0)));
  std::vector<std::uint8_t> mask = {1, 0};
  CHECK(bce_loss(probs, labels, &mask) == doctest::Approx(std::log(2.0)));
  std::vector<std::uint8_t> none = {0, 0};
  CHECK(bce_loss(probs, labels, &none) == 0.0f);
  std::vector<float> bad = {0.5f};
  CHECK_THROWS_AS(bce_loss(bad, labels), validation_error);
}

TEST_CASE("gradient descent on one utterance reduces the loss") {
  auto cfg = tiny_config(true);
  auto p = init_params<double>(cfg, 55);
  const std::int64_t T = 20;
  auto m = random_mel(cfg, T, 61);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(T), 0);
  labels[4] = labels[11] = labels[16] = 1;

  const double initial = mean_bce(p, m, labels);
  std::mt19937_64 rng(0);
  for (int step = 0; step < 400; ++step) {
    ForwardCache<double> cache;
    encode(p, mel_to_input<double>(m), T, false, rng, cache);
    decode_teacher_forced(p, labels, cache);
    std::vector<double> grad(p.data.size(), 0.0);
    backward(p, cache, labels, nullptr, 1.0 / static_cast<double>(T), grad);
    for (std::size_t j = 0; j < p.data.size(); ++j) p.data[j] -= 0.1 * grad[j];
  }
  const double final = mean_bce(p, m, labels);
  CHECK(final < 0.5 * initial);
}
