#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "segkit/boundary.hpp"

namespace segkit {

// Piecewise-stationary synthetic speech: each segment is band-limited noise with
// a random spectral envelope, optionally with a harmonic stack, switching
// spectral content exactly at the annotated boundaries.
struct SyntheticSpec {
  int n_utterances = 100;
  double duration_lo_s = 0.4, duration_hi_s = 1.0;
  double segment_median_s = 0.080;
  double segment_sigma = 0.5;  // log-normal sigma
  int sample_rate = 16000;
  std::uint64_t seed = 0;
};

// Log-normal segment duration draw (median segment_median_s, sigma segment_sigma).
double draw_segment_duration(const SyntheticSpec& spec, std::mt19937_64& rng);

struct SyntheticUtterance {
  std::vector<double> samples;
  std::vector<Interval> intervals;
};

SyntheticUtterance synth_utterance(const SyntheticSpec& spec, std::uint64_t utterance_seed);

// Writes <out_dir>/uttNNNN.wav and uttNNNN.phn for each utterance; returns the
// utterance ids in order. Deterministic for a fixed spec.
std::vector<std::string> synth_corpus(const SyntheticSpec& spec, const std::string& out_dir);

}  // namespace segkit
