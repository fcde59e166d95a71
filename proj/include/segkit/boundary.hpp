#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segkit/error.hpp"

namespace segkit {

// Analysis frame grid: frame index of sample s is floor(s / (hop_s * sample_rate)).
struct FrameGrid {
  double hop_s = 0.010;
  double window_s = 0.040;
  int sample_rate = 16000;

  FrameGrid() = default;
  FrameGrid(double hop, double window, int rate);

  int hop_samples() const { return static_cast<int>(hop_s * sample_rate + 0.5); }
  int window_samples() const { return static_cast<int>(window_s * sample_rate + 0.5); }
  std::int64_t frame_of_sample(std::int64_t sample) const { return sample / hop_samples(); }
};

// Strictly increasing frame indices marking phoneme transitions, all < total_frames.
struct BoundarySequence {
  std::vector<std::int64_t> frames;
  std::int64_t total_frames = 0;

  BoundarySequence() = default;
  BoundarySequence(std::vector<std::int64_t> f, std::int64_t t);

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
};

// Per-frame binary labels; 1 exactly at boundary frames.
struct FrameLabelSequence {
  std::vector<std::uint8_t> labels;

  explicit FrameLabelSequence(std::vector<std::uint8_t> l = {});
  std::int64_t total_frames() const { return static_cast<std::int64_t>(labels.size()); }
};

struct Interval {
  std::int64_t start_sample = 0;
  std::int64_t end_sample = 0;
  std::string label;
};

// Converts interval transitions to frame-index boundaries. Utterance-initial and
// utterance-final boundaries are excluded when include_edges is false (the default);
// transitions collapsing to one frame are merged, frames >= total_frames dropped.
BoundarySequence intervals_to_boundaries(const std::vector<Interval>& intervals,
                                         const FrameGrid& grid, std::int64_t total_frames,
                                         bool include_edges = false);

FrameLabelSequence boundaries_to_labels(const BoundarySequence& b);
BoundarySequence labels_to_boundaries(const FrameLabelSequence& l);

}  // namespace segkit
