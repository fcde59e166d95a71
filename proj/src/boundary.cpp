#include "segkit/boundary.hpp"

#include <algorithm>

namespace segkit {

FrameGrid::FrameGrid(double hop, double window, int rate)
    : hop_s(hop), window_s(window), sample_rate(rate) {
  if (hop_s <= 0 || window_s <= 0)
    throw validation_error("FrameGrid: hop_s and window_s must be positive");
  if (window_s < hop_s)
    throw validation_error("FrameGrid: window_s must be >= hop_s");
  if (sample_rate <= 0)
    throw validation_error("FrameGrid: sample_rate must be positive");
}

BoundarySequence::BoundarySequence(std::vector<std::int64_t> f, std::int64_t t)
    : frames(std::move(f)), total_frames(t) {
  if (total_frames <= 0)
    throw validation_error("BoundarySequence: total_frames must be positive");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i] < 0 || frames[i] >= total_frames)
      throw validation_error("BoundarySequence: frame " + std::to_string(frames[i]) +
                             " out of range [0, " + std::to_string(total_frames) + ")");
    if (i > 0 && frames[i] <= frames[i - 1])
      throw validation_error("BoundarySequence: frames not strictly increasing at index " +
                             std::to_string(i));
  }
}

FrameLabelSequence::FrameLabelSequence(std::vector<std::uint8_t> l) : labels(std::move(l)) {
  for (auto v : labels)
    if (v > 1) throw validation_error("FrameLabelSequence: labels must be binary");
}

BoundarySequence intervals_to_boundaries(const std::vector<Interval>& intervals,
                                         const FrameGrid& grid, std::int64_t total_frames,
                                         bool include_edges) {
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (intervals[i].end_sample <= intervals[i].start_sample)
      throw validation_error("intervals_to_boundaries: empty or reversed interval at index " +
                             std::to_string(i));
    if (i > 0 && intervals[i].start_sample != intervals[i - 1].end_sample)
      throw validation_error(
          "intervals_to_boundaries: intervals " + std::to_string(i - 1) + " and " +
          std::to_string(i) + " are not contiguous (" +
          std::to_string(intervals[i - 1].end_sample) + " vs " +
          std::to_string(intervals[i].start_sample) + ")");
  }

  std::vector<std::int64_t> samples;
  if (include_edges && !intervals.empty()) samples.push_back(intervals.front().start_sample);
  for (std::size_t i = 0; i + 1 < intervals.size(); ++i)
    samples.push_back(intervals[i].end_sample);
  if (include_edges && !intervals.empty()) samples.push_back(intervals.back().end_sample);

  std::vector<std::int64_t> frames;
  for (auto s : samples) {
    std::int64_t f = grid.frame_of_sample(s);
    if (f >= total_frames) continue;
    if (frames.empty() || frames.back() != f) frames.push_back(f);
  }
  return BoundarySequence(std::move(frames), total_frames);
}

FrameLabelSequence boundaries_to_labels(const BoundarySequence& b) {
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(b.total_frames), 0);
  for (auto f : b.frames) labels[static_cast<std::size_t>(f)] = 1;
  return FrameLabelSequence(std::move(labels));
}

BoundarySequence labels_to_boundaries(const FrameLabelSequence& l) {
  std::vector<std::int64_t> frames;
  for (std::size_t t = 0; t < l.labels.size(); ++t)
    if (l.labels[t]) frames.push_back(static_cast<std::int64_t>(t));
  return BoundarySequence(std::move(frames), l.total_frames());
}

}  // namespace segkit
