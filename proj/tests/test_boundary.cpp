#include <doctest.h>

#include <random>

#include "segkit/boundary.hpp"

using namespace segkit;

namespace {
FrameGrid grid16k() { return FrameGrid(0.010, 0.040, 16000); }
}  // namespace

TEST_CASE("intervals_to_boundaries converts transitions to frame indices") {
  std::vector<Interval> ivs = {{0, 1600, "h#"}, {1600, 4800, "sh"}, {4800, 8000, "iy"}};
  auto b = intervals_to_boundaries(ivs, grid16k(), 50);
  CHECK(b.frames == std::vector<std::int64_t>{10, 30});
  CHECK(b.total_frames == 50);
}

TEST_CASE("single interval yields no boundary") {
  std::vector<Interval> ivs = {{0, 8000, "h#"}};
  auto b = intervals_to_boundaries(ivs, grid16k(), 50);
  CHECK(b.frames.empty());
}

TEST_CASE("transitions mapping to the same frame are collapsed") {
  std::vector<Interval> ivs = {{0, 1605, "a"}, {1605, 1615, "b"}, {1615, 8000, "c"}};
  auto b = intervals_to_boundaries(ivs, grid16k(), 50);
  CHECK(b.frames == std::vector<std::int64_t>{10});
}

TEST_CASE("edge boundaries included only when requested") {
  std::vector<Interval> ivs = {{0, 1600, "a"}, {1600, 4800, "b"}};
  auto without = intervals_to_boundaries(ivs, grid16k(), 40, false);
  CHECK(without.frames == std::vector<std::int64_t>{10});
  auto with = intervals_to_boundaries(ivs, grid16k(), 40, true);
  CHECK(with.frames == std::vector<std::int64_t>{0, 10, 30});
}

TEST_CASE("boundaries past total_frames are dropped") {
  std::vector<Interval> ivs = {{0, 1600, "a"}, {1600, 9600, "b"}, {9600, 12000, "c"}};
  auto b = intervals_to_boundaries(ivs, grid16k(), 20);
  CHECK(b.frames == std::vector<std::int64_t>{10});
}

TEST_CASE("non-contiguous intervals are rejected with the offending pair") {
  std::vector<Interval> ivs = {{0, 1600, "a"}, {1700, 4800, "b"}};
  CHECK_THROWS_WITH_AS(intervals_to_boundaries(ivs, grid16k(), 50),
                       doctest::Contains("intervals 0 and 1"), validation_error);
}

TEST_CASE("boundaries_to_labels basics") {
  CHECK(boundaries_to_labels(BoundarySequence({1, 3}, 5)).labels ==
        std::vector<std::uint8_t>{0, 1, 0, 1, 0});
  CHECK(boundaries_to_labels(BoundarySequence({}, 3)).labels ==
        std::vector<std::uint8_t>{0, 0, 0});
}

TEST_CASE("labels_to_boundaries basics") {
  CHECK(labels_to_boundaries(FrameLabelSequence({0, 1, 0, 1, 0})).frames ==
        std::vector<std::int64_t>{1, 3});
  CHECK(labels_to_boundaries(FrameLabelSequence({0, 0, 0})).frames.empty());
  CHECK(labels_to_boundaries(FrameLabelSequence({1, 1, 1, 1})).frames ==
        std::vector<std::int64_t>{0, 1, 2, 3});
}

TEST_CASE("label round trip over random boundary sequences") {
  std::mt19937_64 rng(42);
  for (int it = 0; it < 1000; ++it) {
    const std::int64_t total = 1 + static_cast<std::int64_t>(rng() % 60);
    std::vector<std::int64_t> frames;
    for (std::int64_t f = 0; f < total; ++f)
      if (rng() % 4 == 0) frames.push_back(f);
    BoundarySequence b(frames, total);
    auto round = labels_to_boundaries(boundaries_to_labels(b));
    CHECK(round.frames == b.frames);
    CHECK(round.total_frames == b.total_frames);
  }
}

TEST_CASE("BoundarySequence invariants enforced") {
  CHECK_THROWS_AS(BoundarySequence({3, 2}, 5), validation_error);
  CHECK_THROWS_AS(BoundarySequence({5}, 5), validation_error);
  CHECK_THROWS_AS(BoundarySequence({-1}, 5), validation_error);
  CHECK_THROWS_AS(FrameLabelSequence({0, 2}), validation_error);
}

TEST_CASE("FrameGrid validation and frame mapping") {
  CHECK_THROWS_AS(FrameGrid(0.0, 0.04, 16000), validation_error);
  CHECK_THROWS_AS(FrameGrid(0.02, 0.01, 16000), validation_error);
  const auto g = grid16k();
  CHECK(g.hop_samples() == 160);
  CHECK(g.window_samples() == 640);
  CHECK(g.frame_of_sample(159) == 0);
  CHECK(g.frame_of_sample(160) == 1);
}
