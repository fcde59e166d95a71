#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "segkit/boundary.hpp"

namespace segkit {

// Matching tolerance in frames.
struct Tolerance {
  std::int64_t gamma_frames = 2;

  Tolerance() = default;
  explicit Tolerance(std::int64_t frames);
  static Tolerance from_ms(double ms, const FrameGrid& grid);
};

enum class HitScheme { conventional, proposed };
enum class Aggregation { pooled, macro };

struct PairScore {
  double precision = 0, recall = 0, f1 = 0, r_value = 0;
  std::int64_t n_hit_precision = 0, n_hit_recall = 0;
  std::int64_t n_ref = 0, n_pred = 0;
  HitScheme scheme = HitScheme::proposed;
};

struct CorpusScore {
  PairScore score;
  Aggregation aggregation = Aggregation::pooled;
  std::size_t n_utterances = 0;
};

struct HitResult {
  std::int64_t n_hit = 0;
  double ratio = 0;
};

// Sequential matching: each a_i in order claims the first unclaimed b_j within
// gamma; the claimed b_j is removed. Ratio is n_hit / |A|, or 1.0 when A is empty.
HitResult proposed_hit_ratio(const std::vector<std::int64_t>& a,
                             const std::vector<std::int64_t>& b, Tolerance gamma);

// Independent hit counting: a_i hits if any b_j is within gamma; b is never consumed.
HitResult conventional_hit_ratio(const std::vector<std::int64_t>& a,
                                 const std::vector<std::int64_t>& b, Tolerance gamma);

// Maximum bipartite matching on {(a,b) : |a-b| <= gamma}, by augmenting paths.
// Test oracle for the sequential scheme; |A|, |B| limited to 2000.
std::int64_t oracle_max_matching(const std::vector<std::int64_t>& a,
                                 const std::vector<std::int64_t>& b, Tolerance gamma);

double f1_score(double p, double r);

// R-value from precision and recall: HR = r, OS = r/p - 1,
// r1 = sqrt((1-HR)^2 + OS^2), r2 = (-OS + HR - 1)/sqrt(2), R = 1 - (|r1|+|r2|)/2.
double r_value(double p, double r);

PairScore score_pair(const BoundarySequence& truth, const BoundarySequence& pred,
                     Tolerance gamma, HitScheme scheme);

CorpusScore score_corpus(
    const std::vector<std::pair<BoundarySequence, BoundarySequence>>& pairs,
    Tolerance gamma, HitScheme scheme, Aggregation aggregation = Aggregation::pooled);

// Fraction of boundaries lying within gamma of another boundary in the same sequence.
double duplicate_boundary_fraction(const std::vector<BoundarySequence>& preds,
                                   Tolerance gamma);

}  // namespace segkit
