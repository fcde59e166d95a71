#include "segkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace segkit {

Tolerance::Tolerance(std::int64_t frames) : gamma_frames(frames) {
  if (frames < 0) throw validation_error("Tolerance: gamma must be non-negative");
}

Tolerance Tolerance::from_ms(double ms, const FrameGrid& grid) {
  if (ms < 0) throw validation_error("Tolerance: gamma_ms must be non-negative");
  return Tolerance(static_cast<std::int64_t>(std::llround(ms / (grid.hop_s * 1000.0))));
}

namespace {
double safe_ratio(std::int64_t n_hit, std::int64_t denom) {
  return denom == 0 ? 1.0 : static_cast<double>(n_hit) / static_cast<double>(denom);
}
}  // namespace

HitResult proposed_hit_ratio(const std::vector<std::int64_t>& a,
                             const std::vector<std::int64_t>& b, Tolerance gamma) {
  std::vector<bool> used(b.size(), false);
  std::int64_t n_hit = 0;
  for (auto ai : a) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (used[j]) continue;
      if (std::llabs(ai - b[j]) <= gamma.gamma_frames) {
        used[j] = true;
        ++n_hit;
        break;
      }
    }
  }
  return {n_hit, safe_ratio(n_hit, static_cast<std::int64_t>(a.size()))};
}

HitResult conventional_hit_ratio(const std::vector<std::int64_t>& a,
                                 const std::vector<std::int64_t>& b, Tolerance gamma) {
  std::int64_t n_hit = 0;
  for (auto ai : a) {
    for (auto bj : b) {
      if (std::llabs(ai - bj) <= gamma.gamma_frames) {
        ++n_hit;
        break;
      }
    }
  }
  return {n_hit, safe_ratio(n_hit, static_cast<std::int64_t>(a.size()))};
}

namespace {
bool try_augment(std::size_t u, const std::vector<std::vector<std::size_t>>& adj,
                 std::vector<int>& match_b, std::vector<bool>& visited) {
  for (auto v : adj[u]) {
    if (visited[v]) continue;
    visited[v] = true;
    if (match_b[v] < 0 ||
        try_augment(static_cast<std::size_t>(match_b[v]), adj, match_b, visited)) {
      match_b[v] = static_cast<int>(u);
      return true;
    }
  }
  return false;
}
}  // namespace

std::int64_t oracle_max_matching(const std::vector<std::int64_t>& a,
                                 const std::vector<std::int64_t>& b, Tolerance gamma) {
  if (a.size() > 2000 || b.size() > 2000)
    throw validation_error("oracle_max_matching: inputs limited to 2000 elements");
  std::vector<std::vector<std::size_t>> adj(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      if (std::llabs(a[i] - b[j]) <= gamma.gamma_frames) adj[i].push_back(j);

  std::vector<int> match_b(b.size(), -1);
  std::int64_t matched = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::vector<bool> visited(b.size(), false);
    if (try_augment(i, adj, match_b, visited)) ++matched;
  }
  return matched;
}

double f1_score(double p, double r) {
  if (p + r == 0) return 0.0;
  return 2.0 * p * r / (p + r);
}

double r_value(double p, double r) {
  if (p == 0) {
    if (r == 0) return 0.0;
    throw validation_error("r_value: undefined for p = 0 with r > 0");
  }
  const double hr = r;
  const double os = r / p - 1.0;
  const double r1 = std::sqrt((1.0 - hr) * (1.0 - hr) + os * os);
  const double r2 = (-os + hr - 1.0) / std::sqrt(2.0);
  return 1.0 - (std::abs(r1) + std::abs(r2)) / 2.0;
}

namespace {
PairScore assemble(std::int64_t hit_p, std::int64_t hit_r, std::int64_t n_pred,
                   std::int64_t n_ref, HitScheme scheme) {
  PairScore s;
  s.scheme = scheme;
  s.n_hit_precision = hit_p;
  s.n_hit_recall = hit_r;
  s.n_pred = n_pred;
  s.n_ref = n_ref;
  s.precision = safe_ratio(hit_p, n_pred);
  s.recall = safe_ratio(hit_r, n_ref);
  s.f1 = f1_score(s.precision, s.recall);
  s.r_value = r_value(s.precision, s.recall);
  return s;
}
}  // namespace

PairScore score_pair(const BoundarySequence& truth, const BoundarySequence& pred,
                     Tolerance gamma, HitScheme scheme) {
  HitResult rec, prec;
  if (scheme == HitScheme::proposed) {
    rec = proposed_hit_ratio(truth.frames, pred.frames, gamma);
    prec = proposed_hit_ratio(pred.frames, truth.frames, gamma);
  } else {
    rec = conventional_hit_ratio(truth.frames, pred.frames, gamma);
    prec = conventional_hit_ratio(pred.frames, truth.frames, gamma);
  }
  return assemble(prec.n_hit, rec.n_hit, static_cast<std::int64_t>(pred.size()),
                  static_cast<std::int64_t>(truth.size()), scheme);
}

CorpusScore score_corpus(
    const std::vector<std::pair<BoundarySequence, BoundarySequence>>& pairs,
    Tolerance gamma, HitScheme scheme, Aggregation aggregation) {
  if (pairs.empty()) throw validation_error("score_corpus: empty input");
  CorpusScore out;
  out.aggregation = aggregation;
  out.n_utterances = pairs.size();

  if (aggregation == Aggregation::pooled) {
    std::int64_t hit_p = 0, hit_r = 0, n_pred = 0, n_ref = 0;
    for (const auto& [truth, pred] : pairs) {
      PairScore s = score_pair(truth, pred, gamma, scheme);
      hit_p += s.n_hit_precision;
      hit_r += s.n_hit_recall;
      n_pred += s.n_pred;
      n_ref += s.n_ref;
    }
    out.score = assemble(hit_p, hit_r, n_pred, n_ref, scheme);
  } else {
    double sum_p = 0, sum_r = 0;
    for (const auto& [truth, pred] : pairs) {
      PairScore s = score_pair(truth, pred, gamma, scheme);
      sum_p += s.precision;
      sum_r += s.recall;
    }
    out.score.scheme = scheme;
    out.score.precision = sum_p / static_cast<double>(pairs.size());
    out.score.recall = sum_r / static_cast<double>(pairs.size());
    out.score.f1 = f1_score(out.score.precision, out.score.recall);
    out.score.r_value = r_value(out.score.precision, out.score.recall);
  }
  return out;
}

double duplicate_boundary_fraction(const std::vector<BoundarySequence>& preds,
                                   Tolerance gamma) {
  std::int64_t total = 0, dup = 0;
  for (const auto& b : preds) {
    const auto& f = b.frames;
    for (std::size_t i = 0; i < f.size(); ++i) {
      ++total;
      const bool near_prev = i > 0 && f[i] - f[i - 1] <= gamma.gamma_frames;
      const bool near_next = i + 1 < f.size() && f[i + 1] - f[i] <= gamma.gamma_frames;
      if (near_prev || near_next) ++dup;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(dup) / static_cast<double>(total);
}

}  // namespace segkit
