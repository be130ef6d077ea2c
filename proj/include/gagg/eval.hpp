#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gagg/errors.hpp"
#include "gagg/readout.hpp"

namespace gagg {

enum class TrialLabel { kTarget, kNontarget };

/// One verification trial: an (enroll, test) utterance pair with its truth.
struct Trial {
  TrialLabel label = TrialLabel::kNontarget;
  std::string enroll_id;
  std::string test_id;
};

/// Parallel (trial, score) lists.
struct ScoreSet {
  std::vector<Trial> trials;
  std::vector<double> scores;

  void add(Trial t, double score) {
    trials.push_back(std::move(t));
    scores.push_back(score);
  }
  std::size_t size() const { return scores.size(); }
};

inline double cosine_score(const UtteranceEmbedding& a, const UtteranceEmbedding& b) {
  if (a.dim() != b.dim()) {
    throw ShapeError("cosine_score: dim " + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int j = 0; j < a.dim(); ++j) {
    dot += a.values(0, j) * b.values(0, j);
    na += a.values(0, j) * a.values(0, j);
    nb += b.values(0, j) * b.values(0, j);
  }
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateInputError("cosine_score: zero-norm embedding");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct EerResult {
  double eer;        // in [0, 1]
  double threshold;  // operating point at the FAR/FRR crossing
};

/// Equal error rate by threshold sweep. FAR(t) = P(nontarget >= t),
/// FRR(t) = P(target < t); candidate thresholds are the distinct scores plus
/// one point above the maximum. At the sign change of FAR - FRR the rates are
/// interpolated linearly, which makes the result invariant under strictly
/// monotone transforms of the scores.
inline EerResult compute_eer(const ScoreSet& s) {
  if (s.trials.size() != s.scores.size()) {
    throw ShapeError("compute_eer: trial/score list length mismatch");
  }
  std::vector<double> target, nontarget;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s.scores[i])) throw EvaluationError("compute_eer: non-finite score");
    if (s.trials[i].label == TrialLabel::kTarget) {
      target.push_back(s.scores[i]);
    } else {
      nontarget.push_back(s.scores[i]);
    }
  }
  if (target.empty() || nontarget.empty()) {
    throw EvaluationError("compute_eer: need at least one target and one nontarget score");
  }

  std::vector<double> thresholds = s.scores;
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);  // FAR = 0, FRR = 1 endpoint

  auto far_at = [&nontarget](double t) {
    std::size_t n = 0;
    for (double v : nontarget) n += v >= t ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(nontarget.size());
  };
  auto frr_at = [&target](double t) {
    std::size_t n = 0;
    for (double v : target) n += v < t ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(target.size());
  };

  double prev_t = thresholds.front();
  double prev_far = far_at(prev_t), prev_frr = frr_at(prev_t);
  if (prev_far - prev_frr == 0.0) return {prev_far, prev_t};
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    double t = thresholds[i];
    double far = far_at(t), frr = frr_at(t);
    double d = far - frr;
    if (d == 0.0) return {far, t};
    if (d < 0.0) {
      double d_prev = prev_far - prev_frr;
      double alpha = d_prev / (d_prev - d);
      double eer = prev_far + (far - prev_far) * alpha;
      double threshold = prev_t + (t - prev_t) * alpha;
      return {eer, threshold};
    }
    prev_t = t;
    prev_far = far;
    prev_frr = frr;
  }
  throw EvaluationError("compute_eer: no FAR/FRR crossing found");
}

}  // namespace gagg
