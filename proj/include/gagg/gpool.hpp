#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gagg/autodiff.hpp"
#include "gagg/matrix.hpp"

namespace gagg {

/// gPool parameters: trainable projection (1 x F') and the fraction of nodes
/// to keep.
struct GPoolParams {
  Matrix projection;
  double keep_ratio = 1.0;
};

/// K = max(1, ceil(keep_ratio * n)). The small epsilon compensates for the
/// binary representation of decimal ratios (0.8 * 5 must give 4, not 5).
inline int gpool_keep_count(int num_nodes, double keep_ratio) {
  if (num_nodes < 1) throw ShapeError("gpool_keep_count: empty graph");
  if (!(keep_ratio > 0.0) || keep_ratio > 1.0) {
    throw ConfigError("gpool_keep_count: keep_ratio must be in (0, 1]");
  }
  int k = static_cast<int>(std::ceil(keep_ratio * num_nodes - 1e-9));
  return std::clamp(k, 1, num_nodes);
}

/// Indices of the K largest scores, ties broken toward the lower original
/// index, result sorted ascending so temporal order is preserved.
inline std::vector<int> gpool_select(const Matrix& scores, int k) {
  if (scores.cols() != 1) throw ShapeError("gpool_select: want Nx1 scores, got " + scores.shape_string());
  std::vector<int> order(static_cast<std::size_t>(scores.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](int a, int b) {
    if (scores(a, 0) != scores(b, 0)) return scores(a, 0) > scores(b, 0);
    return a < b;
  });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

struct GPoolTapeResult {
  Var pooled;                    // K x F', gated node values
  Var gates;                     // K x 1, sigmoid scores of the kept nodes
  std::vector<int> kept_indices;  // ascending original indices
};

/// gPool (Eq. 5): y = n p / ||p||, keep the top-K scored nodes, gate the kept
/// rows by sigmoid(y). Selection is piecewise-constant: gradients flow only
/// through the kept rows and their gates.
inline GPoolTapeResult gpool(Tape& t, Var nodes, Var projection, double keep_ratio) {
  const Matrix& n = t.value(nodes);
  const Matrix& p = t.value(projection);
  if (n.rows() < 1) throw ShapeError("gpool: empty graph");
  if (p.rows() != 1 || p.cols() != n.cols()) {
    throw ShapeError("gpool: projection must be 1x" + std::to_string(n.cols()) + ", got " +
                     p.shape_string());
  }
  if (frobenius_norm(p) == 0.0) {
    throw DegenerateParameterError("gpool: zero-norm projection vector");
  }
  int k = gpool_keep_count(n.rows(), keep_ratio);

  Var unit_projection = t.l2_normalize_rows(projection);
  Var scores = t.matmul(nodes, t.transpose(unit_projection));  // N x 1
  std::vector<int> kept = gpool_select(t.value(scores), k);
  Var gates = t.sigmoid(t.gather_rows(scores, kept));
  Var pooled = t.scale_rows(t.gather_rows(nodes, kept), gates);
  return GPoolTapeResult{pooled, gates, std::move(kept)};
}

struct PooledGraph {
  Matrix kept_nodes;              // K x F', gated values
  std::vector<int> kept_indices;  // ascending original indices
  Matrix gate_scores;             // K x 1
};

inline PooledGraph gpool(const Matrix& nodes, const GPoolParams& params) {
  Tape t;
  GPoolTapeResult r = gpool(t, t.input(nodes), t.input(params.projection), params.keep_ratio);
  return PooledGraph{t.value(r.pooled), std::move(r.kept_indices), t.value(r.gates)};
}

}  // namespace gagg
