#pragma once

#include <string>
#include <vector>

#include "gagg/autodiff.hpp"
#include "gagg/matrix.hpp"
#include "gagg/random.hpp"

namespace gagg {

enum class ReadoutKind { kSum, kMean, kMax, kCombineConcat };

inline std::string to_string(ReadoutKind k) {
  switch (k) {
    case ReadoutKind::kSum: return "sum";
    case ReadoutKind::kMean: return "mean";
    case ReadoutKind::kMax: return "max";
    case ReadoutKind::kCombineConcat: return "combine_concat";
  }
  throw ConfigError("unknown readout kind");
}

inline ReadoutKind parse_readout_kind(const std::string& s) {
  if (s == "sum") return ReadoutKind::kSum;
  if (s == "mean") return ReadoutKind::kMean;
  if (s == "max") return ReadoutKind::kMax;
  if (s == "combine_concat") return ReadoutKind::kCombineConcat;
  throw ConfigError("unknown readout kind '" + s + "'");
}

/// Epsilon inside the std square root so K = 1 sub-graphs stay differentiable.
inline constexpr double kCombineStdEps = 1e-12;

/// Readout parameters. combine_concat carries four learned projections
/// (width x width/4), one per statistic, applied before concatenation so the
/// output width matches the sum readout.
struct ReadoutParams {
  ReadoutKind kind = ReadoutKind::kSum;
  std::vector<Matrix> projections;
};

inline int readout_param_count(ReadoutKind kind, int width) {
  if (kind != ReadoutKind::kCombineConcat) return 0;
  if (width % 4 != 0) {
    throw ConfigError("combine_concat readout: width " + std::to_string(width) +
                      " not divisible by 4");
  }
  return 4 * width * (width / 4);
}

inline ReadoutParams init_readout(ReadoutKind kind, int width, Rng& rng) {
  ReadoutParams p;
  p.kind = kind;
  if (kind == ReadoutKind::kCombineConcat) {
    readout_param_count(kind, width);  // validates divisibility
    double b = std::sqrt(1.0 / width);
    for (int i = 0; i < 4; ++i) {
      p.projections.push_back(random_uniform(width, width / 4, -b, b, rng));
    }
  }
  return p;
}

/// Fixed-width utterance-level representation, the unit for scoring.
struct UtteranceEmbedding {
  Matrix values;  // 1 x D
  int dim() const { return values.cols(); }
};

struct ReadoutVars {
  std::vector<Var> projections;
};

inline ReadoutVars to_tape(Tape& t, const ReadoutParams& p) {
  ReadoutVars v;
  for (const Matrix& m : p.projections) v.projections.push_back(t.input(m));
  return v;
}

/// Collapse K node rows into one row (Eq. 6 / Table 4). sum/mean/max are
/// column-wise reductions; combine_concat projects each of (sum, std, min,
/// max) through its own width -> width/4 matrix and concatenates them.
inline Var readout(Tape& t, Var nodes, ReadoutKind kind, const ReadoutVars& vars = {}) {
  const Matrix& n = t.value(nodes);
  if (n.rows() < 1) throw ShapeError("readout: empty node set");
  switch (kind) {
    case ReadoutKind::kSum: return t.reduce_sum(nodes);
    case ReadoutKind::kMean: return t.reduce_mean(nodes);
    case ReadoutKind::kMax: return t.reduce_max(nodes);
    case ReadoutKind::kCombineConcat: break;
  }
  readout_param_count(ReadoutKind::kCombineConcat, n.cols());
  if (vars.projections.size() != 4) {
    throw ConfigError("combine_concat readout: need 4 projection matrices");
  }
  for (const Var& v : vars.projections) {
    const Matrix& m = t.value(v);
    if (m.rows() != n.cols() || m.cols() != n.cols() / 4) {
      throw ShapeError("combine_concat readout: projection must be " + std::to_string(n.cols()) +
                       "x" + std::to_string(n.cols() / 4) + ", got " + m.shape_string());
    }
  }
  Var stats[4] = {t.reduce_sum(nodes), t.reduce_std(nodes, kCombineStdEps), t.reduce_min(nodes),
                  t.reduce_max(nodes)};
  Var out;
  for (int i = 0; i < 4; ++i) {
    Var projected = t.matmul(stats[i], vars.projections[static_cast<std::size_t>(i)]);
    out = i == 0 ? projected : t.concat_cols(out, projected);
  }
  return out;
}

inline UtteranceEmbedding readout(const Matrix& nodes, const ReadoutParams& params) {
  Tape t;
  Var out = readout(t, t.input(nodes), params.kind, to_tape(t, params));
  return UtteranceEmbedding{t.value(out)};
}

}  // namespace gagg
