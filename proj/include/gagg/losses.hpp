#pragma once

#include <string>

#include "gagg/autodiff.hpp"
#include "gagg/matrix.hpp"
#include "gagg/readout.hpp"

namespace gagg {

inline std::string to_string(MarginVariant v) {
  return v == MarginVariant::kAam ? "aam" : "am";
}

inline MarginVariant parse_margin_variant(const std::string& s) {
  if (s == "aam") return MarginVariant::kAam;
  if (s == "am") return MarginVariant::kAm;
  throw ConfigError("unknown margin variant '" + s + "'");
}

/// AAM-/AM-softmax head. Columns of class_weights are unit-normalized before
/// use; paper values are margin 0.3, scale 30.
struct MarginSoftmaxParams {
  Matrix class_weights;  // D x C
  double margin = 0.3;
  double scale = 30.0;
  MarginVariant variant = MarginVariant::kAam;

  int num_classes() const { return class_weights.cols(); }

  void validate() const {
    if (!(scale > 0.0)) throw ConfigError("margin softmax: scale must be positive");
    if (margin < 0.0 || margin >= 1.0) throw ConfigError("margin softmax: margin must be in [0, 1)");
    if (class_weights.cols() < 2) throw ConfigError("margin softmax: need at least 2 classes");
  }
};

namespace detail {

inline void check_margin_inputs(const Matrix& emb, const Matrix& weights, int label) {
  if (emb.rows() != 1 || emb.cols() < 1) {
    throw ShapeError("margin_softmax_loss: embedding must be 1xD, got " + emb.shape_string());
  }
  if (weights.rows() != emb.cols()) {
    throw ShapeError("margin_softmax_loss: class weights " + weights.shape_string() +
                     " vs embedding dim " + std::to_string(emb.cols()));
  }
  if (label < 0 || label >= weights.cols()) {
    throw ConfigError("margin_softmax_loss: label out of range");
  }
  if (frobenius_norm(emb) == 0.0) {
    throw DegenerateInputError("margin_softmax_loss: zero-norm embedding");
  }
  for (int c = 0; c < weights.cols(); ++c) {
    double acc = 0.0;
    for (int d = 0; d < weights.rows(); ++d) acc += weights(d, c) * weights(d, c);
    if (acc == 0.0) {
      throw DegenerateParameterError("margin_softmax_loss: zero-norm class weight column " +
                                     std::to_string(c));
    }
  }
}

}  // namespace detail

/// Margin-softmax cross entropy on the tape. Cosines come from the
/// unit-normalized embedding against unit-normalized weight columns; the
/// target logit is s*cos(theta_y + m) for AAM or s*(cos(theta_y) - m) for AM.
inline Var margin_softmax_loss(Tape& t, Var embedding, int label, Var class_weights,
                               MarginVariant variant, double margin, double scale) {
  detail::check_margin_inputs(t.value(embedding), t.value(class_weights), label);
  Var unit_embedding = t.l2_normalize_rows(embedding);
  Var unit_weights = t.transpose(t.l2_normalize_rows(t.transpose(class_weights)));
  Var cosines = t.matmul(unit_embedding, unit_weights);  // 1 x C
  Var logits = t.margin_logits(cosines, label, variant, margin, scale);
  return t.cross_entropy_with_logits(logits, label);
}

inline double margin_softmax_loss(const UtteranceEmbedding& emb, int label,
                                  const MarginSoftmaxParams& p) {
  p.validate();
  Tape t;
  Var loss = margin_softmax_loss(t, t.input(emb.values), label, t.input(p.class_weights),
                                 p.variant, p.margin, p.scale);
  return t.value(loss)(0, 0);
}

}  // namespace gagg
