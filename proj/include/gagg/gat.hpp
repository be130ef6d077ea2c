#pragma once

#include <string>
#include <vector>

#include "gagg/autodiff.hpp"
#include "gagg/matrix.hpp"
#include "gagg/random.hpp"

namespace gagg {

/// A frame-level feature sequence interpreted as the nodes of a complete
/// graph: row i is node i, every ordered pair (self included) is an edge.
/// Adjacency is implicit and never materialized.
struct FrameGraph {
  Matrix node_features;  // N x F

  FrameGraph() = default;
  explicit FrameGraph(Matrix features) : node_features(std::move(features)) {
    if (node_features.rows() < 1 || node_features.cols() < 1) {
      throw ShapeError("FrameGraph: need at least one node and one feature, got " +
                       node_features.shape_string());
    }
  }

  int num_nodes() const { return node_features.rows(); }
  int feature_dim() const { return node_features.cols(); }
};

/// One attention head: projection F x Fh and attention vector 1 x 2Fh.
struct GatHeadParams {
  Matrix weight;
  Matrix attn;
};

struct GatLayerParams {
  std::vector<GatHeadParams> heads;

  int head_count() const { return static_cast<int>(heads.size()); }
  int in_dim() const { return heads.empty() ? 0 : heads.front().weight.rows(); }
  int out_dim() const {
    int d = 0;
    for (const auto& h : heads) d += h.weight.cols();
    return d;
  }
};

/// Learnable scalars of one GAT layer: F*F' for the projections plus 2*F'
/// for the attention vectors, independent of the head count under the
/// concat merge.
inline int gat_param_count(int in_dim, int out_dim, int heads) {
  if (in_dim < 1 || out_dim < 1 || heads < 1) throw ConfigError("gat_param_count: dims must be positive");
  if (out_dim % heads != 0) {
    throw ConfigError("gat_param_count: out_dim " + std::to_string(out_dim) +
                      " not divisible by heads " + std::to_string(heads));
  }
  return in_dim * out_dim + 2 * out_dim;
}

/// Scaled-uniform init keeping pre-softmax scores O(1): W in
/// [-sqrt(1/F), sqrt(1/F)], attention vector in [-sqrt(1/2Fh), sqrt(1/2Fh)].
inline GatLayerParams init_gat_layer(int in_dim, int out_dim, int heads, Rng& rng) {
  gat_param_count(in_dim, out_dim, heads);  // validates
  int head_dim = out_dim / heads;
  double wb = std::sqrt(1.0 / in_dim);
  double ab = std::sqrt(1.0 / (2.0 * head_dim));
  GatLayerParams p;
  p.heads.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    GatHeadParams hp;
    hp.weight = random_uniform(in_dim, head_dim, -wb, wb, rng);
    hp.attn = random_uniform(1, 2 * head_dim, -ab, ab, rng);
    p.heads.push_back(std::move(hp));
  }
  return p;
}

struct GatHeadVars {
  Var weight;
  Var attn;
};

struct GatLayerVars {
  std::vector<GatHeadVars> heads;
};

inline GatLayerVars to_tape(Tape& t, const GatLayerParams& p) {
  GatLayerVars v;
  v.heads.reserve(p.heads.size());
  for (const auto& h : p.heads) v.heads.push_back({t.input(h.weight), t.input(h.attn)});
  return v;
}

namespace detail {

inline void check_gat_head_shapes(const Matrix& nodes, const Matrix& weight, const Matrix& attn) {
  if (nodes.rows() < 1 || nodes.cols() < 1) {
    throw ShapeError("gat_head_forward: empty node matrix " + nodes.shape_string());
  }
  if (weight.rows() != nodes.cols()) {
    throw ShapeError("gat_head_forward: weight rows " + weight.shape_string() +
                     " vs node features " + nodes.shape_string());
  }
  if (attn.rows() != 1 || attn.cols() != 2 * weight.cols()) {
    throw ShapeError("gat_head_forward: attention vector must be 1x" +
                     std::to_string(2 * weight.cols()) + ", got " + attn.shape_string());
  }
}

}  // namespace detail

/// One attention head over the complete graph (Eqs. 1-4):
///   n' = x W
///   e_ij = LeakyReLU(gamma . concat(n'_i, n'_j))        (split-dot form)
///   a_i. = softmax_j(e_i.)   over all j, self included
///   out_i = sum_j a_ij n'_j
/// The concat dot product is evaluated as gamma_1.n'_i + gamma_2.n'_j, which
/// avoids materializing N^2 concatenations.
inline Var gat_head_forward(Tape& t, Var nodes, Var weight, Var attn, double slope,
                            Var* attention_out = nullptr) {
  detail::check_gat_head_shapes(t.value(nodes), t.value(weight), t.value(attn));
  int head_dim = t.value(weight).cols();
  Var projected = t.matmul(nodes, weight);
  Var gamma_self = t.transpose(t.slice_cols(attn, 0, head_dim));
  Var gamma_peer = t.transpose(t.slice_cols(attn, head_dim, 2 * head_dim));
  Var self_score = t.matmul(projected, gamma_self);  // N x 1
  Var peer_score = t.matmul(projected, gamma_peer);  // N x 1
  Var scores = t.leaky_relu(t.outer_add(self_score, peer_score), slope);
  Var attention = t.row_softmax(scores);
  if (attention_out) *attention_out = attention;
  return t.matmul(attention, projected);
}

/// Multi-head layer: per-head outputs concatenated along the feature axis in
/// head order, N x F -> N x F'.
inline Var gat_forward(Tape& t, Var nodes, const GatLayerVars& layer, double slope) {
  if (layer.heads.empty()) throw ConfigError("gat_forward: no heads");
  Var out;
  for (std::size_t h = 0; h < layer.heads.size(); ++h) {
    Var head = gat_head_forward(t, nodes, layer.heads[h].weight, layer.heads[h].attn, slope);
    out = h == 0 ? head : t.concat_cols(out, head);
  }
  return out;
}

struct GatHeadResult {
  Matrix out;        // N x Fh
  Matrix attention;  // N x N, rows sum to 1
};

inline GatHeadResult gat_head_forward(const FrameGraph& g, const Matrix& weight,
                                      const Matrix& attn_vector, double slope) {
  Tape t;
  Var nodes = t.input(g.node_features);
  Var attention;
  Var out = gat_head_forward(t, nodes, t.input(weight), t.input(attn_vector), slope, &attention);
  return GatHeadResult{t.value(out), t.value(attention)};
}

inline FrameGraph gat_forward(const FrameGraph& g, const GatLayerParams& p, double slope) {
  Tape t;
  Var out = gat_forward(t, t.input(g.node_features), to_tape(t, p), slope);
  return FrameGraph(t.value(out));
}

}  // namespace gagg
