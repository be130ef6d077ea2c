#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "gagg/matrix.hpp"

namespace gagg {

class Tape;

/// Margin-softmax flavor: additive angular (cos(theta + m)) or additive
/// cosine (cos(theta) - m) margin on the target logit.
enum class MarginVariant { kAam, kAm };

/// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  int index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int index) : tape_(tape), index_(index) {}
  Tape* tape_ = nullptr;
  int index_ = -1;
};

/// Record of one forward pass. Each primitive appends a node holding its
/// forward value and a closure implementing the analytic backward rule.
/// Tapes are built per forward pass and never reused; replaying the recorded
/// nodes is the forward computation itself, so values are reproduced
/// bit-identically by construction.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Register an input matrix (parameter or constant).
  Var input(Matrix value) { return push(std::move(value), nullptr); }

  const Matrix& value(Var v) const { return node(v).value; }

  /// Adjoint of `v` after backward(). Zero matrix for unreached nodes.
  const Matrix& grad(Var v) const {
    if (!ran_backward_) throw Error("grad: backward() has not run");
    return node(v).adjoint;
  }

  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep seeding d(out)/d(out) = 1. `out` must be 1x1 and each
  /// tape runs backward at most once.
  void backward(Var out) {
    check_owned(out);
    if (ran_backward_) throw Error("backward: tape already consumed");
    const Matrix& v = node(out).value;
    if (v.rows() != 1 || v.cols() != 1) {
      throw ShapeError("backward: output must be scalar, got " + v.shape_string());
    }
    for (Node& n : nodes_) n.adjoint = Matrix(n.value.rows(), n.value.cols());
    nodes_[static_cast<std::size_t>(out.index_)].adjoint(0, 0) = 1.0;
    for (int i = out.index_; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backprop) n.backprop(*this, n.adjoint);
    }
    ran_backward_ = true;
  }

  // ---- primitives -------------------------------------------------------

  Var add(Var a, Var b) {
    Matrix v = gagg::add(value(a), value(b));
    int ia = a.index_, ib = b.index_;
    return push(std::move(v), [ia, ib](Tape& t, const Matrix& g) {
      t.accumulate(ia, g);
      t.accumulate(ib, g);
    });
  }

  Var sub(Var a, Var b) {
    Matrix v = gagg::sub(value(a), value(b));
    int ia = a.index_, ib = b.index_;
    return push(std::move(v), [ia, ib](Tape& t, const Matrix& g) {
      t.accumulate(ia, g);
      t.accumulate(ib, gagg::scale(g, -1.0));
    });
  }

  Var mul(Var a, Var b) {
    Matrix v = gagg::hadamard(value(a), value(b));
    int ia = a.index_, ib = b.index_;
    return push(std::move(v), [ia, ib](Tape& t, const Matrix& g) {
      t.accumulate(ia, gagg::hadamard(g, t.node_value(ib)));
      t.accumulate(ib, gagg::hadamard(g, t.node_value(ia)));
    });
  }

  Var scale(Var a, double c) {
    Matrix v = gagg::scale(value(a), c);
    int ia = a.index_;
    return push(std::move(v), [ia, c](Tape& t, const Matrix& g) {
      t.accumulate(ia, gagg::scale(g, c));
    });
  }

  Var add_scalar(Var a, double c) {
    Matrix v = gagg::add_scalar(value(a), c);
    int ia = a.index_;
    return push(std::move(v), [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g); });
  }

  Var matmul(Var a, Var b) {
    Matrix v = gagg::matmul(value(a), value(b));
    int ia = a.index_, ib = b.index_;
    return push(std::move(v), [ia, ib](Tape& t, const Matrix& g) {
      t.accumulate(ia, gagg::matmul(g, gagg::transpose(t.node_value(ib))));
      t.accumulate(ib, gagg::matmul(gagg::transpose(t.node_value(ia)), g));
    });
  }

  Var transpose(Var a) {
    Matrix v = gagg::transpose(value(a));
    int ia = a.index_;
    return push(std::move(v), [ia](Tape& t, const Matrix& g) {
      t.accumulate(ia, gagg::transpose(g));
    });
  }

  Var leaky_relu(Var a, double slope) {
    Matrix v = gagg::leaky_relu(value(a), slope);
    int ia = a.index_;
    return push(std::move(v), [ia, slope](Tape& t, const Matrix& g) {
      const Matrix& x = t.node_value(ia);
      Matrix d = g;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (x.values()[i] < 0.0) d.values()[i] *= slope;
      }
      t.accumulate(ia, d);
    });
  }

  Var sigmoid(Var a) {
    Matrix v = gagg::sigmoid(value(a));
    int ia = a.index_;
    int self = next_index();
    return push(std::move(v), [ia, self](Tape& t, const Matrix& g) {
      const Matrix& y = t.node_value(self);
      Matrix d = g;
      for (std::size_t i = 0; i < d.size(); ++i) {
        double s = y.values()[i];
        d.values()[i] *= s * (1.0 - s);
      }
      t.accumulate(ia, d);
    });
  }

  Var row_softmax(Var a) {
    Matrix v = gagg::row_softmax(value(a));
    int ia = a.index_;
    int self = next_index();
    return push(std::move(v), [ia, self](Tape& t, const Matrix& g) {
      const Matrix& y = t.node_value(self);
      Matrix d(y.rows(), y.cols());
      for (int i = 0; i < y.rows(); ++i) {
        double dot = 0.0;
        for (int j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
        for (int j = 0; j < y.cols(); ++j) d(i, j) = y(i, j) * (g(i, j) - dot);
      }
      t.accumulate(ia, d);
    });
  }

  Var concat_rows(Var a, Var b) {
    Matrix v = gagg::concat_rows(value(a), value(b));
    int ia = a.index_, ib = b.index_;
    int ra = value(a).rows();
    return push(std::move(v), [ia, ib, ra](Tape& t, const Matrix& g) {
      const Matrix& va = t.node_value(ia);
      const Matrix& vb = t.node_value(ib);
      Matrix da(va.rows(), va.cols());
      Matrix db(vb.rows(), vb.cols());
      for (int i = 0; i < va.rows(); ++i)
        for (int j = 0; j < va.cols(); ++j) da(i, j) = g(i, j);
      for (int i = 0; i < vb.rows(); ++i)
        for (int j = 0; j < vb.cols(); ++j) db(i, j) = g(ra + i, j);
      t.accumulate(ia, da);
      t.accumulate(ib, db);
    });
  }

  Var concat_cols(Var a, Var b) {
    Matrix v = gagg::concat_cols(value(a), value(b));
    int ia = a.index_, ib = b.index_;
    int ca = value(a).cols();
    return push(std::move(v), [ia, ib, ca](Tape& t, const Matrix& g) {
      const Matrix& va = t.node_value(ia);
      const Matrix& vb = t.node_value(ib);
      Matrix da(va.rows(), va.cols());
      Matrix db(vb.rows(), vb.cols());
      for (int i = 0; i < va.rows(); ++i) {
        for (int j = 0; j < va.cols(); ++j) da(i, j) = g(i, j);
        for (int j = 0; j < vb.cols(); ++j) db(i, j) = g(i, ca + j);
      }
      t.accumulate(ia, da);
      t.accumulate(ib, db);
    });
  }

  Var slice_cols(Var a, int col_begin, int col_end) {
    Matrix v = gagg::slice_cols(value(a), col_begin, col_end);
    int ia = a.index_;
    return push(std::move(v), [ia, col_begin](Tape& t, const Matrix& g) {
      const Matrix& va = t.node_value(ia);
      Matrix d(va.rows(), va.cols());
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) d(i, col_begin + j) = g(i, j);
      t.accumulate(ia, d);
    });
  }

  Var reduce_sum(Var a) {
    Matrix v = gagg::reduce_sum(value(a));
    int ia = a.index_;
    return push(std::move(v), [ia](Tape& t, const Matrix& g) {
      const Matrix& x = t.node_value(ia);
      Matrix d(x.rows(), x.cols());
      for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) d(i, j) = g(0, j);
      t.accumulate(ia, d);
    });
  }

  Var reduce_mean(Var a) {
    Matrix v = gagg::reduce_mean(value(a));
    int ia = a.index_;
    return push(std::move(v), [ia](Tape& t, const Matrix& g) {
      const Matrix& x = t.node_value(ia);
      Matrix d(x.rows(), x.cols());
      for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) d(i, j) = g(0, j) / x.rows();
      t.accumulate(ia, d);
    });
  }

  /// Subgradient routes to the first row attaining the extremum.
  Var reduce_max(Var a) { return reduce_extremum(a, /*take_max=*/true); }
  Var reduce_min(Var a) { return reduce_extremum(a, /*take_max=*/false); }

  Var reduce_std(Var a, double eps = 0.0) {
    Matrix v = gagg::reduce_std(value(a), eps);
    int ia = a.index_;
    int self = next_index();
    return push(std::move(v), [ia, self](Tape& t, const Matrix& g) {
      const Matrix& x = t.node_value(ia);
      const Matrix& y = t.node_value(self);
      Matrix mean = gagg::reduce_mean(x);
      Matrix d(x.rows(), x.cols());
      for (int j = 0; j < x.cols(); ++j) {
        if (y(0, j) == 0.0) continue;  // flat column, eps = 0: subgradient 0
        for (int i = 0; i < x.rows(); ++i) {
          d(i, j) = g(0, j) * (x(i, j) - mean(0, j)) / (x.rows() * y(0, j));
        }
      }
      t.accumulate(ia, d);
    });
  }

  Var sum_all(Var a) {
    Matrix v(1, 1);
    v(0, 0) = gagg::sum_all(value(a));
    int ia = a.index_;
    return push(std::move(v), [ia](Tape& t, const Matrix& g) {
      const Matrix& x = t.node_value(ia);
      Matrix d(x.rows(), x.cols());
      for (double& e : d.values()) e = g(0, 0);
      t.accumulate(ia, d);
    });
  }

  Var gather_rows(Var a, std::vector<int> indices) {
    Matrix v = gagg::gather_rows(value(a), indices);
    int ia = a.index_;
    return push(std::move(v), [ia, indices = std::move(indices)](Tape& t, const Matrix& g) {
      const Matrix& x = t.node_value(ia);
      Matrix d(x.rows(), x.cols());
      for (int k = 0; k < static_cast<int>(indices.size()); ++k)
        for (int j = 0; j < x.cols(); ++j) d(indices[static_cast<std::size_t>(k)], j) += g(k, j);
      t.accumulate(ia, d);
    });
  }

  Var scale_rows(Var a, Var col) {
    Matrix v = gagg::scale_rows(value(a), value(col));
    int ia = a.index_, ic = col.index_;
    return push(std::move(v), [ia, ic](Tape& t, const Matrix& g) {
      const Matrix& x = t.node_value(ia);
      const Matrix& c = t.node_value(ic);
      Matrix da(x.rows(), x.cols());
      Matrix dc(c.rows(), 1);
      for (int i = 0; i < x.rows(); ++i) {
        for (int j = 0; j < x.cols(); ++j) {
          da(i, j) = g(i, j) * c(i, 0);
          dc(i, 0) += g(i, j) * x(i, j);
        }
      }
      t.accumulate(ia, da);
      t.accumulate(ic, dc);
    });
  }

  Var outer_add(Var a, Var b) {
    Matrix v = gagg::outer_add(value(a), value(b));
    int ia = a.index_, ib = b.index_;
    return push(std::move(v), [ia, ib](Tape& t, const Matrix& g) {
      const Matrix& va = t.node_value(ia);
      const Matrix& vb = t.node_value(ib);
      Matrix da(va.rows(), 1);
      Matrix db(vb.rows(), 1);
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) {
          da(i, 0) += g(i, j);
          db(j, 0) += g(i, j);
        }
      t.accumulate(ia, da);
      t.accumulate(ib, db);
    });
  }

  Var broadcast_add_row(Var a, Var row) {
    Matrix v = gagg::broadcast_add_row(value(a), value(row));
    int ia = a.index_, ir = row.index_;
    return push(std::move(v), [ia, ir](Tape& t, const Matrix& g) {
      Matrix dr(1, g.cols());
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) dr(0, j) += g(i, j);
      t.accumulate(ia, g);
      t.accumulate(ir, dr);
    });
  }

  Var l2_normalize_rows(Var a) {
    Matrix v = gagg::l2_normalize_rows(value(a));
    int ia = a.index_;
    int self = next_index();
    return push(std::move(v), [ia, self](Tape& t, const Matrix& g) {
      const Matrix& x = t.node_value(ia);
      const Matrix& y = t.node_value(self);
      Matrix d(x.rows(), x.cols());
      for (int i = 0; i < x.rows(); ++i) {
        double norm = 0.0;
        for (int j = 0; j < x.cols(); ++j) norm += x(i, j) * x(i, j);
        norm = std::sqrt(norm);
        double dot = 0.0;
        for (int j = 0; j < x.cols(); ++j) dot += g(i, j) * y(i, j);
        for (int j = 0; j < x.cols(); ++j) d(i, j) = (g(i, j) - y(i, j) * dot) / norm;
      }
      t.accumulate(ia, d);
    });
  }

  /// Margin-softmax logits from a 1 x C cosine row: non-target logits are
  /// s*cos(theta_c); the target logit gets the margin. AAM falls back to the
  /// linear extension cos(theta) - m*sin(m) once theta + m would exceed pi,
  /// which keeps the logit monotone in cos(theta).
  Var margin_logits(Var cosines, int label, MarginVariant variant, double margin, double s) {
    const Matrix& c = value(cosines);
    if (c.rows() != 1) throw ShapeError("margin_logits: want a 1xC cosine row, got " + c.shape_string());
    if (label < 0 || label >= c.cols()) throw ConfigError("margin_logits: label out of range");
    Matrix v = gagg::scale(c, s);
    double cy = c(0, label);
    double cm = std::cos(margin), sm = std::sin(margin);
    bool main_branch = cy > -cm;
    if (variant == MarginVariant::kAam) {
      double sine = std::sqrt(std::max(0.0, 1.0 - cy * cy));
      v(0, label) = main_branch ? s * (cy * cm - sine * sm) : s * (cy - margin * sm);
    } else {
      v(0, label) = s * (cy - margin);
    }
    int ia = cosines.index_;
    return push(std::move(v), [ia, label, variant, margin, s](Tape& t, const Matrix& g) {
      const Matrix& cv = t.node_value(ia);
      Matrix d = gagg::scale(g, s);
      double cy2 = cv(0, label);
      if (variant == MarginVariant::kAam) {
        double cm = std::cos(margin), sm = std::sin(margin);
        if (cy2 > -cm) {
          double sine = std::sqrt(std::max(1.0 - cy2 * cy2, 1e-24));
          d(0, label) = g(0, label) * s * (cm + cy2 * sm / sine);
        }
        // linear-extension branch: slope 1, i.e. d = g * s, already set
      }
      // kAm target slope is 1 as well
      t.accumulate(ia, d);
    });
  }

  /// Scalar cross-entropy of a 1 x C logit row against `label`.
  /// Uses the log1p form when the target attains the max, so near-certain
  /// losses keep full precision.
  Var cross_entropy_with_logits(Var logits, int label) {
    const Matrix& x = value(logits);
    if (x.rows() != 1) throw ShapeError("cross_entropy: want 1xC logits, got " + x.shape_string());
    if (label < 0 || label >= x.cols()) throw ConfigError("cross_entropy: label out of range");
    double m = x(0, 0);
    for (int j = 1; j < x.cols(); ++j) m = std::max(m, x(0, j));
    Matrix v(1, 1);
    if (x(0, label) == m) {
      double rest = 0.0;
      for (int j = 0; j < x.cols(); ++j)
        if (j != label) rest += std::exp(x(0, j) - m);
      v(0, 0) = std::log1p(rest);
    } else {
      double sum = 0.0;
      for (int j = 0; j < x.cols(); ++j) sum += std::exp(x(0, j) - m);
      v(0, 0) = std::log(sum) + m - x(0, label);
    }
    int ia = logits.index_;
    return push(std::move(v), [ia, label](Tape& t, const Matrix& g) {
      const Matrix& xv = t.node_value(ia);
      Matrix p = gagg::row_softmax(xv);
      p(0, label) -= 1.0;
      t.accumulate(ia, gagg::scale(p, g(0, 0)));
    });
  }

 private:
  struct Node {
    Matrix value;
    Matrix adjoint;
    std::function<void(Tape&, const Matrix&)> backprop;
  };

  int next_index() const { return static_cast<int>(nodes_.size()); }

  Var push(Matrix value, std::function<void(Tape&, const Matrix&)> backprop) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backprop)});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  const Node& node(Var v) const {
    check_owned(v);
    return nodes_[static_cast<std::size_t>(v.index_)];
  }

  void check_owned(Var v) const {
    if (v.tape_ != this || v.index_ < 0 || v.index_ >= static_cast<int>(nodes_.size())) {
      throw Error("Var does not belong to this tape");
    }
  }

  const Matrix& node_value(int i) const { return nodes_[static_cast<std::size_t>(i)].value; }

  void accumulate(int i, const Matrix& g) {
    Matrix& adj = nodes_[static_cast<std::size_t>(i)].adjoint;
    detail::require_same_shape(adj, g, "adjoint accumulate");
    for (std::size_t k = 0; k < adj.size(); ++k) adj.values()[k] += g.values()[k];
  }

  Var reduce_extremum(Var a, bool take_max) {
    Matrix v = take_max ? gagg::reduce_max(value(a)) : gagg::reduce_min(value(a));
    int ia = a.index_;
    return push(std::move(v), [ia, take_max](Tape& t, const Matrix& g) {
      const Matrix& x = t.node_value(ia);
      Matrix d(x.rows(), x.cols());
      for (int j = 0; j < x.cols(); ++j) {
        int arg = 0;
        for (int i = 1; i < x.rows(); ++i) {
          bool better = take_max ? x(i, j) > x(arg, j) : x(i, j) < x(arg, j);
          if (better) arg = i;
        }
        d(arg, j) = g(0, j);
      }
      t.accumulate(ia, d);
    });
  }

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

inline const Matrix& Var::value() const {
  if (!tape_) throw Error("value() on an empty Var");
  return tape_->value(*this);
}

/// Scalar-valued tape program over a list of parameter matrices.
using TapeFunction = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compare analytic gradients against central finite differences.
/// Returns max over all parameter entries of
///   |analytic - central| / max(1, |central|).
inline double grad_check(const TapeFunction& f, const std::vector<Matrix>& params, double eps) {
  if (eps <= 0.0) throw ConfigError("grad_check: eps must be positive");

  auto evaluate = [&f](const std::vector<Matrix>& p) {
    Tape t;
    std::vector<Var> vars;
    vars.reserve(p.size());
    for (const Matrix& m : p) vars.push_back(t.input(m));
    Var out = f(t, vars);
    const Matrix& v = t.value(out);
    if (v.rows() != 1 || v.cols() != 1) {
      throw ShapeError("grad_check: f must be scalar-valued, got " + v.shape_string());
    }
    double y = v(0, 0);
    if (!std::isfinite(y)) throw EvaluationError("grad_check: non-finite function value");
    return y;
  };

  Tape t;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Matrix& m : params) vars.push_back(t.input(m));
  Var out = f(t, vars);
  if (!std::isfinite(t.value(out)(0, 0))) {
    throw EvaluationError("grad_check: non-finite function value");
  }
  t.backward(out);

  double worst = 0.0;
  std::vector<Matrix> work = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Matrix& analytic = t.grad(vars[p]);
    for (std::size_t k = 0; k < params[p].size(); ++k) {
      double saved = work[p].values()[k];
      work[p].values()[k] = saved + eps;
      double up = evaluate(work);
      work[p].values()[k] = saved - eps;
      double down = evaluate(work);
      work[p].values()[k] = saved;
      double central = (up - down) / (2.0 * eps);
      double err = std::abs(analytic.values()[k] - central) / std::max(1.0, std::abs(central));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace gagg
