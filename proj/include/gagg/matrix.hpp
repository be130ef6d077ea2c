#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gagg/errors.hpp"

namespace gagg {

/// Dense row-major matrix of real64 values. Matrices are plain values:
/// copyable, immutable-by-convention after construction, safe to share
/// read-only across threads.
class Matrix {
 public:
  Matrix() = default;

  Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
    check_dims(rows, cols);
    data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0);
  }

  Matrix(int rows, int cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    check_dims(rows, cols);
    if (data_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }

  static Matrix ones(int rows, int cols) {
    Matrix m(rows, cols);
    std::fill(m.data_.begin(), m.data_.end(), 1.0);
    return m;
  }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    int r = static_cast<int>(rows.size());
    int c = r == 0 ? 0 : static_cast<int>(rows.begin()->size());
    Matrix m(r, c);
    int i = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != c) {
        throw ShapeError("ragged initializer rows");
      }
      int j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  static Matrix row_vector(std::initializer_list<double> values) {
    return Matrix(1, static_cast<int>(values.size()), std::vector<double>(values));
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  static void check_dims(int rows, int cols) {
    if (rows < 0 || cols < 0) throw ShapeError("negative matrix dimension");
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

inline void require_nonempty(const Matrix& a, const char* op) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw ShapeError(std::string(op) + ": empty input " + a.shape_string());
  }
}

}  // namespace detail

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + a.shape_string() + " * " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "add");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += b.values()[i];
  return out;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "sub");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] -= b.values()[i];
  return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= b.values()[i];
  return out;
}

inline Matrix scale(const Matrix& a, double c) {
  Matrix out = a;
  for (double& v : out.values()) v *= c;
  return out;
}

inline Matrix add_scalar(const Matrix& a, double c) {
  Matrix out = a;
  for (double& v : out.values()) v += c;
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline Matrix leaky_relu(const Matrix& a, double slope) {
  if (slope < 0.0) throw ConfigError("leaky_relu: negative slope");
  Matrix out = a;
  for (double& v : out.values()) v = v >= 0.0 ? v : slope * v;
  return out;
}

inline Matrix sigmoid(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

/// Row-wise softmax, stabilized by max subtraction. Every row sums to 1.
inline Matrix row_softmax(const Matrix& a) {
  detail::require_nonempty(a, "row_softmax");
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    double m = a(i, 0);
    for (int j = 1; j < a.cols(); ++j) m = std::max(m, a(i, j));
    double sum = 0.0;
    for (int j = 0; j < a.cols(); ++j) {
      out(i, j) = std::exp(a(i, j) - m);
      sum += out(i, j);
    }
    for (int j = 0; j < a.cols(); ++j) out(i, j) /= sum;
  }
  return out;
}

inline Matrix concat_rows(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("concat_rows: column mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Matrix out(a.rows() + b.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
  for (int i = 0; i < b.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) out(a.rows() + i, j) = b(i, j);
  return out;
}

inline Matrix concat_cols(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Matrix out(a.rows(), a.cols() + b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (int j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
  }
  return out;
}

inline Matrix slice_cols(const Matrix& a, int col_begin, int col_end) {
  if (col_begin < 0 || col_end > a.cols() || col_begin >= col_end) {
    throw ShapeError("slice_cols: range [" + std::to_string(col_begin) + "," +
                     std::to_string(col_end) + ") of " + a.shape_string());
  }
  Matrix out(a.rows(), col_end - col_begin);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = col_begin; j < col_end; ++j) out(i, j - col_begin) = a(i, j);
  return out;
}

/// Column-wise sum over rows: N x F -> 1 x F.
inline Matrix reduce_sum(const Matrix& a) {
  detail::require_nonempty(a, "reduce_sum");
  Matrix out(1, a.cols());
  for (int j = 0; j < a.cols(); ++j) {
    double acc = 0.0;
    for (int i = 0; i < a.rows(); ++i) acc += a(i, j);
    out(0, j) = acc;
  }
  return out;
}

inline Matrix reduce_mean(const Matrix& a) {
  detail::require_nonempty(a, "reduce_mean");
  Matrix out = reduce_sum(a);
  for (double& v : out.values()) v /= a.rows();
  return out;
}

inline Matrix reduce_max(const Matrix& a) {
  detail::require_nonempty(a, "reduce_max");
  Matrix out(1, a.cols());
  for (int j = 0; j < a.cols(); ++j) {
    double m = a(0, j);
    for (int i = 1; i < a.rows(); ++i) m = std::max(m, a(i, j));
    out(0, j) = m;
  }
  return out;
}

inline Matrix reduce_min(const Matrix& a) {
  detail::require_nonempty(a, "reduce_min");
  Matrix out(1, a.cols());
  for (int j = 0; j < a.cols(); ++j) {
    double m = a(0, j);
    for (int i = 1; i < a.rows(); ++i) m = std::min(m, a(i, j));
    out(0, j) = m;
  }
  return out;
}

/// Column-wise population standard deviation (divide by N). `eps` is added
/// inside the square root; single-row input gives sqrt(eps).
inline Matrix reduce_std(const Matrix& a, double eps = 0.0) {
  detail::require_nonempty(a, "reduce_std");
  Matrix mean = reduce_mean(a);
  Matrix out(1, a.cols());
  for (int j = 0; j < a.cols(); ++j) {
    double acc = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
      double d = a(i, j) - mean(0, j);
      acc += d * d;
    }
    out(0, j) = std::sqrt(acc / a.rows() + eps);
  }
  return out;
}

inline double sum_all(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return acc;
}

inline Matrix gather_rows(const Matrix& a, std::span<const int> indices) {
  Matrix out(static_cast<int>(indices.size()), a.cols());
  for (int k = 0; k < static_cast<int>(indices.size()); ++k) {
    int i = indices[k];
    if (i < 0 || i >= a.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(i) + " out of " + a.shape_string());
    }
    for (int j = 0; j < a.cols(); ++j) out(k, j) = a(i, j);
  }
  return out;
}

/// Scale each row i of `a` by col(i, 0). `col` must be rows x 1.
inline Matrix scale_rows(const Matrix& a, const Matrix& col) {
  if (col.rows() != a.rows() || col.cols() != 1) {
    throw ShapeError("scale_rows: want " + std::to_string(a.rows()) + "x1 gate, got " +
                     col.shape_string());
  }
  Matrix out = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) *= col(i, 0);
  return out;
}

/// out(i, j) = a(i, 0) + b(j, 0) for column vectors a (N x 1), b (M x 1).
inline Matrix outer_add(const Matrix& a, const Matrix& b) {
  if (a.cols() != 1 || b.cols() != 1) {
    throw ShapeError("outer_add: want column vectors, got " + a.shape_string() + " and " +
                     b.shape_string());
  }
  Matrix out(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.rows(); ++j) out(i, j) = a(i, 0) + b(j, 0);
  return out;
}

/// Add a 1 x F row vector to every row of an N x F matrix.
inline Matrix broadcast_add_row(const Matrix& a, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("broadcast_add_row: want 1x" + std::to_string(a.cols()) + ", got " +
                     row.shape_string());
  }
  Matrix out = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) += row(0, j);
  return out;
}

inline double frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  return std::sqrt(acc);
}

/// Normalize each row to unit L2 norm. Throws on a zero row.
inline Matrix l2_normalize_rows(const Matrix& a) {
  Matrix out = a;
  for (int i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (int j = 0; j < a.cols(); ++j) acc += a(i, j) * a(i, j);
    double norm = std::sqrt(acc);
    if (norm == 0.0) {
      throw DegenerateInputError("l2_normalize_rows: zero-norm row " + std::to_string(i));
    }
    for (int j = 0; j < a.cols(); ++j) out(i, j) /= norm;
  }
  return out;
}

inline bool all_finite(const Matrix& a) {
  for (double v : a.values())
    if (!std::isfinite(v)) return false;
  return true;
}

inline bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.same_shape(b) && a.values() == b.values();
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  }
  return m;
}

}  // namespace gagg
