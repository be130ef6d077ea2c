#pragma once

#include <gtest/gtest.h>

#include "gagg/matrix.hpp"
#include "gagg/random.hpp"

namespace gagg::test {

inline void expect_matrix_near(const Matrix& actual, const Matrix& expected, double tol,
                               const char* what = "") {
  ASSERT_TRUE(actual.same_shape(expected))
      << what << ": shape " << actual.shape_string() << " vs " << expected.shape_string();
  EXPECT_LE(max_abs_diff(actual, expected), tol) << what;
}

inline Matrix random_matrix(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return random_uniform(rows, cols, lo, hi, rng);
}

}  // namespace gagg::test
