// SPDX-License-Identifier: Apache-2.0
#include "crossyield/matrix.hpp"

#include <cmath>

#include "crossyield/rng.hpp"

namespace crossyield {

bool Matrix::all_finite() const {
  // A single accumulating pass: any NaN/Inf poisons the sum.
  double acc = 0.0;
  for (double v : values_) acc += v;
  return std::isfinite(acc);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    detail::shape_fail("matmul", "inner dimensions differ: " +
                                     detail::shape_str(a.rows(), a.cols()) + " * " +
                                     detail::shape_str(b.rows(), b.cols()));
  }
  Matrix c(a.rows(), b.cols());
  // ikj order keeps the inner loop contiguous in both b and c.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.data() + i * a.cols();
    double* crow = c.data() + i * c.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      const double* brow = b.data() + k * b.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Vec elementwise_product(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    detail::shape_fail("elementwise_product", "lengths differ: " + std::to_string(a.size()) +
                                                  " vs " + std::to_string(b.size()));
  }
  Vec c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] * b[i];
  return c;
}

Matrix xavier_init(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) {
    detail::shape_fail("xavier_init", "zero dimension: " + detail::shape_str(rows, cols));
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = rng.uniform(-bound, bound);
  return m;
}

}  // namespace crossyield
