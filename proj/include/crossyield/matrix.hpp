// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "crossyield/common.hpp"

namespace crossyield {

class Rng;

/// Dense row-major matrix of 64-bit floats. Values are plain storage;
/// matrices returned from public operations are finite everywhere.
/// A default-constructed Matrix is the empty 0x0 matrix, used for tensors
/// a given model variant does not own.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return {values_.data(), values_.size()}; }
  std::span<const double> flat() const { return {values_.data(), values_.size()}; }

  void fill(double v) { values_.assign(values_.size(), v); }

  bool all_finite() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Standard matrix product. Rejects a.cols != b.rows with an error naming
/// both shapes.
Matrix matmul(const Matrix& a, const Matrix& b);

/// c_i = a_i * b_i. Rejects length mismatch.
Vec elementwise_product(std::span<const double> a, std::span<const double> b);

/// Entries i.i.d. uniform on [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))].
Matrix xavier_init(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace crossyield
