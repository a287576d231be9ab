#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lecb::num {

/// Dense row-major matrix of doubles. Every tensor in the library is 2-D;
/// vectors are stored as 1 x n rows.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols);  // zero-filled
  /// Throws lecb::NumericError when any value is NaN/Inf and
  /// lecb::DimensionError when values.size() != rows * cols.
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }
  static Tensor full(std::size_t rows, std::size_t cols, double value);
  static Tensor identity(std::size_t n);
  /// Nested-list literal, e.g. Tensor::from({{1, 2}, {3, 4}}).
  static Tensor from(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  std::string shape_string() const;

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  void fill(double value);
  Tensor transposed() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

// Plain (non-differentiable) kernels shared by the tape ops and by oracles.

/// out = a * b
Tensor matmul_plain(const Tensor& a, const Tensor& b);
/// out = a * b^T
Tensor matmul_nt_plain(const Tensor& a, const Tensor& b);
/// out = a^T * b
Tensor matmul_tn_plain(const Tensor& a, const Tensor& b);

}  // namespace lecb::num
