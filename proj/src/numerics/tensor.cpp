#include "lecb/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "lecb/error.hpp"

namespace lecb::num {

Tensor::Tensor(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("tensor: " + std::to_string(data_.size()) +
                         " values do not fill shape [" + std::to_string(rows) +
                         "," + std::to_string(cols) + "]");
  }
  if (!all_finite()) {
    throw NumericError("tensor: non-finite value at creation");
  }
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value) {
  Tensor t(rows, cols);
  t.fill(value);
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::from(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("tensor: ragged nested list");
    values.insert(values.end(), row.begin(), row.end());
  }
  return {r, c, std::move(values)};
}

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows_) + "," + std::to_string(cols_) + "]";
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::transposed() const {
  Tensor t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("max_abs_diff: " + a.shape_string() + " vs " + b.shape_string());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor matmul_plain(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dims differ, " + a.shape_string() + " x " +
                         b.shape_string());
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.data() + i * m;
    const double* ar = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      if (av == 0.0) continue;
      const double* br = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

Tensor matmul_nt_plain(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dims differ, " + a.shape_string() + " x " +
                         b.shape_string() + "^T");
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Tensor out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ar = a.data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* br = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
      out(i, j) = s;
    }
  }
  return out;
}

Tensor matmul_tn_plain(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: inner dims differ, " + a.shape_string() + "^T x " +
                         b.shape_string());
  }
  const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
  Tensor out(n, m);
  for (std::size_t p = 0; p < k; ++p) {
    const double* ar = a.data() + p * n;
    const double* br = b.data() + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = ar[i];
      if (av == 0.0) continue;
      double* o = out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

}  // namespace lecb::num
