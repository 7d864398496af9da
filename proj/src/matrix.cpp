#include "tckae/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace tckae {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape() + " and " +
                       b.shape());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> column_major)
    : rows_(rows), cols_(cols), data_(std::move(column_major)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Matrix: " + std::to_string(data_.size()) + " values for shape " +
                         shape());
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::column(std::initializer_list<double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool same_shape(const Matrix& a, const Matrix& b) noexcept {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

bool all_finite(const Matrix& m) noexcept {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < b.cols(); ++j) {
    double* cj = c.col(j).data();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double bpj = b(p, j);
      const double* ap = a.col(p).data();
      for (std::size_t i = 0; i < n; ++i) cj[i] += ap[i] * bpj;
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  Matrix c(a.rows(), b.rows());
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < b.rows(); ++j) {
    double* cj = c.col(j).data();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double bjp = b(j, p);
      const double* ap = a.col(p).data();
      for (std::size_t i = 0; i < n; ++i) cj[i] += ap[i] * bjp;
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
  Matrix c(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    const auto bj = b.col(j);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const auto ai = a.col(i);
      double s = 0.0;
      for (std::size_t p = 0; p < a.rows(); ++p) s += ai[p] * bj[p];
      c(i, j) = s;
    }
  }
  return c;
}

Matrix mat_pow_apply(const Matrix& k, const Matrix& z, std::size_t kappa) {
  if (k.rows() != k.cols()) {
    throw DimensionError("mat_pow_apply: operator must be square, got " + k.shape());
  }
  if (k.cols() != z.rows()) shape_error("mat_pow_apply", k, z);
  Matrix out = z;
  for (std::size_t i = 0; i < kappa; ++i) out = matmul(k, out);
  return out;
}

Matrix tanh_map(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data()) v = std::tanh(v);
  return y;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) t(j, i) = m(i, j);
  return t;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  c += b;
  return c;
}

Matrix& operator+=(Matrix& a, const Matrix& b) {
  if (!same_shape(a, b)) shape_error("add", a, b);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
  return a;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (!same_shape(a, b)) shape_error("sub", a, b);
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] -= bd[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

Matrix add_bias(const Matrix& x, const Matrix& bias) {
  if (bias.cols() != 1 || bias.rows() != x.rows()) shape_error("add_bias", x, bias);
  Matrix y = x;
  const double* b = bias.data().data();
  for (std::size_t j = 0; j < y.cols(); ++j) {
    double* yj = y.col(j).data();
    for (std::size_t i = 0; i < y.rows(); ++i) yj[i] += b[i];
  }
  return y;
}

Matrix col_block(const Matrix& m, std::size_t first, std::size_t count) {
  if (first + count > m.cols()) {
    throw DimensionError("col_block: columns [" + std::to_string(first) + ", " +
                         std::to_string(first + count) + ") out of range for " + m.shape());
  }
  auto begin = m.data().begin() + static_cast<std::ptrdiff_t>(first * m.rows());
  return Matrix(m.rows(), count,
                std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count * m.rows())));
}

Matrix row_block(const Matrix& m, std::size_t first, std::size_t count) {
  if (first + count > m.rows()) {
    throw DimensionError("row_block: rows [" + std::to_string(first) + ", " +
                         std::to_string(first + count) + ") out of range for " + m.shape());
  }
  Matrix out(count, m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < count; ++i) out(i, j) = m(first + i, j);
  return out;
}

Matrix hcat(std::span<const Matrix> blocks) {
  if (blocks.empty()) return {};
  const std::size_t rows = blocks.front().rows();
  std::size_t cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) shape_error("hcat", blocks.front(), b);
    cols += b.cols();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& b : blocks) data.insert(data.end(), b.data().begin(), b.data().end());
  return Matrix(rows, cols, std::move(data));
}

double squared_norm(const Matrix& m) noexcept {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

double frobenius_norm(const Matrix& m) noexcept { return std::sqrt(squared_norm(m)); }

}  // namespace tckae
