#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tckae {

/// Raised when operand shapes are incompatible. The message always names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense float64 matrix, column-major: element (r, c) lives at data()[c * rows() + r].
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> column_major);

  /// Row-wise literal, e.g. from_rows({{0, 1}, {-1, 0}}).
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix column(std::initializer_list<double> values);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[c * rows_ + r]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[c * rows_ + r]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> col(std::size_t c) noexcept { return {data_.data() + c * rows_, rows_}; }
  std::span<const double> col(std::size_t c) const noexcept {
    return {data_.data() + c * rows_, rows_};
  }

  /// "RxC", used in error messages.
  std::string shape() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

bool same_shape(const Matrix& a, const Matrix& b) noexcept;
bool all_finite(const Matrix& m) noexcept;

Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T without materialising the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a^T * b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// K^kappa z as kappa successive products; kappa == 0 returns z.
Matrix mat_pow_apply(const Matrix& k, const Matrix& z, std::size_t kappa);

Matrix tanh_map(const Matrix& x);
Matrix transpose(const Matrix& m);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Matrix& operator+=(Matrix& a, const Matrix& b);

/// Adds the column vector `bias` to every column of `x`.
Matrix add_bias(const Matrix& x, const Matrix& bias);

Matrix col_block(const Matrix& m, std::size_t first, std::size_t count);
Matrix row_block(const Matrix& m, std::size_t first, std::size_t count);
Matrix hcat(std::span<const Matrix> blocks);

double squared_norm(const Matrix& m) noexcept;
double frobenius_norm(const Matrix& m) noexcept;

}  // namespace tckae
