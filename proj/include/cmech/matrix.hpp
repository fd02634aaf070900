#pragma once

#include <cstddef>
#include <vector>

namespace cmech {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Zero-sized shapes (0xN, Mx0) are valid;
// they show up routinely as empty mechanisms.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vector>& rows);
  static Matrix row_vector(const Vector& v);
  static Matrix column_vector(const Vector& v);
  static Matrix diagonal(const Vector& d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

  Vector row(std::size_t i) const;
  Vector diag() const;
  double trace() const;

  const std::vector<double>& data() const { return data_; }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& a);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

// Stacks a on top of b (column counts must match; empty blocks allowed).
Matrix vstack(const Matrix& a, const Matrix& b);
// Block-diagonal composition of a and b.
Matrix block_diag(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
bool all_finite(const Matrix& a);
bool all_finite(const Vector& v);

// (a + aᵀ)/2; input must be square.
Matrix symmetrize(const Matrix& a);

Vector operator+(const Vector& a, const Vector& b);
Vector operator-(const Vector& a, const Vector& b);
Vector operator*(double s, const Vector& a);
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);

}  // namespace cmech
