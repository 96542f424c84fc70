#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace geodialect {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Neumaier-compensated accumulator; result is independent of the usual
/// cancellation pitfalls of naive summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// LU factorization with partial pivoting. Throws std::runtime_error when
/// the matrix is numerically singular.
class LuDecomposition {
 public:
  explicit LuDecomposition(const Matrix& a);

  std::size_t size() const { return lu_.rows(); }
  std::vector<double> solve(const std::vector<double>& b) const;

  /// Solve followed by `passes` rounds of iterative refinement with the
  /// residual accumulated in compensated arithmetic; `a` must be the matrix
  /// that was factored.
  std::vector<double> solve_refined(const Matrix& a, const std::vector<double>& b,
                                    int passes = 2) const;

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

std::vector<double> solve_linear_system(const Matrix& a, const std::vector<double>& b);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // columns aligned with values
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. `tol` bounds the
/// final off-diagonal Frobenius norm relative to the input norm.
SymmetricEigen symmetric_eigen(Matrix a, double tol = 1e-10, int max_sweeps = 64);

/// Lower Cholesky factor of a symmetric positive definite matrix; `jitter`
/// is added to the diagonal before factoring.
Matrix cholesky_lower(Matrix a, double jitter = 0.0);

}  // namespace geodialect
