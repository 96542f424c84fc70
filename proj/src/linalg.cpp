#include "geodialect/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace geodialect {

LuDecomposition::LuDecomposition(const Matrix& a) : lu_(a), perm_(a.rows()) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("LU factorization requires a square matrix");
  }
  const std::size_t n = lu_.rows();
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});

  double scale = 0.0;
  for (double v : lu_.data()) scale = std::max(scale, std::fabs(v));
  const double tiny = std::max(scale, 1.0) * 1e-300;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    double best = std::fabs(lu_(k, k));
    for (std::size_t r = k + 1; r < n; ++r) {
      const double cand = std::fabs(lu_(r, k));
      if (cand > best) {
        best = cand;
        pivot = r;
      }
    }
    if (!(best > tiny)) {
      throw std::runtime_error("matrix is singular (zero pivot at column " +
                               std::to_string(k) + ")");
    }
    if (pivot != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(lu_(k, c), lu_(pivot, c));
      std::swap(perm_[k], perm_[pivot]);
    }
    const double inv = 1.0 / lu_(k, k);
    for (std::size_t r = k + 1; r < n; ++r) {
      const double factor = lu_(r, k) * inv;
      lu_(r, k) = factor;
      if (factor != 0.0) {
        for (std::size_t c = k + 1; c < n; ++c) {
          lu_(r, c) -= factor * lu_(k, c);
        }
      }
    }
  }
}

std::vector<double> LuDecomposition::solve(const std::vector<double>& b) const {
  const std::size_t n = size();
  if (b.size() != n) {
    throw std::invalid_argument("right-hand side length does not match matrix size");
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 1; i < n; ++i) {
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= lu_(ii, j) * x[j];
    x[ii] = s / lu_(ii, ii);
  }
  return x;
}

namespace {

// r = b - A x with the products split through fma so the accumulation keeps
// roughly twice the working precision.
std::vector<double> precise_residual(const Matrix& a, const std::vector<double>& x,
                                     const std::vector<double>& b) {
  const std::size_t n = a.rows();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    CompensatedSum acc;
    acc.add(b[i]);
    for (std::size_t j = 0; j < n; ++j) {
      const double p = a(i, j) * x[j];
      const double err = std::fma(a(i, j), x[j], -p);
      acc.add(-p);
      acc.add(-err);
    }
    r[i] = acc.value();
  }
  return r;
}

}  // namespace

std::vector<double> LuDecomposition::solve_refined(const Matrix& a,
                                                   const std::vector<double>& b,
                                                   int passes) const {
  std::vector<double> x = solve(b);
  for (int pass = 0; pass < passes; ++pass) {
    const std::vector<double> r = precise_residual(a, x, b);
    const std::vector<double> dx = solve(r);
    double dx_norm = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += dx[i];
      dx_norm = std::max(dx_norm, std::fabs(dx[i]));
    }
    if (dx_norm == 0.0) break;
  }
  return x;
}

std::vector<double> solve_linear_system(const Matrix& a, const std::vector<double>& b) {
  return LuDecomposition(a).solve_refined(a, b);
}

SymmetricEigen symmetric_eigen(Matrix a, double tol, int max_sweeps) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("eigendecomposition requires a square matrix");
  }
  const std::size_t n = a.rows();
  Matrix v(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double norm = 0.0;
  for (double x : a.data()) norm += x * x;
  norm = std::sqrt(norm);
  const double threshold = tol * std::max(norm, 1e-300);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (std::sqrt(2.0 * off) <= threshold) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                      : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

Matrix cholesky_lower(Matrix a, double jitter) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("Cholesky requires a square matrix");
  }
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i) a(i, i) += jitter;
  Matrix l(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      CompensatedSum acc;
      acc.add(a(i, j));
      for (std::size_t k = 0; k < j; ++k) acc.add(-l(i, k) * l(j, k));
      const double s = acc.value();
      if (i == j) {
        if (!(s > 0.0)) {
          throw std::runtime_error("matrix is not positive definite (row " +
                                   std::to_string(i) + ")");
        }
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

}  // namespace geodialect
