#pragma once

// Dense linear algebra for matrices up to 5x5: products, Gaussian solves,
// numerical nullspaces, characteristic polynomials, polynomial roots and a
// cyclic Jacobi eigensolver for symmetric matrices.  Everything is sized for
// the canonical-form computations; nothing here is asymptotically clever.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace conj3 {

// Row-major with a fixed stride of 5; only the leading n x n block is used.
struct SmallMat {
  int n = 0;
  std::array<double, 25> a{};

  SmallMat() = default;
  explicit SmallMat(int size) : n(size) {}

  double& at(int i, int j) { return a[static_cast<std::size_t>(5 * i + j)]; }
  double operator()(int i, int j) const {
    return a[static_cast<std::size_t>(5 * i + j)];
  }

  static SmallMat identity(int size) {
    SmallMat m(size);
    for (int i = 0; i < size; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

using Vec5 = std::array<double, 5>;

inline SmallMat mul(const SmallMat& x, const SmallMat& y) {
  SmallMat r(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) {
      double s = 0.0;
      for (int k = 0; k < x.n; ++k) s += x(i, k) * y(k, j);
      r.at(i, j) = s;
    }
  return r;
}

inline SmallMat transpose(const SmallMat& x) {
  SmallMat r(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) r.at(i, j) = x(j, i);
  return r;
}

inline Vec5 mulv(const SmallMat& x, const Vec5& v) {
  Vec5 r{};
  for (int i = 0; i < x.n; ++i) {
    double s = 0.0;
    for (int k = 0; k < x.n; ++k)
      s += x(i, k) * v[static_cast<std::size_t>(k)];
    r[static_cast<std::size_t>(i)] = s;
  }
  return r;
}

inline double dot5(const Vec5& a, const Vec5& b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    s += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
  return s;
}

inline double frob(const SmallMat& x) {
  double s = 0.0;
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) s += x(i, j) * x(i, j);
  return std::sqrt(s);
}

inline double trace_of(const SmallMat& x) {
  double s = 0.0;
  for (int i = 0; i < x.n; ++i) s += x(i, i);
  return s;
}

// Solve A X = B by Gaussian elimination with partial pivoting.
inline SmallMat solve_mat(SmallMat A, SmallMat B) {
  int n = A.n;
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::fabs(A(i, j)));
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(A(r, col)) > std::fabs(A(piv, col))) piv = r;
    if (std::fabs(A(piv, col)) <= 1e-13 * (scale + 1e-300))
      throw IllConditioned("linear solve: pivot below tolerance");
    if (piv != col)
      for (int j = 0; j < n; ++j) {
        std::swap(A.at(piv, j), A.at(col, j));
        std::swap(B.at(piv, j), B.at(col, j));
      }
    double d = A(col, col);
    for (int r = col + 1; r < n; ++r) {
      double f = A(r, col) / d;
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) A.at(r, j) -= f * A(col, j);
      for (int j = 0; j < n; ++j) B.at(r, j) -= f * B(col, j);
    }
  }
  SmallMat X(n);
  for (int j = 0; j < n; ++j)
    for (int i = n - 1; i >= 0; --i) {
      double s = B(i, j);
      for (int k = i + 1; k < n; ++k) s -= A(i, k) * X(k, j);
      X.at(i, j) = s / A(i, i);
    }
  return X;
}

inline SmallMat inverse(const SmallMat& A) {
  return solve_mat(A, SmallMat::identity(A.n));
}

// Nullspace of a stack of row functionals on R^n, by full-pivot elimination.
// rtol is relative to the largest pivot.
inline std::vector<Vec5> nullspace_rows(std::vector<Vec5> rows, int n,
                                        double rtol) {
  int m = static_cast<int>(rows.size());
  std::array<int, 5> colperm{};
  for (int j = 0; j < n; ++j) colperm[static_cast<std::size_t>(j)] = j;
  int rank = 0;
  double first = 0.0;
  while (rank < m && rank < n) {
    int pr = rank, pc = rank;
    double best = 0.0;
    for (int r = rank; r < m; ++r)
      for (int c = rank; c < n; ++c) {
        double v = std::fabs(rows[static_cast<std::size_t>(r)]
                                 [static_cast<std::size_t>(c)]);
        if (v > best) {
          best = v;
          pr = r;
          pc = c;
        }
      }
    if (rank == 0) first = best;
    if (best <= rtol * (first + 1e-300)) break;
    std::swap(rows[static_cast<std::size_t>(rank)],
              rows[static_cast<std::size_t>(pr)]);
    if (pc != rank) {
      for (auto& row : rows)
        std::swap(row[static_cast<std::size_t>(rank)],
                  row[static_cast<std::size_t>(pc)]);
      std::swap(colperm[static_cast<std::size_t>(rank)],
                colperm[static_cast<std::size_t>(pc)]);
    }
    double d = rows[static_cast<std::size_t>(rank)]
                   [static_cast<std::size_t>(rank)];
    for (int r = 0; r < m; ++r) {
      if (r == rank) continue;
      double f = rows[static_cast<std::size_t>(r)]
                     [static_cast<std::size_t>(rank)] /
                 d;
      if (f == 0.0) continue;
      for (int c = rank; c < n; ++c)
        rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -=
            f * rows[static_cast<std::size_t>(rank)]
                    [static_cast<std::size_t>(c)];
    }
    ++rank;
  }
  std::vector<Vec5> basis;
  for (int free = rank; free < n; ++free) {
    Vec5 v{};
    v[static_cast<std::size_t>(colperm[static_cast<std::size_t>(free)])] = 1.0;
    for (int r = 0; r < rank; ++r) {
      double num = rows[static_cast<std::size_t>(r)]
                       [static_cast<std::size_t>(free)];
      double den = rows[static_cast<std::size_t>(r)]
                       [static_cast<std::size_t>(r)];
      v[static_cast<std::size_t>(colperm[static_cast<std::size_t>(r)])] =
          -num / den;
    }
    double nn = std::sqrt(dot5(v, v, n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] /= nn;
    basis.push_back(v);
  }
  return basis;
}

inline std::vector<Vec5> nullspace(const SmallMat& A, double rtol) {
  std::vector<Vec5> rows;
  for (int i = 0; i < A.n; ++i) {
    Vec5 r{};
    for (int j = 0; j < A.n; ++j) r[static_cast<std::size_t>(j)] = A(i, j);
    rows.push_back(r);
  }
  return nullspace_rows(rows, A.n, rtol);
}

inline int rank_of(const SmallMat& A, double rtol) {
  return A.n - static_cast<int>(nullspace(A, rtol).size());
}

// Monic characteristic polynomial by the Faddeev-LeVerrier recursion:
// p(t) = t^n + c[n-1] t^(n-1) + ... + c[0].
inline std::vector<double> char_poly(const SmallMat& A) {
  int n = A.n;
  std::vector<double> c(static_cast<std::size_t>(n), 0.0);
  SmallMat M = SmallMat::identity(n);
  double ck = -trace_of(A);
  c[static_cast<std::size_t>(n - 1)] = ck;
  for (int k = 2; k <= n; ++k) {
    SmallMat AM = mul(A, M);
    for (int i = 0; i < n; ++i) AM.at(i, i) += ck;
    M = AM;
    ck = -trace_of(mul(A, M)) / k;
    c[static_cast<std::size_t>(n - k)] = ck;
  }
  return c;
}

// All roots of a monic polynomial with real coefficients (ascending order,
// excluding the leading 1), by Durand-Kerner iteration.
inline std::vector<std::complex<double>> poly_roots_monic(
    const std::vector<double>& c) {
  using C = std::complex<double>;
  int n = static_cast<int>(c.size());
  if (n == 0) return {};
  double radius = 0.0;
  for (double v : c) radius = std::max(radius, std::fabs(v));
  radius = 1.0 + radius;
  std::vector<C> x(static_cast<std::size_t>(n));
  C seed(0.4, 0.9);
  C cur(1.0, 0.0);
  for (int i = 0; i < n; ++i) {
    cur *= seed;
    x[static_cast<std::size_t>(i)] = radius * cur;
  }
  auto eval = [&](C z) {
    C p(1.0, 0.0);
    for (int k = n - 1; k >= 0; --k)
      p = p * z + C(c[static_cast<std::size_t>(k)], 0.0);
    return p;
  };
  for (int iter = 0; iter < 400; ++iter) {
    double moved = 0.0;
    for (int i = 0; i < n; ++i) {
      C denom(1.0, 0.0);
      for (int j = 0; j < n; ++j)
        if (j != i)
          denom *= x[static_cast<std::size_t>(i)] -
                   x[static_cast<std::size_t>(j)];
      if (std::abs(denom) < 1e-300) denom = C(1e-300, 0.0);
      C step = eval(x[static_cast<std::size_t>(i)]) / denom;
      x[static_cast<std::size_t>(i)] -= step;
      moved = std::max(moved, std::abs(step));
    }
    if (moved < 1e-14 * radius) break;
  }
  return x;
}

inline std::vector<std::complex<double>> eigenvalues_general(
    const SmallMat& A) {
  return poly_roots_monic(char_poly(A));
}

// Eigenvalues (and optionally vectors) of a symmetric matrix by cyclic
// Jacobi rotations.  Columns of V are the eigenvectors.
inline std::vector<double> jacobi_eigenvalues(SmallMat A,
                                              SmallMat* V = nullptr) {
  int n = A.n;
  if (V) *V = SmallMat::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::fabs(A(p, q)) < 1e-300) continue;
        double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double cth = 1.0 / std::sqrt(t * t + 1.0);
        double sth = t * cth;
        for (int k = 0; k < n; ++k) {
          double akp = A(k, p), akq = A(k, q);
          A.at(k, p) = cth * akp - sth * akq;
          A.at(k, q) = sth * akp + cth * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = A(p, k), aqk = A(q, k);
          A.at(p, k) = cth * apk - sth * aqk;
          A.at(q, k) = sth * apk + cth * aqk;
        }
        if (V)
          for (int k = 0; k < n; ++k) {
            double vkp = (*V)(k, p), vkq = (*V)(k, q);
            V->at(k, p) = cth * vkp - sth * vkq;
            V->at(k, q) = sth * vkp + cth * vkq;
          }
      }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = A(i, i);
  return ev;
}

}  // namespace conj3
