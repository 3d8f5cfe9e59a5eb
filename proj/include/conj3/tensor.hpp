#pragma once

// Small dense tensors on R^3 with symmetric packed storage, plus the
// scaled-Euclidean metric used to thread conformal factors through
// contractions. Everything is value-semantic and allocation-free.

#include <array>
#include <cmath>

namespace conj3 {

// Denominator guard: added to scale sums so that relative quantities are
// defined even on exactly-zero input.
inline constexpr double k_eps_den = 1e-300;

struct V3 {
  std::array<double, 3> c{};
  double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
};

inline V3 operator+(const V3& a, const V3& b) {
  return {{{a[0] + b[0], a[1] + b[1], a[2] + b[2]}}};
}
inline V3 operator-(const V3& a, const V3& b) {
  return {{{a[0] - b[0], a[1] - b[1], a[2] - b[2]}}};
}
inline V3 operator-(const V3& a) { return {{{-a[0], -a[1], -a[2]}}}; }
inline V3 operator*(double s, const V3& a) {
  return {{{s * a[0], s * a[1], s * a[2]}}};
}
inline V3 operator*(const V3& a, double s) { return s * a; }
inline V3& operator+=(V3& a, const V3& b) {
  a = a + b;
  return a;
}

inline double dot(const V3& a, const V3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline V3 cross(const V3& a, const V3& b) {
  return {{{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0]}}};
}
inline double norm(const V3& a) { return std::sqrt(dot(a, a)); }

// General 3x3, row-major.
struct M3 {
  std::array<double, 9> a{};
  double& operator()(int i, int j) {
    return a[static_cast<std::size_t>(3 * i + j)];
  }
  double operator()(int i, int j) const {
    return a[static_cast<std::size_t>(3 * i + j)];
  }
};

inline V3 mul(const M3& m, const V3& v) {
  V3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i] += m(i, j) * v[j];
  return r;
}
inline M3 mul(const M3& x, const M3& y) {
  M3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r(i, j) += x(i, k) * y(k, j);
  return r;
}
inline M3 transpose(const M3& m) {
  M3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = m(j, i);
  return r;
}
inline M3 m3_identity() {
  M3 r{};
  r(0, 0) = r(1, 1) = r(2, 2) = 1.0;
  return r;
}
inline double det(const M3& m) {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

// det of the matrix with rows a, b, c.
inline double det_rows(const V3& a, const V3& b, const V3& c) {
  return dot(a, cross(b, c));
}
// Same expansion with every product taken in absolute value; used as the
// natural magnitude scale for epsilon-contraction residuals.
inline double det_rows_abs(const V3& a, const V3& b, const V3& c) {
  double s = 0.0;
  s += std::fabs(a[0] * b[1] * c[2]) + std::fabs(a[0] * b[2] * c[1]);
  s += std::fabs(a[1] * b[0] * c[2]) + std::fabs(a[1] * b[2] * c[0]);
  s += std::fabs(a[2] * b[0] * c[1]) + std::fabs(a[2] * b[1] * c[0]);
  return s;
}

// Symmetric rank-2 tensor, packed upper triangle:
// (0,0) (0,1) (0,2) (1,1) (1,2) (2,2).
struct S2 {
  std::array<double, 6> v{};
  static constexpr int idx(int i, int j) {
    return i <= j ? i * (5 - i) / 2 + j : j * (5 - j) / 2 + i;
  }
  double& at(int i, int j) { return v[static_cast<std::size_t>(idx(i, j))]; }
  double operator()(int i, int j) const {
    return v[static_cast<std::size_t>(idx(i, j))];
  }
};

inline V3 mul(const S2& h, const V3& x) {
  V3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i] += h(i, j) * x[j];
  return r;
}
inline double quad(const S2& h, const V3& x, const V3& y) {
  double r = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r += h(i, j) * x[i] * y[j];
  return r;
}
inline double trace(const S2& h) { return h(0, 0) + h(1, 1) + h(2, 2); }
// Full contraction sum_ij a_ij b_ij (all 9 positions).
inline double ddot(const S2& a, const S2& b) {
  double r = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r += a(i, j) * b(i, j);
  return r;
}
inline M3 to_m3(const S2& h) {
  M3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = h(i, j);
  return r;
}

inline S2 operator+(const S2& a, const S2& b) {
  S2 r;
  for (std::size_t i = 0; i < 6; ++i) r.v[i] = a.v[i] + b.v[i];
  return r;
}
inline S2 operator-(const S2& a, const S2& b) {
  S2 r;
  for (std::size_t i = 0; i < 6; ++i) r.v[i] = a.v[i] - b.v[i];
  return r;
}
inline S2 operator*(double s, const S2& a) {
  S2 r;
  for (std::size_t i = 0; i < 6; ++i) r.v[i] = s * a.v[i];
  return r;
}

// Symmetric rank-3 tensor, packed with i <= j <= k; 10 slots.
struct S3 {
  std::array<double, 10> v{};
  static constexpr int idx(int i, int j, int k) {
    int a = i, b = j, c = k, t = 0;
    if (a > b) { t = a; a = b; b = t; }
    if (b > c) { t = b; b = c; c = t; }
    if (a > b) { t = a; a = b; b = t; }
    // a <= b <= c now; offsets 0,6,9 for a = 0,1,2.
    if (a == 0) return b * (5 - b) / 2 + c;
    if (a == 1) return 6 + (b == 1 ? c - 1 : 2);
    return 9;
  }
  double& at(int i, int j, int k) {
    return v[static_cast<std::size_t>(idx(i, j, k))];
  }
  double operator()(int i, int j, int k) const {
    return v[static_cast<std::size_t>(idx(i, j, k))];
  }
};

// t(i; x, y) = sum_jk t_ijk x_j y_k, returned as a vector in i.
inline V3 con2(const S3& t, const V3& x, const V3& y) {
  V3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i] += t(i, j, k) * x[j] * y[k];
  return r;
}
inline V3 con2_abs(const S3& t, const V3& x, const V3& y) {
  V3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i] += std::fabs(t(i, j, k) * x[j] * y[k]);
  return r;
}
inline double con3(const S3& t, const V3& x, const V3& y, const V3& z) {
  double r = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r += t(i, j, k) * x[i] * y[j] * z[k];
  return r;
}
// Absolute-value counterpart of con3; magnitude scale for residuals.
inline double con3_abs(const S3& t, const V3& x, const V3& y, const V3& z) {
  double r = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        r += std::fabs(t(i, j, k) * x[i] * y[j] * z[k]);
  return r;
}

inline S3 operator+(const S3& a, const S3& b) {
  S3 r;
  for (std::size_t i = 0; i < 10; ++i) r.v[i] = a.v[i] + b.v[i];
  return r;
}
inline S3 operator-(const S3& a, const S3& b) {
  S3 r;
  for (std::size_t i = 0; i < 10; ++i) r.v[i] = a.v[i] - b.v[i];
  return r;
}
inline S3 operator*(double s, const S3& a) {
  S3 r;
  for (std::size_t i = 0; i < 10; ++i) r.v[i] = s * a.v[i];
  return r;
}

// Contraction metric g_ij = s * delta_ij with s > 0. s = 1 is the flat
// default; s = Omega^2 evaluates invariants against a rescaled metric.
struct Metric {
  double s = 1.0;
  double inv() const { return 1.0 / s; }
  // Factor carried by the raised orientation tensor eps^{ijk}.
  double eps_up() const { return 1.0 / (s * std::sqrt(s)); }
};

}  // namespace conj3
