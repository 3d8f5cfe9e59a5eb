#pragma once

// Truncated third-order jets of scalar functions on R^3. A Jet3 carries
// value, gradient, Hessian and symmetric third derivatives; the ring
// operations below are exact for the truncation, so any expression built
// from them yields exact partial derivatives of the composite function.

#include <cmath>

#include "conj3/errors.hpp"
#include "conj3/tensor.hpp"

namespace conj3 {

struct Jet3 {
  double v = 0.0;
  V3 g{};
  S2 h{};
  S3 t{};
};

inline bool finite(const Jet3& a) {
  if (!std::isfinite(a.v)) return false;
  for (double x : a.g.c)
    if (!std::isfinite(x)) return false;
  for (double x : a.h.v)
    if (!std::isfinite(x)) return false;
  for (double x : a.t.v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline Jet3 jet_const(double c) {
  Jet3 r;
  r.v = c;
  return r;
}

// Coordinate function x_axis at the given point.
inline Jet3 jet_var(int axis, const V3& point) {
  Jet3 r;
  r.v = point[axis];
  r.g[axis] = 1.0;
  return r;
}

inline Jet3 operator+(const Jet3& a, const Jet3& b) {
  Jet3 r;
  r.v = a.v + b.v;
  for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] + b.g[i];
  for (int i = 0; i < 6; ++i)
    r.h.v[static_cast<std::size_t>(i)] =
        a.h.v[static_cast<std::size_t>(i)] + b.h.v[static_cast<std::size_t>(i)];
  for (int i = 0; i < 10; ++i)
    r.t.v[static_cast<std::size_t>(i)] =
        a.t.v[static_cast<std::size_t>(i)] + b.t.v[static_cast<std::size_t>(i)];
  return r;
}

inline Jet3 operator-(const Jet3& a, const Jet3& b) {
  Jet3 r;
  r.v = a.v - b.v;
  for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] - b.g[i];
  for (int i = 0; i < 6; ++i)
    r.h.v[static_cast<std::size_t>(i)] =
        a.h.v[static_cast<std::size_t>(i)] - b.h.v[static_cast<std::size_t>(i)];
  for (int i = 0; i < 10; ++i)
    r.t.v[static_cast<std::size_t>(i)] =
        a.t.v[static_cast<std::size_t>(i)] - b.t.v[static_cast<std::size_t>(i)];
  return r;
}

inline Jet3 operator-(const Jet3& a) {
  Jet3 r;
  r.v = -a.v;
  for (int i = 0; i < 3; ++i) r.g[i] = -a.g[i];
  for (int i = 0; i < 6; ++i)
    r.h.v[static_cast<std::size_t>(i)] = -a.h.v[static_cast<std::size_t>(i)];
  for (int i = 0; i < 10; ++i)
    r.t.v[static_cast<std::size_t>(i)] = -a.t.v[static_cast<std::size_t>(i)];
  return r;
}

inline Jet3 operator*(double s, const Jet3& a) {
  Jet3 r;
  r.v = s * a.v;
  for (int i = 0; i < 3; ++i) r.g[i] = s * a.g[i];
  for (int i = 0; i < 6; ++i)
    r.h.v[static_cast<std::size_t>(i)] = s * a.h.v[static_cast<std::size_t>(i)];
  for (int i = 0; i < 10; ++i)
    r.t.v[static_cast<std::size_t>(i)] = s * a.t.v[static_cast<std::size_t>(i)];
  return r;
}
inline Jet3 operator*(const Jet3& a, double s) { return s * a; }

inline Jet3 operator*(const Jet3& a, const Jet3& b) {
  Jet3 r;
  r.v = a.v * b.v;
  for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      r.h.at(i, j) = a.h(i, j) * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] +
                     a.v * b.h(i, j);
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      for (int k = j; k < 3; ++k)
        r.t.at(i, j, k) = a.t(i, j, k) * b.v + a.h(i, j) * b.g[k] +
                          a.h(i, k) * b.g[j] + a.h(j, k) * b.g[i] +
                          a.g[i] * b.h(j, k) + a.g[j] * b.h(i, k) +
                          a.g[k] * b.h(i, j) + a.v * b.t(i, j, k);
  return r;
}

// Univariate composition: given value and first three derivatives of an
// outer function at a.v, produce the jet of (outer o a).
inline Jet3 compose(const Jet3& a, double f0, double d1, double d2,
                    double d3) {
  Jet3 r;
  r.v = f0;
  for (int i = 0; i < 3; ++i) r.g[i] = d1 * a.g[i];
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      r.h.at(i, j) = d1 * a.h(i, j) + d2 * a.g[i] * a.g[j];
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      for (int k = j; k < 3; ++k)
        r.t.at(i, j, k) =
            d1 * a.t(i, j, k) +
            d2 * (a.g[i] * a.h(j, k) + a.g[j] * a.h(i, k) +
                  a.g[k] * a.h(i, j)) +
            d3 * a.g[i] * a.g[j] * a.g[k];
  return r;
}

inline void require_finite(const Jet3& a, const char* what) {
  if (!finite(a)) throw DomainError(std::string(what) + ": non-finite jet");
}

inline Jet3 jet_sin(const Jet3& a) {
  double s = std::sin(a.v), c = std::cos(a.v);
  Jet3 r = compose(a, s, c, -s, -c);
  require_finite(r, "sin");
  return r;
}

inline Jet3 jet_cos(const Jet3& a) {
  double s = std::sin(a.v), c = std::cos(a.v);
  Jet3 r = compose(a, c, -s, -c, s);
  require_finite(r, "cos");
  return r;
}

inline Jet3 jet_exp(const Jet3& a) {
  double e = std::exp(a.v);
  Jet3 r = compose(a, e, e, e, e);
  require_finite(r, "exp");
  return r;
}

inline Jet3 jet_log(const Jet3& a) {
  if (!(a.v > 0.0)) throw DomainError("log: argument must be positive");
  double u = a.v;
  Jet3 r = compose(a, std::log(u), 1.0 / u, -1.0 / (u * u),
                   2.0 / (u * u * u));
  require_finite(r, "log");
  return r;
}

inline Jet3 jet_sqrt(const Jet3& a) {
  if (!(a.v > 0.0)) throw DomainError("sqrt: argument must be positive");
  double s = std::sqrt(a.v);
  double d1 = 0.5 / s;
  double d2 = -0.25 / (s * a.v);
  double d3 = 0.375 / (s * a.v * a.v);
  Jet3 r = compose(a, s, d1, d2, d3);
  require_finite(r, "sqrt");
  return r;
}

inline Jet3 jet_atan(const Jet3& a) {
  double u = a.v;
  double w = 1.0 + u * u;
  Jet3 r = compose(a, std::atan(u), 1.0 / w, -2.0 * u / (w * w),
                   (6.0 * u * u - 2.0) / (w * w * w));
  require_finite(r, "atan");
  return r;
}

inline Jet3 jet_acos(const Jet3& a) {
  double u = a.v;
  if (!(std::fabs(u) < 1.0))
    throw DomainError("acos: argument must lie in (-1, 1)");
  double w = 1.0 - u * u;
  double rw = std::sqrt(w);
  double d1 = -1.0 / rw;
  double d2 = -u / (w * rw);
  double d3 = -(1.0 + 2.0 * u * u) / (w * w * rw);
  Jet3 r = compose(a, std::acos(u), d1, d2, d3);
  require_finite(r, "acos");
  return r;
}

// Multiplicative inverse; the building block for division.
inline Jet3 jet_recip(const Jet3& b) {
  double b0 = b.v;
  if (b0 == 0.0) throw DivisionByZero("division by zero");
  Jet3 r = compose(b, 1.0 / b0, -1.0 / (b0 * b0), 2.0 / (b0 * b0 * b0),
                   -6.0 / (b0 * b0 * b0 * b0));
  require_finite(r, "recip");
  return r;
}

inline Jet3 operator/(const Jet3& a, const Jet3& b) {
  return a * jet_recip(b);
}

// Real power with constant exponent. Integer exponents are handled so that
// coefficients that vanish (p, p-1 or p-2 equal to zero) never force an
// evaluation of a negative power of zero.
inline Jet3 jet_pow(const Jet3& a, double p) {
  double u = a.v;
  double ip = 0.0;
  bool integral = std::modf(p, &ip) == 0.0 && std::fabs(p) < 1e9;
  if (!integral && !(u > 0.0))
    throw DomainError("pow: base must be positive for non-integer exponent");
  if (integral && u == 0.0 && p < 3.0 && p != 0.0 && p != 1.0 && p != 2.0)
    throw DomainError("pow: negative power of zero");
  if (integral && u == 0.0 && p < 0.0)
    throw DomainError("pow: negative power of zero");
  double c1 = p;
  double c2 = p * (p - 1.0);
  double c3 = p * (p - 1.0) * (p - 2.0);
  auto powc = [&](double coeff, double expo) -> double {
    if (coeff == 0.0) return 0.0;
    return coeff * std::pow(u, expo);
  };
  Jet3 r = compose(a, std::pow(u, p), powc(c1, p - 1.0), powc(c2, p - 2.0),
                   powc(c3, p - 3.0));
  require_finite(r, "pow");
  return r;
}

// Two-argument arctangent. Away from the axes this is atan(y/x) or
// -atan(x/y) up to a constant, so either branch supplies the derivatives;
// the value itself is taken from std::atan2 to land in the right quadrant.
inline Jet3 jet_atan2(const Jet3& y, const Jet3& x) {
  if (x.v == 0.0 && y.v == 0.0)
    throw DomainError("atan2: both arguments vanish");
  Jet3 r;
  if (std::fabs(x.v) >= std::fabs(y.v)) {
    r = jet_atan(y / x);
  } else {
    r = -jet_atan(x / y);
  }
  r.v = std::atan2(y.v, x.v);
  require_finite(r, "atan2");
  return r;
}

// Evaluate a jet as a cubic Taylor polynomial on jet-valued displacements.
// With d^a = y^a - y0^a as jets this realises the multivariate chain rule
// to third order exactly.
inline Jet3 taylor_eval(const Jet3& f, const Jet3& d0, const Jet3& d1,
                        const Jet3& d2) {
  const Jet3* d[3] = {&d0, &d1, &d2};
  Jet3 r = jet_const(f.v);
  for (int a = 0; a < 3; ++a) r = r + f.g[a] * (*d[a]);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      if (f.h(a, b) == 0.0) continue;
      r = r + 0.5 * f.h(a, b) * ((*d[a]) * (*d[b]));
    }
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        if (f.t(a, b, c) == 0.0) continue;
        r = r + (1.0 / 6.0) * f.t(a, b, c) * ((*d[a]) * (*d[b]) * (*d[c]));
      }
  return r;
}

// Pull a jet back along new orthonormal axes: column a of Q is the new
// basis direction e'_a, so f'_a = Q_ia f_i and so on by tensoriality.
inline Jet3 rotate_jet(const Jet3& f, const M3& Q) {
  Jet3 r;
  r.v = f.v;
  for (int a = 0; a < 3; ++a)
    for (int i = 0; i < 3; ++i) r.g[a] += Q(i, a) * f.g[i];
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) {
      double s = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s += Q(i, a) * Q(j, b) * f.h(i, j);
      r.h.at(a, b) = s;
    }
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b)
      for (int c = b; c < 3; ++c) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
              s += Q(i, a) * Q(j, b) * Q(k, c) * f.t(i, j, k);
        r.t.at(a, b, c) = s;
      }
  return r;
}

}  // namespace conj3
