#pragma once

// Shared test utilities: a finite-difference derivative oracle that is
// independent of the jet algebra, random generators, and comparison
// helpers. The oracle evaluates plain double-valued callables only.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "conj3/jet.hpp"
#include "conj3/tensor.hpp"

namespace testsup {

using conj3::Jet3;
using conj3::M3;
using conj3::V3;

using ScalarFn = std::function<double(const V3&)>;

// Nested central differences along the listed axes (repeats allowed).
inline double central(const ScalarFn& f, V3 p, const std::vector<int>& axes,
                      std::size_t k, double h) {
  if (k == axes.size()) return f(p);
  int a = axes[k];
  V3 pp = p, pm = p;
  pp[a] += h;
  pm[a] -= h;
  return (central(f, pp, axes, k + 1, h) - central(f, pm, axes, k + 1, h)) /
         (2.0 * h);
}

// One Richardson step kills the leading h^2 error term.
inline double fd_derive(const ScalarFn& f, const V3& p,
                        const std::vector<int>& axes, double h = 1e-2) {
  double d1 = central(f, p, axes, 0, h);
  double d2 = central(f, p, axes, 0, h / 2.0);
  return (4.0 * d2 - d1) / 3.0;
}

inline Jet3 fd_jet(const ScalarFn& f, const V3& p, double h = 1e-2) {
  Jet3 r;
  r.v = f(p);
  for (int i = 0; i < 3; ++i) r.g[i] = fd_derive(f, p, {i}, h);
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) r.h.at(i, j) = fd_derive(f, p, {i, j}, h);
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      for (int k = j; k < 3; ++k)
        r.t.at(i, j, k) = fd_derive(f, p, {i, j, k}, h);
  return r;
}

inline double rel_err(double a, double b) {
  return std::fabs(a - b) / (std::fabs(a) + std::fabs(b) + 1e-12);
}

// Mixed absolute/relative closeness.
inline bool close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * (1.0 + std::fabs(a) + std::fabs(b));
}

inline double max_jet_dev(const Jet3& a, const Jet3& b) {
  double m = std::fabs(a.v - b.v) / (1.0 + std::fabs(a.v) + std::fabs(b.v));
  auto upd = [&](double x, double y) {
    double d = std::fabs(x - y) / (1.0 + std::fabs(x) + std::fabs(y));
    if (d > m) m = d;
  };
  for (int i = 0; i < 3; ++i) upd(a.g[i], b.g[i]);
  for (int i = 0; i < 6; ++i)
    upd(a.h.v[static_cast<std::size_t>(i)], b.h.v[static_cast<std::size_t>(i)]);
  for (int i = 0; i < 10; ++i)
    upd(a.t.v[static_cast<std::size_t>(i)], b.t.v[static_cast<std::size_t>(i)]);
  return m;
}

inline double uni(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline V3 random_point(std::mt19937_64& rng, double lo = -1.5,
                       double hi = 1.5) {
  return {{{uni(rng, lo, hi), uni(rng, lo, hi), uni(rng, lo, hi)}}};
}

inline Jet3 random_jet(std::mt19937_64& rng) {
  Jet3 r;
  r.v = uni(rng, -1.5, 1.5);
  for (int i = 0; i < 3; ++i) r.g[i] = uni(rng, -1.5, 1.5);
  for (int i = 0; i < 6; ++i)
    r.h.v[static_cast<std::size_t>(i)] = uni(rng, -1.5, 1.5);
  for (int i = 0; i < 10; ++i)
    r.t.v[static_cast<std::size_t>(i)] = uni(rng, -1.5, 1.5);
  return r;
}

// Uniform random rotation from a random unit quaternion.
inline M3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  double q0 = nd(rng), q1 = nd(rng), q2 = nd(rng), q3 = nd(rng);
  double n = std::sqrt(q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3);
  q0 /= n;
  q1 /= n;
  q2 /= n;
  q3 /= n;
  M3 Q;
  Q(0, 0) = 1 - 2 * (q2 * q2 + q3 * q3);
  Q(0, 1) = 2 * (q1 * q2 - q0 * q3);
  Q(0, 2) = 2 * (q1 * q3 + q0 * q2);
  Q(1, 0) = 2 * (q1 * q2 + q0 * q3);
  Q(1, 1) = 1 - 2 * (q1 * q1 + q3 * q3);
  Q(1, 2) = 2 * (q2 * q3 - q0 * q1);
  Q(2, 0) = 2 * (q1 * q3 - q0 * q2);
  Q(2, 1) = 2 * (q2 * q3 + q0 * q1);
  Q(2, 2) = 1 - 2 * (q1 * q1 + q2 * q2);
  return Q;
}

// Random jet constrained to the degenerate-direction stratum: built in a
// frame where the gradient is (0,0,f3) and the top-left Hessian block is
// diagonal with f33 = -f11 (forcing the quartic classifier to zero), then
// carried to general position by a random rotation.
inline Jet3 random_x0_jet(std::mt19937_64& rng) {
  Jet3 f;
  f.v = uni(rng, -1.5, 1.5);
  double f3 = uni(rng, 0.5, 2.0);
  f.g[2] = f3;
  double f11 = uni(rng, -1.5, 1.5);
  double f22 = uni(rng, -1.5, 1.5);
  while (std::fabs(f11 - f22) < 0.3) f22 = uni(rng, -1.5, 1.5);
  f.h.at(0, 0) = f11;
  f.h.at(1, 1) = f22;
  f.h.at(2, 2) = -f11;
  f.h.at(0, 2) = uni(rng, -1.5, 1.5);
  f.h.at(1, 2) = uni(rng, -1.5, 1.5);
  for (int i = 0; i < 10; ++i)
    f.t.v[static_cast<std::size_t>(i)] = uni(rng, -1.5, 1.5);
  M3 Q = conj3::transpose(random_rotation(rng));
  return conj3::rotate_jet(f, Q);
}

}  // namespace testsup
