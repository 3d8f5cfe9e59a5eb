#pragma once

// Pointwise solver for conjugate gradient directions: vectors omega with
// |omega| = |grad f|, omega orthogonal to grad f, and h(omega, omega) +
// h(grad f, grad f) = 0. The count of solutions is read off the signs of
// the classifier invariants X and Y in a gradient-adapted frame.

#include <cmath>
#include <vector>

#include "conj3/errors.hpp"
#include "conj3/invariants.hpp"
#include "conj3/jet.hpp"

namespace conj3 {

inline constexpr double k_tol_grad = 1e-12;
inline constexpr double k_tol_class = 1e-8;

enum class DirClass {
  FourDistinct,
  TwoDistinct,
  InfinitelyMany,
  NoneReal,
  CriticalPoint,
};

inline const char* to_string(DirClass c) {
  switch (c) {
    case DirClass::FourDistinct:
      return "four_distinct";
    case DirClass::TwoDistinct:
      return "two_distinct";
    case DirClass::InfinitelyMany:
      return "infinitely_many";
    case DirClass::NoneReal:
      return "none_real";
    case DirClass::CriticalPoint:
      return "critical_point";
  }
  return "?";
}

// Rotation into the frame with grad f along +e3 and h12 = 0; columns of Q
// are the frame vectors, jet = rotate_jet(f, Q).
struct FrameResult {
  M3 Q;
  Jet3 jet;
};

inline FrameResult normal_frame(const Jet3& f) {
  double gn = norm(f.g);
  if (gn < k_tol_grad)
    throw CriticalPointError("gradient too small to orient a frame");
  V3 u = (1.0 / gn) * f.g;
  // Any right-handed orthonormal completion (a, b, u).
  V3 seed = std::fabs(u[0]) < 0.8 ? V3{{{1, 0, 0}}} : V3{{{0, 1, 0}}};
  V3 a = seed - dot(seed, u) * u;
  a = (1.0 / norm(a)) * a;
  V3 b = cross(u, a);
  M3 Q1;
  for (int i = 0; i < 3; ++i) {
    Q1(i, 0) = a[i];
    Q1(i, 1) = b[i];
    Q1(i, 2) = u[i];
  }
  Jet3 f1 = rotate_jet(f, Q1);
  // Jacobi rotation in the (1,2) plane removes the h12 entry.
  double th = 0.5 * std::atan2(2.0 * f1.h(0, 1), f1.h(0, 0) - f1.h(1, 1));
  double c = std::cos(th), s = std::sin(th);
  M3 Q2 = m3_identity();
  Q2(0, 0) = c;
  Q2(1, 0) = s;
  Q2(0, 1) = -s;
  Q2(1, 1) = c;
  FrameResult r;
  r.Q = mul(Q1, Q2);
  r.jet = rotate_jet(f1, Q2);
  return r;
}

inline DirClass classify_directions(const Jet3& f, const Metric& m = {}) {
  if (norm(f.g) < k_tol_grad) return DirClass::CriticalPoint;
  CoreInvariants c = core_invariants(f, m);
  if (c.X_rel < -k_tol_class) return DirClass::FourDistinct;
  if (c.X_rel > k_tol_class) return DirClass::NoneReal;
  // On the X = 0 stratum Y = Z^2, so the two-vs-infinite split is decided by
  // Z against its fully expanded term-wise scale; Y's own scale Z^2 + |2JX|
  // degenerates to 0/0 exactly when both branches of the formula are
  // structural zeros (radially symmetric f).
  auto [z, zs] = detail::z_expanded(f);
  return std::fabs(z) / zs > k_tol_class ? DirClass::TwoDistinct
                                         : DirClass::InfinitelyMany;
}

struct DirectionSolution {
  DirClass cls = DirClass::NoneReal;
  double X_rel = 0, Y_rel = 0;
  // Distinct solution lines (one representative each; the negatives solve
  // too). Four roots give two lines, two roots one, the circle case two
  // orthogonal representatives.
  std::vector<V3> omegas;
};

namespace detail {

// Deterministic sign: first non-negligible component positive.
inline V3 normalize_sign(const V3& w) {
  double n = norm(w);
  for (int i = 0; i < 3; ++i)
    if (std::fabs(w[i]) > 1e-12 * n) return w[i] > 0.0 ? w : -w;
  return w;
}

}  // namespace detail

inline DirectionSolution solve_directions(const Jet3& f, const Metric& m = {}) {
  if (norm(f.g) < k_tol_grad)
    throw CriticalPointError("gradient too small to solve for directions");
  FrameResult fr = normal_frame(f);
  const Jet3& g = fr.jet;
  CoreInvariants c = core_invariants(f, m);
  DirectionSolution sol;
  sol.X_rel = c.X_rel;
  sol.Y_rel = c.Y_rel;
  sol.cls = classify_directions(f, m);
  double f3 = g.g[2];
  double h11 = g.h(0, 0), h22 = g.h(1, 1), h33 = g.h(2, 2);
  switch (sol.cls) {
    case DirClass::NoneReal:
    case DirClass::CriticalPoint:
      break;
    case DirClass::InfinitelyMany:
      // Any direction orthogonal to the gradient with matching speed.
      sol.omegas.push_back(detail::normalize_sign(
          mul(fr.Q, V3{{{f3, 0.0, 0.0}}})));
      sol.omegas.push_back(detail::normalize_sign(
          mul(fr.Q, V3{{{0.0, f3, 0.0}}})));
      break;
    case DirClass::FourDistinct:
    case DirClass::TwoDistinct: {
      double den = h22 - h11;
      double w1s = f3 * f3 * (h22 + h33) / den;
      double w2s = f3 * f3 * (h11 + h33) / (-den);
      // Clamp tiny negatives and restore the speed constraint exactly.
      if (w1s < 0.0) w1s = 0.0;
      if (w2s < 0.0) w2s = 0.0;
      double sum = w1s + w2s;
      if (sum <= 0.0)
        throw ConstraintViolation("degenerate direction system");
      double fix = f3 * f3 / sum;
      w1s *= fix;
      w2s *= fix;
      double w1 = std::sqrt(w1s), w2 = std::sqrt(w2s);
      if (sol.cls == DirClass::FourDistinct) {
        sol.omegas.push_back(detail::normalize_sign(
            mul(fr.Q, V3{{{w1, w2, 0.0}}})));
        sol.omegas.push_back(detail::normalize_sign(
            mul(fr.Q, V3{{{w1, -w2, 0.0}}})));
      } else {
        // One of the squares collapses; the surviving one carries the
        // whole speed.
        V3 w = w1s >= w2s ? V3{{{f3, 0.0, 0.0}}} : V3{{{0.0, f3, 0.0}}};
        sol.omegas.push_back(detail::normalize_sign(mul(fr.Q, w)));
      }
      break;
    }
  }
  // Each representative must satisfy the defining constraints.
  detail::FlatPieces p = detail::flat_pieces(f);
  for (const V3& w : sol.omegas) {
    double nw = dot(w, w);
    if (std::fabs(nw - p.vff) > 1e-6 * p.vff)
      throw ConstraintViolation("direction speed mismatch");
    if (std::fabs(dot(w, f.g)) > 1e-6 * std::sqrt(nw * p.vff))
      throw ConstraintViolation("direction not orthogonal to gradient");
    double hww = quad(f.h, w, w);
    double scale = std::fabs(hww) + std::fabs(p.hff) +
                   p.vff * std::sqrt(p.hh) + k_eps_den;
    if (sol.cls != DirClass::InfinitelyMany &&
        std::fabs(hww + p.hff) > 1e-5 * scale)
      throw ConstraintViolation("direction fails the Hessian constraint");
  }
  return sol;
}

// Follow a previously chosen branch: pick the candidate closest to prev.
inline V3 continue_branch(const Jet3& f, const DirectionSolution& sol,
                          const V3& prev) {
  if (sol.cls == DirClass::NoneReal || sol.cls == DirClass::CriticalPoint ||
      sol.omegas.empty())
    throw WrongBranch("no real directions to continue");
  double np = norm(prev);
  if (sol.cls == DirClass::InfinitelyMany) {
    // Project the previous direction onto the solution circle.
    V3 u = (1.0 / norm(f.g)) * f.g;
    V3 proj = prev - dot(prev, u) * u;
    double n = norm(proj);
    if (n < 1e-9 * (np + 1e-30))
      throw AmbiguousBranch("previous direction parallel to the gradient");
    return (norm(f.g) / n) * proj;
  }
  double best = -2.0, second = -2.0;
  V3 pick{};
  for (const V3& w : sol.omegas)
    for (double s : {1.0, -1.0}) {
      V3 cand = s * w;
      double d = dot(cand, prev) / (norm(cand) * np + 1e-300);
      if (d > best) {
        second = best;
        best = d;
        pick = cand;
      } else if (d > second) {
        second = d;
      }
    }
  if (best - second < 1e-6)
    throw AmbiguousBranch("branch candidates indistinguishable");
  return pick;
}

// Orientation scalar E = eps^{ijk} f_i omega_j f_k^l omega_l.
inline double E_invariant(const Jet3& f, const V3& omega,
                          const Metric& m = {}) {
  V3 Hw = mul(f.h, omega);
  return m.eps_up() * m.inv() * det_rows(f.g, omega, Hw);
}

// Residual of the square identity J^2 X + 2 E^2 = 0 with its magnitude
// scale; near zero exactly when omega solves the direction system.
struct MagicResidual {
  double residual = 0, scale = 0, rel = 0;
};

inline MagicResidual magic_residual(const Jet3& f, const V3& omega,
                                    const Metric& m = {}) {
  CoreInvariants c = core_invariants(f, m);
  double E = E_invariant(f, omega, m);
  V3 Hw = mul(f.h, omega);
  double Eabs = m.eps_up() * m.inv() * det_rows_abs(f.g, omega, Hw);
  MagicResidual r;
  r.residual = c.J * c.J * c.X + 2.0 * E * E;
  r.scale = std::fabs(c.J * c.J) * c.X_scale + 2.0 * Eabs * Eabs + k_eps_den;
  r.rel = r.residual / r.scale;
  return r;
}

// Second-branch direction: eta is the weight-zero vector with
// sqrt(Y) eta = 2 h(f, omega) f + (Z - 2 h(f, f)) omega - 2 J H omega,
// all in flat contractions. Defined when Y is safely positive.
inline V3 eta_from_omega(const Jet3& f, const V3& omega) {
  CoreInvariants c = core_invariants(f);
  if (c.Y < 0.0 || c.Y_rel <= 1e-12)
    throw DegenerateY("second branch undefined where Y vanishes");
  detail::FlatPieces p = detail::flat_pieces(f);
  V3 Hw = mul(f.h, omega);
  double fHw = dot(f.g, Hw);
  double Zf = p.hff + p.vff * p.trh;
  double rY = std::sqrt(c.Y);
  V3 eta;
  for (int i = 0; i < 3; ++i)
    eta[i] = (2.0 * fHw * f.g[i] + (Zf - 2.0 * p.hff) * omega[i] -
              2.0 * p.vff * Hw[i]) /
             rY;
  return eta;
}

}  // namespace conj3
