#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <utility>

#include "conj3/directions.hpp"

namespace conj3 {

// Verdict tolerance on scale-normalized residuals.  Residuals between the
// tolerance and k_gray_factor times it are reported as Inconclusive rather
// than Rejects.
inline constexpr double k_tol_verdict = 1e-7;
inline constexpr double k_gray_factor = 100.0;

enum class Branch { Plus, Minus };

enum class BranchKind {
  Generic,          // four directions, two sign pairs
  UniqueDirection,  // classifier zero, discriminant positive
  Infinite,         // discriminant zero: a full circle of directions
  NoConjugate,      // classifier positive: no real direction
  Critical,         // vanishing gradient
};

enum class Verdict { Admits, AdmitsOnBranch, Rejects, Inconclusive };

inline const char* to_string(Branch b) {
  return b == Branch::Plus ? "plus" : "minus";
}

inline const char* to_string(BranchKind b) {
  switch (b) {
    case BranchKind::Generic: return "generic";
    case BranchKind::UniqueDirection: return "unique_direction";
    case BranchKind::Infinite: return "infinite";
    case BranchKind::NoConjugate: return "no_conjugate";
    case BranchKind::Critical: return "critical";
  }
  return "?";
}

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Admits: return "admits";
    case Verdict::AdmitsOnBranch: return "admits_on_branch";
    case Verdict::Rejects: return "rejects";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

namespace detail {

// Reject direction vectors that do not solve the pointwise system; the
// tolerances are loose enough for numerically continued inputs.
inline void require_direction(const Jet3& f, const V3& w, const char* label) {
  FlatPieces p = flat_pieces(f);
  if (p.vff <= 0.0)
    throw CriticalPointError("gradient vanishes; no conjugate direction");
  std::string who(label);
  if (std::fabs(dot(w, w) - p.vff) > 1e-4 * p.vff)
    throw ConstraintViolation(who + " does not match the gradient speed");
  if (std::fabs(dot(w, f.g)) > 1e-4 * p.vff)
    throw ConstraintViolation(who + " is not orthogonal to the gradient");
  double hmag = std::sqrt(ddot(f.h, f.h)) + 1.0;
  if (std::fabs(quad(f.h, w, w) + p.hff) > 1e-3 * p.vff * hmag)
    throw ConstraintViolation(who + " violates the Hessian trade-off");
}

// Even obstruction: t(f,f,f) + t(f,w,w) + 2|Hf|^2 - 2|Hw|^2.
inline double p_contraction(const Jet3& f, const V3& w) {
  V3 Hf = mul(f.h, f.g), Hw = mul(f.h, w);
  return con3(f.t, f.g, f.g, f.g) + con3(f.t, f.g, w, w) +
         2.0 * dot(Hf, Hf) - 2.0 * dot(Hw, Hw);
}

inline double p_scale(const Jet3& f, const V3& w) {
  V3 Hf = mul(f.h, f.g), Hw = mul(f.h, w);
  return con3_abs(f.t, f.g, f.g, f.g) + con3_abs(f.t, f.g, w, w) +
         2.0 * dot(Hf, Hf) + 2.0 * dot(Hw, Hw) + k_eps_den;
}

// Odd obstruction: t(f,f,w) + t(w,w,w) + 4 Hf.Hw.
inline double q_contraction(const Jet3& f, const V3& w) {
  V3 Hf = mul(f.h, f.g), Hw = mul(f.h, w);
  return con3(f.t, f.g, f.g, w) + con3(f.t, w, w, w) + 4.0 * dot(Hf, Hw);
}

inline double q_scale(const Jet3& f, const V3& w) {
  V3 Hf = mul(f.h, f.g), Hw = mul(f.h, w);
  double cross = 0.0;
  for (int i = 0; i < 3; ++i) cross += std::fabs(Hf[i] * Hw[i]);
  return con3_abs(f.t, f.g, f.g, w) + con3_abs(f.t, w, w, w) + 4.0 * cross +
         k_eps_den;
}

// Odd epsilon-contraction for an arbitrary symmetric form, sharing the
// conventions of the jet-specific scalar in the invariant catalogue.
// Returns the value and its absolute-value magnitude twin.
inline std::pair<double, double> upsilon_general(const Jet3& f, const S2& Q) {
  FlatPieces p = flat_pieces(f);
  M3 A, Aa;
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) {
      double hq = 0, hqa = 0, fq = 0, fqa = 0;
      for (int a = 0; a < 3; ++a) {
        hq += f.h(k, a) * Q(a, j);
        hqa += std::fabs(f.h(k, a) * Q(a, j));
        fq += f.g[a] * Q(a, j);
        fqa += std::fabs(f.g[a] * Q(a, j));
      }
      A(j, k) = p.vff * hq - fq * p.Hf[k];
      Aa(j, k) = p.vff * hqa + fqa * std::fabs(p.Hf[k]);
    }
  V3 w{}, wa{};
  w[0] = A(1, 2) - A(2, 1);
  w[1] = A(2, 0) - A(0, 2);
  w[2] = A(0, 1) - A(1, 0);
  wa[0] = Aa(1, 2) + Aa(2, 1);
  wa[1] = Aa(2, 0) + Aa(0, 2);
  wa[2] = Aa(0, 1) + Aa(1, 0);
  double ua = 0;
  for (int l = 0; l < 3; ++l) ua += wa[l] * std::fabs(f.g[l]);
  return {dot(w, f.g), ua};
}

}  // namespace detail

// --- Branch residuals -------------------------------------------------------

struct PqValues {
  double p_plus = 0, p_minus = 0, q_plus = 0, q_minus = 0;
  double p_plus_rel = 0, p_minus_rel = 0, q_plus_rel = 0, q_minus_rel = 0;
};

inline PqValues pq_residuals(const Jet3& f, const V3& omega, const V3& eta) {
  detail::require_direction(f, omega, "omega");
  detail::require_direction(f, eta, "eta");
  PqValues r;
  r.p_plus = detail::p_contraction(f, omega);
  r.p_minus = detail::p_contraction(f, eta);
  r.q_plus = detail::q_contraction(f, omega);
  r.q_minus = detail::q_contraction(f, eta);
  r.p_plus_rel = std::fabs(r.p_plus) / detail::p_scale(f, omega);
  r.p_minus_rel = std::fabs(r.p_minus) / detail::p_scale(f, eta);
  r.q_plus_rel = std::fabs(r.q_plus) / detail::q_scale(f, omega);
  r.q_minus_rel = std::fabs(r.q_minus) / detail::q_scale(f, eta);
  return r;
}

// Left-hand sides of the two symmetry conditions for a chosen direction;
// identical contractions to the plus-branch entries of pq_residuals.
inline std::pair<double, double> symmetry_residuals(const Jet3& f,
                                                         const V3& omega) {
  detail::require_direction(f, omega, "omega");
  return {detail::p_contraction(f, omega), detail::q_contraction(f, omega)};
}

// --- Reports ----------------------------------------------------------------

struct IntegrabilityReport {
  BranchKind branch = BranchKind::Generic;
  Verdict verdict = Verdict::Inconclusive;
  std::optional<Branch> admitted_branch;
  std::optional<V3> chosen_omega;
  PqValues pq;
  double P_direct = 0, P_invariant = 0, P_scale = 0;
  double Q_direct = 0, Q_invariant = 0, Q_scale = 0;
  double v_residual = 0;
  double fifth_residual = 0;
  // Raw epsilon-contraction cross-checks on the unique-direction stratum.
  double fourth_det = 0, fourth_det_rel = 0;
  double fifth_det = 0, fifth_det_rel = 0;
  double fifth_div = 0, fifth_div_rel = 0;
  double tol = k_tol_verdict;
};

namespace detail {

inline Verdict graded(double best_rel, double tol) {
  if (best_rel < tol) return Verdict::Admits;
  if (best_rel < k_gray_factor * tol) return Verdict::Inconclusive;
  return Verdict::Rejects;
}

}  // namespace detail

// Generic stratum: both sign pairs of directions exist; a conjugate exists
// iff all residuals vanish on at least one of them.
inline IntegrabilityReport generic_verdict(const Jet3& f) {
  DirectionSolution sol = solve_directions(f);
  if (sol.cls != DirClass::FourDistinct)
    throw WrongBranch(std::string("generic verdict needs four directions, "
                                  "class is ") +
                      to_string(sol.cls));
  IntegrabilityReport rep;
  rep.branch = BranchKind::Generic;
  V3 omega = sol.omegas[0];
  V3 eta = eta_from_omega(f, omega);
  rep.pq = pq_residuals(f, omega, eta);

  Metric m;
  TensorSet ts = tensor_set(f, m);
  InvariantSet iv = invariants_from(ts, f, m);
  double Y = iv.Y, X = iv.X, Z = iv.Z, J = iv.J;
  double sY = std::sqrt(Y);

  rep.P_direct = 8.0 * Y * Y * rep.pq.p_plus * rep.pq.p_minus;
  double pe_comb = Z * iv.S - 2.0 * X * iv.R + 2.0 * X * Y;
  rep.P_invariant = 2.0 * pe_comb * pe_comb + X * iv.V * iv.V;
  double pe_comb_abs =
      std::fabs(Z * iv.S) + 2.0 * std::fabs(X * iv.R) + 2.0 * std::fabs(X * Y);
  rep.P_scale = 8.0 * Y * Y * detail::p_scale(f, omega) *
                    detail::p_scale(f, eta) +
                2.0 * pe_comb_abs * pe_comb_abs +
                std::fabs(X) * ts.V_scale * ts.V_scale + k_eps_den;

  rep.Q_direct = Y * sY * rep.pq.q_plus * rep.pq.q_minus;
  rep.Q_invariant =
      (1.0 / 6.0) * J * Z * iv.B - 0.25 * J * iv.U - 0.25 * Z * iv.S * iv.S +
      X * (X * Z * Z * Z - J * X * X * Z + 6.0 * iv.W + 0.25 * J * iv.M -
           (2.0 / 7.0) * Z * X * iv.R + (5.0 / 7.0) * iv.R * iv.S -
           (15.0 / 7.0) * iv.N + (2.0 / 9.0) * Z * iv.A - 0.9 * iv.F -
           (2.0 / 21.0) * Z * iv.K + (10.0 / 21.0) * iv.T +
           (6.0 / 25.0) * iv.G - (17.0 / 42.0) * J * iv.D);
  rep.Q_scale =
      Y * sY * detail::q_scale(f, omega) * detail::q_scale(f, eta) +
      std::fabs((1.0 / 6.0) * J * Z * iv.B) + std::fabs(0.25 * J * iv.U) +
      std::fabs(0.25 * Z * iv.S * iv.S) +
      std::fabs(X) *
          (std::fabs(X * Z * Z * Z) + std::fabs(J * X * X * Z) +
           6.0 * std::fabs(iv.W) + std::fabs(0.25 * J * iv.M) +
           std::fabs((2.0 / 7.0) * Z * X * iv.R) +
           std::fabs((5.0 / 7.0) * iv.R * iv.S) +
           std::fabs((15.0 / 7.0) * iv.N) + std::fabs((2.0 / 9.0) * Z * iv.A) +
           std::fabs(0.9 * iv.F) + std::fabs((2.0 / 21.0) * Z * iv.K) +
           std::fabs((10.0 / 21.0) * iv.T) + std::fabs((6.0 / 25.0) * iv.G) +
           std::fabs((17.0 / 42.0) * J * iv.D)) +
      k_eps_den;

  double plus_rel = std::max(rep.pq.p_plus_rel, rep.pq.q_plus_rel);
  double minus_rel = std::max(rep.pq.p_minus_rel, rep.pq.q_minus_rel);
  bool plus_ok = plus_rel < rep.tol;
  bool minus_ok = minus_rel < rep.tol;
  if (plus_ok && minus_ok) {
    rep.verdict = Verdict::Admits;
    rep.chosen_omega = omega;
  } else if (plus_ok || minus_ok) {
    rep.verdict = Verdict::AdmitsOnBranch;
    rep.admitted_branch = plus_ok ? Branch::Plus : Branch::Minus;
    rep.chosen_omega = plus_ok ? omega : eta;
  } else {
    rep.verdict = detail::graded(std::min(plus_rel, minus_rel), rep.tol);
    if (rep.verdict == Verdict::Admits) rep.verdict = Verdict::Inconclusive;
  }
  return rep;
}

// Unique-direction stratum: the odd invariant and one fifth-order invariant
// combination decide; the raw epsilon-contractions with the direction are
// recorded as cross-checks.
inline IntegrabilityReport x0_verdict(const Jet3& f) {
  DirectionSolution sol = solve_directions(f);
  if (sol.cls != DirClass::TwoDistinct)
    throw WrongBranch(std::string("unique-direction verdict needs the zero "
                                  "classifier stratum, class is ") +
                      to_string(sol.cls));
  IntegrabilityReport rep;
  rep.branch = BranchKind::UniqueDirection;
  V3 omega = sol.omegas[0];
  rep.chosen_omega = omega;

  Metric m;
  TensorSet ts = tensor_set(f, m);
  InvariantSet iv = invariants_from(ts, f, m);
  rep.v_residual = std::fabs(ts.V) / ts.V_scale;

  double fifth = (25.0 / 14.0) * iv.N + 0.6 * iv.G + 0.75 * iv.F +
                 (1.0 / 21.0) * iv.T - (17.0 / 21.0) * iv.Z * iv.K -
                 (7.0 / 9.0) * iv.Z * iv.A;
  double fifth_scale = std::fabs((25.0 / 14.0) * iv.N) +
                       std::fabs(0.6 * iv.G) + std::fabs(0.75 * iv.F) +
                       std::fabs((1.0 / 21.0) * iv.T) +
                       std::fabs((17.0 / 21.0) * iv.Z * iv.K) +
                       std::fabs((7.0 / 9.0) * iv.Z * iv.A) + k_eps_den;
  rep.fifth_residual = std::fabs(fifth) / fifth_scale;

  detail::FlatPieces p = detail::flat_pieces(f);
  // Magnitude floor for the epsilon cross-checks: contractions whose terms
  // vanish structurally would otherwise divide rounding noise by itself.
  double gn = std::sqrt(p.vff);
  double hm = std::sqrt(ddot(f.h, f.h));
  double tm = 0;
  for (double tv : f.t.v) tm += std::fabs(tv);
  double floor45 =
      1e-8 * p.vff * p.vff * (p.vff * tm + 5.0 * hm * hm * gn) + k_eps_den;
  // First contraction: J t(k;f,w) - 2 Hf_k (Hf.w), inside det(f, w, .).
  V3 c4 = p.vff * con2(f.t, f.g, omega) - (2.0 * dot(p.Hf, omega)) * p.Hf;
  V3 c4a = p.vff * con2_abs(f.t, f.g, omega);
  for (int i = 0; i < 3; ++i)
    c4a[i] += 2.0 * std::fabs(dot(p.Hf, omega) * p.Hf[i]);
  rep.fourth_det = det_rows(f.g, omega, c4);
  rep.fourth_det_rel =
      std::fabs(rep.fourth_det) / (det_rows_abs(f.g, omega, c4a) + floor45);
  // Second contraction: J t(k;w,w) + Hf_k (hff + Z), same determinant.
  double zf = p.hff + p.vff * p.trh;
  V3 c5 = p.vff * con2(f.t, omega, omega) + (p.hff + zf) * p.Hf;
  V3 c5a = p.vff * con2_abs(f.t, omega, omega);
  for (int i = 0; i < 3; ++i)
    c5a[i] += (std::fabs(p.hff) + std::fabs(zf)) * std::fabs(p.Hf[i]);
  rep.fifth_det = det_rows(f.g, omega, c5);
  rep.fifth_det_rel =
      std::fabs(rep.fifth_det) / (det_rows_abs(f.g, omega, c5a) + floor45);
  // Divergence-style reformulation of the second contraction.
  V3 c5b, c5ba;
  for (int i = 0; i < 3; ++i) {
    c5b[i] = -ts.sigma[i] + p.vff * p.vff * p.tt[i] -
             p.vff * p.trh * p.Hf[i];
    c5ba[i] = std::fabs(ts.sigma[i]) + p.vff * p.vff * std::fabs(p.tt[i]) +
              std::fabs(p.vff * p.trh * p.Hf[i]);
  }
  rep.fifth_div = det_rows(f.g, omega, c5b);
  rep.fifth_div_rel =
      std::fabs(rep.fifth_div) / (det_rows_abs(f.g, omega, c5ba) + floor45);

  double worst = std::max(rep.v_residual, rep.fifth_residual);
  rep.verdict = detail::graded(worst, rep.tol);
  return rep;
}

// Classify first, then route to the stratum-appropriate decision.
inline IntegrabilityReport integrability_report(const Jet3& f) {
  DirClass cls = classify_directions(f);
  switch (cls) {
    case DirClass::FourDistinct: return generic_verdict(f);
    case DirClass::TwoDistinct: return x0_verdict(f);
    case DirClass::InfinitelyMany: {
      IntegrabilityReport rep;
      rep.branch = BranchKind::Infinite;
      rep.verdict = Verdict::Inconclusive;
      return rep;
    }
    case DirClass::NoneReal: {
      IntegrabilityReport rep;
      rep.branch = BranchKind::NoConjugate;
      rep.verdict = Verdict::Rejects;
      return rep;
    }
    case DirClass::CriticalPoint: {
      IntegrabilityReport rep;
      rep.branch = BranchKind::Critical;
      rep.verdict = Verdict::Inconclusive;
      return rep;
    }
  }
  throw Error("unreachable direction class");
}

// --- Identity battery -------------------------------------------------------

struct IdentityResiduals {
  double a_one = 0, a_two = 0, a_three = 0, p_even = 0, p_odd = 0;
  std::array<double, 5> all() const {
    return {a_one, a_two, a_three, p_even, p_odd};
  }
};

// Scale-normalized residuals of the elimination identities for an arbitrary
// symmetric form.  eta must be the positive-root partner of omega.
inline IdentityResiduals elimination_identities(const Jet3& f, const V3& omega,
                                              const V3& eta, const S2& Q) {
  detail::require_direction(f, omega, "omega");
  detail::require_direction(f, eta, "eta");
  CoreInvariants core = core_invariants(f);
  if (core.Y <= 0.0)
    throw DegenerateY("identity battery needs a positive discriminant");
  double J = core.J, Z = core.Z, X = core.X, Y = core.Y;
  double sY = std::sqrt(Y);

  detail::FlatPieces p = detail::flat_pieces(f);
  double Qww = quad(Q, omega, omega), Qee = quad(Q, eta, eta);
  double Qwe = quad(Q, omega, eta), Qff = quad(Q, f.g, f.g);
  double QfHf = quad(Q, f.g, p.Hf);
  double trQ = trace(Q), Qh = ddot(Q, f.h);

  IdentityResiduals r;
  {
    double lhs = Y * (Qww + Qee);
    double rhs = 2.0 * Qff * (J * X - Z * Z) +
                 2.0 * J * J * trQ * (Z * p.trh - X) - 2.0 * J * J * Z * Qh +
                 4.0 * J * Z * QfHf;
    double scale = Y * (std::fabs(Qww) + std::fabs(Qee)) +
                   2.0 * std::fabs(Qff) * std::fabs(J * X - Z * Z) +
                   2.0 * J * J * std::fabs(trQ) *
                       (std::fabs(Z * p.trh) + std::fabs(X)) +
                   2.0 * J * J * std::fabs(Z * Qh) +
                   4.0 * std::fabs(J * Z * QfHf) + k_eps_den;
    r.a_one = std::fabs(lhs - rhs) / scale;
  }
  {
    double lhs = sY * Qwe;
    double rhs = -Z * Qff + 2.0 * J * QfHf + J * J * (p.trh * trQ - Qh);
    double scale = sY * std::fabs(Qwe) + std::fabs(Z * Qff) +
                   2.0 * std::fabs(J * QfHf) +
                   J * J * (std::fabs(p.trh * trQ) + std::fabs(Qh)) +
                   k_eps_den;
    r.a_two = std::fabs(lhs - rhs) / scale;
  }
  {
    double E = E_invariant(f, omega);
    auto [ups, ups_abs] = detail::upsilon_general(f, Q);
    double lhs = Y * (Qww - Qee);
    double rhs = 4.0 * E * ups;
    double scale = Y * (std::fabs(Qww) + std::fabs(Qee)) +
                   4.0 * std::fabs(E) * ups_abs + k_eps_den;
    r.a_three = std::fabs(lhs - rhs) / scale;
  }
  InvariantSet iv = invariants(f);
  double pp = detail::p_contraction(f, omega);
  double pm = detail::p_contraction(f, eta);
  double psc = detail::p_scale(f, omega) + detail::p_scale(f, eta);
  {
    double lhs = Y * (pp + pm);
    double rhs = Z * iv.S - 2.0 * X * iv.R + 2.0 * X * Y;
    double scale = Y * psc + std::fabs(Z * iv.S) + 2.0 * std::fabs(X * iv.R) +
                   2.0 * std::fabs(X * Y) + k_eps_den;
    r.p_even = std::fabs(lhs - rhs) / scale;
  }
  {
    double E = E_invariant(f, omega);
    double lhs = Y * (pp - pm);
    double rhs = E * iv.V / J;
    double scale = Y * psc + std::fabs(E * iv.V / J) + k_eps_den;
    r.p_odd = std::fabs(lhs - rhs) / scale;
  }
  return r;
}

}  // namespace conj3
