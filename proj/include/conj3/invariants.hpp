#pragma once

// Conformal differential invariants of a scalar jet on R^3. Everything is
// computed from flat contractions threaded through the scaled metric
// g_ij = s delta_ij; a scalar of conformal weight w then scales as s^{w/2}.
//
// Derived quantities come with magnitude scales built from the same
// contraction on absolute values, so vanishing can be tested relative to
// the size of the terms that cancel.

#include <array>
#include <cmath>
#include <utility>

#include "conj3/jet.hpp"
#include "conj3/tensor.hpp"

namespace conj3 {

// Quartic classifier data: J = |grad f|^2, Z and X are the trace-type
// contractions and Y = Z^2 - 2JX is the classifier discriminant.
struct CoreInvariants {
  double J = 0, Z = 0, X = 0, Y = 0;
  double X_scale = 0, Y_scale = 0;
  double X_rel = 0, Y_rel = 0;
};

namespace detail {

// Flat contractions of a jet shared across the catalogue.
struct FlatPieces {
  double vff = 0, hff = 0, trh = 0, hh = 0, HfHf = 0;
  V3 Hf{}, HHf{}, tff{}, tt{}, th{};
};

inline FlatPieces flat_pieces(const Jet3& f) {
  FlatPieces p;
  p.vff = dot(f.g, f.g);
  p.Hf = mul(f.h, f.g);
  p.hff = dot(f.g, p.Hf);
  p.trh = trace(f.h);
  p.hh = ddot(f.h, f.h);
  p.HfHf = dot(p.Hf, p.Hf);
  p.HHf = mul(f.h, p.Hf);
  p.tff = con2(f.t, f.g, f.g);
  for (int i = 0; i < 3; ++i) {
    double s = 0, u = 0;
    for (int j = 0; j < 3; ++j) {
      s += f.t(i, j, j);
      for (int k = 0; k < 3; ++k) u += f.h(j, k) * f.t(i, j, k);
    }
    p.tt[i] = s;
    p.th[i] = u;
  }
  return p;
}

inline double kron(int i, int j) { return i == j ? 1.0 : 0.0; }

// Flat Z = f^{ij}f_if_j + J Delta f together with a fully expanded term-wise
// absolute scale. The compact twin |hff| + |vff trh| vanishes structurally on
// fields whose contractions cancel term by term (azimuthal angle, radial
// symmetry), turning any ratio against it into 0/0 noise.
inline std::pair<double, double> z_expanded(const Jet3& f) {
  FlatPieces p = flat_pieces(f);
  double zs = 0.0;
  for (int i = 0; i < 3; ++i) {
    zs += p.vff * std::fabs(f.h(i, i));
    for (int j = 0; j < 3; ++j) zs += std::fabs(f.g[i] * f.h(i, j) * f.g[j]);
  }
  return {p.hff + p.vff * p.trh, zs + k_eps_den};
}

}  // namespace detail

inline CoreInvariants core_invariants(const Jet3& f, const Metric& m = {}) {
  detail::FlatPieces p = detail::flat_pieces(f);
  double gi = m.inv();
  CoreInvariants c;
  c.J = gi * p.vff;
  c.Z = gi * gi * (p.hff + p.vff * p.trh);
  double xf = 2.0 * p.HfHf - p.vff * p.hh + p.vff * p.trh * p.trh;
  double xs = 2.0 * p.HfHf + p.vff * p.hh + p.vff * p.trh * p.trh;
  c.X = gi * gi * gi * xf;
  c.X_scale = gi * gi * gi * xs + k_eps_den;
  c.Y = c.Z * c.Z - 2.0 * c.J * c.X;
  c.Y_scale = c.Z * c.Z + std::fabs(2.0 * c.J * c.X) + k_eps_den;
  c.X_rel = c.X / c.X_scale;
  c.Y_rel = c.Y / c.Y_scale;
  return c;
}

// --- Invariant pairings -----------------------------------------------------
//
// For scalars phi, psi of conformal weights v, w the combination
// w psi grad(phi) - v phi grad(psi) is again conformally covariant; the
// divergence and symmetrized-derivative analogues below extend this to a
// trace-free symmetric phi_ij. All arguments are metric-threaded.

inline V3 pair_gradient(double phi, const V3& dphi, double v, double psi,
                        const V3& dpsi, double w) {
  V3 r;
  for (int i = 0; i < 3; ++i) r[i] = w * psi * dphi[i] - v * phi * dpsi[i];
  return r;
}

// v psi div(phi)_j - (w+1) phi_j^i grad(psi)_i with dphi(k; i, j) the
// covariant derivative of phi_ij.
inline V3 pair_divergence(const S2& phi, const std::array<S2, 3>& dphi,
                          double v, double psi, const V3& dpsi, double w,
                          const Metric& m) {
  double gi = m.inv();
  V3 r;
  for (int j = 0; j < 3; ++j) {
    double dv = 0, pd = 0;
    for (int i = 0; i < 3; ++i) {
      dv += dphi[static_cast<std::size_t>(i)](i, j);
      pd += phi(i, j) * dpsi[i];
    }
    r[j] = v * psi * gi * dv - (w + 1.0) * gi * pd;
  }
  return r;
}

// v psi [sym grad(phi) - (2/5) g sym div(phi)]
//   - (w-4) [sym(phi grad psi) - (2/5) g sym(phi . grad psi)].
inline S3 pair_symmetrized(const S2& phi, const std::array<S2, 3>& dphi,
                           double v, double psi, const V3& dpsi, double w,
                           const Metric& m) {
  double gi = m.inv();
  V3 divp, pd;
  for (int k = 0; k < 3; ++k) {
    double dv = 0, q = 0;
    for (int l = 0; l < 3; ++l) {
      dv += dphi[static_cast<std::size_t>(l)](l, k);
      q += phi(k, l) * dpsi[l];
    }
    divp[k] = gi * dv;
    pd[k] = gi * q;
  }
  S3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      for (int k = j; k < 3; ++k) {
        using detail::kron;
        double sd = (dphi[static_cast<std::size_t>(i)](j, k) +
                     dphi[static_cast<std::size_t>(j)](k, i) +
                     dphi[static_cast<std::size_t>(k)](i, j)) /
                    3.0;
        double sgd = m.s *
                     (kron(i, j) * divp[k] + kron(j, k) * divp[i] +
                      kron(k, i) * divp[j]) /
                     3.0;
        double sp = (phi(i, j) * dpsi[k] + phi(j, k) * dpsi[i] +
                     phi(k, i) * dpsi[j]) /
                    3.0;
        double sgp = m.s *
                     (kron(i, j) * pd[k] + kron(j, k) * pd[i] +
                      kron(k, i) * pd[j]) /
                     3.0;
        r.at(i, j, k) = v * psi * (sd - 0.4 * sgd) -
                        (w - 4.0) * (sp - 0.4 * sgp);
      }
  return r;
}

// --- Tensor catalogue -------------------------------------------------------

struct TensorSet {
  CoreInvariants core;
  V3 gradJ{}, gradZ{}, gradX{};
  V3 sigma{}, tau{}, lam{};
  S2 phi{};
  std::array<S2, 3> dphi{};  // covariant derivative, slot order (k; i, j)
  S3 rho{};
  double upsilon = 0, upsilon_abs = 0;
  double V = 0, V_scale = 0;
};

inline TensorSet tensor_set(const Jet3& f, const Metric& m = {}) {
  using detail::kron;
  detail::FlatPieces p = detail::flat_pieces(f);
  double gi = m.inv();
  double gi2 = gi * gi, gi3 = gi2 * gi;
  TensorSet ts;
  ts.core = core_invariants(f, m);
  const double J = ts.core.J, Z = ts.core.Z;

  for (int i = 0; i < 3; ++i) {
    ts.gradJ[i] = gi * 2.0 * p.Hf[i];
    ts.gradZ[i] = gi2 * (p.tff[i] + 2.0 * p.HHf[i] +
                         2.0 * p.Hf[i] * p.trh + p.vff * p.tt[i]);
  }
  V3 tHff = con2(f.t, p.Hf, f.g);
  V3 hHHf = mul(f.h, p.HHf);
  for (int i = 0; i < 3; ++i)
    ts.gradX[i] =
        gi3 * (4.0 * tHff[i] + 4.0 * hHHf[i] - 2.0 * p.Hf[i] * p.hh -
               2.0 * p.vff * p.th[i] + 2.0 * p.Hf[i] * p.trh * p.trh +
               2.0 * p.vff * p.trh * p.tt[i]);

  ts.sigma = -0.5 * pair_gradient(Z, ts.gradZ, -4.0, J, ts.gradJ, -2.0);
  ts.tau =
      -0.5 * pair_gradient(ts.core.X, ts.gradX, -6.0, J, ts.gradJ, -2.0);

  // phi_ij: the trace-free symmetric part of J^2 grad_i(J^{-1} f_j).
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      ts.phi.at(i, j) =
          gi * (p.vff * f.h(i, j) - f.g[i] * p.Hf[j] - f.g[j] * p.Hf[i] +
                kron(i, j) * (-p.vff * p.trh / 3.0 + 2.0 * p.hff / 3.0));

  // dHf(k,i) = grad_k Hf_i and dhff = grad(hff) feed the derivative of phi.
  S2 dHf;
  M3 hh2 = mul(to_m3(f.h), to_m3(f.h));
  for (int k = 0; k < 3; ++k)
    for (int i = k; i < 3; ++i) {
      double s = hh2(k, i);
      for (int a = 0; a < 3; ++a) s += f.t(k, i, a) * f.g[a];
      dHf.at(k, i) = s;
    }
  V3 dhff;
  for (int k = 0; k < 3; ++k) dhff[k] = p.tff[k] + 2.0 * p.HHf[k];
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j)
        ts.dphi[static_cast<std::size_t>(k)].at(i, j) =
            gi * (2.0 * p.Hf[k] * f.h(i, j) + p.vff * f.t(k, i, j) -
                  f.h(k, i) * p.Hf[j] - f.h(k, j) * p.Hf[i] -
                  f.g[i] * dHf(k, j) - f.g[j] * dHf(k, i) +
                  kron(i, j) *
                      (-(2.0 * p.Hf[k] * p.trh + p.vff * p.tt[k]) / 3.0 +
                       2.0 * dhff[k] / 3.0));

  ts.lam = -1.0 * pair_divergence(ts.phi, ts.dphi, -2.0, J, ts.gradJ, -2.0, m);
  ts.rho = -0.5 * pair_symmetrized(ts.phi, ts.dphi, -2.0, J, ts.gradJ, -2.0, m);

  // Odd scalar: epsilon-contraction of A_jk = J f_k^i Q_ij - f^i Q_ij Hf_k
  // with Q^ij = f^ijk f_k - 2 f^ik f_k^j, against the gradient.
  S2 Q0, Q0a;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      double s = -2.0 * hh2(i, j), sa = 2.0 * std::fabs(hh2(i, j));
      for (int k = 0; k < 3; ++k) {
        s += f.t(i, j, k) * f.g[k];
        sa += std::fabs(f.t(i, j, k) * f.g[k]);
      }
      Q0.at(i, j) = s;
      Q0a.at(i, j) = sa;
    }
  M3 A, Aa;
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) {
      double hq = 0, hqa = 0, fq = 0, fqa = 0;
      for (int a = 0; a < 3; ++a) {
        hq += f.h(k, a) * Q0(a, j);
        hqa += std::fabs(f.h(k, a)) * Q0a(a, j);
        fq += f.g[a] * Q0(a, j);
        fqa += std::fabs(f.g[a]) * Q0a(a, j);
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
  double ef = m.eps_up() * gi3;
  ts.upsilon = ef * dot(w, f.g);
  double ua = 0;
  for (int l = 0; l < 3; ++l) ua += wa[l] * std::fabs(f.g[l]);
  ts.upsilon_abs = ef * ua;
  ts.V = 4.0 * J * ts.upsilon;
  ts.V_scale = 4.0 * std::fabs(J) * ts.upsilon_abs + k_eps_den;
  return ts;
}

// --- Scalar catalogue -------------------------------------------------------

struct InvariantSet {
  double J = 0, Z = 0, X = 0, Y = 0;
  double R = 0, S = 0, V = 0;
  double A = 0, B = 0, D = 0, T = 0, U = 0;
  double K = 0, M = 0, G = 0, F = 0, N = 0, W = 0;
};

inline InvariantSet invariants_from(const TensorSet& ts, const Jet3& f,
                                    const Metric& m) {
  double gi = m.inv();
  double gi2 = gi * gi, gi3 = gi2 * gi, gi4 = gi2 * gi2;
  InvariantSet I;
  I.J = ts.core.J;
  I.Z = ts.core.Z;
  I.X = ts.core.X;
  I.Y = ts.core.Y;
  I.R = gi * dot(f.g, ts.sigma);
  I.S = gi * dot(f.g, ts.tau);
  I.V = ts.V;
  I.A = gi * dot(ts.sigma, ts.sigma);
  I.B = gi * dot(ts.tau, ts.tau);
  I.D = gi * dot(ts.sigma, ts.tau);
  I.T = gi2 * quad(ts.phi, ts.sigma, ts.sigma);
  I.U = gi2 * quad(ts.phi, ts.tau, ts.tau);
  I.K = gi * dot(ts.sigma, ts.lam);
  I.M = gi * dot(ts.tau, ts.lam);
  I.G = gi2 * quad(ts.phi, ts.lam, ts.lam);
  double F = 0, N = 0, W = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        F += ts.rho(i, j, k) * ts.phi(i, j) * ts.lam[k];
        N += ts.sigma[i] * ts.rho(i, j, k) * ts.phi(j, k);
        for (int l = 0; l < 3; ++l)
          W += ts.rho(i, j, k) * ts.rho(i, j, l) * ts.phi(k, l);
      }
  I.F = gi3 * F;
  I.N = gi3 * N;
  I.W = gi4 * W;
  return I;
}

inline InvariantSet invariants(const Jet3& f, const Metric& m = {}) {
  return invariants_from(tensor_set(f, m), f, m);
}

// Name, conformal weight, polynomial degree in the jet, parity under
// orientation reversal, and member accessor for each catalogued scalar.
struct InvariantInfo {
  const char* name;
  int weight;
  int degree;
  bool odd;
  double InvariantSet::* member;
};

inline const std::array<InvariantInfo, 18>& invariant_table() {
  static const std::array<InvariantInfo, 18> table = {{
      {"J", -2, 2, false, &InvariantSet::J},
      {"Z", -4, 3, false, &InvariantSet::Z},
      {"X", -6, 4, false, &InvariantSet::X},
      {"Y", -8, 6, false, &InvariantSet::Y},
      {"R", -8, 6, false, &InvariantSet::R},
      {"S", -10, 7, false, &InvariantSet::S},
      {"V", -11, 8, true, &InvariantSet::V},
      {"A", -14, 10, false, &InvariantSet::A},
      {"B", -18, 12, false, &InvariantSet::B},
      {"D", -16, 11, false, &InvariantSet::D},
      {"T", -18, 13, false, &InvariantSet::T},
      {"U", -22, 15, false, &InvariantSet::U},
      {"K", -14, 10, false, &InvariantSet::K},
      {"M", -16, 11, false, &InvariantSet::M},
      {"G", -18, 13, false, &InvariantSet::G},
      {"F", -18, 13, false, &InvariantSet::F},
      {"N", -18, 13, false, &InvariantSet::N},
      {"W", -18, 13, false, &InvariantSet::W},
  }};
  return table;
}

}  // namespace conj3
