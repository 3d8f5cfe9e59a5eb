#pragma once

// Flat-to-flat conformal rescalings of R^3.  A ConformalMap is a chain of
// Moebius primitives (translations, rotations, reflections, dilations,
// sphere inversions); its order-3 jet, conformal factor lambda and
// upsilon = grad(log lambda) are produced by exact jet arithmetic.  On top
// of that sit the jet transformation law for a rescaled connection, the
// numerical weight-test harness for the invariant catalogue, and the six
// bilinear pairings together with their invariance residuals.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "expr.hpp"
#include "invariants.hpp"
#include "jet.hpp"
#include "tensor.hpp"

namespace conj3 {

// Squared distance to an inversion center below which the map is treated
// as evaluated at its pole.
inline constexpr double k_pole_eps = 1e-30;

// Order-3 data of a map at a point: the three component functions as jets
// in the source coordinates, plus the jet of log(lambda).
struct MapJets {
  std::array<Jet3, 3> coord{};
  Jet3 log_lambda{};
};

class ConformalMap {
 public:
  ConformalMap& translate(const V3& v) {
    Prim p;
    p.kind = Prim::Kind::Translate;
    p.a = v;
    prims_.push_back(p);
    return *this;
  }

  // Proper rotation only; use reflect for the orientation-reversing half.
  ConformalMap& rotate(const M3& Q) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += Q(k, i) * Q(k, j);
        if (std::fabs(s - (i == j ? 1.0 : 0.0)) > 1e-10)
          throw ConstraintViolation("rotate: matrix is not orthogonal");
      }
    double det = det_rows(V3{Q(0, 0), Q(0, 1), Q(0, 2)},
                          V3{Q(1, 0), Q(1, 1), Q(1, 2)},
                          V3{Q(2, 0), Q(2, 1), Q(2, 2)});
    if (std::fabs(det - 1.0) > 1e-8)
      throw ConstraintViolation("rotate: determinant is not +1");
    Prim p;
    p.kind = Prim::Kind::Rotate;
    p.Q = Q;
    prims_.push_back(p);
    return *this;
  }

  // Reflection through the plane normal . x = offset.
  ConformalMap& reflect(const V3& normal, double offset = 0.0) {
    double n = std::sqrt(dot(normal, normal));
    if (n == 0.0) throw ConstraintViolation("reflect: zero normal");
    Prim p;
    p.kind = Prim::Kind::Reflect;
    for (int i = 0; i < 3; ++i) p.a[i] = normal[i] / n;
    p.c = offset / n;
    prims_.push_back(p);
    orient_ = -orient_;
    return *this;
  }

  ConformalMap& dilate(double c) {
    if (!(c > 0.0)) throw ConstraintViolation("dilate: factor must be > 0");
    Prim p;
    p.kind = Prim::Kind::Dilate;
    p.c = c;
    prims_.push_back(p);
    return *this;
  }

  // Unit-radius sphere inversion about the given center.
  ConformalMap& invert(const V3& center) {
    Prim p;
    p.kind = Prim::Kind::Invert;
    p.a = center;
    prims_.push_back(p);
    orient_ = -orient_;
    return *this;
  }

  // Composite x -> next(this(x)).
  ConformalMap then(const ConformalMap& next) const {
    ConformalMap r = *this;
    r.prims_.insert(r.prims_.end(), next.prims_.begin(), next.prims_.end());
    r.orient_ *= next.orient_;
    return r;
  }

  MapJets jets_at(const V3& x) const {
    MapJets s;
    for (int i = 0; i < 3; ++i) s.coord[i] = jet_var(i, x);
    s.log_lambda = jet_const(0.0);
    for (const Prim& p : prims_) step(p, s);
    return s;
  }

  V3 apply(const V3& x) const {
    MapJets s = jets_at(x);
    return V3{s.coord[0].v, s.coord[1].v, s.coord[2].v};
  }

  M3 jacobian(const V3& x) const {
    MapJets s = jets_at(x);
    M3 J;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) J(i, j) = s.coord[i].g[j];
    return J;
  }

  double lambda(const V3& x) const { return std::exp(jets_at(x).log_lambda.v); }

  V3 upsilon(const V3& x) const { return jets_at(x).log_lambda.g; }

  double orientation() const { return orient_; }

  std::size_t size() const { return prims_.size(); }

 private:
  struct Prim {
    enum class Kind { Translate, Rotate, Reflect, Dilate, Invert } kind =
        Kind::Translate;
    V3 a{};
    M3 Q{};
    double c = 1.0;
  };

  static void step(const Prim& p, MapJets& s) {
    switch (p.kind) {
      case Prim::Kind::Translate:
        for (int i = 0; i < 3; ++i)
          s.coord[i] = s.coord[i] + jet_const(p.a[i]);
        break;
      case Prim::Kind::Rotate: {
        std::array<Jet3, 3> out;
        for (int i = 0; i < 3; ++i) {
          out[i] = p.Q(i, 0) * s.coord[0];
          out[i] = out[i] + p.Q(i, 1) * s.coord[1];
          out[i] = out[i] + p.Q(i, 2) * s.coord[2];
        }
        s.coord = out;
        break;
      }
      case Prim::Kind::Reflect: {
        Jet3 d = jet_const(-p.c);
        for (int i = 0; i < 3; ++i) d = d + p.a[i] * s.coord[i];
        for (int i = 0; i < 3; ++i)
          s.coord[i] = s.coord[i] - (2.0 * p.a[i]) * d;
        break;
      }
      case Prim::Kind::Dilate:
        for (int i = 0; i < 3; ++i) s.coord[i] = p.c * s.coord[i];
        s.log_lambda = s.log_lambda + jet_const(std::log(p.c));
        break;
      case Prim::Kind::Invert: {
        std::array<Jet3, 3> u;
        for (int i = 0; i < 3; ++i)
          u[i] = s.coord[i] - jet_const(p.a[i]);
        Jet3 rho2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
        if (rho2.v < k_pole_eps)
          throw PoleError("inversion evaluated at its center");
        Jet3 inv = jet_recip(rho2);
        for (int i = 0; i < 3; ++i)
          s.coord[i] = jet_const(p.a[i]) + u[i] * inv;
        s.log_lambda = s.log_lambda - jet_log(rho2);
        break;
      }
    }
  }

  std::vector<Prim> prims_;
  double orient_ = 1.0;
};

// Jet of f(m(x)) at x.  Exact: every expression node is evaluated in jet
// arithmetic on the map's coordinate jets.
inline Jet3 pullback_jet(const ConformalMap& m, const Expr& e, const V3& point) {
  MapJets s = m.jets_at(point);
  return eval_jet(e, s.coord);
}

inline Jet3 pullback_jet(const ConformalMap& m, const ExprPtr& e,
                         const V3& point) {
  return pullback_jet(m, *e, point);
}

// Pull a target jet (taken at m(point)) back to point along m.
inline Jet3 pullback_jet(const ConformalMap& m, const Jet3& target,
                         const V3& point) {
  MapJets s = m.jets_at(point);
  std::array<Jet3, 3> d = s.coord;
  for (int i = 0; i < 3; ++i) d[i].v = 0.0;
  return taylor_eval(target, d[0], d[1], d[2]);
}

// Covariant derivatives of f for the rescaled connection, from the flat jet
// and upsilon = grad(log Omega).  Value and gradient are unchanged; the
// second and third orders follow the displayed transformation law with the
// flat background metric.
inline Jet3 jetchange_transform(const Jet3& j, const V3& up) {
  using detail::kron;
  double uf = dot(up, j.g);
  double u2 = dot(up, up);
  V3 hu = mul(j.h, up);
  Jet3 r = j;
  for (int i = 0; i < 3; ++i)
    for (int k = i; k < 3; ++k)
      r.h.at(i, k) = j.h(i, k) - up[i] * j.g[k] - up[k] * j.g[i] +
                     kron(i, k) * uf;
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b)
      for (int c = b; c < 3; ++c) {
        double t = j.t(a, b, c);
        t -= 2.0 * (up[a] * j.h(b, c) + up[b] * j.h(a, c) + up[c] * j.h(a, b));
        t += kron(a, b) * hu[c] + kron(b, c) * hu[a] + kron(a, c) * hu[b];
        t += 2.0 * (up[a] * up[b] * j.g[c] + up[b] * up[c] * j.g[a] +
                    up[a] * up[c] * j.g[b]);
        t -= uf * (kron(a, b) * up[c] + kron(b, c) * up[a] +
                   kron(a, c) * up[b]);
        t -= 0.5 * u2 *
             (kron(a, b) * j.g[c] + kron(b, c) * j.g[a] + kron(a, c) * j.g[b]);
        r.t.at(a, b, c) = t;
      }
  return r;
}

// Catalogue evaluated through the rescaled route: hatted jet, hatted metric
// lambda^2 delta.  For an invariant of weight w this equals lambda^w times
// the flat evaluation of the same jet.
inline InvariantSet hatted_invariants(const Jet3& flat_jet, const V3& up,
                                      double lambda) {
  return invariants(jetchange_transform(flat_jet, up),
                    Metric{lambda * lambda});
}

inline const InvariantInfo& invariant_info(const std::string& name) {
  for (const InvariantInfo& row : invariant_table())
    if (name == row.name) return row;
  throw Error("unknown invariant: " + name);
}

// Residual of I(f o m)(x) = s * lambda^{-w} * I(f)(m(x)), s the orientation
// sign for odd invariants and +1 otherwise.
struct WeightCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double rel = 0.0;
};

inline WeightCheck weight_test(const ExprPtr& e, const ConformalMap& m,
                               const V3& point, const std::string& invariant) {
  const InvariantInfo& info = invariant_info(invariant);
  InvariantSet pulled = invariants(pullback_jet(m, e, point));
  InvariantSet image = invariants(eval_jet(e, m.apply(point)));
  double lam = m.lambda(point);
  double s = info.odd ? m.orientation() : 1.0;
  WeightCheck wc;
  wc.lhs = pulled.*(info.member);
  wc.rhs = s * std::pow(lam, -static_cast<double>(info.weight)) *
           (image.*(info.member));
  wc.residual = std::fabs(wc.lhs - wc.rhs);
  wc.rel = wc.residual / (std::fabs(wc.lhs) + std::fabs(wc.rhs) + k_eps_den);
  return wc;
}

// ---------------------------------------------------------------------------
// Bilinear pairings.  Constituents carry their declared conformal weight;
// a rescaling by Omega with upsilon = grad(log Omega) acts on them through
// hat() below, and each pairing maps weight (v, w) inputs to the output
// weight stated next to it.

struct WScalar {
  double value = 0.0;
  V3 grad{};
  double weight = 0.0;
};

struct WOneForm {
  V3 value{};
  M3 grad{};  // grad(i, j) = partial_i of component j
  double weight = 0.0;
};

struct WSymForm {
  S2 value{};  // symmetric trace-free
  std::array<S2, 3> grad{};  // grad[k] = partial_k of the components
  double weight = 0.0;
};

inline WScalar hat(const WScalar& a, double omega, const V3& up) {
  double p = std::pow(omega, a.weight);
  WScalar r;
  r.weight = a.weight;
  r.value = p * a.value;
  for (int i = 0; i < 3; ++i)
    r.grad[i] = p * (a.grad[i] + a.weight * up[i] * a.value);
  return r;
}

inline WOneForm hat(const WOneForm& a, double omega, const V3& up) {
  using detail::kron;
  double p = std::pow(omega, a.weight);
  double uv = dot(up, a.value);
  WOneForm r;
  r.weight = a.weight;
  for (int i = 0; i < 3; ++i) r.value[i] = p * a.value[i];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.grad(i, j) = p * (a.grad(i, j) + (a.weight - 1.0) * up[i] * a.value[j] -
                          up[j] * a.value[i] + kron(i, j) * uv);
  return r;
}

inline WSymForm hat(const WSymForm& a, double omega, const V3& up) {
  using detail::kron;
  double p = std::pow(omega, a.weight);
  V3 pu = mul(a.value, up);
  WSymForm r;
  r.weight = a.weight;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) r.value.at(i, j) = p * a.value(i, j);
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j)
        r.grad[static_cast<std::size_t>(k)].at(i, j) =
            p * (a.grad[static_cast<std::size_t>(k)](i, j) +
                 (a.weight - 2.0) * up[k] * a.value(i, j) -
                 up[i] * a.value(k, j) - up[j] * a.value(k, i) +
                 kron(k, i) * pu[j] + kron(k, j) * pu[i]);
  return r;
}

// Pairing: scalar x scalar -> 1-form of weight v + w,
//   v psi grad(phi) - w phi grad(psi).
inline V3 pairing_first1(const WScalar& psi, const WScalar& phi) {
  return pair_gradient(phi.value, phi.grad, phi.weight, psi.value, psi.grad,
                       psi.weight);
}

// Pairing: 1-form x scalar -> scalar of weight v + w - 2,
//   (v+1) psi^i grad_i(phi) - w phi div(psi).
inline double pairing_first2(const WOneForm& psi, const WScalar& phi,
                             const Metric& m = {}) {
  double gi = m.inv();
  double adv = 0.0, div = 0.0;
  for (int i = 0; i < 3; ++i) {
    adv += psi.value[i] * phi.grad[i];
    div += psi.grad(i, i);
  }
  return (psi.weight + 1.0) * gi * adv - phi.weight * phi.value * gi * div;
}

// Pairing: 1-form x scalar -> skew form of weight v + w,
//   v psi_[i grad_j] phi + w phi grad_[i psi_j].
inline M3 pairing_first3(const WOneForm& psi, const WScalar& phi) {
  M3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r(i, j) = 0.5 * (psi.weight * (psi.value[i] * phi.grad[j] -
                                     psi.value[j] * phi.grad[i]) +
                       phi.weight * phi.value *
                           (psi.grad(i, j) - psi.grad(j, i)));
  return r;
}

// Pairing: 1-form x scalar -> trace-free S2 of weight v + w,
//   (v-2)[psi_(i grad_j) phi - (1/3) g_ij psi^k grad_k phi]
//   - w phi [grad_(i psi_j) - (1/3) g_ij div(psi)].
inline S2 pairing_first4(const WOneForm& psi, const WScalar& phi,
                         const Metric& m = {}) {
  using detail::kron;
  double gi = m.inv();
  double adv = 0.0, div = 0.0;
  for (int k = 0; k < 3; ++k) {
    adv += gi * psi.value[k] * phi.grad[k];
    div += gi * psi.grad(k, k);
  }
  S2 r;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      double s1 = 0.5 * (psi.value[i] * phi.grad[j] +
                         psi.value[j] * phi.grad[i]);
      double s2 = 0.5 * (psi.grad(i, j) + psi.grad(j, i));
      r.at(i, j) = (psi.weight - 2.0) *
                       (s1 - m.s * kron(i, j) * adv / 3.0) -
                   phi.weight * phi.value *
                       (s2 - m.s * kron(i, j) * div / 3.0);
    }
  return r;
}

// Pairing: scalar x trace-free S2 -> 1-form of weight
// v + w - 2,  v psi div(phi)_j - (w+1) phi_ij grad^i(psi).
inline V3 pairing_second1(const WScalar& psi, const WSymForm& phi,
                          const Metric& m = {}) {
  return pair_divergence(phi.value, phi.grad, psi.weight, psi.value, psi.grad,
                         phi.weight, m);
}

// Pairing: scalar x trace-free S2 -> trace-free S3 of
// weight v + w, the symmetrized pairing used for rho.
inline S3 pairing_second2(const WScalar& psi, const WSymForm& phi,
                          const Metric& m = {}) {
  return pair_symmetrized(phi.value, phi.grad, psi.weight, psi.value,
                          psi.grad, phi.weight, m);
}

enum class PairingKind {
  ScalarGradient,
  FormDivergence,
  FormSkew,
  FormSymmetric,
  SymFormDivergence,
  SymFormSymmetrized,
};

namespace detail {

inline double rel_gap(const double* a, const double* b, std::size_t n) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num = std::max(num, std::fabs(a[i] - b[i]));
    den = std::max(den, std::max(std::fabs(a[i]), std::fabs(b[i])));
  }
  return num / (den + k_eps_den);
}

}  // namespace detail

// Invariance residual of a pairing under the rescaling (omega, upsilon):
// the pairing of the hatted inputs with metric omega^2 delta is compared
// against omega^(output weight) times the flat pairing.

inline double pairing_test(PairingKind kind, const WScalar& psi,
                           const WScalar& phi, double omega, const V3& up) {
  if (kind != PairingKind::ScalarGradient)
    throw Error("pairing_test: scalar x scalar admits only the gradient kind");
  V3 flat = pairing_first1(psi, phi);
  V3 hatted = pairing_first1(hat(psi, omega, up), hat(phi, omega, up));
  double scale = std::pow(omega, psi.weight + phi.weight);
  for (int i = 0; i < 3; ++i) flat[i] *= scale;
  return detail::rel_gap(hatted.c.data(), flat.c.data(), 3);
}

inline double pairing_test(PairingKind kind, const WOneForm& psi,
                           const WScalar& phi, double omega, const V3& up) {
  WOneForm hp = hat(psi, omega, up);
  WScalar hf = hat(phi, omega, up);
  Metric hm{omega * omega};
  switch (kind) {
    case PairingKind::FormDivergence: {
      double flat = pairing_first2(psi, phi);
      double hatted = pairing_first2(hp, hf, hm);
      flat *= std::pow(omega, psi.weight + phi.weight - 2.0);
      return detail::rel_gap(&hatted, &flat, 1);
    }
    case PairingKind::FormSkew: {
      M3 flat = pairing_first3(psi, phi);
      M3 hatted = pairing_first3(hp, hf);
      double scale = std::pow(omega, psi.weight + phi.weight);
      for (double& x : flat.a) x *= scale;
      return detail::rel_gap(hatted.a.data(), flat.a.data(), 9);
    }
    case PairingKind::FormSymmetric: {
      S2 flat = pairing_first4(psi, phi);
      S2 hatted = pairing_first4(hp, hf, hm);
      double scale = std::pow(omega, psi.weight + phi.weight);
      for (double& x : flat.v) x *= scale;
      return detail::rel_gap(hatted.v.data(), flat.v.data(), 6);
    }
    default:
      throw Error("pairing_test: 1-form x scalar admits the form-input kinds");
  }
}

inline double pairing_test(PairingKind kind, const WScalar& psi,
                           const WSymForm& phi, double omega, const V3& up) {
  WScalar hp = hat(psi, omega, up);
  WSymForm hf = hat(phi, omega, up);
  Metric hm{omega * omega};
  switch (kind) {
    case PairingKind::SymFormDivergence: {
      V3 flat = pairing_second1(psi, phi);
      V3 hatted = pairing_second1(hp, hf, hm);
      double scale = std::pow(omega, psi.weight + phi.weight - 2.0);
      for (int i = 0; i < 3; ++i) flat[i] *= scale;
      return detail::rel_gap(hatted.c.data(), flat.c.data(), 3);
    }
    case PairingKind::SymFormSymmetrized: {
      S3 flat = pairing_second2(psi, phi);
      S3 hatted = pairing_second2(hp, hf, hm);
      double scale = std::pow(omega, psi.weight + phi.weight);
      for (double& x : flat.v) x *= scale;
      return detail::rel_gap(hatted.v.data(), flat.v.data(), 10);
    }
    default:
      throw Error(
          "pairing_test: scalar x trace-free form admits the symmetric-form kinds");
  }
}

}  // namespace conj3
