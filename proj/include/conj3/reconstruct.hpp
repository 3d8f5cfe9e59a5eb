#pragma once

// Recover the conjugate g of an admissible f by integrating a continued
// conjugate-direction field along polyline paths, g(x) = int_base^x w . dl
// with g(base) = 0. Companion checks: pointwise pair verification, the
// invariant relations between f and g, and loop circulation as a closedness
// probe.
//
// Branch continuation is strictly sequential along a path: at each quadrature
// node the solver's candidates are matched against the previous direction.
// On the infinitely-many stratum the candidate set is a whole circle and
// nearest-to-previous transport picks up holonomy, so there the caller must
// supply a reference conjugate whose gradient selects the branch.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "conj3/directions.hpp"
#include "conj3/errors.hpp"
#include "conj3/expr.hpp"
#include "conj3/integrability.hpp"
#include "conj3/invariants.hpp"
#include "conj3/jet.hpp"
#include "conj3/tensor.hpp"

namespace conj3 {

// Grids are expected to keep this much clearance from singular sets (axis of
// symmetry, expression poles); offending nodes make the evaluator or the
// direction solver throw rather than produce junk.
inline constexpr double k_guard_radius = 1e-2;

struct PathGrid {
  V3 base{};
  // Each path's first node must be the base or a node of an earlier path.
  std::vector<std::vector<V3>> paths;
  double h = 0.1;  // consecutive nodes of a path lie within 2h
  V3 seed{};       // branch seed at the base point
};

struct ReconstructedField {
  PathGrid grid;
  std::vector<std::vector<double>> values;  // g at grid.paths[p][k]; g(base)=0
  std::vector<std::vector<V3>> omegas;      // continued direction per node
};

namespace detail {

// One continuation step at x. `ref` overrides the previous direction on the
// infinitely-many stratum only; generic strata never consult it. With
// `seeding` set, `prev` is a caller-supplied branch seed, so a distant
// nearest candidate is the caller's error rather than a tracking failure.
inline V3 step_direction(const ExprPtr& e, const V3& x, const V3& prev,
                         const ExprPtr& ref, bool seeding = false) {
  Jet3 f = eval_jet(e, x);
  DirectionSolution sol = solve_directions(f);
  V3 from = prev;
  if (sol.cls == DirClass::InfinitelyMany) {
    if (!ref)
      throw BranchSwitch(
          "direction set is a circle; supply a reference conjugate");
    from = eval_jet(ref, x).g;
  }
  V3 w;
  try {
    w = continue_branch(f, sol, from);
  } catch (const AmbiguousBranch& a) {
    throw BranchSwitch(a.what());
  } catch (const WrongBranch& a) {
    throw NonIntegrable(a.what());
  }
  double c = dot(w, from) / (norm(w) * norm(from) + k_eps_den);
  if (c < 0.5) {
    if (seeding)
      throw WrongBranch("branch seed matches no direction at the path start");
    throw BranchSwitch("continuation jumped to a distant branch");
  }
  return w;
}

struct SegmentResult {
  double integral = 0.0;
  V3 omega_end{};
};

// Composite Simpson with 2m intervals; the branch state advances node by
// node, and the converged pass's end state is what the caller carries on.
inline SegmentResult simpson_pass(const ExprPtr& e, const V3& a, const V3& b,
                                  const V3& w_start, int m,
                                  const ExprPtr& ref) {
  V3 d = b - a;
  int nn = 2 * m;
  double first = dot(w_start, d), last = 0.0, odd = 0.0, even = 0.0;
  V3 w = w_start;
  for (int k = 1; k <= nn; ++k) {
    V3 x = a + (static_cast<double>(k) / nn) * d;
    w = step_direction(e, x, w, ref);
    double s = dot(w, d);
    if (k == nn)
      last = s;
    else if (k % 2 == 1)
      odd += s;
    else
      even += s;
  }
  return {(first + 4.0 * odd + 2.0 * even + last) / (6.0 * m), w};
}

// Halve the step until successive Simpson estimates agree to 1e-10; a
// positive fixed_m disables the refinement (used by the quadrature-order
// property test).
inline SegmentResult integrate_segment(const ExprPtr& e, const V3& a,
                                       const V3& b, const V3& w_start,
                                       const ExprPtr& ref, int fixed_m = 0) {
  if (norm(b - a) == 0.0) return {0.0, w_start};
  if (fixed_m > 0) return simpson_pass(e, a, b, w_start, fixed_m, ref);
  SegmentResult prev = simpson_pass(e, a, b, w_start, 2, ref);
  for (int m = 4; m <= 4096; m *= 2) {
    SegmentResult cur = simpson_pass(e, a, b, w_start, m, ref);
    if (std::fabs(cur.integral - prev.integral) <=
        1e-10 * (1.0 + std::fabs(cur.integral)))
      return cur;
    prev = cur;
  }
  return prev;  // smooth fields converge long before the cap
}

// Refuse reconstruction when the base point already rules it out: no real
// direction at all, or a direction field that provably fails closedness.
inline void preflight(const Jet3& fb) {
  IntegrabilityReport rep = integrability_report(fb);
  if (rep.branch == BranchKind::NoConjugate)
    throw NonIntegrable("no real conjugate direction at the base point");
  if (rep.verdict == Verdict::Rejects)
    throw NonIntegrable("conjugate direction field is not closed");
}

}  // namespace detail

inline ReconstructedField reconstruct_g(const ExprPtr& e, const PathGrid& grid,
                                        const ExprPtr& reference = nullptr) {
  if (grid.paths.empty()) throw ConstraintViolation("grid has no paths");
  for (const auto& path : grid.paths) {
    if (path.empty()) throw ConstraintViolation("grid has an empty path");
    for (std::size_t k = 0; k + 1 < path.size(); ++k)
      if (norm(path[k + 1] - path[k]) > 2.0 * grid.h + 1e-12)
        throw ConstraintViolation("consecutive path nodes farther than 2h");
  }
  detail::preflight(eval_jet(e, grid.base));
  V3 w0 = detail::step_direction(e, grid.base, grid.seed, reference, true);

  struct Node {
    V3 x;
    double g;
    V3 w;
  };
  std::vector<Node> known{{grid.base, 0.0, w0}};
  auto find_known = [&known](const V3& x) -> const Node* {
    for (const Node& n : known)
      if (norm(n.x - x) <= 1e-9 * (1.0 + norm(x))) return &n;
    return nullptr;
  };

  ReconstructedField out;
  out.grid = grid;
  for (const auto& path : grid.paths) {
    const Node* start = find_known(path[0]);
    if (!start)
      throw ConstraintViolation("path start is not the base or a visited node");
    double g = start->g;
    V3 w = start->w;
    std::vector<double> vals{g};
    std::vector<V3> oms{w};
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      detail::SegmentResult res =
          detail::integrate_segment(e, path[k], path[k + 1], w, reference);
      g += res.integral;
      w = res.omega_end;
      vals.push_back(g);
      oms.push_back(w);
      known.push_back({path[k + 1], g, w});
    }
    out.values.push_back(std::move(vals));
    out.omegas.push_back(std::move(oms));
  }
  return out;
}

// Signed circulation around a closed polyline with branch continuation from
// the seed. A single-node loop is exactly 0.
inline double loop_residual(const ExprPtr& e, const std::vector<V3>& loop,
                            const V3& seed, int fixed_m = 0,
                            const ExprPtr& reference = nullptr) {
  if (loop.size() < 2) return 0.0;
  if (norm(loop.front() - loop.back()) > 1e-12)
    throw ConstraintViolation("loop is not closed");
  V3 w = detail::step_direction(e, loop[0], seed, reference, true);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < loop.size(); ++k) {
    detail::SegmentResult res =
        detail::integrate_segment(e, loop[k], loop[k + 1], w, reference,
                                  fixed_m);
    total += res.integral;
    w = res.omega_end;
  }
  return total;
}

// Continue a branch along the straight segment without integrating; returns
// the direction at `to`.
inline V3 transport_direction(const ExprPtr& e, const V3& from,
                              const V3& w_from, const V3& to, int substeps = 8,
                              const ExprPtr& reference = nullptr) {
  V3 w = w_from;
  V3 d = to - from;
  for (int k = 1; k <= substeps; ++k)
    w = detail::step_direction(
        e, from + (static_cast<double>(k) / substeps) * d, w, reference);
  return w;
}

struct PairReport {
  double norm_dev = 0.0;   // max | |grad f| - |grad g| | / |grad f|
  double ortho_dev = 0.0;  // max |<grad f, grad g>| / (|grad f| |grad g|)
  bool pass = false;
};

// Pointwise conjugacy: equal gradient speeds and orthogonal gradients.
inline PairReport verify_pair(const ExprPtr& ef, const ExprPtr& eg,
                              const std::vector<V3>& samples,
                              double tol = 1e-9) {
  PairReport r;
  for (const V3& x : samples) {
    V3 df = eval_jet(ef, x).g;
    V3 dg = eval_jet(eg, x).g;
    double nf = norm(df), ng = norm(dg);
    if (nf < k_tol_grad)
      throw CriticalPointError("vanishing gradient at a verification sample");
    r.norm_dev = std::max(r.norm_dev, std::fabs(nf - ng) / nf);
    r.ortho_dev =
        std::max(r.ortho_dev, std::fabs(dot(df, dg)) / (nf * ng + k_eps_den));
  }
  r.pass = r.norm_dev < tol && r.ortho_dev < tol;
  return r;
}

struct RelationReport {
  double x_equal = 0.0;      // X(f) - X(g)
  double x_combo = 0.0;      // X(f+eps g) - (1+eps^2)^2 X(f)
  double z_combo = 0.0;      // Z(f+eps g) - (1+eps^2)(Z(f) + eps Z(g))
  double mixed_trace = 0.0;  // f^{ij}g_{ij} - (Delta f)(Delta g)
  double z_conjugate = 0.0;  // Z(g) - [f^{ij}f_ig_j + J Delta g]
  double worst() const {
    return std::max({x_equal, x_combo, z_combo, mixed_trace, z_conjugate});
  }
};

// Scale-normalized residuals, maximized over the samples, of the relations a
// conjugate pair must satisfy. The combination jets f + eps g are formed by
// jet linearity, so both sides see identical rounding of the inputs.
inline RelationReport conjugate_relations(const ExprPtr& ef, const ExprPtr& eg,
                                          const std::vector<V3>& samples,
                                          double eps) {
  RelationReport r;
  const double c2 = 1.0 + eps * eps;
  for (const V3& x : samples) {
    Jet3 f = eval_jet(ef, x);
    Jet3 g = eval_jet(eg, x);
    Jet3 fe = f + eps * g;
    CoreInvariants cf = core_invariants(f);
    CoreInvariants cg = core_invariants(g);
    CoreInvariants ce = core_invariants(fe);
    r.x_equal = std::max(
        r.x_equal, std::fabs(cf.X - cg.X) / (cf.X_scale + cg.X_scale));
    r.x_combo =
        std::max(r.x_combo, std::fabs(ce.X - c2 * c2 * cf.X) /
                                (ce.X_scale + c2 * c2 * cf.X_scale));
    auto [zf, zfs] = detail::z_expanded(f);
    auto [zg, zgs] = detail::z_expanded(g);
    auto [ze, zes] = detail::z_expanded(fe);
    r.z_combo = std::max(
        r.z_combo, std::fabs(ze - c2 * (zf + eps * zg)) /
                       (zes + c2 * (zfs + std::fabs(eps) * zgs)));
    double mixed = 0.0, mixed_s = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        mixed += f.h(i, j) * g.h(i, j);
        mixed_s += std::fabs(f.h(i, j) * g.h(i, j));
      }
    double trf = f.h(0, 0) + f.h(1, 1) + f.h(2, 2);
    double trg = g.h(0, 0) + g.h(1, 1) + g.h(2, 2);
    r.mixed_trace =
        std::max(r.mixed_trace,
                 std::fabs(mixed - trf * trg) /
                     (mixed_s + std::fabs(trf * trg) + k_eps_den));
    double lin = 0.0, lin_s = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        lin += f.h(i, j) * f.g[i] * g.g[j];
        lin_s += std::fabs(f.h(i, j) * f.g[i] * g.g[j]);
      }
    double jf = dot(f.g, f.g);
    lin += jf * trg;
    lin_s += jf * std::fabs(trg);
    r.z_conjugate =
        std::max(r.z_conjugate,
                 std::fabs(zg - lin) / (zgs + lin_s + k_eps_den));
  }
  return r;
}

// Single boustrophedon path visiting an axis-aligned node grid; consecutive
// nodes are grid neighbours, so the 2h invariant holds with h = the largest
// cell edge. steps[a] counts nodes per axis.
inline PathGrid box_snake(const V3& lo, const V3& hi,
                          const std::array<int, 3>& steps, const V3& seed) {
  std::array<double, 3> d{};
  for (int a = 0; a < 3; ++a) {
    if (steps[a] < 1)
      throw ConstraintViolation("box_snake needs at least one node per axis");
    d[a] = steps[a] > 1 ? (hi[a] - lo[a]) / (steps[a] - 1) : 0.0;
  }
  PathGrid g;
  g.base = lo;
  g.seed = seed;
  g.h = std::max({std::fabs(d[0]), std::fabs(d[1]), std::fabs(d[2]), 1e-6});
  std::vector<V3> path;
  path.reserve(static_cast<std::size_t>(steps[0]) * steps[1] * steps[2]);
  for (int i = 0; i < steps[0]; ++i)
    for (int jj = 0; jj < steps[1]; ++jj) {
      int j = i % 2 == 0 ? jj : steps[1] - 1 - jj;
      long row = static_cast<long>(i) * steps[1] + jj;
      for (int kk = 0; kk < steps[2]; ++kk) {
        int k = row % 2 == 0 ? kk : steps[2] - 1 - kk;
        path.push_back(
            V3{{{lo[0] + i * d[0], lo[1] + j * d[1], lo[2] + k * d[2]}}});
      }
    }
  g.paths.push_back(std::move(path));
  return g;
}

inline std::string to_csv(const ReconstructedField& rf) {
  std::string out = "x1,x2,x3,g\n";
  char buf[160];
  for (std::size_t p = 0; p < rf.grid.paths.size(); ++p)
    for (std::size_t k = 0; k < rf.grid.paths[p].size(); ++k) {
      const V3& x = rf.grid.paths[p][k];
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", x[0], x[1],
                    x[2], rf.values[p][k]);
      out += buf;
    }
  return out;
}

}  // namespace conj3
