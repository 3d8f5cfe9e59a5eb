#pragma once

// Catalogue of model functions and conjugate pairs used as shared fixtures
// by the tests and the CLI. Each entry carries a sample box kept clear of
// its singular set, the direction class expected at generic points of that
// box, and the verdict the integrability test reaches there.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "conj3/directions.hpp"
#include "conj3/errors.hpp"
#include "conj3/expr.hpp"
#include "conj3/integrability.hpp"
#include "conj3/jet.hpp"

namespace conj3 {

struct GalleryEntry {
  std::string name;
  std::string f_src;
  std::string g_src;  // empty when no conjugate is catalogued
  DirClass expected_class = DirClass::NoneReal;
  Verdict expected_verdict = Verdict::Rejects;
  std::string singular_set;
  std::map<std::string, double> params;
  std::string xyzero_model;  // canonical model name on the X = Y = 0 stratum
  std::string note;
  V3 lo{}, hi{};  // sample box, clear of the singular set

  ExprPtr f() const { return parse_expr(f_src); }
  ExprPtr g() const { return g_src.empty() ? nullptr : parse_expr(g_src); }
  bool has_g() const { return !g_src.empty(); }
};

namespace detail {

inline std::string num_lit(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

}  // namespace detail

// Solved cylindrically symmetric profile, f' (r)^2 = A/r^2 + C with
// r^2 = x2^2 + x3^2; the conjugate is sqrt(C) x1 - sqrt(A) atan2(x3, x2)
// and the fibres of the pair are helices on the cylinders r = const.
inline GalleryEntry cylindrical_entry(double A, double C) {
  if (A < 0.0 || C < 0.0 || A + C <= 0.0)
    throw ConstraintViolation("cylindrical profile needs A, C >= 0, not both 0");
  // Square roots are embedded as literals so the jets never differentiate
  // sqrt at 0 when a parameter vanishes.
  std::string sa = detail::num_lit(std::sqrt(A));
  std::string sc = detail::num_lit(std::sqrt(C));
  std::string al = detail::num_lit(A), cl = detail::num_lit(C);
  const std::string r2 = "(x2^2+x3^2)";
  GalleryEntry e;
  e.name = "cylindrical";
  if (C == 0.0) {
    e.f_src = sa + "*log(sqrt" + r2 + ")";
    e.g_src = "-" + sa + "*atan2(x3,x2)";
    e.expected_class = DirClass::TwoDistinct;
  } else if (A == 0.0) {
    e.f_src = sc + "*sqrt" + r2;
    e.g_src = sc + "*x1";
    e.expected_class = DirClass::TwoDistinct;
  } else {
    std::string root = "sqrt(" + al + "+" + cl + "*" + r2 + ")";
    e.f_src = sa + "*log((" + root + "-" + sa + ")/(" + sc + "*sqrt" + r2 +
              "))+" + root;
    e.g_src = sc + "*x1-" + sa + "*atan2(x3,x2)";
    e.expected_class = DirClass::FourDistinct;
  }
  e.expected_verdict = Verdict::Admits;
  e.singular_set = "axis x2 = x3 = 0; conjugate cut on x2 <= 0, x3 = 0";
  e.params = {{"A", A}, {"C", C}};
  e.note = "solved profile; X = -2AC/r^4";
  e.lo = V3{{{-0.8, 0.4, 0.3}}};
  e.hi = V3{{{0.8, 1.3, 1.1}}};
  return e;
}

// Product solution h = b e^{cx} e^{s}/(1+s), s = sqrt(1-c^2 y), of the
// lift equation hx^2 + 4y hy^2 + 4h hy = 0, written in x1 (= x), x2 (= y).
inline ExprPtr ansatz_product(double b, double c) {
  if (b == 0.0 || c == 0.0)
    throw ConstraintViolation("product solution needs b != 0 and c != 0");
  std::string bl = detail::num_lit(b), cl = detail::num_lit(c);
  std::string c2 = detail::num_lit(c * c);
  std::string s = "sqrt(1-" + c2 + "*x2)";
  return parse_expr(bl + "*exp(" + cl + "*x1)*exp(" + s + ")/(1+" + s + ")");
}

// Left-hand side of the lift equation at (x, y) for h written in x1, x2.
inline double ansatz_residual(const ExprPtr& h, double x, double y) {
  Jet3 j = eval_jet(h, V3{{{x, y, 0.0}}});
  return j.g[0] * j.g[0] + 4.0 * y * j.g[1] * j.g[1] + 4.0 * j.v * j.g[1];
}

// Conjugate pair f = x2 h(x1, x2^2+x3^2), g = x3 h(x1, x2^2+x3^2) lifted
// from a product solution; every lifted pair has X identically zero.
inline GalleryEntry ansatz_entry(double b, double c) {
  GalleryEntry e;
  e.name = "ansatz-product";
  e.lo = V3{{{-0.6, 0.25, 0.25}}};
  e.hi = V3{{{0.6, 0.85, 0.85}}};
  double y_max = e.hi[1] * e.hi[1] + e.hi[2] * e.hi[2];
  if (c * c * y_max >= 1.0)
    throw ConstraintViolation("product solution undefined on the sample box");
  ansatz_product(b, c);  // validates b, c
  std::string bl = detail::num_lit(b), cl = detail::num_lit(c);
  std::string c2 = detail::num_lit(c * c);
  std::string s = "sqrt(1-" + c2 + "*(x2^2+x3^2))";
  std::string h = bl + "*exp(" + cl + "*x1)*exp(" + s + ")/(1+" + s + ")";
  e.f_src = "x2*" + h;
  e.g_src = "x3*" + h;
  e.expected_class = DirClass::TwoDistinct;
  e.expected_verdict = Verdict::Admits;
  e.singular_set = "sqrt argument zero where c^2 (x2^2+x3^2) reaches 1";
  e.params = {{"b", b}, {"c", c}};
  e.note = "lift of a product solution; X vanishes identically";
  return e;
}

inline std::vector<GalleryEntry> list_entries() {
  std::vector<GalleryEntry> out;
  auto add = [&out](GalleryEntry e) { out.push_back(std::move(e)); };

  {
    GalleryEntry e;
    e.name = "intro-pair-1";
    e.f_src = "x2*(x1^2+x2^2+x3^2)/(x2^2+x3^2)";
    e.g_src = "x3*(x1^2+x2^2+x3^2)/(x2^2+x3^2)";
    e.expected_class = DirClass::TwoDistinct;
    e.expected_verdict = Verdict::Admits;
    e.singular_set = "axis x2 = x3 = 0";
    e.note = "lift of h = x^2/y + 1; X vanishes identically";
    e.lo = V3{{{-0.8, 0.3, 0.3}}};
    e.hi = V3{{{0.8, 1.2, 1.2}}};
    add(e);
  }
  {
    GalleryEntry e;
    e.name = "hopf";
    e.f_src = "((1-(x1^2+x2^2+x3^2))*x2+2*x1*x3)/(x2^2+x3^2)";
    e.g_src = "((1-(x1^2+x2^2+x3^2))*x3-2*x1*x2)/(x2^2+x3^2)";
    e.expected_class = DirClass::FourDistinct;
    // Of the four directions only the conjugate's branch integrates.
    e.expected_verdict = Verdict::AdmitsOnBranch;
    e.singular_set = "axis x2 = x3 = 0";
    e.note = "boundary values of the Hopf map in a stereographic chart";
    e.lo = V3{{{-0.8, 0.3, 0.3}}};
    e.hi = V3{{{0.8, 1.2, 1.2}}};
    add(e);
  }
  {
    GalleryEntry e;
    e.name = "log-arccos";
    e.f_src = "log(sqrt(x1^2+x2^2+x3^2))";
    e.g_src = "acos(x1/sqrt(x1^2+x2^2+x3^2))";
    e.expected_class = DirClass::InfinitelyMany;
    e.expected_verdict = Verdict::Inconclusive;
    e.singular_set = "origin; conjugate degenerates on the axis x2 = x3 = 0";
    e.note = "radial log paired with the polar angle from the x1 axis";
    e.lo = V3{{{-0.5, 0.3, 0.3}}};
    e.hi = V3{{{0.5, 1.0, 1.0}}};
    add(e);
  }
  {
    GalleryEntry e;
    e.name = "x1x2x3";
    e.f_src = "x1*x2*x3";
    e.expected_class = DirClass::NoneReal;
    e.expected_verdict = Verdict::Rejects;
    e.singular_set = "coordinate planes (critical on the coordinate axes)";
    e.note = "X = 6 f^2 > 0 off the coordinate planes, so no conjugate";
    e.lo = V3{{{0.3, 0.3, 0.3}}};
    e.hi = V3{{{1.2, 1.2, 1.2}}};
    add(e);
  }
  {
    GalleryEntry e;
    e.name = "quadratic-pair";
    e.f_src = "(x1^2-x2^2-x3^2)/2";
    e.g_src = "x1*sqrt(x2^2+x3^2)";
    e.expected_class = DirClass::TwoDistinct;
    e.expected_verdict = Verdict::Admits;
    e.singular_set = "axis x2 = x3 = 0; isolated critical point at 0";
    e.note =
        "the only quadratic admitting a conjugate, stored halved so the "
        "catalogued g is exactly conjugate";
    e.lo = V3{{{0.2, 0.3, 0.3}}};
    e.hi = V3{{{1.2, 1.2, 1.2}}};
    add(e);
  }
  add(cylindrical_entry(1.0, 1.0));
  {
    GalleryEntry e = cylindrical_entry(1.0, 0.0);
    e.name = "cylindrical-log";
    e.note = "C = 0 member; fibres close up into circles";
    add(e);
  }
  {
    GalleryEntry e = cylindrical_entry(0.0, 1.0);
    e.name = "cylindrical-cone";
    e.note =
        "A = 0 member; a two-variable function with constant speed, the "
        "unique direction is axial";
    add(e);
  }
  {
    GalleryEntry e;
    e.name = "cylindrical-r2";
    e.f_src = "x2^2+x3^2";
    e.expected_class = DirClass::NoneReal;
    e.expected_verdict = Verdict::Rejects;
    e.singular_set = "critical on the axis x2 = x3 = 0";
    e.note = "f' f'' > 0 forces complex directions everywhere";
    e.lo = V3{{{-0.8, 0.4, 0.3}}};
    e.hi = V3{{{0.8, 1.3, 1.1}}};
    add(e);
  }
  {
    GalleryEntry e;
    e.name = "cylindrical-log-plus-r";
    e.f_src = "log(sqrt(x2^2+x3^2))+sqrt(x2^2+x3^2)";
    e.expected_class = DirClass::FourDistinct;
    e.expected_verdict = Verdict::Rejects;
    e.singular_set = "axis x2 = x3 = 0";
    e.note =
        "profile off the solved family: directions exist pointwise but "
        "their field is not closed";
    e.lo = V3{{{-0.8, 0.4, 0.3}}};
    e.hi = V3{{{0.8, 1.3, 1.1}}};
    add(e);
  }
  {
    GalleryEntry e;
    e.name = "spherical-log";
    e.f_src = "log(sqrt(x1^2+x2^2+x3^2))";
    e.expected_class = DirClass::InfinitelyMany;
    e.expected_verdict = Verdict::Inconclusive;
    e.singular_set = "origin";
    e.xyzero_model = "LogR";
    e.note =
        "radially symmetric; conjugates solve an eikonal equation on "
        "spheres, so none extends to the full domain";
    e.lo = V3{{{-0.5, 0.3, 0.3}}};
    e.hi = V3{{{0.5, 1.1, 0.9}}};
    add(e);
  }
  add(ansatz_entry(1.0, 0.5));
  {
    GalleryEntry e;
    e.name = "linear";
    e.f_src = "x1";
    e.g_src = "x2";
    e.expected_class = DirClass::InfinitelyMany;
    e.expected_verdict = Verdict::Inconclusive;
    e.singular_set = "none";
    e.xyzero_model = "Linear";
    e.note = "every linear function has a circle of linear conjugates";
    e.lo = V3{{{-1.0, -1.0, -1.0}}};
    e.hi = V3{{{1.0, 1.0, 1.0}}};
    add(e);
  }
  {
    GalleryEntry e;
    e.name = "azimuth";
    e.f_src = "atan2(x3,x2)";
    e.g_src = "log(sqrt(x2^2+x3^2))";
    e.expected_class = DirClass::InfinitelyMany;
    e.expected_verdict = Verdict::Inconclusive;
    e.singular_set = "axis x2 = x3 = 0; cut on x2 <= 0, x3 = 0";
    e.xyzero_model = "AzimuthalAngle";
    e.note = "planar angle paired with the planar log";
    e.lo = V3{{{-0.8, 0.3, 0.3}}};
    e.hi = V3{{{0.8, 1.2, 1.2}}};
    add(e);
  }
  {
    GalleryEntry e;
    e.name = "inverted-linear";
    e.f_src = "x1/(x1^2+x2^2+x3^2)";
    e.g_src = "x2/(x1^2+x2^2+x3^2)";
    e.expected_class = DirClass::InfinitelyMany;
    e.expected_verdict = Verdict::Inconclusive;
    e.singular_set = "origin";
    e.xyzero_model = "InvertedLinear";
    e.note = "image of a linear pair under inversion";
    e.lo = V3{{{0.3, 0.3, 0.3}}};
    e.hi = V3{{{1.2, 1.2, 1.2}}};
    add(e);
  }
  return out;
}

inline GalleryEntry find_entry(const std::string& name) {
  for (GalleryEntry& e : list_entries())
    if (e.name == name) return e;
  throw ConstraintViolation("unknown gallery entry: " + name);
}

struct ThreeHarmonicPair {
  std::string f_src;
  std::string g_src;
  // The log/azimuth pair solves Z = 0 member by member yet is conjugate
  // only after a conformal change (gradient speeds 1/r and 1/rho differ).
  bool pointwise_conjugate = true;
};

// Conjugate pairs whose members all satisfy Z = 0, the p-harmonic equation
// for p = 3; up to conformal transformation these are the only ones.
inline std::vector<ThreeHarmonicPair> three_harmonic_pairs() {
  return {{"x1", "x2", true},
          {"log(sqrt(x1^2+x2^2+x3^2))", "atan2(x3,x2)", false},
          {"x1/(x1^2+x2^2+x3^2)", "x2/(x1^2+x2^2+x3^2)", true}};
}

}  // namespace conj3
