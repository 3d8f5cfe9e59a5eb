#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "conj3/gallery.hpp"
#include "conj3/mobius.hpp"
#include "conj3/reconstruct.hpp"
#include "support.hpp"

using namespace conj3;

namespace {

std::vector<V3> box_points(std::mt19937_64& rng, const GalleryEntry& e,
                           int n) {
  std::vector<V3> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    pts.push_back(V3{{{testsup::uni(rng, e.lo[0], e.hi[0]),
                       testsup::uni(rng, e.lo[1], e.hi[1]),
                       testsup::uni(rng, e.lo[2], e.hi[2])}}});
  return pts;
}

bool admits(Verdict v) {
  return v == Verdict::Admits || v == Verdict::AdmitsOnBranch;
}

}  // namespace

TEST_CASE("catalogue contains the expected entries", "[gallery]") {
  std::set<std::string> names;
  for (const GalleryEntry& e : list_entries()) {
    CHECK(names.insert(e.name).second);
    CHECK_NOTHROW(e.f());
    if (e.has_g()) CHECK_NOTHROW(e.g());
    CHECK_FALSE(e.singular_set.empty());
    for (int a = 0; a < 3; ++a) CHECK(e.lo[a] < e.hi[a]);
  }
  for (const char* want :
       {"intro-pair-1", "hopf", "log-arccos", "x1x2x3", "quadratic-pair",
        "cylindrical", "spherical-log", "ansatz-product", "linear", "azimuth",
        "inverted-linear"})
    CHECK(names.count(want) == 1);
  CHECK(find_entry("hopf").has_g());
  CHECK_FALSE(find_entry("x1x2x3").has_g());
  CHECK_THROWS_AS(find_entry("no-such-entry"), ConstraintViolation);
  CHECK(find_entry("cylindrical").params.at("A") == 1.0);
  CHECK(find_entry("ansatz-product").params.at("c") == 0.5);
}

TEST_CASE("every catalogued pair is conjugate on its box", "[gallery]") {
  std::mt19937_64 rng(911u);
  for (const GalleryEntry& e : list_entries()) {
    if (!e.has_g()) continue;
    INFO(e.name);
    PairReport r = verify_pair(e.f(), e.g(), box_points(rng, e, 30));
    CHECK(r.pass);
    CHECK(r.norm_dev < 1e-9);
    CHECK(r.ortho_dev < 1e-9);
  }
}

TEST_CASE("classes and verdicts match the catalogue at random points",
          "[gallery]") {
  std::mt19937_64 rng(912u);
  for (const GalleryEntry& e : list_entries()) {
    INFO(e.name);
    ExprPtr f = e.f();
    for (const V3& x : box_points(rng, e, 20)) {
      Jet3 j = eval_jet(f, x);
      CHECK(classify_directions(j) == e.expected_class);
      CHECK(integrability_report(j).verdict == e.expected_verdict);
    }
  }
}

TEST_CASE("cylindrical invariant follows the closed form", "[gallery]") {
  std::mt19937_64 rng(913u);
  for (int rep = 0; rep < 20; ++rep) {
    double A = testsup::uni(rng, 0.2, 3.0);
    double C = testsup::uni(rng, 0.2, 3.0);
    GalleryEntry e = cylindrical_entry(A, C);
    ExprPtr f = e.f();
    V3 x = box_points(rng, e, 1)[0];
    double r2 = x[1] * x[1] + x[2] * x[2];
    CoreInvariants c = core_invariants(eval_jet(f, x));
    double want = -2.0 * A * C / (r2 * r2);
    CHECK(std::fabs(c.X - want) <= 1e-10 * std::fabs(want));
  }
}

TEST_CASE("cylindrical directions realize all four sign choices",
          "[gallery]") {
  std::mt19937_64 rng(914u);
  GalleryEntry e = cylindrical_entry(1.7, 0.6);
  ExprPtr f = e.f();
  for (const V3& x : box_points(rng, e, 10)) {
    double r2 = x[1] * x[1] + x[2] * x[2];
    double w1 = std::sqrt(0.6);
    double w2 = x[2] * std::sqrt(1.7) / r2;
    double w3 = -x[1] * std::sqrt(1.7) / r2;
    DirectionSolution sol = solve_directions(eval_jet(f, x));
    REQUIRE(sol.cls == DirClass::FourDistinct);
    for (const V3& w : sol.omegas) {
      bool hit = false;
      for (double s1 : {1.0, -1.0})
        for (double s2 : {1.0, -1.0}) {
          V3 cand{{{s1 * w1, s2 * w2, s2 * w3}}};
          if (norm(w - cand) < 1e-8 * norm(cand)) hit = true;
        }
      CHECK(hit);
    }
  }
}

TEST_CASE("two-variable invariant factors as laplacian times drift",
          "[gallery]") {
  // For f = f(x2, x3), X = (Delta f)(f^i grad_i J).
  std::mt19937_64 rng(915u);
  for (const char* name :
       {"cylindrical", "cylindrical-log", "cylindrical-cone", "cylindrical-r2",
        "cylindrical-log-plus-r"}) {
    GalleryEntry e = find_entry(name);
    INFO(name);
    ExprPtr f = e.f();
    for (const V3& x : box_points(rng, e, 8)) {
      Jet3 j = eval_jet(f, x);
      double trh = j.h(0, 0) + j.h(1, 1) + j.h(2, 2);
      double drift = 0.0;  // f^i grad_i J with J = |grad f|^2
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) drift += 2.0 * j.g[i] * j.h(i, k) * j.g[k];
      CoreInvariants c = core_invariants(j);
      CHECK(testsup::close(c.X, trh * drift, 1e-11));
    }
  }
}

TEST_CASE("constant-speed two-variable function has the axial direction",
          "[gallery]") {
  // With the speed constant and Delta f nonzero, the unique direction is
  // (sqrt(f2^2+f3^2), 0, 0) up to sign.
  std::mt19937_64 rng(916u);
  GalleryEntry e = find_entry("cylindrical-cone");
  ExprPtr f = e.f();
  for (const V3& x : box_points(rng, e, 10)) {
    Jet3 j = eval_jet(f, x);
    double speed2 = dot(j.g, j.g);
    CHECK(testsup::close(speed2, 1.0, 1e-12));
    double trh = j.h(0, 0) + j.h(1, 1) + j.h(2, 2);
    CHECK(std::fabs(trh) > 0.5);
    DirectionSolution sol = solve_directions(j);
    REQUIRE(sol.cls == DirClass::TwoDistinct);
    V3 want{{{std::sqrt(j.g[1] * j.g[1] + j.g[2] * j.g[2]), 0.0, 0.0}}};
    bool axial = norm(sol.omegas[0] - want) < 1e-9 ||
                 norm(sol.omegas[0] + want) < 1e-9;
    CHECK(axial);
  }
}

TEST_CASE("product-solution residual vanishes only on solutions",
          "[gallery]") {
  CHECK(std::fabs(ansatz_residual(ansatz_product(1.0, 0.5), 0.3, 0.9)) <
        1e-10);
  CHECK(std::fabs(ansatz_residual(parse_expr("x1^2/x2+1"), 1.0, 2.0)) < 1e-10);
  CHECK(ansatz_residual(parse_expr("x1"), 0.4, 0.7) == 1.0);
  CHECK(std::fabs(ansatz_residual(parse_expr("x2"), 0.4, 0.7)) > 1.0);
  std::mt19937_64 rng(917u);
  for (int rep = 0; rep < 10; ++rep) {
    double b = testsup::uni(rng, 0.2, 2.0);
    double c = testsup::uni(rng, 0.1, 0.8);
    double x = testsup::uni(rng, -1.0, 1.0);
    double y = testsup::uni(rng, 0.1, 0.9 / (c * c));
    CHECK(std::fabs(ansatz_residual(ansatz_product(b, c), x, y)) < 1e-10);
  }
  // Outside the domain the square root goes negative.
  CHECK_THROWS_AS(ansatz_residual(ansatz_product(1.0, 1.0), 0.0, 2.0),
                  DomainError);
  CHECK_THROWS_AS(ansatz_product(0.0, 0.5), ConstraintViolation);
  CHECK_THROWS_AS(ansatz_product(1.0, 0.0), ConstraintViolation);
  CHECK_THROWS_AS(ansatz_entry(1.0, 0.9), ConstraintViolation);
}

TEST_CASE("lifted entries sit on the vanishing-invariant stratum",
          "[gallery]") {
  std::mt19937_64 rng(918u);
  for (const char* name : {"intro-pair-1", "ansatz-product"}) {
    GalleryEntry e = find_entry(name);
    INFO(name);
    ExprPtr f = e.f();
    for (const V3& x : box_points(rng, e, 15)) {
      CoreInvariants c = core_invariants(eval_jet(f, x));
      CHECK(std::fabs(c.X_rel) < 1e-10);
    }
  }
  // The radial log has both trace-free invariants zero, axis included.
  Jet3 j = eval_jet(find_entry("spherical-log").f(), V3{{{1.0, 0.0, 0.0}}});
  CoreInvariants c = core_invariants(j);
  CHECK(std::fabs(c.X_rel) < 1e-14);
  CHECK(std::fabs(c.Y_rel) < 1e-14);
  auto [z, zs] = detail::z_expanded(j);
  CHECK(std::fabs(z) / zs < 1e-14);
}

TEST_CASE("factory parameters are validated", "[gallery]") {
  CHECK_THROWS_AS(cylindrical_entry(-0.5, 1.0), ConstraintViolation);
  CHECK_THROWS_AS(cylindrical_entry(1.0, -2.0), ConstraintViolation);
  CHECK_THROWS_AS(cylindrical_entry(0.0, 0.0), ConstraintViolation);
  CHECK(cylindrical_entry(0.0, 2.0).expected_class == DirClass::TwoDistinct);
  CHECK(cylindrical_entry(3.0, 0.0).expected_class == DirClass::TwoDistinct);
  CHECK(cylindrical_entry(1.0, 1.0).expected_class == DirClass::FourDistinct);
}

TEST_CASE("model entries canonicalize to their own classes", "[gallery]") {
  std::mt19937_64 rng(919u);
  int found = 0;
  for (const GalleryEntry& e : list_entries()) {
    if (e.xyzero_model.empty()) continue;
    INFO(e.name);
    XYzeroReport rep = classify_XYzero(e.f(), box_points(rng, e, 12));
    CHECK(to_string(rep.model) == e.xyzero_model);
    ++found;
  }
  CHECK(found == 4);
}

TEST_CASE("trace-free pairs cover the conformal classification", "[gallery]") {
  std::mt19937_64 rng(920u);
  auto pairs = three_harmonic_pairs();
  REQUIRE(pairs.size() == 3);
  std::vector<V3> pts;
  for (int k = 0; k < 20; ++k)
    pts.push_back(V3{{{testsup::uni(rng, -1.0, 1.0),
                       testsup::uni(rng, 0.3, 1.2),
                       testsup::uni(rng, 0.3, 1.2)}}});
  for (const ThreeHarmonicPair& p : pairs) {
    INFO(p.f_src);
    for (const char* src : {p.f_src.c_str(), p.g_src.c_str()})
      for (const V3& x : pts) {
        auto [z, zs] = detail::z_expanded(eval_jet(parse_expr(src), x));
        CHECK(std::fabs(z) / zs < 1e-12);
      }
    PairReport r = verify_pair(parse_expr(p.f_src), parse_expr(p.g_src), pts);
    CHECK(r.pass == p.pointwise_conjugate);
    CHECK(r.ortho_dev < 1e-12);
  }
}

TEST_CASE("x1x2x3 invariant equals six f squared", "[gallery]") {
  std::mt19937_64 rng(921u);
  GalleryEntry e = find_entry("x1x2x3");
  ExprPtr f = e.f();
  for (const V3& x : box_points(rng, e, 20)) {
    Jet3 j = eval_jet(f, x);
    CoreInvariants c = core_invariants(j);
    CHECK(testsup::close(c.X, 6.0 * j.v * j.v, 1e-12));
  }
}

TEST_CASE("hopf grid admits everywhere off the axis", "[gallery]") {
  GalleryEntry e = find_entry("hopf");
  ExprPtr f = e.f();
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 5; ++k) {
        V3 x{{{e.lo[0] + i * (e.hi[0] - e.lo[0]) / 4.0,
               e.lo[1] + j * (e.hi[1] - e.lo[1]) / 4.0,
               e.lo[2] + k * (e.hi[2] - e.lo[2]) / 4.0}}};
        IntegrabilityReport rep = integrability_report(eval_jet(f, x));
        CHECK(admits(rep.verdict));
      }
}
