#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "conj3/errors.hpp"
#include "conj3/expr.hpp"
#include "conj3/linalg.hpp"
#include "conj3/mobius.hpp"
#include "support.hpp"

using namespace conj3;

namespace {

SmallMat mat3(const std::array<std::array<double, 3>, 3>& rows) {
  SmallMat M(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      M.at(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return M;
}

SmallMat congr(const SmallMat& S, const SmallMat& M) {
  // accumulates in extended precision: residuals measured against 1e-10
  // would otherwise drown in evaluation noise when |S| entries are large
  return conj3::detail::congr_acc(S, M);
}

double max_dev(const SmallMat& A, const SmallMat& B) {
  double d = 0.0;
  for (int i = 0; i < A.n; ++i)
    for (int j = 0; j < A.n; ++j) d = std::max(d, std::fabs(A(i, j) - B(i, j)));
  return d;
}

double cond_of(const SmallMat& S) {
  auto ev = jacobi_eigenvalues(mul(transpose(S), S));
  double lo = ev[0], hi = ev[0];
  for (double v : ev) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo <= 0.0) return 1e300;
  return std::sqrt(hi / lo);
}

SmallMat random_invertible(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    SmallMat S(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) S.at(i, j) = u(rng);
    if (cond_of(S) < 1e3) return S;
  }
}

std::vector<V3> sample_box(std::mt19937_64& rng, const V3& center, double half,
                           int count) {
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<V3> pts;
  for (int i = 0; i < count; ++i)
    pts.push_back({{{center[0] + u(rng), center[1] + u(rng), center[2] + u(rng)}}});
  return pts;
}

// Apply exp(t G) to a vector by a truncated series; t is small enough that
// eight terms reach machine precision.
Vec5 flow_apply(const SmallMat& G, double t, Vec5 x) {
  Vec5 acc = x, term = x;
  for (int k = 1; k <= 8; ++k) {
    term = mulv(G, term);
    double c = t / k;
    for (int i = 0; i < G.n; ++i) term[static_cast<std::size_t>(i)] *= c;
    for (int i = 0; i < G.n; ++i)
      acc[static_cast<std::size_t>(i)] += term[static_cast<std::size_t>(i)];
  }
  return acc;
}

struct CaseSpec {
  int n;
  CanonicalCase tag;
  double lam, mu;
};

}  // namespace

TEST_CASE("preferred form and canonical matrices are the frozen conventions") {
  SmallMat P3 = prefer_H(3);
  CHECK(P3(0, 2) == 1.0);
  CHECK(P3(2, 0) == 1.0);
  CHECK(P3(1, 1) == 1.0);
  CHECK(P3(0, 0) == 0.0);
  SmallMat P5 = prefer_H(5);
  CHECK(P5(0, 4) == 1.0);
  CHECK(P5(4, 0) == 1.0);
  for (int i = 1; i < 4; ++i) CHECK(P5(i, i) == 1.0);
  CHECK(P5(0, 0) == 0.0);
  CHECK(P5(4, 4) == 0.0);

  SmallMat N = canonical_N(CanonicalCase::RealPair, 3, 1.5, 0.0);
  CHECK(N(0, 2) == 1.5);
  CHECK(N(2, 0) == -1.5);
  N = canonical_N(CanonicalCase::Nilpotent, 3, 0.0, 0.0);
  CHECK(N(1, 2) == 2.0);
  CHECK(N(2, 1) == -2.0);
  N = canonical_N(CanonicalCase::FirstType, 5, 1.0, 2.0);
  CHECK(N(0, 4) == 1.0);
  CHECK(N(2, 3) == 2.0);
  N = canonical_N(CanonicalCase::ThirdType, 5, 0.0, 0.7);
  CHECK(N(1, 4) == 2.0);
  CHECK(N(4, 1) == -2.0);
  CHECK(N(2, 3) == 0.7);
  // every canonical N is skew against the preferred H
  for (auto tag : {CanonicalCase::RealPair, CanonicalCase::ImaginaryPair,
                   CanonicalCase::Nilpotent}) {
    SmallMat Nc = canonical_N(tag, 3, 0.8, 0.0);
    CHECK(max_dev(Nc, SmallMat(3)) > 0.0);
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        worst = std::max(worst, std::fabs(Nc(i, j) + Nc(j, i)));
    CHECK(worst == 0.0);
  }
}

TEST_CASE("pair validation rejects bad inputs") {
  LorentzPair p;
  p.n = 3;
  p.H = SmallMat::identity(3);  // positive definite, not Lorentzian
  p.N = canonical_N(CanonicalCase::Nilpotent, 3, 0.0, 0.0);
  CHECK_THROWS_AS(canonicalize(p), NotLorentzian);

  p.H = mat3({{{{1, 0, 0}}, {{0, -1, 0}}, {{0, 0, -1}}}});  // two negatives
  CHECK_THROWS_AS(canonicalize(p), NotLorentzian);

  p.H = mat3({{{{0, 0, 1}}, {{0.3, 1, 0}}, {{1, 0, 0}}}});  // not symmetric
  CHECK_THROWS_AS(canonicalize(p), NotLorentzian);

  p.H = prefer_H(3);
  p.N = mat3({{{{0, 1, 0}}, {{-0.5, 0, 0}}, {{0, 0, 0}}}});  // not skew
  CHECK_THROWS_AS(canonicalize(p), NotSkew);

  p.n = 4;
  p.H = SmallMat(4);
  p.N = SmallMat(4);
  CHECK_THROWS_AS(canonicalize(p), Error);
}

TEST_CASE("displayed nilpotent pair canonicalizes with identity A") {
  LorentzPair p;
  p.n = 3;
  p.H = prefer_H(3);
  p.N = mat3({{{{0, 0, 0}}, {{0, 0, 2}}, {{0, -2, 0}}}});
  CanonicalForm cf = canonicalize(p);
  CHECK(cf.tag == CanonicalCase::Nilpotent);
  CHECK(max_dev(cf.A, SmallMat::identity(3)) < 1e-12);
}

TEST_CASE("zero N normalizes H only") {
  std::mt19937_64 rng(2024);
  for (int n : {3, 5}) {
    SmallMat S = random_invertible(rng, n);
    LorentzPair p;
    p.n = n;
    p.H = congr(S, prefer_H(n));
    p.N = SmallMat(n);
    CanonicalForm cf = canonicalize(p);
    CHECK(cf.tag == (n == 3 ? CanonicalCase::RealPair : CanonicalCase::FirstType));
    CHECK(cf.lam == 0.0);
    CHECK(cf.mu == 0.0);
    CHECK(max_dev(congr(cf.A, p.H), prefer_H(n)) < 1e-10);
  }
  // the diagonal Lorentzian form also normalizes
  LorentzPair p;
  p.n = 3;
  p.H = mat3({{{{1, 0, 0}}, {{0, 1, 0}}, {{0, 0, -1}}}});
  p.N = SmallMat(3);
  CanonicalForm cf = canonicalize(p);
  CHECK(max_dev(congr(cf.A, p.H), prefer_H(3)) < 1e-12);
}

TEST_CASE("conjugated real pair recovers its eigenvalue") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 5; ++t) {
    SmallMat S = random_invertible(rng, 3);
    LorentzPair p;
    p.n = 3;
    p.H = congr(S, prefer_H(3));
    p.N = congr(S, canonical_N(CanonicalCase::RealPair, 3, 1.5, 0.0));
    CanonicalForm cf = canonicalize(p);
    REQUIRE(cf.tag == CanonicalCase::RealPair);
    CHECK(std::fabs(cf.lam - 1.5) < 1e-8);
  }
}

TEST_CASE("canonicalize round-trips 500 random conjugated pairs") {
  std::mt19937_64 rng(90210);
  std::uniform_real_distribution<double> par(0.3, 2.5);
  int reached[6] = {0, 0, 0, 0, 0, 0};
  for (int trial = 0; trial < 500; ++trial) {
    CaseSpec cs{};
    switch (trial % 10) {
      case 0: cs = {3, CanonicalCase::RealPair, par(rng), 0.0}; break;
      case 1: cs = {3, CanonicalCase::ImaginaryPair, par(rng), 0.0}; break;
      case 2: cs = {3, CanonicalCase::Nilpotent, 0.0, 0.0}; break;
      case 3: cs = {5, CanonicalCase::FirstType, par(rng), par(rng)}; break;
      case 4: cs = {5, CanonicalCase::FirstType, par(rng), 0.0}; break;
      case 5: cs = {5, CanonicalCase::FirstType, 0.0, par(rng)}; break;
      case 6: {
        double a = par(rng), b = par(rng);
        double lam = std::max(a, b) + 0.25, mu = std::min(a, b);
        cs = {5, CanonicalCase::SecondType, lam, mu};
        break;
      }
      case 7: cs = {5, CanonicalCase::ThirdType, 0.0, par(rng)}; break;
      case 8: cs = {5, CanonicalCase::ThirdType, 0.0, 0.0}; break;
      case 9: cs = {3, CanonicalCase::RealPair, par(rng), 0.0}; break;
    }
    SmallMat P = prefer_H(cs.n);
    SmallMat Nc = canonical_N(cs.tag, cs.n, cs.lam, cs.mu);
    SmallMat S = random_invertible(rng, cs.n);
    LorentzPair p;
    p.n = cs.n;
    p.H = congr(S, P);
    p.N = congr(S, Nc);

    CanonicalForm cf = canonicalize(p);
    REQUIRE(cf.tag == cs.tag);
    reached[static_cast<int>(cs.tag)]++;
    CHECK(std::fabs(cf.lam - cs.lam) <= 1e-6 * (1.0 + cs.lam));
    CHECK(std::fabs(cf.mu - cs.mu) <= 1e-6 * (1.0 + cs.mu));
    CHECK(max_dev(congr(cf.A, p.H), P) <= 1e-10);
    CHECK(max_dev(congr(cf.A, p.N), canonical_N(cs.tag, cs.n, cf.lam, cf.mu)) <=
          1e-8 * (1.0 + frob(p.N)));

    SmallMat B = solve_mat(p.H, p.N);
    SmallMat B3 = mul(B, mul(B, B));
    CHECK(std::fabs(trace_of(B)) <= 1e-8 * (1.0 + frob(B)));
    CHECK(std::fabs(trace_of(B3)) <= 1e-8 * (1.0 + frob(B3)));
    CHECK(eigen_axes_check(p));
  }
  for (int c = 0; c < 6; ++c) CHECK(reached[c] > 0);
}

TEST_CASE("eigen axes check flags corrupted pairs") {
  LorentzPair p;
  p.n = 3;
  p.H = prefer_H(3);
  p.N = canonical_N(CanonicalCase::ImaginaryPair, 3, 1.0, 0.0);
  CHECK(eigen_axes_check(p));
  // symmetric corruption pushes eigenvalues off the axes (the skewness
  // precondition is what makes the axes theorem true)
  SmallMat E = mat3({{{{0.4, 0.1, 0}}, {{0.1, 0, 0.2}}, {{0, 0.2, -0.3}}}});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) p.N.at(i, j) += E(i, j);
  CHECK_FALSE(eigen_axes_check(p));
}

TEST_CASE("killing field evaluation matches the displayed polynomial") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    KillingField k;
    k.s = {{{u(rng), u(rng), u(rng)}}};
    double m12 = u(rng), m13 = u(rng), m23 = u(rng);
    k.m(0, 1) = m12;
    k.m(1, 0) = -m12;
    k.m(0, 2) = m13;
    k.m(2, 0) = -m13;
    k.m(1, 2) = m23;
    k.m(2, 1) = -m23;
    k.lam = u(rng);
    k.r = {{{u(rng), u(rng), u(rng)}}};
    V3 x = {{{u(rng), u(rng), u(rng)}}};

    V3 v = killing_eval(k, x);
    double rx = k.r[0] * x[0] + k.r[1] * x[1] + k.r[2] * x[2];
    double xx = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    for (int j = 0; j < 3; ++j) {
      double mjk = k.m(j, 0) * x[0] + k.m(j, 1) * x[1] + k.m(j, 2) * x[2];
      double want = -k.s[j] - mjk + k.lam * x[j] + x[j] * rx - 0.5 * k.r[j] * xx;
      CHECK(v[j] == want);
    }

    // gradient against finite differences of the evaluation
    M3 g = killing_grad(k, x);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double got = g(i, j);
        double fd = testsup::fd_derive(
            [&](const V3& y) { return killing_eval(k, y)[j]; }, x, {i}, 1e-3);
        CHECK(testsup::close(got, fd, 1e-9));
      }
  }
}

TEST_CASE("embedded flow on the null cone pushes down to the field") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    KillingField k;
    k.s = {{{u(rng), u(rng), u(rng)}}};
    double m12 = u(rng), m13 = u(rng), m23 = u(rng);
    k.m(0, 1) = m12;
    k.m(1, 0) = -m12;
    k.m(0, 2) = m13;
    k.m(2, 0) = -m13;
    k.m(1, 2) = m23;
    k.m(2, 1) = -m23;
    k.lam = u(rng);
    k.r = {{{u(rng), u(rng), u(rng)}}};

    LorentzPair p = killing_to_pair(k);
    REQUIRE(p.n == 5);
    // the embedding is a valid pair
    CHECK_NOTHROW(canonicalize(p));
    CHECK(eigen_axes_check(p));

    V3 x = {{{u(rng), u(rng), u(rng)}}};
    Vec5 X{};
    X[0] = -0.5 * dot(x, x);
    X[1] = x[0];
    X[2] = x[1];
    X[3] = x[2];
    X[4] = 1.0;
    // X lies on the null cone of the preferred H
    CHECK(std::fabs(dot5(X, mulv(p.H, X), 5)) < 1e-14);

    SmallMat G = solve_mat(p.H, p.N);
    const double dt = 1e-4;
    Vec5 Xp = flow_apply(G, dt, X), Xm = flow_apply(G, -dt, X);
    V3 want = killing_eval(k, x);
    for (int j = 0; j < 3; ++j) {
      double fd = (Xp[static_cast<std::size_t>(1 + j)] / Xp[4] -
                   Xm[static_cast<std::size_t>(1 + j)] / Xm[4]) /
                  (2.0 * dt);
      CHECK(std::fabs(fd - want[j]) < 1e-6);
    }
  }
}

TEST_CASE("closedness residual separates gradient from twisting fields") {
  V3 x = {{{0.7, 0.4, -0.6}}};
  KillingField dil;
  dil.lam = 1.0;
  CHECK(closedness_residual(dil, x) < 1e-14);

  KillingField tr;
  tr.s = {{{1.0, -0.4, 0.2}}};
  CHECK(closedness_residual(tr, x) < 1e-14);

  KillingField rot;  // pure rotation: still a gradient direction field
  rot.m(1, 2) = 1.0;
  rot.m(2, 1) = -1.0;
  CHECK(closedness_residual(rot, x) < 1e-14);

  KillingField both = rot;  // rotation plus dilation twists
  both.lam = 1.0;
  CHECK(closedness_residual(both, x) > 1e-3);
}

TEST_CASE("fit_killing recovers model generator fields") {
  std::mt19937_64 rng(77);
  auto pts = sample_box(rng, {{{0.8, 0.7, 0.6}}}, 0.45, 14);

  SECTION("linear function gives a constant field") {
    auto fit = fit_killing(parse_expr("x1"), pts);
    CHECK(std::fabs(fit.field.s[0] + 1.0) < 1e-10);
    CHECK(std::fabs(fit.field.s[1]) < 1e-10);
    CHECK(std::fabs(fit.field.s[2]) < 1e-10);
    CHECK(std::fabs(fit.field.lam) < 1e-10);
    CHECK(norm(fit.field.r) < 1e-10);
    CHECK(fit.residual < 1e-10);
  }

  SECTION("log of radius gives the dilation field") {
    auto fit = fit_killing(parse_expr("log(sqrt(x1^2+x2^2+x3^2))"), pts);
    CHECK(std::fabs(fit.field.lam - 1.0) < 1e-9);
    CHECK(norm(fit.field.s) < 1e-9);
    CHECK(norm(fit.field.r) < 1e-9);
    CHECK(fit.residual < 1e-9);
  }

  SECTION("non-conformal gradient leaves a large residual") {
    auto fit = fit_killing(parse_expr("x1*x2*x3"), pts);
    CHECK(fit.residual > 0.05);
  }

  SECTION("too few points is rejected") {
    std::vector<V3> few(pts.begin(), pts.begin() + 9);
    CHECK_THROWS_AS(fit_killing(parse_expr("x1"), few), ConstraintViolation);
  }

  SECTION("degenerate sample set is rank deficient") {
    std::vector<V3> same(12, V3{{{0.5, 0.5, 0.5}}});
    CHECK_THROWS_AS(fit_killing(parse_expr("x1"), same), RankDeficient);
  }

  SECTION("vanishing gradient at a sample is a critical point") {
    auto bad = pts;
    bad.push_back({{{0.0, 0.3, 0.4}}});
    CHECK_THROWS_AS(fit_killing(parse_expr("x1*x1"), bad), CriticalPointError);
  }
}

TEST_CASE("classify_XYzero identifies the four model functions") {
  std::mt19937_64 rng(123);
  auto pts = sample_box(rng, {{{0.7, 0.9, 0.5}}}, 0.3, 16);

  SECTION("linear") {
    auto rep = classify_XYzero(parse_expr("x1"), pts);
    CHECK(rep.model == XYzeroModel::Linear);
    REQUIRE(rep.canonical_valid);
    CHECK(rep.canonical.tag == CanonicalCase::ThirdType);
    CHECK(rep.canonical.mu < 1e-8);
  }

  SECTION("log of radius") {
    auto rep = classify_XYzero(parse_expr("log(sqrt(x1^2+x2^2+x3^2))"), pts);
    CHECK(rep.model == XYzeroModel::LogR);
    REQUIRE(rep.canonical_valid);
    CHECK(rep.canonical.tag == CanonicalCase::FirstType);
    CHECK(std::fabs(rep.canonical.lam - 1.0) < 1e-7);
    // scaling f leaves the model tag alone
    auto rep2 = classify_XYzero(parse_expr("2*log(sqrt(x1^2+x2^2+x3^2))"), pts);
    CHECK(rep2.model == XYzeroModel::LogR);
  }

  SECTION("azimuthal angle") {
    auto rep = classify_XYzero(parse_expr("atan2(x3,x2)"), pts);
    CHECK(rep.model == XYzeroModel::AzimuthalAngle);
    REQUIRE(rep.canonical_valid);
    CHECK(rep.canonical.tag == CanonicalCase::FirstType);
    CHECK(rep.canonical.lam < 1e-8);
    CHECK(std::fabs(rep.canonical.mu - 1.0) < 1e-7);
  }

  SECTION("inverted linear") {
    auto rep = classify_XYzero(parse_expr("x1/(x1^2+x2^2+x3^2)"), pts);
    CHECK(rep.model == XYzeroModel::InvertedLinear);
    REQUIRE(rep.canonical_valid);
    CHECK(rep.canonical.tag == CanonicalCase::ThirdType);
    CHECK(norm(rep.fit.field.r) > norm(rep.fit.field.s));
  }

  SECTION("nonvanishing trace-free invariants are rejected up front") {
    auto rep = classify_XYzero(parse_expr("x1*x2*x3"), pts);
    CHECK(rep.model == XYzeroModel::NotClassifiable);
    CHECK_FALSE(rep.canonical_valid);
    CHECK(rep.xy_rel > 1e-6);
  }

  SECTION("rotation plus dilation generator is not a gradient direction") {
    // direct check on the mapping layer: such a field fails closedness and
    // its embedding lands in FirstType with both parameters alive
    KillingField k;
    k.lam = 0.8;
    k.m(1, 2) = 1.3;
    k.m(2, 1) = -1.3;
    double worst = 0.0;
    for (const auto& x : pts)
      worst = std::max(worst, closedness_residual(k, x));
    CHECK(worst > 1e-3);
    CanonicalForm cf = canonicalize(killing_to_pair(k));
    CHECK(cf.tag == CanonicalCase::FirstType);
    CHECK(cf.lam > 0.5);
    CHECK(cf.mu > 0.5);
  }
}

TEST_CASE("matrix block parsing and formatting") {
  std::string text =
      "0 0 1\n"
      "0 1 0\n"
      "1 0 0\n"
      "\n"
      "0 0 0\n"
      "0 0 2\n"
      "0 -2 0\n";
  LorentzPair p = parse_pair_blocks(text);
  CHECK(p.n == 3);
  CHECK(p.H(0, 2) == 1.0);
  CHECK(p.N(1, 2) == 2.0);
  CanonicalForm cf = canonicalize(p);
  CHECK(cf.tag == CanonicalCase::Nilpotent);

  // round-trip through the formatter
  LorentzPair q = parse_pair_blocks(format_matrix(p.H) + "\n" + format_matrix(p.N));
  CHECK(max_dev(q.H, p.H) == 0.0);
  CHECK(max_dev(q.N, p.N) == 0.0);

  CHECK_THROWS_AS(parse_pair_blocks("1 0\n0 1\n\n0 1\n-1 0\n"), ParseError);
  CHECK_THROWS_AS(parse_pair_blocks("0 0 1\n0 1 0\n1 0 0\n"), ParseError);
  CHECK_THROWS_AS(
      parse_pair_blocks("0 0 1\n0 1\n1 0 0\n\n0 0 0\n0 0 2\n0 -2 0\n"),
      ParseError);
  CHECK_THROWS_AS(
      parse_pair_blocks(
          "0 0 1\n0 1 0\n1 0 0\n\n0 0 0\n0 0 2\n0 -2 0\n\n0 0 1\n0 1 0\n1 0 0\n"),
      ParseError);
}
