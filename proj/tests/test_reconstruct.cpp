#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "conj3/expr.hpp"
#include "conj3/reconstruct.hpp"
#include "support.hpp"

using namespace conj3;

namespace {

// Solved cylindrical profile with speed^2 = 1/r^2 + 1 and its conjugate.
const char* k_cyl_f =
    "log((sqrt(1+x2^2+x3^2)-1)/sqrt(x2^2+x3^2))+sqrt(1+x2^2+x3^2)";
const char* k_cyl_g = "x1-atan2(x3,x2)";

const char* k_hopf_f = "((1-(x1^2+x2^2+x3^2))*x2+2*x1*x3)/(x2^2+x3^2)";
const char* k_hopf_g = "((1-(x1^2+x2^2+x3^2))*x3-2*x1*x2)/(x2^2+x3^2)";

std::vector<V3> sample_box(std::mt19937_64& rng, int n, const V3& lo,
                           const V3& hi) {
  std::vector<V3> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    pts.push_back(V3{{{testsup::uni(rng, lo[0], hi[0]),
                       testsup::uni(rng, lo[1], hi[1]),
                       testsup::uni(rng, lo[2], hi[2])}}});
  return pts;
}

double grad_seed_cos(const ExprPtr& e, const V3& x, const V3& w) {
  V3 dg = eval_jet(e, x).g;
  return dot(dg, w) / (norm(dg) * norm(w));
}

// Max deviation of the reconstructed values from closed-form g, after
// removing the g(base) = 0 offset.
double recon_error(const ReconstructedField& rf, const ExprPtr& exact) {
  double g0 = eval_jet(exact, rf.grid.base).v;
  double worst = 0.0;
  for (std::size_t p = 0; p < rf.grid.paths.size(); ++p)
    for (std::size_t k = 0; k < rf.grid.paths[p].size(); ++k) {
      double want = eval_jet(exact, rf.grid.paths[p][k]).v - g0;
      worst = std::max(worst, std::fabs(rf.values[p][k] - want));
    }
  return worst;
}

}  // namespace

TEST_CASE("closed-form pairs pass pointwise verification", "[reconstruct]") {
  std::mt19937_64 rng(901u);
  struct Case {
    const char* fsrc;
    const char* gsrc;
    V3 lo, hi;
  };
  const Case cases[] = {
      {"x2*(x1^2+x2^2+x3^2)/(x2^2+x3^2)", "x3*(x1^2+x2^2+x3^2)/(x2^2+x3^2)",
       {{{-0.8, 0.3, 0.3}}}, {{{0.8, 1.2, 1.2}}}},
      {k_hopf_f, k_hopf_g, {{{-0.8, 0.3, 0.3}}}, {{{0.8, 1.2, 1.2}}}},
      {"(x1^2-x2^2-x3^2)/2", "x1*sqrt(x2^2+x3^2)", {{{0.2, 0.3, 0.3}}},
       {{{1.2, 1.2, 1.2}}}},
      {"x1/(x1^2+x2^2+x3^2)", "x2/(x1^2+x2^2+x3^2)", {{{0.3, 0.3, 0.3}}},
       {{{1.2, 1.2, 1.2}}}},
      {k_cyl_f, k_cyl_g, {{{-0.8, 0.3, 0.3}}}, {{{0.8, 1.2, 1.2}}}},
  };
  for (const Case& c : cases) {
    INFO(c.fsrc);
    PairReport r = verify_pair(parse_expr(c.fsrc), parse_expr(c.gsrc),
                               sample_box(rng, 60, c.lo, c.hi));
    CHECK(r.pass);
    CHECK(r.norm_dev < 1e-9);
    CHECK(r.ortho_dev < 1e-9);
  }
  // A function is never its own conjugate away from critical points.
  PairReport bad =
      verify_pair(parse_expr("x1"), parse_expr("x1"),
                  sample_box(rng, 10, V3{{{0.1, 0.1, 0.1}}}, V3{{{1, 1, 1}}}));
  CHECK_FALSE(bad.pass);
  CHECK(bad.ortho_dev > 0.9);
  CHECK_THROWS_AS(verify_pair(parse_expr("x1^2+x2^2+x3^2"), parse_expr("x1"),
                              std::vector<V3>{V3{}}),
                  CriticalPointError);
}

TEST_CASE("invariant relations hold for a conjugate pair", "[reconstruct]") {
  std::mt19937_64 rng(902u);
  std::vector<V3> pts =
      sample_box(rng, 40, V3{{{-0.8, 0.25, 0.25}}}, V3{{{0.8, 1.2, 1.2}}});
  ExprPtr f = parse_expr(k_hopf_f), g = parse_expr(k_hopf_g);
  for (double eps : {0.3, 0.7, 2.0}) {
    RelationReport r = conjugate_relations(f, g, pts, eps);
    INFO("eps = " << eps);
    CHECK(r.x_equal < 1e-8);
    CHECK(r.x_combo < 1e-8);
    CHECK(r.z_combo < 1e-8);
    CHECK(r.mixed_trace < 1e-8);
    CHECK(r.z_conjugate < 1e-8);
    CHECK(r.worst() < 1e-8);
  }
  // At eps = 0 the combination residuals compare a jet with itself.
  RelationReport r0 = conjugate_relations(f, g, pts, 0.0);
  CHECK(r0.x_combo == 0.0);
  CHECK(r0.z_combo == 0.0);
  CHECK(r0.worst() < 1e-8);
  // A non-conjugate pair trips the orthogonality-sensitive relations.
  RelationReport bad =
      conjugate_relations(parse_expr("x1*x2*x3"), parse_expr("x1"), pts, 0.7);
  CHECK(bad.worst() > 1e-3);
}

TEST_CASE("p-harmonic model pairs have vanishing trace invariant",
          "[reconstruct]") {
  // Z = 0 is the p-harmonic equation for p = 3; these model pairs satisfy
  // it identically, member by member.
  std::mt19937_64 rng(903u);
  const char* srcs[][2] = {
      {"x1", "x2"},
      {"log(x1^2+x2^2+x3^2)/2", "atan2(x3,x2)"},
      {"x1/(x1^2+x2^2+x3^2)", "x2/(x1^2+x2^2+x3^2)"},
  };
  for (auto& s : srcs) {
    INFO(s[0]);
    for (int k = 0; k < 20; ++k) {
      V3 x = V3{{{testsup::uni(rng, -1.2, 1.2), testsup::uni(rng, 0.3, 1.2),
                  testsup::uni(rng, 0.3, 1.2)}}};
      for (const char* src : s) {
        auto [z, zs] = detail::z_expanded(eval_jet(parse_expr(src), x));
        CHECK(std::fabs(z) / zs < 1e-12);
      }
    }
  }
  // The middle pair is conjugate only after a conformal change: the gradient
  // speeds are 1/r and 1/rho, which differ pointwise.
  std::vector<V3> pts =
      sample_box(rng, 10, V3{{{0.3, 0.3, 0.3}}}, V3{{{1.2, 1.2, 1.2}}});
  PairReport mid = verify_pair(parse_expr("log(x1^2+x2^2+x3^2)/2"),
                               parse_expr("atan2(x3,x2)"), pts);
  CHECK_FALSE(mid.pass);
  CHECK(mid.ortho_dev < 1e-12);
  CHECK(mid.norm_dev > 1e-2);
}

TEST_CASE("cylindrical field is reconstructed on a dense grid",
          "[reconstruct]") {
  ExprPtr f = parse_expr(k_cyl_f);
  ExprPtr g = parse_expr(k_cyl_g);
  V3 lo{{{-0.45, 0.6, 0.4}}}, hi{{{0.45, 1.4, 1.2}}};
  PathGrid grid = box_snake(lo, hi, {10, 10, 10}, eval_jet(g, lo).g);
  ReconstructedField rf = reconstruct_g(f, grid);
  REQUIRE(rf.values.size() == 1);
  REQUIRE(rf.values[0].size() == 1000);
  CHECK(rf.values[0][0] == 0.0);
  CHECK(recon_error(rf, g) < 1e-6);
  // The continued directions agree with the conjugate gradient throughout.
  for (std::size_t k = 0; k < rf.omegas[0].size(); k += 37)
    CHECK(grad_seed_cos(g, rf.grid.paths[0][k], rf.omegas[0][k]) > 0.999999);
}

TEST_CASE("negated seed reconstructs the negated conjugate", "[reconstruct]") {
  ExprPtr f = parse_expr(k_cyl_f);
  ExprPtr g = parse_expr(k_cyl_g);
  V3 lo{{{-0.3, 0.7, 0.5}}}, hi{{{0.3, 1.1, 0.9}}};
  PathGrid grid = box_snake(lo, hi, {4, 4, 4}, -1.0 * eval_jet(g, lo).g);
  ReconstructedField rf = reconstruct_g(f, grid);
  double g0 = eval_jet(g, lo).v;
  double worst = 0.0;
  for (std::size_t k = 0; k < rf.values[0].size(); ++k) {
    double want = -(eval_jet(g, rf.grid.paths[0][k]).v - g0);
    worst = std::max(worst, std::fabs(rf.values[0][k] - want));
  }
  CHECK(worst < 1e-8);
  // A seed nearest to a branch yet far from it is refused outright, and one
  // equidistant from all candidates cannot select a branch at all.
  V3 tilt = eval_jet(f, lo).g + 0.2 * eval_jet(g, lo).g;
  PathGrid off = box_snake(lo, hi, {3, 3, 3}, tilt);
  CHECK_THROWS_AS(reconstruct_g(f, off), WrongBranch);
  PathGrid ambi = box_snake(lo, hi, {3, 3, 3}, eval_jet(f, lo).g);
  CHECK_THROWS_AS(reconstruct_g(f, ambi), BranchSwitch);
}

TEST_CASE("reconstruction is path independent", "[reconstruct]") {
  ExprPtr f = parse_expr(k_cyl_f);
  ExprPtr g = parse_expr(k_cyl_g);
  V3 a{{{0.0, 0.7, 0.4}}}, b{{{0.4, 1.1, 0.9}}};
  V3 via1{{{0.4, 0.7, 0.4}}}, via2{{{0.0, 1.1, 0.9}}};
  V3 seed = eval_jet(g, a).g;
  PathGrid g1{a, {{a, via1, b}}, 0.5, seed};
  PathGrid g2{a, {{a, via2, b}}, 0.5, seed};
  double v1 = reconstruct_g(f, g1).values[0].back();
  double v2 = reconstruct_g(f, g2).values[0].back();
  CHECK(std::fabs(v1 - v2) < 1e-6);
  double want = eval_jet(g, b).v - eval_jet(g, a).v;
  CHECK(std::fabs(v1 - want) < 1e-6);
}

TEST_CASE("radially symmetric field needs a reference conjugate",
          "[reconstruct]") {
  // f = log r has a whole circle of directions at every point; the azimuth
  // reference resolves the branch and the reconstruction lands on it.
  ExprPtr f = parse_expr("log(x1^2+x2^2+x3^2)/2");
  ExprPtr ref = parse_expr("acos(x1/sqrt(x1^2+x2^2+x3^2))");
  V3 lo{{{-0.3, 0.5, 0.3}}}, hi{{{0.3, 1.1, 0.9}}};
  PathGrid grid = box_snake(lo, hi, {10, 10, 10}, eval_jet(ref, lo).g);
  ReconstructedField rf = reconstruct_g(f, grid, ref);
  CHECK(recon_error(rf, ref) < 1e-6);
  CHECK_THROWS_AS(reconstruct_g(f, grid), BranchSwitch);
}

TEST_CASE("non-integrable fields are refused before integration",
          "[reconstruct]") {
  struct Case {
    const char* src;
    V3 base;
  };
  // Saddle with no real directions; profile violating the closedness ODE;
  // cylindrical profile off the solvable family.
  const Case cases[] = {
      {"x1*x2*x3", {{{1.0, 1.0, 1.0}}}},
      {"x2^2+x3^2", {{{0.4, 0.7, 0.5}}}},
      {"log(sqrt(x2^2+x3^2))+sqrt(x2^2+x3^2)", {{{0.0, 1.0, 0.5}}}},
  };
  for (const Case& c : cases) {
    INFO(c.src);
    PathGrid grid;
    grid.base = c.base;
    grid.paths = {{c.base, c.base + V3{{{0.05, 0.0, 0.0}}}}};
    grid.h = 0.1;
    grid.seed = V3{{{1.0, 0.0, 0.0}}};
    CHECK_THROWS_AS(reconstruct_g(parse_expr(c.src), grid), NonIntegrable);
  }
}

TEST_CASE("grid constraints are validated", "[reconstruct]") {
  ExprPtr f = parse_expr(k_cyl_f);
  ExprPtr g = parse_expr(k_cyl_g);
  V3 a{{{0.0, 0.8, 0.5}}};
  V3 seed = eval_jet(g, a).g;
  PathGrid empty{a, {}, 0.1, seed};
  CHECK_THROWS_AS(reconstruct_g(f, empty), ConstraintViolation);
  PathGrid gap{a, {{a, a + V3{{{0.5, 0.0, 0.0}}}}}, 0.1, seed};
  CHECK_THROWS_AS(reconstruct_g(f, gap), ConstraintViolation);
  PathGrid orphan{a, {{a + V3{{{0.05, 0.0, 0.0}}}, a}}, 0.1, seed};
  CHECK_THROWS_AS(reconstruct_g(f, orphan), ConstraintViolation);
  CHECK_THROWS_AS(box_snake(a, a + V3{{{0.1, 0.1, 0.1}}}, {0, 2, 2}, seed),
                  ConstraintViolation);
  // A second path may branch off any node visited by the first.
  V3 b = a + V3{{{0.1, 0.0, 0.0}}}, c = b + V3{{{0.0, 0.1, 0.0}}};
  PathGrid forked{a, {{a, b}, {b, c}}, 0.1, seed};
  ReconstructedField rf = reconstruct_g(f, forked);
  double want = eval_jet(g, c).v - eval_jet(g, a).v;
  CHECK(std::fabs(rf.values[1].back() - want) < 1e-8);
}

TEST_CASE("loop circulation separates conjugate from spurious fields",
          "[reconstruct]") {
  // Closed field: the circulation is quadrature noise.
  ExprPtr f = parse_expr(k_cyl_f);
  ExprPtr g = parse_expr(k_cyl_g);
  std::vector<V3> loop{{{{0.0, 1.0, 0.4}}},
                       {{{0.3, 1.0, 0.4}}},
                       {{{0.3, 0.8, 0.7}}},
                       {{{0.0, 0.8, 0.7}}},
                       {{{0.0, 1.0, 0.4}}}};
  V3 seed = eval_jet(g, loop[0]).g;
  CHECK(std::fabs(loop_residual(f, loop, seed)) < 1e-7);
  // Direction field of a profile violating the closedness ODE: the
  // circulation survives at the size of the enclosed defect.
  ExprPtr bad = parse_expr("log(sqrt(x2^2+x3^2))+sqrt(x2^2+x3^2)");
  std::vector<V3> square{{{{0.0, 0.8, 0.3}}},
                         {{{0.4, 0.8, 0.3}}},
                         {{{0.4, 1.2, 0.3}}},
                         {{{0.0, 1.2, 0.3}}},
                         {{{0.0, 0.8, 0.3}}}};
  Jet3 fb = eval_jet(bad, square[0]);
  DirectionSolution sol = solve_directions(fb);
  REQUIRE(sol.cls == DirClass::FourDistinct);
  CHECK(std::fabs(loop_residual(bad, square, sol.omegas[0])) > 1e-3);
  // Degenerate loops and open polylines.
  CHECK(loop_residual(f, {loop[0]}, seed) == 0.0);
  CHECK_THROWS_AS(loop_residual(f, {loop[0], loop[1]}, seed),
                  ConstraintViolation);
}

TEST_CASE("loop quadrature error falls at fourth order", "[reconstruct]") {
  // On an asymmetric triangle the fixed-step circulation is pure quadrature
  // error; each halving must cut it by at least 4 (fourth order gives 16).
  std::vector<V3> tri{{{{0.0, 0.6, 0.35}}},
                      {{{0.5, 1.3, 0.4}}},
                      {{{-0.2, 0.7, 1.1}}},
                      {{{0.0, 0.6, 0.35}}}};
  ExprPtr f = parse_expr(k_cyl_f);
  V3 seed = eval_jet(parse_expr(k_cyl_g), tri[0]).g;
  double e1 = std::fabs(loop_residual(f, tri, seed, 1));
  double e2 = std::fabs(loop_residual(f, tri, seed, 2));
  double e4 = std::fabs(loop_residual(f, tri, seed, 4));
  CHECK(e1 > 1e-5);
  CHECK(e1 / e2 > 4.0);
  CHECK(e2 / e4 > 4.0);
  CHECK(std::fabs(loop_residual(f, tri, seed)) < 1e-9);
}

TEST_CASE("transported directions form a closed field only when conjugate",
          "[reconstruct]") {
  // d(omega) symmetry probed by finite differences of the transported field.
  auto asym = [](const ExprPtr& e, const V3& x0, const V3& w0) {
    const double h = 1e-3;
    M3 Dw;
    for (int a = 0; a < 3; ++a) {
      V3 dp{}, dm{};
      dp[a] = h;
      dm[a] = -h;
      V3 wp = transport_direction(e, x0, w0, x0 + dp, 2);
      V3 wm = transport_direction(e, x0, w0, x0 + dm, 2);
      for (int i = 0; i < 3; ++i) Dw(i, a) = (wp[i] - wm[i]) / (2.0 * h);
    }
    double worst = 0.0, scale = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < i; ++j) {
        worst = std::max(worst, std::fabs(Dw(i, j) - Dw(j, i)));
        scale = std::max({scale, std::fabs(Dw(i, j)), std::fabs(Dw(j, i))});
      }
    return worst / (scale + 1.0);
  };
  V3 x{{{0.2, 0.9, 0.6}}};
  ExprPtr f = parse_expr(k_cyl_f);
  V3 w = eval_jet(parse_expr(k_cyl_g), x).g;
  CHECK(asym(f, x, w) < 1e-5);
  ExprPtr bad = parse_expr("log(sqrt(x2^2+x3^2))+sqrt(x2^2+x3^2)");
  Jet3 fb = eval_jet(bad, x);
  DirectionSolution sol = solve_directions(fb);
  CHECK(asym(bad, x, sol.omegas[0]) > 1e-3);
}

TEST_CASE("reconstructed values verify as a conjugate by differencing",
          "[reconstruct]") {
  // Central differences of the reconstructed grid recover grad g, which must
  // match grad f in speed and be orthogonal to it.
  ExprPtr f = parse_expr(k_cyl_f);
  ExprPtr g = parse_expr(k_cyl_g);
  V3 lo{{{-0.3, 0.7, 0.5}}}, hi{{{0.3, 1.3, 1.1}}};
  const int n = 13;
  PathGrid grid = box_snake(lo, hi, {n, n, n}, eval_jet(g, lo).g);
  ReconstructedField rf = reconstruct_g(f, grid);
  // Recover the lexicographic value table from the snake order.
  std::vector<double> tab(static_cast<std::size_t>(n) * n * n);
  std::size_t q = 0;
  for (int i = 0; i < n; ++i)
    for (int jj = 0; jj < n; ++jj) {
      int j = i % 2 == 0 ? jj : n - 1 - jj;
      long row = static_cast<long>(i) * n + jj;
      for (int kk = 0; kk < n; ++kk) {
        int k = row % 2 == 0 ? kk : n - 1 - kk;
        tab[static_cast<std::size_t>((i * n + j) * n + k)] = rf.values[0][q++];
      }
    }
  std::array<double, 3> d{(hi[0] - lo[0]) / (n - 1), (hi[1] - lo[1]) / (n - 1),
                          (hi[2] - lo[2]) / (n - 1)};
  double worst_norm = 0.0, worst_ortho = 0.0;
  for (int i = 2; i + 2 < n; i += 2)
    for (int j = 2; j + 2 < n; j += 2)
      for (int k = 2; k + 2 < n; k += 2) {
        auto at = [&](int a, int b, int c) {
          return tab[static_cast<std::size_t>((a * n + b) * n + c)];
        };
        // Fourth-order five-point stencil; the second-order one would put
        // its own truncation error above the tolerance.
        auto d5 = [&](int a) {
          int ii = i + (a == 0 ? 1 : 0), jc = j + (a == 1 ? 1 : 0),
              kc = k + (a == 2 ? 1 : 0);
          int im = i - (a == 0 ? 1 : 0), jm = j - (a == 1 ? 1 : 0),
              km = k - (a == 2 ? 1 : 0);
          double p1 = at(ii, jc, kc), m1 = at(im, jm, km);
          double p2 = at(2 * ii - i, 2 * jc - j, 2 * kc - k);
          double m2 = at(2 * im - i, 2 * jm - j, 2 * km - k);
          return (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * d[a]);
        };
        V3 dg{{{d5(0), d5(1), d5(2)}}};
        V3 x{{{lo[0] + i * d[0], lo[1] + j * d[1], lo[2] + k * d[2]}}};
        V3 df = eval_jet(f, x).g;
        double nf = norm(df), ng = norm(dg);
        worst_norm = std::max(worst_norm, std::fabs(nf - ng) / nf);
        worst_ortho =
            std::max(worst_ortho, std::fabs(dot(df, dg)) / (nf * ng));
      }
  CHECK(worst_norm < 1e-4);
  CHECK(worst_ortho < 1e-4);
}

TEST_CASE("csv export lists every node with full precision", "[reconstruct]") {
  ExprPtr f = parse_expr(k_cyl_f);
  ExprPtr g = parse_expr(k_cyl_g);
  V3 lo{{{0.0, 0.8, 0.5}}};
  PathGrid grid = box_snake(lo, lo + V3{{{0.2, 0.2, 0.2}}}, {2, 2, 2},
                            eval_jet(g, lo).g);
  ReconstructedField rf = reconstruct_g(f, grid);
  std::string csv = to_csv(rf);
  CHECK(csv.rfind("x1,x2,x3,g\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  // Parse back the last row and compare bit-for-bit.
  std::size_t cut = csv.rfind('\n', csv.size() - 2);
  std::string last = csv.substr(cut + 1);
  double a, b, c, v;
  REQUIRE(std::sscanf(last.c_str(), "%lf,%lf,%lf,%lf", &a, &b, &c, &v) == 4);
  const V3& xlast = rf.grid.paths[0].back();
  CHECK(a == xlast[0]);
  CHECK(b == xlast[1]);
  CHECK(c == xlast[2]);
  CHECK(v == rf.values[0].back());
}
