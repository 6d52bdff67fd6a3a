#include <doctest.h>

#include <cmath>

#include "hamcalc/cone.hpp"
#include "hamcalc/errors.hpp"
#include "hamcalc/rng.hpp"

using namespace hamcalc;

namespace {

double lp_dual(Vec2 x, double alpha) {
  double beta = alpha / (alpha - 1);
  return std::pow(std::pow(std::abs(x.x), beta) + std::pow(std::abs(x.y), beta),
                  1 / beta);
}

double brute_support(const SublevelPolygon& poly, Vec2 x) {
  double best = -1e300;
  for (auto& v : poly.vertices) best = std::max(best, v.dot(x));
  return best;
}

}  // namespace

TEST_CASE("sublevel polygon of the round quadratic") {
  auto H = build_quadratic(1.0);
  auto poly = sublevel_polygon(H, 4.0, 512);
  for (auto& v : poly.vertices) CHECK(std::abs(v.norm() - 2.0) <= 1e-9);
  CHECK(poly.vertices.size() == 512);
  CHECK(poly.hausdorff_tol <= 1e-4);
  CHECK(poly.hausdorff_tol >= 1e-11);
  for (size_t i = 0; i < poly.vertices.size(); ++i) {
    Vec2 a = poly.vertices[i];
    Vec2 b = poly.vertices[(i + 1) % poly.vertices.size()];
    CHECK((a - H.p0).cross(b - a) >= 0);
  }
}

TEST_CASE("sublevel polygon of the l1 ball keeps its corners") {
  auto poly = sublevel_polygon(build_power_norm(1), 1.0, 512);
  for (Vec2 corner : {Vec2{1, 0}, Vec2{0, 1}, Vec2{-1, 0}, Vec2{0, -1}}) {
    double best = 1e300;
    for (auto& v : poly.vertices) best = std::min(best, (v - corner).norm());
    CHECK(best <= 1e-8);
  }
  CHECK(poly.vertices.size() <= 16);
}

TEST_CASE("degenerate and empty levels") {
  auto H = build_quadratic(0.5);
  auto poly = sublevel_polygon(H, 0.0, 512);
  CHECK(poly.degenerate());
  CHECK((poly.vertices[0] - H.p0).norm() <= 1e-10);
  CHECK_THROWS_AS(sublevel_polygon(H, -0.1, 512), domain_error);
  auto lifted = build_quadratic(0.5, {0, 0}, 1.0);
  CHECK_THROWS_AS(sublevel_polygon(lifted, 0.5, 512), domain_error);
  CHECK_THROWS_AS(sublevel_polygon(H, 100.0, 512), domain_error);
}

TEST_CASE("support query matches the vertex scan") {
  Rng rng(5);
  for (auto H : {build_quadratic(1.0), build_power_norm(1), build_power_norm(4),
                 build_power_norm(1e18), build_anisotropic(2, 0.5, 1)}) {
    auto poly = sublevel_polygon(H, 1.0, 512);
    for (int t = 0; t < 400; ++t) {
      Vec2 x = dir(rng.uniform(0, 2 * kPi)) * rng.uniform(0.1, 3.0);
      double got = poly.support(x);
      double want = brute_support(poly, x);
      CHECK(got == want);
      CHECK(poly.support_vertex(x) == poly.support_vertex(x));
    }
  }
}

TEST_CASE("cone evaluation on the round and l4 balls") {
  auto poly = sublevel_polygon(build_power_norm(2, 2), 4.0, 512);
  CHECK(cone_eval(poly, {3, 4}) == doctest::Approx(10.0).epsilon(1e-4));
  CHECK(cone_eval(poly, {0, 0}) == 0.0);

  auto p4 = sublevel_polygon(build_power_norm(4), 1.0, 4096);
  CHECK(cone_eval(p4, {1, 1}) ==
        doctest::Approx(std::pow(2.0, 0.75)).epsilon(1e-4));
  Rng rng(11);
  for (double alpha : {1.5, 2.0, 4.0}) {
    auto poly_a = sublevel_polygon(build_power_norm(alpha), 1.0, 4096);
    for (int t = 0; t < 200; ++t) {
      Vec2 x = dir(rng.uniform(0, 2 * kPi)) * rng.uniform(0.2, 2.0);
      CHECK(std::abs(cone_eval(poly_a, x) - lp_dual(x, alpha)) <=
            1e-3 * x.norm());
    }
  }
}

TEST_CASE("homogeneity exact on dyadic scalings, subadditive to rounding") {
  auto poly = sublevel_polygon(build_power_norm(4), 1.0, 512);
  Rng rng(21);
  for (int t = 0; t < 300; ++t) {
    Vec2 x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    Vec2 y{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    for (double s : {2.0, 0.5, 8.0})
      CHECK(cone_eval(poly, x * s) == s * cone_eval(poly, x));
    double lhs = cone_eval(poly, x + y);
    double rhs = cone_eval(poly, x) + cone_eval(poly, y);
    CHECK(lhs <= rhs + 1e-13 * (1 + std::abs(rhs)));
  }
}

TEST_CASE("cone values grow with the level") {
  auto H = build_power_norm(1.5);
  auto lo = sublevel_polygon(H, 0.5, 512);
  auto hi = sublevel_polygon(H, 1.5, 512);
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    Vec2 x = dir(rng.uniform(0, 2 * kPi));
    CHECK(cone_eval(lo, x) <=
          cone_eval(hi, x) + lo.hausdorff_tol + hi.hausdorff_tol);
  }
}

TEST_CASE("support identity at a gradient point of the round quadratic") {
  auto H = build_quadratic(0.5);
  auto rep = support_identity_check(H, {1, 0});
  CHECK(rep.level == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.max_pq_residual <= rep.tol);
  CHECK(rep.max_pq_residual <= 1e-6);
  CHECK(rep.max_vertex_angle <= 0.05);
  CHECK_THROWS_AS(support_identity_check(H, H.p0), domain_error);
}

TEST_CASE("support identity across curved families at random points") {
  Rng rng(41);
  for (auto H : {build_quadratic(0.5), build_power_norm(4),
                 build_power_norm(1.5)}) {
    for (int t = 0; t < 60; ++t) {
      Vec2 p = dir(rng.uniform(0, 2 * kPi)) * rng.uniform(0.3, 1.6);
      auto rep = support_identity_check(H, p);
      CHECK(rep.max_pq_residual <= rep.tol);
      CHECK(rep.max_vertex_angle <= 0.1);
    }
  }
}

TEST_CASE("margin constant for the square-root support profile") {
  auto rep = cone_margin_constant(build_power_norm(2, 2), 1.0);
  CHECK_FALSE(rep.capped);
  CHECK(rep.C <= 3.0);
  CHECK(rep.certificate.size() == 96);
  for (auto& row : rep.certificate) CHECK(row.worst_gap >= -1e-6);

  auto rep2 = cone_margin_constant(build_quadratic(0.5), 1.0);
  CHECK_FALSE(rep2.capped);
  CHECK(rep2.C <= 4.0);
  CHECK(rep2.certificate.size() == 96);
}

TEST_CASE("margin constant stays finite for the flat edge family") {
  auto rep = cone_margin_constant(build_flat_edge({0, 0}, {0, 1}), 1.0);
  CHECK_FALSE(rep.capped);
  CHECK(rep.C <= 64.0);
  for (auto& row : rep.certificate) CHECK(row.worst_gap >= -1e-6);
}

TEST_CASE("cone table reproduces the radial support profile") {
  auto H = build_power_norm(2, 2);  // supports are sqrt(k)|x|
  ConeTable table(H, 64, 4.0, 257);
  for (int i = 0; i < 64; ++i) {
    CHECK((table.direction(i) + table.direction(table.opposite(i))).norm() <=
          1e-12);
    for (double k : {0.1, 0.5, 1.0, 2.0, 3.7}) {
      CHECK(table.support(i, k) == doctest::Approx(std::sqrt(k)).epsilon(2e-3));
      double back = table.level_for(i, table.support(i, k));
      CHECK(back == doctest::Approx(k).epsilon(1e-2));
    }
    CHECK(table.support(i, 0.0) <= 1e-9);
    CHECK(table.level_for(i, 10.0) == table.k_max());
    CHECK(table.level_for(i, -1.0) == table.k_min());
  }
  CHECK_THROWS_AS(ConeTable(H, 64, 0.0, 257), domain_error);
}
