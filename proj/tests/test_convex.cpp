#include <doctest.h>

#include <cmath>
#include <limits>

#include "hamcalc/convex.hpp"
#include "hamcalc/errors.hpp"
#include "hamcalc/rng.hpp"

using namespace hamcalc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent 1D conjugate oracle: brute maximization on a fine lattice.
double conj1d_brute(const std::function<double(double)>& f, double q) {
  double best = -kInf;
  for (int i = 0; i <= 40000; ++i) {
    double t = -4 + 8.0 * i / 40000;
    best = std::max(best, q * t - f(t));
  }
  return best;
}

}  // namespace

TEST_CASE("conjugate of the self-dual quadratic") {
  auto L = legendre_transform(build_quadratic(0.5), Box::centered(6), 257);
  CHECK(L.interp({3, 4}) == doctest::Approx(12.5).epsilon(1e-4));
  CHECK(L.interp({0, 0}) == 0.0);
  CHECK(L.interp({-2, 1}) == doctest::Approx(2.5).epsilon(1e-4));
}

TEST_CASE("conjugate of |p|^2 against the 1D brute oracle") {
  auto H = build_quadratic(1.0);
  auto L = legendre_transform(H, Box::centered(6), 257);
  double want = conj1d_brute([](double t) { return t * t; }, 2.0);
  CHECK(want == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(L.interp({2, 0}) == doctest::Approx(want).epsilon(1e-3));
}

TEST_CASE("conjugate of the separable quartic") {
  auto H = build_power_norm(4, 4, 0.25);
  CHECK(H({1, 2}) == doctest::Approx(0.25 * 17).epsilon(1e-13));
  auto L = legendre_transform(H, Box::centered(4), 257);
  double one_axis = conj1d_brute([](double t) { return 0.25 * t * t * t * t; }, 1.0);
  CHECK(one_axis == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(L.interp({1, 1}) == doctest::Approx(1.5).epsilon(2e-3));
  CHECK(L.interp({1, 1}) == doctest::Approx(2 * one_axis).epsilon(2e-3));
}

TEST_CASE("double conjugate returns the oracle on the inner half box") {
  auto H = build_quadratic(0.5);
  auto L = legendre_transform(H, Box::centered(4), 129);
  auto LL = legendre_transform(L, 129);
  double h = 8.0 / 128;
  double lip = 4 * std::sqrt(2.0);
  double bound = 4 * h * (1 + lip);
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    Vec2 p{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    CHECK(std::abs(LL.interp(p) - H(p)) <= bound);
  }
}

TEST_CASE("conjugate grid is convex on its nodes") {
  auto L = legendre_transform(build_power_norm(4, 2), Box::centered(4), 193);
  double scale = 1 + L.max_abs();
  const int dirs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
  for (int j = 1; j + 1 < L.ny; ++j)
    for (int i = 1; i + 1 < L.nx; ++i)
      for (auto& d : dirs) {
        if (i + d[0] >= L.nx || j + d[1] >= L.ny || i - d[0] < 0 ||
            j - d[1] < 0 || j + d[1] < 0 || j - d[1] >= L.ny)
          continue;
        double mid = L.at(i, j);
        double avg = 0.5 * (L.at(i - d[0], j - d[1]) + L.at(i + d[0], j + d[1]));
        CHECK(mid <= avg + 1e-12 * scale);
      }
}

TEST_CASE("discrete Young inequality on lattice pairs") {
  auto H = build_quadratic(0.5);
  Box box = Box::centered(4);
  int n = 257;
  double h = box.width() / (n - 1);
  auto L = legendre_transform(H, box, n);
  Rng rng(99);
  std::vector<FyPair> pairs;
  pairs.reserve(100000);
  for (int t = 0; t < 100000; ++t) {
    Vec2 p{box.lo.x + h * static_cast<double>(rng.below(n)),
           box.lo.y + h * static_cast<double>(rng.below(n))};
    Vec2 q{L.origin.x + L.h * static_cast<double>(rng.below(L.nx)),
           L.origin.y + L.h * static_cast<double>(rng.below(L.ny))};
    pairs.push_back({p, q, false});
  }
  auto g = fenchel_gap(H, L, pairs);
  CHECK(g.max_violation <= 1e-9);
}

TEST_CASE("gradient pairs meet Fenchel equality") {
  auto H = build_quadratic(0.5);
  auto L = legendre_transform(H, Box::centered(4), 257);
  auto g = fenchel_gap(H, L, {{{1, 2}, {1, 2}, true}});
  CHECK(g.max_equality_residual <= 1e-12);

  auto Hf = build_flat_edge({0, 0}, {0, 1});
  auto Lf = legendre_transform(Hf, Box::centered(4), 257);
  auto gf = fenchel_gap(Hf, Lf, {{{0, 0}, {0, 0}, true}, {{0, 1}, {0, 0}, true}});
  CHECK(gf.max_equality_residual <= 1e-12);
}

TEST_CASE("subdifferential of a smooth oracle is its gradient") {
  auto H = build_quadratic(0.5);
  auto s = subdifferential_set(H, {1, 2}, 0.5);
  REQUIRE(s.kind() == SubdifferentialSet::Kind::point);
  CHECK((s.extreme_points[0] - Vec2{1, 2}).norm() <= 1e-3);
}

TEST_CASE("subdifferential of the l1 norm on an axis is a segment") {
  auto H = build_power_norm(1);
  auto s = subdifferential_set(H, {0, 0.7}, 0.5);
  REQUIRE(s.kind() == SubdifferentialSet::Kind::segment);
  Vec2 a = s.extreme_points[0], b = s.extreme_points[1];
  if (a.x > b.x) std::swap(a, b);
  CHECK((a - Vec2{-1, 1}).norm() <= 2e-3);
  CHECK((b - Vec2{1, 1}).norm() <= 2e-3);
  for (auto& q : s.extreme_points) {
    for (int k = 0; k < 64; ++k) {
      Vec2 pp = Vec2{0, 0.7} + dir(2 * kPi * k / 64) * 0.3;
      CHECK(H(pp) >= H({0, 0.7}) + q.dot(pp - Vec2{0, 0.7}) -
                         s.tol * (1 + (pp - Vec2{0, 0.7}).norm()));
    }
  }
}

TEST_CASE("subdifferential at a flat minimum is orthogonal to the flat") {
  auto H = build_flat_edge({0, 0}, {0, 1});
  auto s = subdifferential_set(H, {0, 0.5}, 0.4);
  Vec2 along{0, 1};
  for (auto& q : s.extreme_points) CHECK(std::abs(q.dot(along)) <= 1e-3);
}

TEST_CASE("grid subdifferential matches the analytic gradient") {
  auto base = build_quadratic(0.5);
  auto g = GridField::sample([&](Vec2 p) { return base(p); }, Box::centered(4), 257);
  auto s = subdifferential_set(g, {0.5, 0.25}, 0.5);
  REQUIRE(s.kind() == SubdifferentialSet::Kind::point);
  CHECK((s.extreme_points[0] - Vec2{0.5, 0.25}).norm() <= 5e-3);
  CHECK_THROWS_AS(subdifferential_set(g, {0.5, 0.25}, 0.5 * g.h), domain_error);
}

TEST_CASE("conjugate subdifferential: points off the sphere, rays on it") {
  auto H = build_power_norm(4);
  auto inner = subdifferential_of_conjugate(H, {0.3, 0.1}, Box::centered(4), 257, 1e-9);
  CHECK(inner.kind() == SubdifferentialSet::Kind::point);
  CHECK(inner.extreme_points[0].norm() <= 0.05);

  auto ray = subdifferential_of_conjugate(H, {1, 0}, Box::centered(4), 257, 1e-9);
  REQUIRE(ray.kind() == SubdifferentialSet::Kind::segment);
  Vec2 a = ray.extreme_points[0], b = ray.extreme_points[1];
  if (a.x > b.x) std::swap(a, b);
  CHECK(a.norm() <= 0.05);
  CHECK(b.x == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(std::abs(b.y) <= 0.05);
}

TEST_CASE("conjugate subdifferential dichotomy for curved families") {
  Rng rng(7);
  for (auto H : {build_quadratic(0.5), build_power_norm(1.5),
                 build_power_norm(4), build_anisotropic(2, 0.5, 1)}) {
    for (int t = 0; t < 24; ++t) {
      Vec2 q = dir(rng.uniform(0, 2 * kPi)) * rng.uniform(0, 1.2);
      auto s = subdifferential_of_conjugate(H, q, Box::centered(4), 193, 1e-9);
      CHECK(s.kind() != SubdifferentialSet::Kind::polygon);
    }
  }
}

TEST_CASE("flat pair functional on the round quadratic") {
  auto H = build_quadratic(0.5);
  auto r = estimate_phi(H, 1.0, 0.5, 720);
  double want = 0.5 * 0.5 / (2 * std::sqrt(2.0));
  CHECK(r.phi == doctest::Approx(want).epsilon(0.1));
  CHECK(std::abs(H(r.p) - H(r.e)) <= 1e-6);

  auto tighter = estimate_phi(H, 1.0, 1.0, 720);
  CHECK(tighter.phi >= r.phi - 1e-12);
  auto wider = estimate_phi(H, 2.0, 0.5, 720);
  CHECK(wider.phi <= r.phi + 1e-12);
}

TEST_CASE("flat pair functional vanishes on flat families") {
  auto r1 = estimate_phi(build_power_norm(1), 1.0, 0.5, 720);
  CHECK(std::abs(r1.phi) <= 1e-9);
  auto rf = estimate_phi(build_flat_edge({0, 0}, {0, 1}), 1.0, 0.5, 720);
  CHECK(std::abs(rf.phi) <= 1e-9);
  auto empty = estimate_phi(build_quadratic(0.5), 0.1, 0.5, 720);
  CHECK(std::isinf(empty.phi));
}

TEST_CASE("angle gate scale separates round from flat") {
  double psi = estimate_psi(build_quadratic(0.5), 1.0, 0.1, 1024);
  CHECK(psi >= 0.00097);
  CHECK(psi <= 0.0079);
  double psi2 = estimate_psi(build_quadratic(0.5), 1.0, 0.2, 1024);
  CHECK(psi2 >= psi);
  double psif = estimate_psi(build_power_norm(1), 1.0, 0.1, 1024);
  CHECK(psif <= 1e-9);
}

TEST_CASE("level polylines sit on the true curve") {
  auto lines = level_polylines([](Vec2 p) { return p.norm(); },
                               Box::centered(2), 101, 1.0);
  REQUIRE(lines.size() == 1);
  double len = 0;
  for (size_t i = 0; i + 1 < lines[0].size(); ++i) {
    CHECK(std::abs(lines[0][i].norm() - 1.0) <= 1e-10);
    len += (lines[0][i + 1] - lines[0][i]).norm();
  }
  CHECK(len == doctest::Approx(2 * kPi).epsilon(0.01));
}

TEST_CASE("collinear run detector finds the straight side only") {
  std::vector<Vec2> line;
  for (int i = 0; i <= 50; ++i) line.push_back({-1 + 2.0 * i / 50, 0.0});
  for (int i = 1; i <= 60; ++i) {
    double th = kPi * i / 120;
    line.push_back(Vec2{1, 1} + Vec2{std::sin(th), -std::cos(th)});
  }
  auto run = longest_collinear_run({line}, 1e-5, 0.9);
  REQUIRE(run.has_value());
  CHECK(run->span == doctest::Approx(2.0).epsilon(0.05));
  CHECK(std::abs(run->a.y) <= 1e-12);

  std::vector<Vec2> circle;
  for (int i = 0; i < 200; ++i) circle.push_back(dir(2 * kPi * i / 200));
  CHECK_FALSE(longest_collinear_run({circle}, 1e-5, 0.9).has_value());
}

TEST_CASE("classifier separates curved norms from flat ones") {
  auto good = check_condition_A(build_power_norm(1.5), 32, 1e-9);
  CHECK(good.passes);
  CHECK(good.strictly_convex);
  CHECK(good.conjugate_C1);
  CHECK_FALSE(good.witness.has_value());

  auto good4 = check_condition_A(build_power_norm(4), 32, 1e-9);
  CHECK(good4.passes);
  CHECK(good4.strictly_convex);

  auto bad1 = check_condition_A(build_power_norm(1), 32, 1e-9);
  CHECK_FALSE(bad1.passes);
  CHECK_FALSE(bad1.strictly_convex);
  CHECK_FALSE(bad1.conjugate_C1);
  REQUIRE(bad1.witness.has_value());
  auto N1 = normalize_hamiltonian(build_power_norm(1));
  CHECK(std::abs(N1((*bad1.witness)[0]) - N1((*bad1.witness)[1])) <= 1e-6);

  auto badf = check_condition_A(build_flat_edge({0, 0}, {0, 1}), 32, 1e-9);
  CHECK_FALSE(badf.passes);
  REQUIRE(badf.witness.has_value());
}
