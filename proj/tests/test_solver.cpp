#include <cmath>
#include <vector>

#include "doctest.h"
#include "hamcalc/counterexamples.hpp"
#include "hamcalc/errors.hpp"
#include "hamcalc/hamiltonian.hpp"
#include "hamcalc/solver.hpp"
#include "hamcalc/vec2.hpp"

using namespace hamcalc;

namespace {

const double kPi2 = 6.283185307179586476925286766559;

// Replicates the scheme's ring sampling convention: 64 equispaced directions
// starting at angle zero, radius capped by the distance to the boundary.
struct RingOracle {
  std::vector<double> samples;
  double umin, umax;
  RingOracle(const GridField& f, int i, int j, double stencil) {
    double dist = f.h * std::min(std::min(i, f.nx - 1 - i),
                                 std::min(j, f.ny - 1 - j));
    double rho = std::min(stencil, dist);
    Vec2 x = f.point(i, j);
    umin = 1e300;
    umax = -1e300;
    for (int d = 0; d < 64; ++d) {
      double th = kPi2 * d / 64;
      double v = f.interp({x.x + rho * std::cos(th), x.y + rho * std::sin(th)});
      samples.push_back(v);
      umin = std::min(umin, v);
      umax = std::max(umax, v);
    }
  }
};

double sup_error(const GridField& f, const std::function<double(Vec2)>& ref) {
  double worst = 0;
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i)
      worst = std::max(worst, std::abs(f.at(i, j) - ref(f.point(i, j))));
  return worst;
}

}  // namespace

TEST_CASE("solver: linear boundary data is a fixed point within three sweeps") {
  Vec2 p0{0.6, -0.35};
  double c = 0.2;
  DirichletProblem prob;
  prob.domain = Box::centered(1.5);
  prob.g = [&](Vec2 x) { return p0.dot(x) + c; };
  prob.H = build_quadratic(0.5);
  prob.h = 3.0 / 32;
  auto rep = solve_dirichlet(prob, 1e-10, 10);
  CHECK(rep.converged);
  CHECK(rep.sweeps <= 3);
  CHECK(rep.update_residual <= 1e-10);
  CHECK(sup_error(rep.field, [&](Vec2 x) { return p0.dot(x) + c; }) <= 1e-9);
  // the comparison sampler reads its own boundary-node resolution at this h,
  // not a defect of the field
  CHECK(rep.cc_violation <= 1e-2);
  CHECK(rep.slope_level == doctest::Approx(0.5 * p0.dot(p0)).epsilon(0.03));
}

TEST_CASE("solver: degenerate norm Hamiltonian settles on ring midpoints") {
  DirichletProblem prob;
  prob.domain = Box::centered(1.0);
  prob.g = [](Vec2 x) { return 0.4 * std::sin(2 * x.x) + 0.3 * std::abs(x.y); };
  prob.H = build_power_norm(2, 1, 1);
  prob.h = 2.0 / 16;
  auto rep = solve_dirichlet(prob, 1e-9, 400);
  REQUIRE(rep.converged);
  const GridField& u = rep.field;
  double stencil = 3 * prob.h;
  double worst = 0;
  for (int j = 1; j < u.ny - 1; ++j)
    for (int i = 1; i < u.nx - 1; ++i) {
      RingOracle ring(u, i, j, stencil);
      double mid = 0.5 * (ring.umin + ring.umax);
      worst = std::max(worst, std::abs(u.at(i, j) - mid));
    }
  CHECK(worst <= 2e-4);
}

TEST_CASE("solver: updates are monotone in the boundary data") {
  auto base = [](Vec2 x) { return 0.5 * std::sin(1.3 * x.x) - 0.2 * x.y; };
  auto bumped = [&](Vec2 x) {
    double d = (x - Vec2{1.0, 0.0}).norm();
    return base(x) + 0.3 * std::max(0.0, 1.0 - d / 0.4);
  };
  DirichletProblem prob;
  prob.domain = Box::centered(1.0);
  prob.H = build_quadratic(0.5);
  prob.h = 0.25;
  prob.g = base;
  auto lo = solve_dirichlet(prob, 1e-15, 1);
  CHECK_FALSE(lo.converged);
  CHECK(lo.sweeps == 1);
  prob.g = bumped;
  auto hi = solve_dirichlet(prob, 1e-15, 1);
  for (int j = 0; j < lo.field.ny; ++j)
    for (int i = 0; i < lo.field.nx; ++i)
      CHECK(hi.field.at(i, j) >= lo.field.at(i, j) - 1e-12);
}

TEST_CASE("solver: translation and ordering comparison principles") {
  auto g1 = [](Vec2 x) {
    return 0.5 * std::sin(1.7 * x.x + 0.4) + 0.3 * std::cos(2.1 * x.y);
  };
  DirichletProblem prob;
  prob.domain = Box::centered(1.0);
  prob.H = build_quadratic(0.5);
  prob.h = 2.0 / 16;
  prob.g = g1;
  auto u1 = solve_dirichlet(prob, 1e-10, 500);
  REQUIRE(u1.converged);

  prob.g = [&](Vec2 x) { return g1(x) + 0.25; };
  auto u2 = solve_dirichlet(prob, 1e-10, 500);
  REQUIRE(u2.converged);
  double shift_err = 0;
  for (int j = 0; j < u1.field.ny; ++j)
    for (int i = 0; i < u1.field.nx; ++i)
      shift_err = std::max(shift_err, std::abs(u2.field.at(i, j) -
                                               u1.field.at(i, j) - 0.25));
  CHECK(shift_err <= 1e-9);

  prob.g = [&](Vec2 x) { return std::max(g1(x), 0.1 + 0.2 * x.x); };
  auto u3 = solve_dirichlet(prob, 1e-10, 500);
  REQUIRE(u3.converged);
  double worst_order = 0;
  for (int j = 0; j < u1.field.ny; ++j)
    for (int i = 0; i < u1.field.nx; ++i)
      worst_order = std::max(worst_order, u1.field.at(i, j) - u3.field.at(i, j));
  CHECK(worst_order <= 2e-10 + 1e-9);
}

TEST_CASE("solver: AMLE run tracks the Aronsson solution") {
  DirichletProblem prob;
  prob.domain = Box::centered(1.0);
  prob.g = aronsson_value;
  prob.H = build_quadratic(0.5);
  prob.h = 1.0 / 32;
  auto rep = solve_dirichlet(prob, 1e-7, 600);
  CHECK(rep.converged);
  CHECK(sup_error(rep.field, aronsson_value) <= 0.01);
  CHECK(rep.cc_violation <= 0.01);
  CHECK(rep.slope_level >= 1.2);
  CHECK(rep.slope_level <= 2.3);

  auto truncated = solve_dirichlet(prob, 1e-12, 2);
  CHECK_FALSE(truncated.converged);
  CHECK(truncated.sweeps == 2);
}

TEST_CASE("solver: flat edge data recovers the one dimensional field") {
  CounterexampleSpec spec;  // a=(0,0), b=(0,1), profile |t|
  DirichletProblem prob;
  prob.domain = Box::centered(2.0);
  prob.g = [&](Vec2 x) { return uf_value(spec, x); };
  prob.H = build_flat_edge(spec.a, spec.b);
  prob.h = 1.0 / 16;
  auto rep = solve_dirichlet(prob, 1e-8, 400);
  CHECK(rep.converged);
  double err = sup_error(rep.field, [&](Vec2 x) { return uf_value(spec, x); });
  CHECK(err <= 3 * prob.h);  // contract bound, Lip = 1
  CHECK(err <= 0.02);
  CHECK(rep.cc_violation <= 3 * prob.h);
}

TEST_CASE("solver: residual report separates flat fields from convexity defects") {
  Vec2 p0{0.6, -0.35};
  auto lin = GridField::sample([&](Vec2 x) { return p0.dot(x); },
                               Box::centered(1.0), 65);
  auto H = build_quadratic(0.5);
  auto flat = residual_report(lin, H);
  CHECK(flat.k_level == doctest::Approx(0.5 * p0.dot(p0)).epsilon(0.03));
  CHECK(flat.cone_lipschitz_violation <= 2.5e-3);
  CHECK(flat.cc_violation <= 5e-3);
  CHECK(flat.criteria_violation <= 1e-4);

  auto parab = GridField::sample([](Vec2 x) { return x.x * x.x; },
                                 Box::centered(1.0), 129);
  auto bad = residual_report(parab, H);
  CHECK(bad.criteria_violation >= 1e-3);
  CHECK(bad.cc_violation >= 0.01);
  CHECK(bad.cone_lipschitz_violation <= 4e-3);
}

TEST_CASE("solver: malformed problems are rejected") {
  DirichletProblem prob;
  prob.domain = Box::centered(1.0);
  prob.g = [](Vec2 x) { return x.x; };
  prob.H = build_quadratic(0.5);
  prob.h = 0.25;
  CHECK_NOTHROW(solve_dirichlet(prob, 1e-6, 1));

  auto broken = prob;
  broken.h = 0.3;  // 2 / 0.3 is not whole
  CHECK_THROWS_AS(solve_dirichlet(broken, 1e-6, 1), domain_error);

  broken = prob;
  broken.h = 0.5;  // 5 nodes per side
  CHECK_THROWS_AS(solve_dirichlet(broken, 1e-6, 1), domain_error);

  broken = prob;
  broken.stencil_radius = 1.5 * prob.h;
  CHECK_THROWS_AS(solve_dirichlet(broken, 1e-6, 1), domain_error);

  broken = prob;
  broken.g = nullptr;
  CHECK_THROWS_AS(solve_dirichlet(broken, 1e-6, 1), domain_error);

  broken = prob;
  broken.H = build_quadratic(0.5, {0, 0}, 0.3);  // positive minimum
  CHECK_THROWS_AS(solve_dirichlet(broken, 1e-6, 1), domain_error);

  CHECK_THROWS_AS(solve_dirichlet(prob, -1.0, 1), domain_error);
  CHECK_THROWS_AS(solve_dirichlet(prob, 1e-6, 0), domain_error);
}
