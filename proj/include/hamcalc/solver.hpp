#pragma once

#include <functional>

#include "hamcalc/analysis.hpp"
#include "hamcalc/grid_field.hpp"
#include "hamcalc/hamiltonian.hpp"
#include "hamcalc/vec2.hpp"

namespace hamcalc {

struct DirichletProblem {
  Box domain;
  std::function<double(Vec2)> g;  // boundary data
  Hamiltonian H;                  // normalized
  double h = 1.0 / 64;
  double stencil_radius = 0;      // defaults to 3h when <= 0; must be >= 2h
};

struct SolveReport {
  GridField field;
  int sweeps = 0;
  double update_residual = 0;
  double cc_violation = 0;   // post-hoc comparison-with-cones verdict
  double slope_level = 0;    // minimal cone-Lipschitz level of the result
  bool converged = false;
};

// Gauss-Seidel relaxation: each interior value moves to the unique level where
// the ring's cone bound from above meets the one from below. Linear data is a
// fixed point of the update exactly, independent of table error, because the
// ring is symmetric and both sides share one support table.
SolveReport solve_dirichlet(const DirichletProblem& prob, double tol, int max_sweeps);

struct ResidualReport {
  double k_level = 0;              // minimal passing cone-Lipschitz level
  double cone_lipschitz_violation = 0;  // residual at that level
  double cc_violation = 0;
  double criteria_violation = 0;   // worst convexity/concavity defect in t
};

ResidualReport residual_report(const GridField& field, const Hamiltonian& H);

}  // namespace hamcalc
