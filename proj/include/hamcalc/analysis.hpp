#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hamcalc/cone.hpp"
#include "hamcalc/grid_field.hpp"
#include "hamcalc/hamiltonian.hpp"
#include "hamcalc/vec2.hpp"

namespace hamcalc {

// Max over sampled pairs of u(x) - u(y) - C_k(x - y); <= 0 up to grid error
// certifies the cone-Lipschitz bound at level k.
double cone_lipschitz_check(const GridField& u, const Hamiltonian& H, double k);

// Smallest k passing cone_lipschitz_check at tol, by bisection on [0, cap].
double min_cone_lipschitz_level(const GridField& u, const Hamiltonian& H,
                                double cap, double tol = 1e-9);

struct CCSampler {
  int rectangles = 160;
  int vertex_ring = 12;   // cone vertices probed around each rectangle
  int k_levels = 6;       // dyadic levels below the field's cone-Lipschitz level
  std::uint64_t seed = 1;
};

struct CCWitness {
  Box V;
  Vec2 x0;
  double k;
  bool from_above;  // violating check was the max principle, else the min one
};

struct CCReport {
  double worst_violation = 0;
  std::optional<CCWitness> witness;
  int rectangles = 0;
  double k_cap = 0;
};

// Boundary max/min principle of u against translated cone gauges over sampled
// rectangles, vertices outside, dyadic levels.
CCReport cone_comparison_check(const GridField& u, const Hamiltonian& H,
                               const CCSampler& sampler);

struct LinearFit {
  Vec2 e;
  double deviation;  // Chebyshev sup residual over the ball, divided by r
  Vec2 x0;
  double r;
  bool converged = true;
};

// Best slope for u around x0 at scale r, center value pinned. Subgradient
// descent on the convex minimax objective, polished by a local simplex.
LinearFit lap_probe(const GridField& u, Vec2 x0, double r);

// Slopes whose normalized deviation stays within delta; extent estimated on an
// e-grid around the optimum.
double slope_set_diameter(const GridField& u, Vec2 x0, double r, double delta);

struct DerivativeSet {
  std::vector<double> scales;
  std::vector<LinearFit> fits;
  std::vector<double> set_diameters;  // near-optimal slope set extent per scale
  double diameter = 0;       // across-scale fit spread joined with the finest set extent
  double slope_residual = 0; // |H(e) - Su| at the finest scale; NaN when the
                             // two slope limits refuse to settle
};

DerivativeSet blowup_probe(const GridField& u, const Hamiltonian& H, Vec2 x0,
                           const std::vector<double>& scales);

struct ConeSlopeResult {
  double s_up;     // smallest level whose cone dominates u - u(x) on the ring
  double s_down;   // signed, -.(level dominating u(x) - u)
  Vec2 witness;    // ring point achieving equality at s_up
  double residual; // equality defect at the witness
};

ConeSlopeResult cone_slope(const GridField& u, const Hamiltonian& H, Vec2 x,
                           double t, double k_cap = -1);

struct FlowTrace {
  std::vector<Vec2> points;
  double t = 0;
  std::vector<double> slope_values;    // per step, at the step's start
  std::vector<double> cone_residuals;  // per step increment vs cone value
  bool exited = false;                 // stopped at the domain edge
};

// Iterates the ring witness of cone_slope: each step moves distance t to the
// boundary point where u meets its cone bound.
FlowTrace gradient_flow_trace(const GridField& u, const Hamiltonian& H, Vec2 x0,
                              double t, int max_steps);

struct ModulusTable {
  std::vector<double> s_over_r;
  std::vector<double> rho;  // sup over probe pairs in B(z, s) of |e(x) - e(y)|
  double fit_scale = 0;     // blowup scale used for e()
};

ModulusTable modulus_estimate(const GridField& u, const Hamiltonian& H, Vec2 z,
                              double r, const std::vector<double>& s_schedule);

}  // namespace hamcalc
