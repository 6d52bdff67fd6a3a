#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hamcalc/grid_field.hpp"
#include "hamcalc/hamiltonian.hpp"
#include "hamcalc/vec2.hpp"

namespace hamcalc {

// Discrete convex conjugate L(q) = sup_p (p.q - f(p)), computed dimension-wise
// with the linear-time monotone slope merge. The dual grid is sized from the
// attained slope range so every supremum is attained away from the box edge;
// a request outside that range throws domain_error listing the offending q.
GridField legendre_transform(const Hamiltonian& f, Box box, int resolution);
GridField legendre_transform(const GridField& f, int resolution);

struct FyPair {
  Vec2 p, q;
  bool gradient_pair = false;  // q is meant to be a subgradient of f at p
};

struct FenchelGap {
  double max_violation;          // max over pairs of (p.q - H(p) - L(q))+
  double max_equality_residual;  // over gradient pairs, |H(p)+L(q)-p.q|
};

FenchelGap fenchel_gap(const Hamiltonian& H, const GridField& L,
                       const std::vector<FyPair>& pairs);

struct SubdifferentialSet {
  Vec2 base_point;
  std::vector<Vec2> extreme_points;  // ccw; 1 point, 2 segment, 3+ polygon
  double tol;

  enum class Kind { point, segment, polygon };
  Kind kind() const {
    return extreme_points.size() <= 1   ? Kind::point
           : extreme_points.size() == 2 ? Kind::segment
                                        : Kind::polygon;
  }
};

SubdifferentialSet subdifferential_set(const Hamiltonian& f, Vec2 p, double radius);
SubdifferentialSet subdifferential_set(const GridField& f, Vec2 p, double radius);

// Argmax route for the conjugate's subdifferential: every p within value_tol
// of sup(p.q - H(p)) over the box sample. Exact extremes up to the sample step
// when H is polyhedral near the face.
SubdifferentialSet subdifferential_of_conjugate(const Hamiltonian& H, Vec2 q,
                                                Box box, int resolution,
                                                double value_tol);

struct PhiResult {
  double phi;  // +inf when no sampled pair is feasible
  Vec2 p, e;   // argmin pair when finite
};

// Sampled minimum of (p-e).q/|q| over same-level pairs with |p-e| >= eta on
// levels up to R. One-sided: small values certify a flat run, large values are
// only evidence of strict convexity at the sampling density.
PhiResult estimate_phi(const Hamiltonian& H, double R, double eta, int samples);

// Largest psi from a halving schedule such that no sampled configuration with
// |v| > eps passes both the angle and the level-gap gate.
double estimate_psi(const Hamiltonian& H, double R, double eps, int samples);

struct PhiCell {
  double R, eta, phi;
};

struct ConditionAReport {
  bool passes = false;
  std::vector<PhiCell> phi_table;
  std::optional<std::array<Vec2, 2>> witness;  // endpoints of a flat run
  bool strictly_convex = false;
  bool conjugate_C1 = false;
  // declared tolerances
  double phi_tol = 0;
  double collinear_tol = 0;
  double run_span_min = 0;
  double conjugate_C1_tol = 0;
};

ConditionAReport check_condition_A(const Hamiltonian& H, int levels, double tol);

// Level-set polylines of f on an n x n sample of box. Cell topology from
// marching squares; crossing positions refined by bisection on the oracle, so
// vertices sit on the true curve to ~1e-12 and collinearity of a run is a
// property of the curve, not of the grid.
std::vector<std::vector<Vec2>> level_polylines(const std::function<double(Vec2)>& f,
                                               Box box, int n, double level);

struct FlatRun {
  Vec2 a, b;      // chord endpoints
  double span;
  double max_dev; // max distance of run vertices from the chord
};

// Longest maximal run with every vertex within rel_tol * span of its chord.
std::optional<FlatRun> longest_collinear_run(const std::vector<std::vector<Vec2>>& polylines,
                                             double rel_tol, double min_span);

// Counterclockwise hull; collinear interior points are dropped.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts);

}  // namespace hamcalc
