#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "hamcalc/grid_field.hpp"
#include "hamcalc/rng.hpp"
#include "hamcalc/vec2.hpp"

namespace hamcalc {

// All "for all p" style checks are sampled on this box.
constexpr double kWorkingBoxRadius = 4.0;

// Convex coercive integrand on the plane. Immutable after construction and
// safe to evaluate from concurrent workers.
struct Hamiltonian {
  std::function<double(Vec2)> eval_fn;
  std::string family;
  Vec2 p0{0, 0};          // a minimizer (one of them when the minimum set is flat)
  double min_value = 0;
  bool normalized = false;
  Vec2 shift{0, 0};       // minimizer of the original oracle, for de-tilting fields
  std::string descriptor; // canonical JSON this oracle was built from
  std::optional<Box> domain;  // evaluation domain for grid-backed oracles
  double grid_h = 0;          // sample spacing for grid-backed oracles

  // k -> bound on |p| over the sublevel set {H <= k}. Overestimates are safe,
  // underestimates are not; implementations include a margin.
  std::function<double(double)> lipschitz_bound_fn;

  // Extreme subgradients at p, equal where the oracle is differentiable.
  // Unset for grid-backed oracles.
  std::function<std::pair<Vec2, Vec2>(Vec2)> subgrad_fn;

  double operator()(Vec2 p) const { return eval_fn(p); }
  double sublevel_radius(double k) const { return lipschitz_bound_fn(k); }
  bool has_subgrad() const { return static_cast<bool>(subgrad_fn); }
};

Hamiltonian build_hamiltonian(const std::string& descriptor_json);

Hamiltonian build_quadratic(double scale, Vec2 center = {0, 0}, double offset = 0);
// alpha in [1, inf]; pass std::numeric_limits<double>::infinity() for the max norm.
Hamiltonian build_power_norm(double alpha, double power = 1, double scale = 1);
// Constant exactly on the segment [a, b], which is also the minimum set.
Hamiltonian build_flat_edge(Vec2 a, Vec2 b, double lambda = 1);
Hamiltonian build_anisotropic(double q11, double q12, double q22);
Hamiltonian build_grid_hamiltonian(const GridField& values);

struct MinimumResult {
  Vec2 p0;
  double value;
  double tol;  // gap guarantee against the box sample
};

// Coarse scan restarted into coordinate-wise golden section descent.
// Throws domain_error when the minimum sits on the box boundary.
MinimumResult find_minimum(const Hamiltonian& H, Box box);

// Shift the minimizer to the origin and square the excess. Returns the input
// unchanged when it is already normalized.
Hamiltonian normalize_hamiltonian(const Hamiltonian& H);

struct ConvexityViolation {
  Vec2 p, q;
  double gap;  // H((p+q)/2) - (H(p)+H(q))/2, positive means non-convex
};

std::optional<ConvexityViolation> check_midpoint_convexity(
    const Hamiltonian& H, Box box, int pairs, double tol, Rng& rng);

// eval(p)/|p| must grow along rays at the box scale.
bool superlinear_on_box(const std::function<double(Vec2)>& f, double radius);

}  // namespace hamcalc
