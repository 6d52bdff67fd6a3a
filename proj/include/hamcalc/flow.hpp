#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hamcalc/grid_field.hpp"
#include "hamcalc/hamiltonian.hpp"
#include "hamcalc/vec2.hpp"

namespace hamcalc {

// Smallest dyadic window factor R_k with the conjugate growing fast enough
// that the sup/inf in the flows can be restricted to |y - x| <= R_k t without
// changing the value on cone-Lipschitz fields at level k. Throws domain_error
// when the dyadic search runs past the box L lives on.
double localization_radius(const Hamiltonian& H, const GridField& L, double k);

// Level whose sublevel set covers the field's difference quotients with
// headroom; caps window sizing and slope-level bracket searches.
double slope_level_cap(const GridField& u, const Hamiltonian& H);

// Conjugate grid plus window bookkeeping shared by flow evaluations.
// Construction picks the primal box large enough that L covers |z| <= R_k.
// When the full window forces a coarse dual lattice, a finer second grid is
// laid over the small dual ball that can actually carry the extremum.
class FlowContext {
 public:
  FlowContext(const Hamiltonian& H, double k_cap);

  double L(Vec2 z) const;       // bilinear, clamped never below the true value
  double R() const { return window_radius_; }
  double k_cap() const { return k_cap_; }
  const GridField& L_grid() const { return eval_; }

 private:
  GridField far_;   // covers the full window radius; verifies the dyadic rule
  GridField eval_;  // evaluation grid, finer when far_ had to be coarse
  double window_radius_;
  double k_cap_;
};

struct FlowResult {
  GridField field;
  double t = 0;
  double window_radius = 0;              // R_k * t
  std::vector<Vec2> argmax_offset;       // per node, y* - x
  std::vector<unsigned char> full_window;  // 0 where the search ball was cut by the domain
  std::vector<std::string> warnings;
};

FlowResult hopflax_up(const GridField& u, const Hamiltonian& H, double t);
FlowResult hopflax_down(const GridField& u, const Hamiltonian& H, double t);

// Single-point evaluations with a tightened continuum polish, for slope and
// criteria probes where t-jitter at grid scale would drown the signal.
double hopflax_up_at(const GridField& u, const FlowContext& ctx, Vec2 x, double t);
double hopflax_down_at(const GridField& u, const FlowContext& ctx, Vec2 x, double t);

struct SlopeSample {
  Vec2 x;
  double t;
  double s_plus;
  double s_minus;
  std::optional<double> su_extrapolated;  // set on the smallest schedule entry
};

// S+ and S- along a decreasing t schedule, with a two-point extrapolation to
// t=0 from each side. Disagreement of the two limits beyond 10x tol throws
// convergence_error asking for a finer schedule.
std::vector<SlopeSample> slopes(const GridField& u, const Hamiltonian& H, Vec2 x,
                                std::vector<double> t_schedule, double tol = 1e-2);

struct CriteriaProbeRow {
  Vec2 x;
  double worst_up_violation;    // negative curvature of t -> T^t u(x)
  double worst_down_violation;  // positive curvature of t -> T_t u(x)
  double largest_ok_t;          // largest schedule prefix passing at tol
};

struct CriteriaReport {
  std::vector<CriteriaProbeRow> rows;
  double worst_up_violation = 0;
  double worst_down_violation = 0;
  double tol = 0;
  bool passes() const {
    return worst_up_violation <= tol && worst_down_violation <= tol;
  }
};

// Second differences of the flow values in t at each probe; the up flow must
// be convex in t and the down flow concave, up to tol.
CriteriaReport convexity_criteria_check(const GridField& u, const Hamiltonian& H,
                                        const std::vector<Vec2>& probes,
                                        const std::vector<double>& t_schedule,
                                        double tol = 1e-9);

}  // namespace hamcalc
