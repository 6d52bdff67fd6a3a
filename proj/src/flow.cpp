#include "hamcalc/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "hamcalc/cone.hpp"
#include "hamcalc/convex.hpp"
#include "hamcalc/errors.hpp"
#include "hamcalc/parallel.hpp"

namespace hamcalc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Value standing in for L outside its grid. Any admissible candidate has its
// dual argument inside the grid by construction, so the stand-in only has to
// lose every comparison; it also sits above the true conjugate anywhere a
// polish step could wander, which keeps the clamp on the safe side.
constexpr double kOutsideL = 1e300;

double field_lipschitz(const GridField& u) {
  double worst = 0;
  for (int j = 0; j < u.ny; ++j)
    for (int i = 0; i < u.nx; ++i) {
      if (i + 1 < u.nx)
        worst = std::max(worst, std::abs(u.at(i + 1, j) - u.at(i, j)) / u.h);
      if (j + 1 < u.ny)
        worst = std::max(worst, std::abs(u.at(i, j + 1) - u.at(i, j)) / u.h);
    }
  return worst;
}

// Smallest level whose sublevel set covers slopes of magnitude lip, with
// headroom. Doubling is fine here; the window radius only has to be valid,
// not tight.
double level_for_lipschitz(const Hamiltonian& H, double lip) {
  double d = 0.25;
  while (H.sublevel_radius(H.min_value + d) < lip + 0.5) {
    d *= 2;
    if (d > 1e12)
      throw domain_error(
          "no finite level of H covers the field's slope range; the field is "
          "steeper than the oracle admits");
  }
  return H.min_value + d;
}

}  // namespace

double slope_level_cap(const GridField& u, const Hamiltonian& H) {
  return level_for_lipschitz(H, field_lipschitz(u));
}

namespace {

// Distance from the origin to the grid edge, shrunk so circle samples keep
// an interpolation margin.
double inscribed_reach(const GridField& L) {
  Box b = L.box();
  return std::min(std::min(b.hi.x, -b.lo.x), std::min(b.hi.y, -b.lo.y)) -
         2 * L.h;
}

double ray_min(const GridField& L, double R) {
  double m = kInf;
  for (int s = 0; s < 256; ++s) {
    Vec2 q = dir(2 * kPi * (s + 0.5) / 256) * R;
    m = std::min(m, L.interp(q) / R);
  }
  return m;
}

}  // namespace

double localization_radius(const Hamiltonian& H, const GridField& L, double k) {
  if (!std::isfinite(k) || k < H.min_value - 1e-12 * (1 + std::abs(k)))
    throw domain_error("level k must be finite and at least the minimum of H");
  double lip = H.sublevel_radius(k);
  // A maximizer y of u(y) - t L((y - x)/t) over a field with slope at most
  // lip obeys L(z) <= lip * |z| at z = (y - x)/t, and L(z)/|z| is
  // nondecreasing along rays because L is convex with L(0) <= 0 there. Once
  // the ray minimum of L(q)/|q| on |q| = R clears both lip and k + 1, no
  // candidate beyond the window |y - x| <= R t can win.
  double threshold = std::max(k + 1, lip);
  double rin = inscribed_reach(L);
  for (double R = 1;; R *= 2) {
    if (R > rin)
      throw domain_error(
          "localization search left the grid the conjugate lives on; enlarge "
          "the conjugate box");
    if (ray_min(L, R) > threshold) return std::max(lip, R);
  }
}

namespace {

// One-homogeneous test on a ray sample. Gauges (norms included) have an
// indicator conjugate whose domain never grows with the primal box, so they
// take a separate construction path below.
bool positively_homogeneous(const Hamiltonian& H) {
  if (std::abs(H({0, 0})) > 1e-10) return false;
  for (int s = 0; s < 16; ++s) {
    Vec2 d = dir(2 * kPi * (s + 0.37) / 16);
    for (double r : {0.5, 1.0, 1.7}) {
      double a = H(d * r), b = H(d * (2 * r));
      if (!(a > 0)) return false;
      if (std::abs(b - 2 * a) > 1e-9 * (1 + std::abs(b))) return false;
    }
  }
  return true;
}

}  // namespace

FlowContext::FlowContext(const Hamiltonian& H, double k_cap) : k_cap_(k_cap) {
  if (!std::isfinite(k_cap) || k_cap < H.min_value - 1e-12 * (1 + std::abs(k_cap)))
    throw domain_error("k_cap must be finite and at least the minimum of H");
  if (positively_homogeneous(H)) {
    // The conjugate of a gauge is 0 on the polar of {H <= 1} and +inf
    // outside; no attained-slope rectangle carries that. Sample the
    // indicator directly: zero on the polar ball, a steep ramp off it. The
    // ramp slope only has to beat any admissible field gain, so candidates
    // past the ball lose without poisoning the interpolation at its edge.
    SublevelPolygon ball = sublevel_polygon(H, 1.0, 2048);
    // Support duality: the polar ball's support in direction d is H(d).
    Box qb{{-H({-1, 0}), -H({0, -1})}, {H({1, 0}), H({0, 1})}};
    double side = std::max(qb.width(), qb.height()) * 1.04 + 1e-9;
    Vec2 c = qb.center();
    Box grid_box{{c.x - side / 2, c.y - side / 2},
                 {c.x + side / 2, c.y + side / 2}};
    double penalty = 64 * (1 + H.sublevel_radius(k_cap) + std::abs(k_cap));
    int n = 1025;
    double h = side / (n - 1);
    eval_.origin = grid_box.lo;
    eval_.h = h;
    eval_.nx = n;
    eval_.ny = n;
    eval_.values.resize(static_cast<size_t>(n) * n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        Vec2 q = eval_.point(i, j);
        eval_.values[static_cast<size_t>(j) * n + i] =
            penalty * std::max(0.0, ball.support(q) - 1.0);
      }
    far_ = eval_;
    double corner = 0;
    for (Vec2 q : {grid_box.lo, grid_box.hi, Vec2{grid_box.lo.x, grid_box.hi.y},
                   Vec2{grid_box.hi.x, grid_box.lo.y}})
      corner = std::max(corner, q.norm());
    window_radius_ = corner;
    return;
  }
  double r0 = std::max(kWorkingBoxRadius, H.sublevel_radius(k_cap) + 1);
  // The dual range of the conjugate grows with the primal box, so doubling
  // the box until the dyadic window search fits the grid always terminates
  // for superlinear coercive H.
  for (double r = r0;; r *= 2) {
    far_ = legendre_transform(H, Box::centered(r), 513);
    try {
      window_radius_ = localization_radius(H, far_, k_cap);
      break;
    } catch (const domain_error&) {
      if (r > 64 * r0) throw;
    }
  }

  if (far_.h <= 0.0625) {
    eval_ = far_;
    return;
  }
  // The window can be much larger than the dual ball where extrema live:
  // any winning z has L(z)/|z| at most the slope bound, so precision past
  // that ball is wasted. Lay a finer conjugate over just that ball; the far
  // grid still decides (and rejects) every candidate beyond it.
  double lipk = H.sublevel_radius(k_cap);
  double reach = window_radius_;
  double rin = inscribed_reach(far_);
  for (double R = 1; R < window_radius_ && R <= rin; R *= 2) {
    if (ray_min(far_, R) > lipk + 1) {
      reach = R;
      break;
    }
  }
  for (double r = r0;; r *= 2) {
    eval_ = legendre_transform(H, Box::centered(r), 1025);
    if (inscribed_reach(eval_) >= reach) return;
    if (r > 64 * r0) {
      eval_ = far_;
      return;
    }
  }
}

double FlowContext::L(Vec2 z) const {
  if (eval_.contains(z)) return eval_.interp(z);
  if (far_.contains(z)) return far_.interp(z);
  return kOutsideL;
}

namespace {

FlowResult hopflax_core(const GridField& u, const Hamiltonian& H, double t,
                        bool up) {
  if (!(t > 0) || !std::isfinite(t))
    throw domain_error("flow time t must be positive and finite");
  if (u.nx < 2 || u.ny < 2)
    throw domain_error("the field needs at least a 2x2 grid");

  FlowContext ctx(H, level_for_lipschitz(H, field_lipschitz(u)));
  double W = ctx.R() * t;
  int iw = static_cast<int>(std::ceil(W / u.h)) + 1;
  double W2 = W * W * (1 + 1e-12);

  FlowResult out;
  out.field = u;
  out.t = t;
  out.window_radius = W;
  size_t n = u.values.size();
  out.argmax_offset.assign(n, Vec2{0, 0});
  out.full_window.assign(n, 1);

  Box b = u.box();
  double edge_eps = 1e-12 * (1 + W);
  parallel_for(0, u.ny, [&](long j) {
    for (int i = 0; i < u.nx; ++i) {
      Vec2 x = u.point(i, static_cast<int>(j));
      bool full = x.x - W >= b.lo.x - edge_eps && x.x + W <= b.hi.x + edge_eps &&
                  x.y - W >= b.lo.y - edge_eps && x.y + W <= b.hi.y + edge_eps;
      int i0 = std::max(0, i - iw), i1 = std::min(u.nx - 1, i + iw);
      int j0 = std::max(0, static_cast<int>(j) - iw);
      int j1 = std::min(u.ny - 1, static_cast<int>(j) + iw);
      double best = up ? -kInf : kInf;
      Vec2 best_off{0, 0};
      for (int jy = j0; jy <= j1; ++jy)
        for (int ix = i0; ix <= i1; ++ix) {
          Vec2 off = u.point(ix, jy) - x;
          if (off.norm2() > W2) continue;
          double val;
          if (up)
            val = u.at(ix, jy) - t * ctx.L(off / t);
          else
            val = u.at(ix, jy) + t * ctx.L((-off) / t);
          if (up ? val > best : val < best) {
            best = val;
            best_off = off;
          }
        }
      size_t idx = static_cast<size_t>(j) * u.nx + i;
      out.field.values[idx] = best;
      out.argmax_offset[idx] = best_off;
      out.full_window[idx] = full ? 1 : 0;
    }
  });

  size_t cut = 0;
  for (unsigned char f : out.full_window)
    if (!f) ++cut;
  if (cut > 0) {
    out.warnings.push_back(
        std::to_string(cut) + " of " + std::to_string(n) +
        " search windows were cut by the domain boundary; those values are "
        "the exact extremum over the domain but the interior localization "
        "guarantee does not apply there");
  }
  return out;
}

// Candidate list for the single-point flows: grid nodes of u inside the
// window, plus y placed so the dual argument lands on a node of the conjugate
// grid. The second family makes linear fields exact: their maximizer is a
// node of the dual grid, where the conjugate carries no interpolation error.
struct PointObjective {
  const GridField& u;
  const FlowContext& ctx;
  Vec2 x;
  double t;
  bool up;

  double operator()(Vec2 y) const {
    if (!u.contains(y)) return up ? -kInf : kInf;
    Vec2 z = (up ? y - x : x - y) / t;
    double l = ctx.L(z);
    if (l >= kOutsideL) return up ? -kInf : kInf;
    double v = u.interp(y);
    return up ? v - t * l : v + t * l;
  }
};

double point_flow(const GridField& u, const FlowContext& ctx, Vec2 x, double t,
                  bool up) {
  if (!(t > 0) || !std::isfinite(t))
    throw domain_error("flow time t must be positive and finite");
  if (!u.contains(x))
    throw domain_error("probe point lies outside the field's grid");

  PointObjective g{u, ctx, x, t, up};
  double W = ctx.R() * t;
  double W2 = W * W * (1 + 1e-12);
  double sgn = up ? 1.0 : -1.0;

  struct Cand {
    double val;
    Vec2 y;
  };
  std::vector<Cand> cands;
  cands.push_back({sgn * g(x), x});

  int ci = static_cast<int>(std::floor((x.x - u.origin.x) / u.h));
  int cj = static_cast<int>(std::floor((x.y - u.origin.y) / u.h));
  int iw = static_cast<int>(std::ceil(W / u.h)) + 1;
  for (int jy = std::max(0, cj - iw); jy <= std::min(u.ny - 1, cj + iw); ++jy)
    for (int ix = std::max(0, ci - iw); ix <= std::min(u.nx - 1, ci + iw); ++ix) {
      Vec2 y = u.point(ix, jy);
      if ((y - x).norm2() > W2) continue;
      cands.push_back({sgn * g(y), y});
    }

  const GridField& L = ctx.L_grid();
  double R2 = ctx.R() * ctx.R() * (1 + 1e-12);
  for (int jq = 0; jq < L.ny; ++jq)
    for (int iq = 0; iq < L.nx; ++iq) {
      Vec2 q = L.point(iq, jq);
      if (q.norm2() > R2) continue;
      Vec2 y = up ? x + q * t : x - q * t;
      if (!u.contains(y)) continue;
      cands.push_back({sgn * g(y), y});
    }

  std::partial_sort(cands.begin(),
                    cands.begin() + std::min<size_t>(3, cands.size()),
                    cands.end(),
                    [](const Cand& a, const Cand& b) { return a.val > b.val; });

  double best = -kInf;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (size_t s = 0; s < std::min<size_t>(3, cands.size()); ++s) {
    Vec2 y = cands[s].y;
    double fy = cands[s].val;
    if (!std::isfinite(fy)) continue;
    // Coordinate-wise golden section around the candidate; the bracket starts
    // at one grid cell and tightens each pass.
    for (int pass = 0; pass < 3; ++pass) {
      double half = u.h / std::pow(8.0, pass);
      for (int coord = 0; coord < 2; ++coord) {
        double lo = (coord == 0 ? y.x : y.y) - half;
        double hi = (coord == 0 ? y.x : y.y) + half;
        auto eval1 = [&](double v) {
          Vec2 p = y;
          (coord == 0 ? p.x : p.y) = v;
          return sgn * g(p);
        };
        double a = lo, b = hi;
        double c1 = b - phi * (b - a), c2 = a + phi * (b - a);
        double f1 = eval1(c1), f2 = eval1(c2);
        for (int it = 0; it < 60 && b - a > 1e-13 * (1 + std::abs(a)); ++it) {
          if (f1 < f2) {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + phi * (b - a);
            f2 = eval1(c2);
          } else {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - phi * (b - a);
            f1 = eval1(c1);
          }
        }
        double mid = 0.5 * (a + b);
        double fm = eval1(mid);
        if (fm >= fy) {
          (coord == 0 ? y.x : y.y) = mid;
          fy = fm;
        }
      }
    }
    best = std::max(best, fy);
  }
  return sgn * best;
}

}  // namespace

FlowResult hopflax_up(const GridField& u, const Hamiltonian& H, double t) {
  return hopflax_core(u, H, t, true);
}

FlowResult hopflax_down(const GridField& u, const Hamiltonian& H, double t) {
  return hopflax_core(u, H, t, false);
}

double hopflax_up_at(const GridField& u, const FlowContext& ctx, Vec2 x,
                     double t) {
  return point_flow(u, ctx, x, t, true);
}

double hopflax_down_at(const GridField& u, const FlowContext& ctx, Vec2 x,
                       double t) {
  return point_flow(u, ctx, x, t, false);
}

std::vector<SlopeSample> slopes(const GridField& u, const Hamiltonian& H,
                                Vec2 x, std::vector<double> t_schedule,
                                double tol) {
  for (double t : t_schedule)
    if (!(t > 0) || !std::isfinite(t))
      throw domain_error("every schedule entry must be positive and finite");
  std::sort(t_schedule.begin(), t_schedule.end(), std::greater<>());
  t_schedule.erase(std::unique(t_schedule.begin(), t_schedule.end()),
                   t_schedule.end());
  if (t_schedule.size() < 2)
    throw domain_error("the schedule needs at least two distinct times");
  if (!u.contains(x))
    throw domain_error("probe point lies outside the field's grid");

  FlowContext ctx(H, level_for_lipschitz(H, field_lipschitz(u)));
  double u0 = u.interp(x);

  std::vector<SlopeSample> out;
  out.reserve(t_schedule.size());
  for (double t : t_schedule) {
    SlopeSample s;
    s.x = x;
    s.t = t;
    s.s_plus = (hopflax_up_at(u, ctx, x, t) - u0) / t;
    s.s_minus = (hopflax_down_at(u, ctx, x, t) - u0) / t;
    out.push_back(s);
  }

  // Linear-in-t extrapolation to t = 0 from the two smallest times, done
  // separately above and below. The raw samples stay in the output so a
  // doubtful extrapolation can be audited against them.
  size_t n = out.size();
  double ta = out[n - 1].t, tb = out[n - 2].t;
  double up_a = out[n - 1].s_plus, up_b = out[n - 2].s_plus;
  double dn_a = -out[n - 1].s_minus, dn_b = -out[n - 2].s_minus;
  double ext_up = up_a - ta * (up_b - up_a) / (tb - ta);
  double ext_dn = dn_a - ta * (dn_b - dn_a) / (tb - ta);
  if (std::abs(ext_up - ext_dn) > 10 * tol)
    throw convergence_error(
        "slope limits extrapolated from the two flows disagree by " +
        std::to_string(std::abs(ext_up - ext_dn)) +
        "; refine the schedule near t = 0");
  out[n - 1].su_extrapolated = 0.5 * (ext_up + ext_dn);
  return out;
}

CriteriaReport convexity_criteria_check(const GridField& u,
                                        const Hamiltonian& H,
                                        const std::vector<Vec2>& probes,
                                        const std::vector<double>& t_schedule,
                                        double tol) {
  size_t n = t_schedule.size();
  if (n < 3)
    throw domain_error("the schedule needs at least three times");
  for (double t : t_schedule)
    if (!(t > 0) || !std::isfinite(t))
      throw domain_error("every schedule entry must be positive and finite");
  double dt = t_schedule[1] - t_schedule[0];
  if (!(dt > 0))
    throw domain_error("the schedule must increase");
  for (size_t i = 1; i < n; ++i) {
    double step = t_schedule[i] - t_schedule[i - 1];
    if (std::abs(step - dt) > 1e-9 * dt)
      throw domain_error(
          "the schedule must be uniform so second differences are comparable");
  }

  FlowContext ctx(H, level_for_lipschitz(H, field_lipschitz(u)));

  CriteriaReport rep;
  rep.tol = tol;
  for (Vec2 x : probes) {
    if (!u.contains(x))
      throw domain_error("probe point lies outside the field's grid");
    std::vector<double> ups(n), downs(n);
    for (size_t i = 0; i < n; ++i) {
      ups[i] = hopflax_up_at(u, ctx, x, t_schedule[i]);
      downs[i] = hopflax_down_at(u, ctx, x, t_schedule[i]);
    }
    CriteriaProbeRow row;
    row.x = x;
    row.worst_up_violation = 0;
    row.worst_down_violation = 0;
    row.largest_ok_t = 0;
    bool prefix_ok = true;
    for (size_t i = 1; i + 1 < n; ++i) {
      double d2u = ups[i - 1] - 2 * ups[i] + ups[i + 1];
      double d2d = downs[i - 1] - 2 * downs[i] + downs[i + 1];
      double vu = std::max(0.0, -d2u);
      double vd = std::max(0.0, d2d);
      row.worst_up_violation = std::max(row.worst_up_violation, vu);
      row.worst_down_violation = std::max(row.worst_down_violation, vd);
      if (prefix_ok && vu <= tol && vd <= tol)
        row.largest_ok_t = t_schedule[i + 1];
      else
        prefix_ok = false;
    }
    rep.worst_up_violation =
        std::max(rep.worst_up_violation, row.worst_up_violation);
    rep.worst_down_violation =
        std::max(rep.worst_down_violation, row.worst_down_violation);
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace hamcalc
