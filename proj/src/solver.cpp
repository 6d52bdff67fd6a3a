#include "hamcalc/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "hamcalc/cone.hpp"
#include "hamcalc/errors.hpp"
#include "hamcalc/flow.hpp"

namespace hamcalc {

namespace {

constexpr int kRingDirs = 64;
constexpr int kTableSamples = 160;
constexpr int kLevelIters = 52;

// Ring support lattice extracted from a ConeTable at its own k samples, so the
// per-update lookups are plain lerps instead of per-call sqrt transforms.
struct RingTable {
  double k_min = 0;
  double k_max = 0;
  double s_max = 0;
  std::array<Vec2, kRingDirs> dirs;
  std::vector<double> rows;  // sample-major: rows[j * kRingDirs + i]

  static RingTable build(const Hamiltonian& H, double k_max) {
    ConeTable table(H, kRingDirs, k_max, kTableSamples);
    RingTable r;
    r.k_min = table.k_min();
    r.k_max = table.k_max();
    r.s_max = std::sqrt(r.k_max - r.k_min);
    for (int i = 0; i < kRingDirs; ++i) r.dirs[i] = table.direction(i);
    r.rows.resize(static_cast<size_t>(kTableSamples) * kRingDirs);
    for (int j = 0; j < kTableSamples; ++j) {
      double s = r.s_max * j / (kTableSamples - 1);
      double k = r.k_min + s * s;
      for (int i = 0; i < kRingDirs; ++i)
        r.rows[static_cast<size_t>(j) * kRingDirs + i] = table.support(i, k);
    }
    return r;
  }
};

int opposite_dir(int i) { return (i + kRingDirs / 2) % kRingDirs; }

// Lowest value A still cone-bounded from above by the ring at level k, and the
// highest value B cone-bounded from below. A falls and B rises with k; the
// update takes the midpoint at the smallest level where they meet.
void ring_bounds(const RingTable& t, const double* u, double rho, double k,
                 double* A, double* B) {
  double s = std::sqrt(std::max(0.0, k - t.k_min));
  double pos = std::min(s, t.s_max) / t.s_max * (kTableSamples - 1);
  int j = std::min(static_cast<int>(pos), kTableSamples - 2);
  double frac = pos - j;
  const double* r0 = &t.rows[static_cast<size_t>(j) * kRingDirs];
  const double* r1 = r0 + kRingDirs;
  double a = -std::numeric_limits<double>::infinity();
  double b = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kRingDirs; ++i) {
    double sup = r0[i] + (r1[i] - r0[i]) * frac;
    a = std::max(a, u[i] - rho * sup);
    int o = opposite_dir(i);
    double sup_o = r0[o] + (r1[o] - r0[o]) * frac;
    b = std::min(b, u[i] + rho * sup_o);
  }
  *A = a;
  *B = b;
}

double update_center(const RingTable& t, const double* u, double rho) {
  double A, B;
  ring_bounds(t, u, rho, t.k_max, &A, &B);
  if (A > B) return 0.5 * (A + B);  // table saturated; compromise value
  ring_bounds(t, u, rho, t.k_min, &A, &B);
  if (A <= B) return 0.5 * (A + B);
  double lo = t.k_min, hi = t.k_max;
  for (int it = 0; it < kLevelIters; ++it) {
    double mid = 0.5 * (lo + hi);
    ring_bounds(t, u, rho, mid, &A, &B);
    if (A <= B)
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= 1e-14 * (1 + hi)) break;
  }
  ring_bounds(t, u, rho, hi, &A, &B);
  return 0.5 * (A + B);
}

double sweep_once(GridField& f, double stencil, const RingTable& t,
                  bool reverse) {
  double maxch = 0;
  double ring[kRingDirs];
  int nx = f.nx, ny = f.ny;
  for (int jj = 1; jj <= ny - 2; ++jj) {
    int j = reverse ? ny - 1 - jj : jj;
    for (int ii = 1; ii <= nx - 2; ++ii) {
      int i = reverse ? nx - 1 - ii : ii;
      double dist = f.h * std::min(std::min(i, nx - 1 - i), std::min(j, ny - 1 - j));
      double rho = std::min(stencil, dist);
      Vec2 x = f.point(i, j);
      for (int d = 0; d < kRingDirs; ++d)
        ring[d] = f.interp(x + t.dirs[d] * rho);
      double v = update_center(t, ring, rho);
      maxch = std::max(maxch, std::abs(v - f.at(i, j)));
      f.at(i, j) = v;
    }
  }
  return maxch;
}

template <class F>
void for_boundary(int nx, int ny, F&& fn) {
  for (int i = 0; i < nx; ++i) {
    fn(i, 0);
    fn(i, ny - 1);
  }
  for (int j = 1; j < ny - 1; ++j) {
    fn(0, j);
    fn(nx - 1, j);
  }
}

struct PlaneFit {
  double a = 0, b = 0, c = 0;
  double max_residual = 0;
};

std::optional<PlaneFit> fit_plane(const std::vector<Vec2>& pts,
                                  const std::vector<double>& vals) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0, sv = 0, sxv = 0, syv = 0;
  size_t n = pts.size();
  for (size_t i = 0; i < n; ++i) {
    sx += pts[i].x;
    sy += pts[i].y;
    sxx += pts[i].x * pts[i].x;
    sxy += pts[i].x * pts[i].y;
    syy += pts[i].y * pts[i].y;
    sv += vals[i];
    sxv += pts[i].x * vals[i];
    syv += pts[i].y * vals[i];
  }
  double m[3][4] = {{sxx, sxy, sx, sxv}, {sxy, syy, sy, syv},
                    {sx, sy, static_cast<double>(n), sv}};
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-12 * (1 + sxx + syy + n)) return std::nullopt;
    std::swap(m[col], m[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      double f = m[r][col] / m[col][col];
      for (int cc = col; cc < 4; ++cc) m[r][cc] -= f * m[col][cc];
    }
  }
  PlaneFit p{m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2], 0};
  for (size_t i = 0; i < n; ++i) {
    double r = std::abs(vals[i] - (p.a * pts[i].x + p.b * pts[i].y + p.c));
    p.max_residual = std::max(p.max_residual, r);
  }
  return p;
}

// Smallest level whose cone bounds every ordered pair of boundary samples,
// up to a slack absorbing the inscribed-polygon shortfall.
double boundary_cone_level(const Hamiltonian& H, const std::vector<Vec2>& pts,
                           const std::vector<double>& vals) {
  double gmax = 0;
  for (double v : vals) gmax = std::max(gmax, std::abs(v));
  double slack = 1e-3 * (1 + gmax);
  auto passes = [&](double k) {
    auto poly = sublevel_polygon(H, k, 512);
    size_t n = pts.size();
    for (size_t a = 0; a < n; ++a)
      for (size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        if (vals[a] - vals[b] > cone_eval(poly, pts[a] - pts[b]) + slack)
          return false;
      }
    return true;
  };
  double k_min = H(H.p0);
  double d = 1e-6;
  try {
    while (!passes(k_min + d)) {
      d *= 2;
      if (d > 1e9)
        throw domain_error("boundary data is steeper than any sampled cone level");
    }
  } catch (const domain_error&) {
    throw domain_error(
        "boundary data is steeper than the cone levels the working box admits");
  }
  if (d == 1e-6) return k_min + d;
  double lo = d / 2, hi = d;
  for (int it = 0; it < 40; ++it) {
    double mid = 0.5 * (lo + hi);
    if (passes(k_min + mid))
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= 1e-6 * (1 + hi)) break;
  }
  return k_min + hi;
}

// The table must hold headroom above the data level for the transient
// steepening of the sweeps, but its polygons must stay inside the working box.
double pick_table_level(const Hamiltonian& H, double k_data) {
  double k_min = H(H.p0);
  double excess = std::max(k_data - k_min, 0.0);
  double base = std::max(0.25, 4.0 * excess);
  while (H.sublevel_radius(k_min + base) > kWorkingBoxRadius - 0.25) {
    base *= 0.7;
    if (base < std::max(1e-6, 1.02 * excess))
      throw domain_error(
          "boundary data slope needs cone levels past the working box; rescale");
  }
  return k_min + base;
}

GridField blank_grid(Box dom, double h, int nx, int ny) {
  GridField f;
  f.origin = dom.lo;
  f.h = h;
  f.nx = nx;
  f.ny = ny;
  f.values.assign(static_cast<size_t>(nx) * ny, 0.0);
  return f;
}

void fill_boundary(GridField& f, const std::function<double(Vec2)>& g) {
  for_boundary(f.nx, f.ny, [&](int i, int j) {
    double v = g(f.point(i, j));
    if (!std::isfinite(v))
      throw domain_error("boundary oracle returned a non-finite value");
    f.at(i, j) = v;
  });
}

// McShane-type upper extension from the boundary samples at the data's own
// cone level; keeps the start inside the cone-Lipschitz class.
void mcshane_init(GridField& f, const Hamiltonian& H, double k_data) {
  auto poly = sublevel_polygon(H, k_data, 512);
  std::vector<Vec2> pts;
  std::vector<double> vals;
  for_boundary(f.nx, f.ny, [&](int i, int j) {
    pts.push_back(f.point(i, j));
    vals.push_back(f.at(i, j));
  });
  for (int j = 1; j < f.ny - 1; ++j)
    for (int i = 1; i < f.nx - 1; ++i) {
      Vec2 x = f.point(i, j);
      double best = std::numeric_limits<double>::infinity();
      for (size_t b = 0; b < pts.size(); ++b)
        best = std::min(best, vals[b] + cone_eval(poly, x - pts[b]));
      f.at(i, j) = best;
    }
}

void prolong_interior(const GridField& coarse, GridField& fine) {
  for (int j = 1; j < fine.ny - 1; ++j)
    for (int i = 1; i < fine.nx - 1; ++i) {
      int ic = i / 2, jc = j / 2;
      double v;
      if (i % 2 == 0 && j % 2 == 0)
        v = coarse.at(ic, jc);
      else if (j % 2 == 0)
        v = 0.5 * (coarse.at(ic, jc) + coarse.at(ic + 1, jc));
      else if (i % 2 == 0)
        v = 0.5 * (coarse.at(ic, jc) + coarse.at(ic, jc + 1));
      else
        v = 0.25 * (coarse.at(ic, jc) + coarse.at(ic + 1, jc) +
                    coarse.at(ic, jc + 1) + coarse.at(ic + 1, jc + 1));
      fine.at(i, j) = v;
    }
}

}  // namespace

SolveReport solve_dirichlet(const DirichletProblem& prob, double tol,
                            int max_sweeps) {
  if (!prob.g) throw domain_error("the problem has no boundary oracle");
  if (!(prob.h > 0)) throw domain_error("grid spacing must be positive");
  if (!(tol > 0) || max_sweeps < 1)
    throw domain_error("need a positive tolerance and at least one sweep");
  double w = prob.domain.width(), ht = prob.domain.height();
  double cx = w / prob.h, cy = ht / prob.h;
  int mx = static_cast<int>(std::lround(cx));
  int my = static_cast<int>(std::lround(cy));
  if (std::abs(cx - mx) > 1e-9 * std::max(1.0, cx) ||
      std::abs(cy - my) > 1e-9 * std::max(1.0, cy))
    throw domain_error("domain sides must be whole multiples of the spacing");
  int nx = mx + 1, ny = my + 1;
  if (nx < 7 || ny < 7)
    throw domain_error("grid too small for the ring scheme; need 7 nodes per side");
  double stencil = prob.stencil_radius <= 0 ? 3 * prob.h : prob.stencil_radius;
  if (stencil < 2 * prob.h - 1e-12)
    throw domain_error("stencil radius below twice the grid spacing");
  if (std::abs(prob.H(prob.H.p0)) > 1e-9)
    throw domain_error("H must attain minimum value zero; normalize it first");

  GridField fine = blank_grid(prob.domain, prob.h, nx, ny);
  fill_boundary(fine, prob.g);
  std::vector<Vec2> bpts;
  std::vector<double> bvals;
  for_boundary(nx, ny, [&](int i, int j) {
    bpts.push_back(fine.point(i, j));
    bvals.push_back(fine.at(i, j));
  });

  auto plane = fit_plane(bpts, bvals);
  double gmax = 0;
  for (double v : bvals) gmax = std::max(gmax, std::abs(v));
  bool affine = plane && plane->max_residual <= 1e-12 * (1 + gmax);

  double k_data = affine ? prob.H({plane->a, plane->b})
                         : boundary_cone_level(prob.H, bpts, bvals);
  RingTable table = RingTable::build(prob.H, pick_table_level(prob.H, k_data));

  SolveReport rep;
  if (affine) {
    for (int j = 1; j < ny - 1; ++j)
      for (int i = 1; i < nx - 1; ++i) {
        Vec2 x = fine.point(i, j);
        fine.at(i, j) = plane->a * x.x + plane->b * x.y + plane->c;
      }
    for (int s = 0; s < max_sweeps; ++s) {
      rep.update_residual = sweep_once(fine, stencil, table, s % 2 == 1);
      rep.sweeps = s + 1;
      if (rep.update_residual <= tol) {
        rep.converged = true;
        break;
      }
    }
  } else {
    std::vector<int> factors;
    for (int f : {8, 4, 2, 1}) {
      if (mx % f != 0 || my % f != 0) continue;
      if (mx / f + 1 < 5 || my / f + 1 < 5) continue;
      factors.push_back(f);
    }
    GridField cur;
    for (size_t li = 0; li < factors.size(); ++li) {
      int f = factors[li];
      GridField level = blank_grid(prob.domain, prob.h * f, mx / f + 1, my / f + 1);
      fill_boundary(level, prob.g);
      if (li == 0)
        mcshane_init(level, prob.H, k_data);
      else
        prolong_interior(cur, level);
      bool finest = f == 1;
      int sweeps = 0;
      double maxch = 0;
      bool conv = false;
      for (int s = 0; s < max_sweeps; ++s) {
        maxch = sweep_once(level, stencil * f, table, s % 2 == 1);
        sweeps = s + 1;
        if (maxch <= tol) {
          conv = true;
          break;
        }
      }
      if (finest) {
        rep.sweeps = sweeps;
        rep.update_residual = maxch;
        rep.converged = conv;
      }
      cur = std::move(level);
    }
    fine = std::move(cur);
  }

  rep.field = std::move(fine);
  rep.cc_violation =
      cone_comparison_check(rep.field, prob.H, CCSampler{}).worst_violation;
  double slack = 1e-3 * (1 + rep.field.max_abs());
  try {
    rep.slope_level =
        min_cone_lipschitz_level(rep.field, prob.H, table.k_max, slack);
  } catch (const domain_error&) {
    rep.slope_level = table.k_max;  // search failed; report the cap itself
  }
  return rep;
}

ResidualReport residual_report(const GridField& field, const Hamiltonian& H) {
  ResidualReport r;
  double cap = slope_level_cap(field, H);
  double slack = 1e-3 * (1 + field.max_abs());
  try {
    r.k_level = min_cone_lipschitz_level(field, H, cap, slack);
  } catch (const domain_error&) {
    r.k_level = cap;
  }
  r.cone_lipschitz_violation = cone_lipschitz_check(field, H, r.k_level);
  r.cc_violation = cone_comparison_check(field, H, CCSampler{}).worst_violation;

  Box box = field.box();
  double minside = std::min(box.width(), box.height());
  Vec2 c = box.center();
  double ox = 0.15 * box.width(), oy = 0.15 * box.height();
  std::vector<Vec2> probes = {c, {c.x - ox, c.y}, {c.x + ox, c.y},
                              {c.x, c.y - oy}, {c.x, c.y + oy}};
  double dt = std::max(0.06 * minside, 3 * field.h);
  auto crit = convexity_criteria_check(field, H, probes, {dt, 2 * dt, 3 * dt});
  r.criteria_violation =
      std::max(crit.worst_up_violation, crit.worst_down_violation);
  return r;
}

}  // namespace hamcalc
