#include "hamcalc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "hamcalc/errors.hpp"
#include "hamcalc/flow.hpp"
#include "hamcalc/rng.hpp"

namespace hamcalc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Floor on the near-optimal band width used by blowup diameters, so a fit
// that happens to be numerically exact still carries a nonempty slope set.
constexpr double kFitTol = 1e-3;

int gcd_int(int a, int b) {
  a = std::abs(a);
  b = std::abs(b);
  while (b != 0) {
    int t = a % b;
    a = b;
    b = t;
  }
  return a;
}

// Lattice offsets with coprime components in a half-plane window. Chains of
// one offset walk every pair along its direction, and the gauge is additive
// along straight chains, so window offsets certify far pairs in the covered
// directions. Skew directions outside the window are handled by the random
// long-pair sample in the caller.
std::vector<std::pair<int, int>> primitive_offsets(int w) {
  std::vector<std::pair<int, int>> out;
  for (int dj = 0; dj <= w; ++dj)
    for (int di = -w; di <= w; ++di) {
      if (dj == 0 && di <= 0) continue;
      if (gcd_int(di, dj) != 1) continue;
      out.emplace_back(di, dj);
    }
  return out;
}

}  // namespace

double cone_lipschitz_check(const GridField& u, const Hamiltonian& H, double k) {
  if (u.nx < 2 || u.ny < 2)
    throw domain_error("cone_lipschitz_check needs a 2d grid");
  if (!std::isfinite(k))
    throw domain_error("cone_lipschitz_check needs a finite level");
  SublevelPolygon poly = sublevel_polygon(H, k, 512);

  double worst = -kInf;
  const int window = 10;
  for (auto [di, dj] : primitive_offsets(window)) {
    Vec2 z{di * u.h, dj * u.h};
    double cp = cone_eval(poly, z);
    double cm = cone_eval(poly, Vec2{-z.x, -z.y});
    int i_lo = std::max(0, -di);
    int i_hi = u.nx - std::max(0, di);
    for (int j = 0; j + dj < u.ny; ++j)
      for (int i = i_lo; i < i_hi; ++i) {
        double d = u.at(i + di, j + dj) - u.at(i, j);
        worst = std::max(worst, std::max(d - cp, -d - cm));
      }
  }

  Rng rng(2026);
  for (int s = 0; s < 4000; ++s) {
    int ia = static_cast<int>(rng.below(u.nx));
    int ja = static_cast<int>(rng.below(u.ny));
    int ib = static_cast<int>(rng.below(u.nx));
    int jb = static_cast<int>(rng.below(u.ny));
    if (ia == ib && ja == jb) continue;
    Vec2 z = u.point(ib, jb) - u.point(ia, ja);
    double d = u.at(ib, jb) - u.at(ia, ja);
    worst = std::max(worst, d - cone_eval(poly, z));
    worst = std::max(worst, -d - cone_eval(poly, Vec2{-z.x, -z.y}));
  }
  return worst;
}

double min_cone_lipschitz_level(const GridField& u, const Hamiltonian& H,
                                double cap, double tol) {
  if (!std::isfinite(cap) || cap <= H.min_value)
    throw domain_error("the level cap must sit above the minimum of H");
  auto passes = [&](double k) { return cone_lipschitz_check(u, H, k) <= tol; };
  if (!passes(cap))
    throw domain_error(
        "no level up to the cap makes the field cone-Lipschitz; raise the cap "
        "or loosen the tolerance");
  double lo = H.min_value;
  if (passes(lo)) return lo;
  double hi = cap;
  for (int it = 0; it < 60 && hi - lo > 1e-6 * (1 + std::abs(hi)); ++it) {
    double mid = 0.5 * (lo + hi);
    (passes(mid) ? hi : lo) = mid;
  }
  return hi;
}

CCReport cone_comparison_check(const GridField& u, const Hamiltonian& H,
                               const CCSampler& sampler) {
  if (u.nx < 7 || u.ny < 7)
    throw domain_error("cone_comparison_check needs at least a 7x7 grid");
  if (sampler.rectangles < 1 || sampler.vertex_ring < 1 || sampler.k_levels < 1)
    throw domain_error("sampler counts must be positive");

  CCReport rep;
  rep.k_cap = slope_level_cap(u, H);

  std::vector<double> levels;
  std::vector<SublevelPolygon> polys;
  for (int j = 0; j < sampler.k_levels; ++j) {
    double k = H.min_value + (rep.k_cap - H.min_value) * std::exp2(-j);
    levels.push_back(k);
    polys.push_back(sublevel_polygon(H, k, 512));
  }

  Rng rng(sampler.seed);
  Box grid = u.box();
  // Small rectangles keep the scan cheap and localize witnesses; an interior
  // max that beats the boundary on a large set already beats it on some small
  // set around the maximizer.
  const int max_side = 40;

  for (int rct = 0; rct < sampler.rectangles; ++rct) {
    int i0 = 1 + static_cast<int>(rng.below(u.nx - 5));
    int j0 = 1 + static_cast<int>(rng.below(u.ny - 5));
    int wi = 3 + static_cast<int>(
                     rng.below(std::min(max_side, u.nx - 2 - i0) - 2));
    int wj = 3 + static_cast<int>(
                     rng.below(std::min(max_side, u.ny - 2 - j0) - 2));
    int i1 = i0 + wi;
    int j1 = j0 + wj;
    ++rep.rectangles;
    Box V{u.point(i0, j0), u.point(i1, j1)};
    Vec2 c = V.center();
    double diag = (V.hi - V.lo).norm();

    for (int v = 0; v < sampler.vertex_ring; ++v) {
      Vec2 x0;
      bool ok = false;
      for (int attempt = 0; attempt < 24 && !ok; ++attempt) {
        double ang = rng.uniform(0.0, 2 * kPi);
        double rad = diag * (0.4 + 1.1 * rng.uniform());
        x0 = c + dir(ang) * rad;
        ok = grid.contains(x0, 0.5 * u.h) && !V.contains(x0, -0.5 * u.h);
      }
      if (!ok) continue;

      for (std::size_t lev = 0; lev < levels.size(); ++lev) {
        const SublevelPolygon& poly = polys[lev];
        double max_all = -kInf, max_bnd = -kInf;
        double min_all = kInf, min_bnd = kInf;
        for (int j = j0; j <= j1; ++j)
          for (int i = i0; i <= i1; ++i) {
            Vec2 y = u.point(i, j);
            double above = u.at(i, j) - cone_eval(poly, y - x0);
            double below = u.at(i, j) + cone_eval(poly, x0 - y);
            bool bnd = i == i0 || i == i1 || j == j0 || j == j1;
            max_all = std::max(max_all, above);
            min_all = std::min(min_all, below);
            if (bnd) {
              max_bnd = std::max(max_bnd, above);
              min_bnd = std::min(min_bnd, below);
            }
          }
        double viol_above = max_all - max_bnd;
        double viol_below = min_bnd - min_all;
        double viol = std::max(viol_above, viol_below);
        if (viol > rep.worst_violation) {
          rep.worst_violation = viol;
          rep.witness = CCWitness{V, x0, levels[lev], viol_above >= viol_below};
        }
      }
    }
  }
  return rep;
}

namespace {

// Residual samples for the pinned linear fit around x0: grid nodes inside the
// ball plus an interpolated ring, all measured against the center value.
struct LapSamples {
  std::vector<Vec2> dx;
  std::vector<double> w;
  double r = 0;

  LapSamples(const GridField& u, Vec2 x0, double r_in) : r(r_in) {
    if (!(r > 0) || !std::isfinite(r))
      throw domain_error("the fit radius must be positive");
    if (!u.box().contains(x0, r))
      throw domain_error("the fit ball leaves the grid");
    double u0 = u.interp(x0);
    double r2 = r * r * (1 + 1e-12);
    int i_lo = static_cast<int>(std::ceil((x0.x - r - u.origin.x) / u.h));
    int i_hi = static_cast<int>(std::floor((x0.x + r - u.origin.x) / u.h));
    int j_lo = static_cast<int>(std::ceil((x0.y - r - u.origin.y) / u.h));
    int j_hi = static_cast<int>(std::floor((x0.y + r - u.origin.y) / u.h));
    for (int j = std::max(0, j_lo); j <= std::min(u.ny - 1, j_hi); ++j)
      for (int i = std::max(0, i_lo); i <= std::min(u.nx - 1, i_hi); ++i) {
        Vec2 d = u.point(i, j) - x0;
        if (d.norm2() > r2) continue;
        dx.push_back(d);
        w.push_back(u.at(i, j) - u0);
      }
    for (int s = 0; s < 256; ++s) {
      Vec2 d = dir(2 * kPi * s / 256) * r;
      dx.push_back(d);
      w.push_back(u.interp(x0 + d) - u0);
    }
  }

  double value(Vec2 e) const {
    double worst = 0;
    for (std::size_t i = 0; i < dx.size(); ++i)
      worst = std::max(worst, std::abs(w[i] - e.dot(dx[i])));
    return worst / r;
  }

  // value plus a subgradient: the active sample's direction, signed.
  double value_grad(Vec2 e, Vec2& g) const {
    double worst = -1;
    std::size_t arg = 0;
    double sgn = 1;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      double resid = w[i] - e.dot(dx[i]);
      if (std::abs(resid) > worst) {
        worst = std::abs(resid);
        arg = i;
        sgn = resid >= 0 ? 1.0 : -1.0;
      }
    }
    g = dx[arg] * (-sgn / r);
    return worst / r;
  }

  Vec2 least_squares() const {
    double axx = 0, axy = 0, ayy = 0, bx = 0, by = 0;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      axx += dx[i].x * dx[i].x;
      axy += dx[i].x * dx[i].y;
      ayy += dx[i].y * dx[i].y;
      bx += dx[i].x * w[i];
      by += dx[i].y * w[i];
    }
    double det = axx * ayy - axy * axy;
    if (std::abs(det) < 1e-30) return Vec2{0, 0};
    return Vec2{(ayy * bx - axy * by) / det, (axx * by - axy * bx) / det};
  }
};

// Minimize the convex minimax objective: subgradient descent with diminishing
// steps, a small simplex, then a shrinking local scan that pins the optimum
// to fixed precision. Convexity makes the local answer global.
Vec2 minimize_lap(const LapSamples& ls, double& fval, bool& converged) {
  Vec2 e = ls.least_squares();
  Vec2 best_e = e;
  double best_f = ls.value(e);
  double f0 = best_f;
  for (int n = 0; n < 240; ++n) {
    Vec2 g;
    double f = ls.value_grad(e, g);
    if (f < best_f) {
      best_f = f;
      best_e = e;
    }
    double gn = g.norm();
    if (gn < 1e-300) break;
    e = e - g * ((f0 + 1e-6) / ((2.0 + n) * gn));
  }

  // Nelder-Mead polish around the best subgradient iterate.
  double scale = std::max(1e-4, 0.1 * best_f);
  Vec2 sx[3] = {best_e, best_e + Vec2{scale, 0}, best_e + Vec2{0, scale}};
  double sf[3] = {ls.value(sx[0]), ls.value(sx[1]), ls.value(sx[2])};
  for (int it = 0; it < 200; ++it) {
    int order[3] = {0, 1, 2};
    std::sort(order, order + 3, [&](int a, int b) { return sf[a] < sf[b]; });
    Vec2 lo = sx[order[0]], mid = sx[order[1]], hi = sx[order[2]];
    double flo = sf[order[0]], fmid = sf[order[1]], fhi = sf[order[2]];
    if ((lo - hi).norm() + (mid - hi).norm() < 1e-11 * (1 + lo.norm())) break;
    Vec2 cen = (lo + mid) * 0.5;
    Vec2 refl = cen + (cen - hi);
    double frefl = ls.value(refl);
    Vec2 nhi = refl;
    double nfhi = frefl;
    if (frefl < flo) {
      Vec2 stretch = cen + (cen - hi) * 2.0;
      double fexp = ls.value(stretch);
      if (fexp < frefl) {
        nhi = stretch;
        nfhi = fexp;
      }
    } else if (frefl >= fmid) {
      Vec2 con = cen + (hi - cen) * 0.5;
      double fcon = ls.value(con);
      if (fcon < fhi) {
        nhi = con;
        nfhi = fcon;
      } else {
        sx[0] = lo;
        sf[0] = flo;
        sx[1] = lo + (mid - lo) * 0.5;
        sf[1] = ls.value(sx[1]);
        sx[2] = lo + (hi - lo) * 0.5;
        sf[2] = ls.value(sx[2]);
        continue;
      }
    }
    sx[0] = lo;
    sf[0] = flo;
    sx[1] = mid;
    sf[1] = fmid;
    sx[2] = nhi;
    sf[2] = nfhi;
  }
  for (int i = 0; i < 3; ++i)
    if (sf[i] < best_f) {
      best_f = sf[i];
      best_e = sx[i];
    }

  double rad = std::max(1e-6, 0.02 * best_f);
  converged = false;
  for (int round = 0; round < 48; ++round) {
    bool moved = false;
    for (int a = -3; a <= 3; ++a)
      for (int b = -3; b <= 3; ++b) {
        if (a == 0 && b == 0) continue;
        Vec2 cand = best_e + Vec2{a * rad / 3, b * rad / 3};
        double f = ls.value(cand);
        if (f < best_f) {
          best_f = f;
          best_e = cand;
          moved = true;
        }
      }
    if (!moved) rad *= 0.35;
    if (rad <= 1e-10 * (1 + best_e.norm())) {
      converged = true;
      break;
    }
  }
  fval = best_f;
  return best_e;
}

}  // namespace

LinearFit lap_probe(const GridField& u, Vec2 x0, double r) {
  LapSamples ls(u, x0, r);
  LinearFit fit;
  fit.x0 = x0;
  fit.r = r;
  fit.e = minimize_lap(ls, fit.deviation, fit.converged);
  return fit;
}

double slope_set_diameter(const GridField& u, Vec2 x0, double r, double delta) {
  if (!(delta >= 0)) throw domain_error("delta must be nonnegative");
  LapSamples ls(u, x0, r);
  double fbest;
  bool conv;
  Vec2 e0 = minimize_lap(ls, fbest, conv);
  if (fbest > delta) return 0;

  auto extent = [&](Vec2 d) {
    double hi = std::max(delta, 1e-3);
    int grow = 0;
    while (ls.value(e0 + d * hi) <= delta) {
      hi *= 2;
      if (++grow > 60)
        throw domain_error("the near-optimal slope set fails to close");
    }
    double lo = 0;
    for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
      double mid = 0.5 * (lo + hi);
      (ls.value(e0 + d * mid) <= delta ? lo : hi) = mid;
    }
    return lo;
  };

  double diam = 0;
  for (int m = 0; m < 32; ++m) {
    Vec2 d = dir(kPi * m / 32);
    diam = std::max(diam, extent(d) + extent(Vec2{-d.x, -d.y}));
  }
  return diam;
}

DerivativeSet blowup_probe(const GridField& u, const Hamiltonian& H, Vec2 x0,
                           const std::vector<double>& scales) {
  if (scales.size() < 2)
    throw domain_error("blowup_probe needs at least two scales");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0) || !std::isfinite(scales[i]))
      throw domain_error("scales must be positive");
    if (i > 0 && scales[i] >= scales[i - 1])
      throw domain_error("scales must decrease");
  }

  DerivativeSet out;
  out.scales = scales;
  for (double r : scales) {
    LinearFit fit = lap_probe(u, x0, r);
    double delta = 2 * std::max(fit.deviation, kFitTol);
    out.set_diameters.push_back(slope_set_diameter(u, x0, r, delta));
    out.fits.push_back(fit);
  }

  std::size_t n = out.fits.size();
  double spread = (out.fits[n - 1].e - out.fits[n - 2].e).norm();
  out.diameter = std::max(spread, out.set_diameters.back());

  try {
    auto samples = slopes(u, H, x0, scales, 0.05);
    double su = *samples.back().su_extrapolated;
    out.slope_residual = std::abs(H(out.fits[n - 1].e) - su);
  } catch (const convergence_error&) {
    out.slope_residual = kNan;
  }
  return out;
}

ConeSlopeResult cone_slope(const GridField& u, const Hamiltonian& H, Vec2 x,
                           double t, double k_cap) {
  if (!(t > 0) || !std::isfinite(t))
    throw domain_error("the ring radius must be positive");
  if (!u.box().contains(x, t))
    throw domain_error("the slope ring leaves the grid");
  if (k_cap < 0) k_cap = slope_level_cap(u, H);
  if (!(k_cap > H.min_value))
    throw domain_error("k_cap must sit above the minimum of H");

  const int n = 512;
  double u0 = u.interp(x);
  std::vector<Vec2> ring(n);
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) {
    ring[i] = dir(2 * kPi * i / n) * t;
    g[i] = u.interp(x + ring[i]) - u0;
  }

  // Worst ring defect against the cone at level k; sign picks the side.
  auto defect = [&](double k, double sgn) {
    SublevelPolygon poly = sublevel_polygon(H, k, 512);
    double worst = -kInf;
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, sgn * g[i] - cone_eval(poly, ring[i] * sgn));
    return worst;
  };
  auto bisect = [&](double sgn) {
    double slack = 1e-12 * (1 + std::abs(u0));
    double lo = H.min_value;
    if (defect(lo, sgn) <= slack) return lo;
    double hi = k_cap;
    if (defect(hi, sgn) > slack)
      throw domain_error(
          "the ring defect survives every level below k_cap; the field is "
          "steeper than the cap admits");
    for (int it = 0; it < 80 && hi - lo > 1e-6 * (1 + std::abs(hi)); ++it) {
      double mid = 0.5 * (lo + hi);
      (defect(mid, sgn) <= slack ? hi : lo) = mid;
    }
    return hi;
  };

  ConeSlopeResult res;
  res.s_up = bisect(1.0);
  res.s_down = -bisect(-1.0);

  SublevelPolygon poly_up = sublevel_polygon(H, res.s_up, 512);
  int arg = 0;
  double worst = -kInf;
  for (int i = 0; i < n; ++i) {
    double d = g[i] - cone_eval(poly_up, ring[i]);
    if (d > worst) {
      worst = d;
      arg = i;
    }
  }
  auto theta_defect = [&](double th) {
    Vec2 z = dir(th) * t;
    return u.interp(x + z) - u0 - cone_eval(poly_up, z);
  };
  double a = 2 * kPi * (arg - 1) / n;
  double b = 2 * kPi * (arg + 1) / n;
  const double phi = (std::sqrt(5.0) - 1) / 2;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = theta_defect(x1), f2 = theta_defect(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = theta_defect(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = theta_defect(x2);
    }
  }
  double th = f1 >= f2 ? x1 : x2;
  res.witness = x + dir(th) * t;
  res.residual = std::abs(theta_defect(th));
  return res;
}

FlowTrace gradient_flow_trace(const GridField& u, const Hamiltonian& H, Vec2 x0,
                              double t, int max_steps) {
  if (!(t > 0) || !std::isfinite(t))
    throw domain_error("the step length must be positive");
  if (t < 2 * u.h - 1e-12)
    throw domain_error(
        "a step below twice the grid spacing cannot resolve the ring");
  if (max_steps < 1) throw domain_error("max_steps must be positive");

  FlowTrace trace;
  trace.t = t;
  double cap = slope_level_cap(u, H);
  Vec2 y = x0;
  trace.points.push_back(y);
  for (int s = 0; s < max_steps; ++s) {
    if (!u.box().contains(y, t)) {
      trace.exited = true;
      break;
    }
    ConeSlopeResult cs = cone_slope(u, H, y, t, cap);
    trace.slope_values.push_back(cs.s_up);
    trace.cone_residuals.push_back(cs.residual);
    y = cs.witness;
    trace.points.push_back(y);
  }
  return trace;
}

ModulusTable modulus_estimate(const GridField& u, const Hamiltonian&, Vec2 z,
                              double r, const std::vector<double>& s_schedule) {
  if (!(r > 0) || !std::isfinite(r))
    throw domain_error("the modulus radius must be positive");
  if (s_schedule.empty()) throw domain_error("the schedule is empty");

  ModulusTable table;
  table.fit_scale = r / 8;
  for (double s : s_schedule) {
    if (!(s > 0) || s > r * (1 + 1e-12))
      throw domain_error("schedule entries must lie in (0, r]");
    std::vector<Vec2> probes;
    probes.push_back(z);
    for (int i = 0; i < 12; ++i) probes.push_back(z + dir(2 * kPi * i / 12) * (0.9 * s));
    for (int i = 0; i < 4; ++i)
      probes.push_back(z + dir(2 * kPi * (i + 0.5) / 4) * (0.45 * s));
    std::vector<Vec2> es;
    for (Vec2 p : probes) {
      if (!u.box().contains(p, table.fit_scale))
        throw domain_error("modulus probes leave the grid; shrink r");
      es.push_back(lap_probe(u, p, table.fit_scale).e);
    }
    double rho = 0;
    for (std::size_t a = 0; a < es.size(); ++a)
      for (std::size_t b = a + 1; b < es.size(); ++b)
        rho = std::max(rho, (es[a] - es[b]).norm());
    table.s_over_r.push_back(s / r);
    table.rho.push_back(rho);
  }
  return table;
}

}  // namespace hamcalc
