#include "hamcalc/cone.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hamcalc/convex.hpp"
#include "hamcalc/errors.hpp"

namespace hamcalc {

namespace {

constexpr double kRadialTol = 1e-11;

// Distance from p0 to the containment box edge along d.
double box_reach(const Hamiltonian& H, Vec2 d) {
  Box box = Box::centered(kWorkingBoxRadius);
  if (H.domain) {
    box = *H.domain;
    double m = 2 * H.grid_h;
    box.lo.x += m, box.lo.y += m;
    box.hi.x -= m, box.hi.y -= m;
  }
  double reach = 1e300;
  if (d.x > 1e-15) reach = std::min(reach, (box.hi.x - H.p0.x) / d.x);
  if (d.x < -1e-15) reach = std::min(reach, (box.lo.x - H.p0.x) / d.x);
  if (d.y > 1e-15) reach = std::min(reach, (box.hi.y - H.p0.y) / d.y);
  if (d.y < -1e-15) reach = std::min(reach, (box.lo.y - H.p0.y) / d.y);
  return reach;
}

// Largest t <= reach with H(p0 + t d) <= k, by doubling then bisection.
double radial_boundary(const Hamiltonian& H, double k, Vec2 d, double reach) {
  double lo = 0, hi = std::min(1.0, reach);
  while (H(H.p0 + d * hi) <= k) {
    if (hi >= reach * (1 - 1e-12))
      throw domain_error("sublevel set reaches the working box boundary; "
                         "the level is too large for this box");
    lo = hi;
    hi = std::min(2 * hi, reach);
  }
  for (int it = 0; it < 80 && hi - lo > kRadialTol; ++it) {
    double mid = 0.5 * (lo + hi);
    (H(H.p0 + d * mid) <= k ? lo : hi) = mid;
  }
  return lo;
}

SublevelPolygon build_polygon(const Hamiltonian& H, double k, int m) {
  std::vector<Vec2> pts(m);
  for (int i = 0; i < m; ++i) {
    Vec2 d = dir(2 * kPi * i / m);
    pts[i] = H.p0 + d * radial_boundary(H, k, d, box_reach(H, d));
  }
  // The hull has the same support function as the full sample and drops the
  // collinear interior points straight faces produce, which keeps the normal
  // angles strictly increasing for the query bisection.
  std::vector<Vec2> dedup;
  for (auto& p : pts)
    if (dedup.empty() || (p - dedup.back()).norm() > 1e-13 * (1 + p.norm()))
      dedup.push_back(p);
  auto hull = convex_hull(std::move(dedup));

  SublevelPolygon poly;
  poly.k = k;
  poly.vertices = std::move(hull);
  double bulge = 0;
  size_t n = poly.vertices.size();
  if (n >= 3) {
    for (size_t i = 0; i < n; ++i) {
      Vec2 a = poly.vertices[i], b = poly.vertices[(i + 1) % n];
      Vec2 mid = (a + b) * 0.5 - H.p0;
      double len = mid.norm();
      if (len < 1e-12) continue;
      Vec2 d = mid / len;
      Vec2 w = H.p0 + d * radial_boundary(H, k, d, box_reach(H, d));
      Vec2 t = b - a;
      double tl = t.norm();
      if (tl < 1e-15) continue;
      // ccw keeps the interior to the left of each edge; a negative cross
      // means the true boundary bulges outside the chord
      bulge = std::max(bulge, -(t / tl).cross(w - a));
    }
  }
  poly.hausdorff_tol = kRadialTol + bulge;
  return poly;
}

double angle_of(Vec2 v) { return std::atan2(v.y, v.x); }

}  // namespace

void SublevelPolygon::build_cache() const {
  size_t m = vertices.size();
  normal_angles_.resize(m);
  for (size_t i = 0; i < m; ++i) {
    Vec2 e = vertices[(i + 1) % m] - vertices[i];
    normal_angles_[i] = angle_of({e.y, -e.x});
  }
  wrap_ = 0;
  for (size_t i = 1; i < m; ++i)
    if (normal_angles_[i] < normal_angles_[i - 1]) {
      wrap_ = static_cast<int>(i);
      break;
    }
}

int SublevelPolygon::support_vertex(Vec2 x) const {
  int m = static_cast<int>(vertices.size());
  if (m == 0) throw domain_error("empty polygon");
  auto value = [&](int i) { return vertices[i].dot(x); };
  if (m <= 8 || (x.x == 0 && x.y == 0)) {
    int best = 0;
    for (int i = 1; i < m; ++i)
      if (value(i) > value(best)) best = i;
    return best;
  }
  if (normal_angles_.empty()) build_cache();
  double psi = angle_of(x);
  // Sorted view starts at wrap_; the argmax vertex is the start of the first
  // edge whose normal angle is >= psi.
  auto at = [&](int j) { return normal_angles_[(wrap_ + j) % m]; };
  int lo = 0, hi = m;
  while (lo < hi) {
    int mid = (lo + hi) / 2;
    if (at(mid) >= psi)
      hi = mid;
    else
      lo = mid + 1;
  }
  int found = (wrap_ + (lo == m ? 0 : lo)) % m;
  // walk exact ties down to the lowest index of the plateau
  int j = found;
  for (int steps = 0; steps < m; ++steps) {
    int prev = (j - 1 + m) % m;
    if (value(prev) == value(j))
      j = prev;
    else
      break;
  }
  if (j > found) return 0;  // the plateau wraps through vertex 0
  return j;
}

double SublevelPolygon::support(Vec2 x) const {
  return vertices[support_vertex(x)].dot(x);
}

SublevelPolygon sublevel_polygon(const Hamiltonian& H, double k, int vertices) {
  double base = H(H.p0);
  if (k < base - 1e-12 * (1 + std::abs(k)))
    throw domain_error("level below the minimum of H; the sublevel set is empty");
  if (vertices > 0) return build_polygon(H, k, vertices);

  // Default: doubling refinement until probe support values settle.
  int m = 512;
  SublevelPolygon cur = build_polygon(H, k, m);
  while (m < 65536) {
    SublevelPolygon next = build_polygon(H, k, 2 * m);
    double diff = 0;
    for (int i = 0; i < 64; ++i) {
      Vec2 d = dir(2 * kPi * (i + 0.37) / 64);
      diff = std::max(diff, std::abs(next.support(d) - cur.support(d)));
    }
    cur = std::move(next);
    m *= 2;
    if (diff < 1e-8) break;
  }
  return cur;
}

double cone_eval(const SublevelPolygon& poly, Vec2 x) { return poly.support(x); }

namespace {

// Angular distance from direction z to the minor arc between a and b. A
// subgradient segment misses the origin, so its direction span is under pi.
double angle_to_cone(Vec2 z, Vec2 a, Vec2 b) {
  double aa = angle_of(a), ab = angle_of(b);
  double width = ab - aa;
  while (width < 0) width += 2 * kPi;
  if (width > kPi) {
    std::swap(aa, ab);
    width = 2 * kPi - width;
  }
  double off = angle_of(z) - aa;
  while (off < 0) off += 2 * kPi;
  if (off <= width) return 0;
  return std::min(off - width, 2 * kPi - off);
}

}  // namespace

SupportIdentityReport support_identity_check(const Hamiltonian& H, Vec2 p) {
  if ((p - H.p0).norm() <= 1e-12)
    throw domain_error("p coincides with the minimizer; its level cone is degenerate");
  double k = H(p);
  auto poly = sublevel_polygon(H, k, 1024);

  SupportIdentityReport rep;
  rep.level = k;
  rep.max_pq_residual = 0;
  rep.max_vertex_angle = 0;

  // Analytic oracles have no noise floor, so a small probe radius keeps the
  // quotient bias down where the curvature is unbounded; grids need >= 2h.
  double r = H.grid_h > 0 ? std::max(2.5 * H.grid_h, 0.05 * (1 + p.norm()))
                          : 0.02 * (1 + (p - H.p0).norm());
  auto sd = subdifferential_set(H, p, r);
  double qmax = 0;
  for (auto& q : sd.extreme_points) {
    if (q.norm() < 1e-12) continue;
    qmax = std::max(qmax, q.norm());
    rep.max_pq_residual =
        std::max(rep.max_pq_residual, std::abs(poly.support(q) - p.dot(q)));
  }

  for (int j = 0; j < 32; ++j) {
    Vec2 z = dir(2 * kPi * (j + 0.21) / 32);
    Vec2 v = poly.vertices[poly.support_vertex(z)];
    if ((v - H.p0).norm() < 1e-9) continue;
    auto sv = subdifferential_set(H, v, r);
    Vec2 qa = sv.extreme_points.front(), qb = sv.extreme_points.back();
    if (qa.norm() < 1e-12 || qb.norm() < 1e-12) continue;
    if (sv.kind() == SubdifferentialSet::Kind::point) qb = qa;
    rep.max_vertex_angle = std::max(rep.max_vertex_angle, angle_to_cone(z, qa, qb));
  }

  rep.tol = 2 * poly.hausdorff_tol * std::max(1.0, qmax) + 2 * sd.tol * (1 + p.norm());
  return rep;
}

MarginResult cone_margin_constant(const Hamiltonian& H, double R) {
  const int kLevels = 32, kDirs = 720;
  const double deltas[3] = {0.1, 0.01, 0.001};
  double base = H(H.p0);
  if (R <= base) throw domain_error("R must exceed the minimum of H");

  std::map<long long, SublevelPolygon> memo;
  auto polygon_at = [&](double k) -> const SublevelPolygon& {
    long long key = llround(k * 1e9);
    auto it = memo.find(key);
    if (it == memo.end())
      it = memo.emplace(key, build_polygon(H, k, 512)).first;
    return it->second;
  };

  std::vector<Vec2> dirs(kDirs);
  for (int i = 0; i < kDirs; ++i) dirs[i] = dir(2 * kPi * i / kDirs);

  std::vector<double> ks(kLevels);
  for (int j = 0; j < kLevels; ++j) ks[j] = base + (R - base) * j / (kLevels - 1);

  MarginResult res;
  for (double C = 0.25; C <= 4096; C *= std::sqrt(2.0)) {
    bool ok = true;
    std::vector<MarginCertificateRow> rows;
    try {
      for (double k : ks) {
        for (double d : deltas) {
          const auto& lo = polygon_at(k);
          const auto& hi = polygon_at(k + C * d);
          double slack = 1.05 * (lo.hausdorff_tol + hi.hausdorff_tol) + 1e-12;
          double worst = 1e300;
          for (auto& x : dirs)
            worst = std::min(worst, hi.support(x) - lo.support(x) - d);
          rows.push_back({k, d, worst});
          if (worst < -slack) {
            ok = false;
            break;
          }
        }
        if (!ok) break;
      }
    } catch (const domain_error&) {
      // shifted level left the working box; no larger candidate can help
      res.capped = true;
      res.certificate = std::move(rows);
      res.C = C;
      return res;
    }
    if (ok) {
      res.C = C;
      res.certificate = std::move(rows);
      return res;
    }
    res.certificate = std::move(rows);
    res.C = C;
  }
  res.capped = true;
  return res;
}

ConeTable::ConeTable(const Hamiltonian& H, int dirs, double k_max, int k_samples)
    : dirs_(dirs), k_max_(k_max), k_samples_(k_samples) {
  k_min_ = H(H.p0);
  if (k_max <= k_min_)
    throw domain_error("cone table needs k_max above the minimum of H");
  if (k_samples < 2 || dirs < 4 || dirs % 2 != 0)
    throw domain_error("cone table needs k_samples >= 2 and an even dirs >= 4");
  values_.resize(static_cast<size_t>(dirs) * k_samples);
  double s_max = std::sqrt(k_max - k_min_);
  for (int j = 0; j < k_samples; ++j) {
    double s = s_max * j / (k_samples - 1);
    auto poly = build_polygon(H, k_min_ + s * s, 512);
    for (int i = 0; i < dirs; ++i)
      values_[static_cast<size_t>(i) * k_samples + j] = poly.support(direction(i));
  }
}

Vec2 ConeTable::direction(int i) const { return dir(2 * kPi * i / dirs_); }

double ConeTable::support(int i, double k) const {
  // supports are concave in k and near linear in sqrt(k - k_min), so the
  // lattice lives there
  double s_max = std::sqrt(k_max_ - k_min_);
  double s = std::sqrt(std::max(0.0, k - k_min_));
  s = std::min(s, s_max);
  double t = s / s_max * (k_samples_ - 1);
  int j = std::min(static_cast<int>(t), k_samples_ - 2);
  double frac = t - j;
  const double* row = &values_[static_cast<size_t>(i) * k_samples_];
  return row[j] * (1 - frac) + row[j + 1] * frac;
}

double ConeTable::level_for(int i, double value) const {
  const double* row = &values_[static_cast<size_t>(i) * k_samples_];
  if (value <= row[0]) return k_min_;
  if (value > row[k_samples_ - 1]) return k_max_;
  int lo = 0, hi = k_samples_ - 1;
  while (hi - lo > 1) {
    int mid = (lo + hi) / 2;
    (row[mid] >= value ? hi : lo) = mid;
  }
  double frac = (value - row[lo]) / std::max(row[hi] - row[lo], 1e-300);
  frac = std::clamp(frac, 0.0, 1.0);
  double s_max = std::sqrt(k_max_ - k_min_);
  double s = s_max * (lo + frac) / (k_samples_ - 1);
  return k_min_ + s * s;
}

}  // namespace hamcalc
