#include "hamcalc/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hamcalc/errors.hpp"

namespace hamcalc {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Golden-section minimize of a convex 1D slice. Returns the argmin; the
// bracket shrinks to tol so f need not be smooth.
double golden_min(const std::function<double(double)>& f, double lo, double hi,
                  double tol) {
  constexpr double invphi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

double lp_norm(Vec2 p, double alpha) {
  double ax = std::abs(p.x), ay = std::abs(p.y);
  if (std::isinf(alpha)) return std::max(ax, ay);
  if (alpha == 1.0) return ax + ay;
  if (alpha == 2.0) return std::hypot(ax, ay);
  double m = std::max(ax, ay);
  if (m == 0) return 0;
  return m * std::pow(std::pow(ax / m, alpha) + std::pow(ay / m, alpha),
                      1.0 / alpha);
}

// Extreme subgradients of the plain alpha-norm. At the origin the pair
// degenerates to {0, 0}, which is a valid subgradient there.
std::pair<Vec2, Vec2> lp_norm_subgrad(Vec2 p, double alpha) {
  double ax = std::abs(p.x), ay = std::abs(p.y);
  double sx = p.x > 0 ? 1.0 : (p.x < 0 ? -1.0 : 0.0);
  double sy = p.y > 0 ? 1.0 : (p.y < 0 ? -1.0 : 0.0);
  if (ax == 0 && ay == 0) return {{0, 0}, {0, 0}};
  if (std::isinf(alpha)) {
    if (ax > ay) return {{sx, 0}, {sx, 0}};
    if (ay > ax) return {{0, sy}, {0, sy}};
    return {{sx, 0}, {0, sy}};
  }
  if (alpha == 1.0) {
    if (ax == 0) return {{-1, sy}, {1, sy}};
    if (ay == 0) return {{sx, -1}, {sx, 1}};
    return {{sx, sy}, {sx, sy}};
  }
  double n = lp_norm(p, alpha);
  Vec2 g{sx * std::pow(ax / n, alpha - 1), sy * std::pow(ay / n, alpha - 1)};
  return {g, g};
}

Vec2 vec_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw domain_error(std::string(what) + " must be a numeric pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

json vec_to_json(Vec2 v) { return json::array({v.x, v.y}); }

double alpha_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "Inf") return kInf;
  }
  throw domain_error("alpha must be a number or \"inf\"");
}

std::string fmt_point(Vec2 p) {
  std::ostringstream os;
  os << "(" << p.x << ", " << p.y << ")";
  return os.str();
}

}  // namespace

Hamiltonian build_quadratic(double scale, Vec2 center, double offset) {
  if (!(scale > 0)) throw domain_error("quadratic scale must be positive");
  Hamiltonian H;
  H.family = "quadratic";
  H.p0 = center;
  H.min_value = offset;
  H.eval_fn = [=](Vec2 p) { return scale * (p - center).norm2() + offset; };
  H.subgrad_fn = [=](Vec2 p) -> std::pair<Vec2, Vec2> {
    Vec2 g = (p - center) * (2 * scale);
    return {g, g};
  };
  H.lipschitz_bound_fn = [=](double k) {
    double excess = std::max(k - offset, 0.0);
    return center.norm() + std::sqrt(excess / scale);
  };
  json d;
  d["family"] = "quadratic";
  d["scale"] = scale;
  d["center"] = vec_to_json(center);
  d["offset"] = offset;
  H.descriptor = d.dump();
  return H;
}

Hamiltonian build_power_norm(double alpha, double power, double scale) {
  if (!(alpha >= 1)) throw domain_error("alpha must lie in [1, inf]");
  if (!(power >= 1)) throw domain_error("power must be >= 1 for convexity");
  if (!(scale > 0)) throw domain_error("scale must be positive");
  Hamiltonian H;
  H.family = "power_norm";
  H.p0 = {0, 0};
  H.min_value = 0;
  H.eval_fn = [=](Vec2 p) { return scale * std::pow(lp_norm(p, alpha), power); };
  H.subgrad_fn = [=](Vec2 p) -> std::pair<Vec2, Vec2> {
    double n = lp_norm(p, alpha);
    if (n == 0) return {{Vec2{0, 0}}, {Vec2{0, 0}}};
    double s = scale * power * std::pow(n, power - 1);
    auto [g1, g2] = lp_norm_subgrad(p, alpha);
    return {g1 * s, g2 * s};
  };
  // Euclidean radius of {scale*|p|_a^power <= k} via norm equivalence.
  double ratio = alpha >= 2 || std::isinf(alpha)
                     ? std::pow(2.0, 0.5 - (std::isinf(alpha) ? 0.0 : 1 / alpha))
                     : 1.0;
  H.lipschitz_bound_fn = [=](double k) {
    if (k <= 0) return 0.0;
    return ratio * std::pow(k / scale, 1.0 / power);
  };
  json d;
  d["family"] = "power_norm";
  if (std::isinf(alpha))
    d["alpha"] = "inf";
  else
    d["alpha"] = alpha;
  d["power"] = power;
  d["scale"] = scale;
  H.descriptor = d.dump();
  return H;
}

Hamiltonian build_flat_edge(Vec2 a, Vec2 b, double lambda) {
  if ((a - b).norm() < 1e-12 * (1 + a.norm() + b.norm()))
    throw domain_error("flat_edge endpoints must be distinct");
  if (!(lambda > 0)) throw domain_error("flat_edge lambda must be positive");
  Vec2 ab = b - a;
  double len2 = ab.norm2();
  auto project = [=](Vec2 p) {
    double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return a + ab * t;
  };
  Hamiltonian H;
  H.family = "flat_edge";
  H.p0 = (a + b) * 0.5;
  H.min_value = 0;
  // Squared distance to the segment: vanishes exactly on [a,b], so the level
  // set through the midpoint is the segment itself and also the minimum set.
  H.eval_fn = [=](Vec2 p) { return lambda * (p - project(p)).norm2(); };
  H.subgrad_fn = [=](Vec2 p) -> std::pair<Vec2, Vec2> {
    Vec2 g = (p - project(p)) * (2 * lambda);
    return {g, g};
  };
  double reach = std::max(a.norm(), b.norm());
  H.lipschitz_bound_fn = [=](double k) {
    return reach + std::sqrt(std::max(k, 0.0) / lambda);
  };
  json d;
  d["family"] = "flat_edge";
  d["a"] = vec_to_json(a);
  d["b"] = vec_to_json(b);
  d["lambda"] = lambda;
  H.descriptor = d.dump();
  return H;
}

Hamiltonian build_anisotropic(double q11, double q12, double q22) {
  double det = q11 * q22 - q12 * q12;
  if (!(q11 > 0) || !(det > 0))
    throw domain_error("anisotropic form must be positive definite");
  Hamiltonian H;
  H.family = "anisotropic";
  H.p0 = {0, 0};
  H.min_value = 0;
  H.eval_fn = [=](Vec2 p) {
    return 0.5 * (q11 * p.x * p.x + 2 * q12 * p.x * p.y + q22 * p.y * p.y);
  };
  H.subgrad_fn = [=](Vec2 p) -> std::pair<Vec2, Vec2> {
    Vec2 g{q11 * p.x + q12 * p.y, q12 * p.x + q22 * p.y};
    return {g, g};
  };
  double tr = q11 + q22;
  double lam_min = 0.5 * (tr - std::sqrt(tr * tr - 4 * det));
  H.lipschitz_bound_fn = [=](double k) {
    return std::sqrt(2 * std::max(k, 0.0) / lam_min);
  };
  json d;
  d["family"] = "anisotropic";
  d["q11"] = q11;
  d["q12"] = q12;
  d["q22"] = q22;
  H.descriptor = d.dump();
  return H;
}

Hamiltonian build_grid_hamiltonian(const GridField& values) {
  if (values.nx < 2 || values.ny < 2)
    throw domain_error("grid Hamiltonian needs at least 2x2 samples");
  double scale = 1 + values.max_abs();
  double tol = 1e-9 * scale;
  // Discrete directional convexity along rows, columns, and both diagonals.
  const int dirs[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
  for (int j = 0; j < values.ny; ++j) {
    for (int i = 0; i < values.nx; ++i) {
      for (auto& d : dirs) {
        int il = i - d[0], jl = j - d[1], ir = i + d[0], jr = j + d[1];
        if (il < 0 || ir >= values.nx || jl < 0 || jl >= values.ny ||
            jr < 0 || jr >= values.ny)
          continue;
        double gap =
            values.at(i, j) - 0.5 * (values.at(il, jl) + values.at(ir, jr));
        if (gap > tol) {
          std::ostringstream os;
          os << "grid values are not convex: midpoint " << fmt_point(values.point(i, j))
             << " value " << values.at(i, j) << " exceeds the average of "
             << fmt_point(values.point(il, jl)) << " and "
             << fmt_point(values.point(ir, jr)) << " by " << gap;
          throw domain_error(os.str());
        }
      }
    }
  }
  GridField g = values;
  int bi = 0, bj = 0;
  double best = g.at(0, 0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (g.at(i, j) < best) best = g.at(i, j), bi = i, bj = j;
  Hamiltonian H;
  H.family = "grid";
  H.p0 = g.point(bi, bj);
  H.min_value = best;
  H.domain = g.box();
  H.grid_h = g.h;
  H.eval_fn = [g = std::move(g)](Vec2 p) { return g.interp(p); };
  Box box = *H.domain;
  double corner = std::max(std::max(box.lo.norm(), box.hi.norm()),
                           std::max(Vec2{box.lo.x, box.hi.y}.norm(),
                                    Vec2{box.hi.x, box.lo.y}.norm()));
  H.lipschitz_bound_fn = [corner](double) { return corner; };
  json d;
  d["family"] = "grid";
  d["nx"] = values.nx;
  d["ny"] = values.ny;
  H.descriptor = d.dump();
  return H;
}

Hamiltonian build_hamiltonian(const std::string& descriptor_json) {
  json j;
  try {
    j = json::parse(descriptor_json);
  } catch (const std::exception& e) {
    throw domain_error(std::string("descriptor parse failure: ") + e.what());
  }
  if (!j.is_object() || !j.contains("family"))
    throw domain_error("descriptor needs a \"family\" key");
  std::string fam = j.at("family").get<std::string>();
  Hamiltonian H;
  if (fam == "quadratic") {
    Vec2 center{0, 0};
    if (j.contains("center")) center = vec_from_json(j["center"], "center");
    H = build_quadratic(j.value("scale", 0.5), center, j.value("offset", 0.0));
  } else if (fam == "power_norm") {
    if (!j.contains("alpha")) throw domain_error("power_norm needs alpha");
    H = build_power_norm(alpha_from_json(j["alpha"]), j.value("power", 1.0),
                         j.value("scale", 1.0));
  } else if (fam == "flat_edge") {
    if (!j.contains("a") || !j.contains("b"))
      throw domain_error("flat_edge needs endpoints a and b");
    H = build_flat_edge(vec_from_json(j["a"], "a"), vec_from_json(j["b"], "b"),
                        j.value("lambda", 1.0));
  } else if (fam == "anisotropic") {
    H = build_anisotropic(j.value("q11", 1.0), j.value("q12", 0.0),
                          j.value("q22", 1.0));
  } else if (fam == "grid") {
    if (!j.contains("path")) throw domain_error("grid family needs a path");
    std::string path = j.at("path").get<std::string>();
    H = build_grid_hamiltonian(GridField::load_csv(path));
    json d = json::parse(H.descriptor);
    d["path"] = path;
    H.descriptor = d.dump();
  } else {
    throw domain_error("unknown family: " + fam);
  }
  if (j.value("normalized", false)) H = normalize_hamiltonian(H);
  return H;
}

MinimumResult find_minimum(const Hamiltonian& H, Box box) {
  const int n = 65;
  Vec2 best_p = box.lo;
  double best = kInf;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      Vec2 p{box.lo.x + box.width() * i / (n - 1),
             box.lo.y + box.height() * j / (n - 1)};
      double v = H(p);
      if (v < best) best = v, best_p = p;
    }
  }
  double tol1d = 1e-13 * std::max(box.width(), box.height());
  Vec2 p = best_p;
  double val = best;
  for (int round = 0; round < 200; ++round) {
    p.x = golden_min([&](double x) { return H({x, p.y}); }, box.lo.x, box.hi.x,
                     tol1d);
    p.y = golden_min([&](double y) { return H({p.x, y}); }, box.lo.y, box.hi.y,
                     tol1d);
    double v = H(p);
    if (round > 2 && val - v < 1e-15 * (1 + std::abs(v))) {
      val = std::min(val, v);
      break;
    }
    val = std::min(val, v);
  }
  double margin = 1e-7 * std::min(box.width(), box.height());
  if (!box.contains(p, margin)) {
    std::ostringstream os;
    os << "minimum sits on the search box boundary (coercivity box too small); "
       << "best iterate " << fmt_point(p) << " value " << val;
    throw domain_error(os.str());
  }
  return {p, val, 1e-12 * (1 + std::abs(val))};
}

Hamiltonian normalize_hamiltonian(const Hamiltonian& H) {
  if (H.normalized) return H;
  Vec2 c = H.p0;
  double m = H.min_value;
  bool analytic = H.family == "quadratic" || H.family == "power_norm" ||
                  H.family == "flat_edge" || H.family == "anisotropic";
  if (!analytic) {
    Box box = H.domain ? *H.domain : Box::centered(kWorkingBoxRadius);
    MinimumResult r = find_minimum(H, box);
    c = r.p0;
    m = r.value;
  }
  Hamiltonian N;
  N.family = H.family;
  N.p0 = {0, 0};
  N.min_value = 0;
  N.normalized = true;
  N.shift = c;
  auto base = H.eval_fn;
  N.eval_fn = [base, c, m](Vec2 p) {
    double ex = base(p + c) - m;
    return ex * ex;
  };
  if (H.subgrad_fn) {
    auto bsub = H.subgrad_fn;
    N.subgrad_fn = [base, bsub, c, m](Vec2 p) -> std::pair<Vec2, Vec2> {
      double s = 2 * (base(p + c) - m);
      auto [g1, g2] = bsub(p + c);
      return {g1 * s, g2 * s};
    };
  }
  auto bound = H.lipschitz_bound_fn;
  double cn = c.norm();
  N.lipschitz_bound_fn = [bound, cn, m](double k) {
    return bound(m + std::sqrt(std::max(k, 0.0))) + cn;
  };
  if (H.domain) N.domain = Box{H.domain->lo - c, H.domain->hi - c};
  N.grid_h = H.grid_h;
  if (!H.descriptor.empty()) {
    json d = json::parse(H.descriptor);
    d["normalized"] = true;
    N.descriptor = d.dump();
  }
  double probe_radius = kWorkingBoxRadius;
  if (N.domain) {
    Box b = *N.domain;
    double reach = std::min(std::min(-b.lo.x, b.hi.x), std::min(-b.lo.y, b.hi.y));
    probe_radius = std::min(probe_radius, 0.7 * reach);
  }
  if (probe_radius > 0.5 && !superlinear_on_box(N.eval_fn, probe_radius))
    throw domain_error("normalized oracle fails the growth test on the working box");
  return N;
}

std::optional<ConvexityViolation> check_midpoint_convexity(
    const Hamiltonian& H, Box box, int pairs, double tol, Rng& rng) {
  for (int i = 0; i < pairs; ++i) {
    Vec2 p{rng.uniform(box.lo.x, box.hi.x), rng.uniform(box.lo.y, box.hi.y)};
    Vec2 q{rng.uniform(box.lo.x, box.hi.x), rng.uniform(box.lo.y, box.hi.y)};
    double gap = H((p + q) * 0.5) - 0.5 * (H(p) + H(q));
    if (gap > tol) return ConvexityViolation{p, q, gap};
  }
  return std::nullopt;
}

bool superlinear_on_box(const std::function<double(Vec2)>& f, double radius) {
  for (int i = 0; i < 16; ++i) {
    Vec2 d = dir(2 * kPi * i / 16);
    double half = f(d * (radius / 2)) / (radius / 2);
    double full = f(d * radius) / radius;
    if (half <= 1e-12) {
      if (full <= 1e-9) return false;
      continue;
    }
    if (full / half < 1.1) return false;
  }
  return true;
}

}  // namespace hamcalc
