// Acceptance gate: one line per criterion, exit 0 only when every line passes.
// Tolerances are pinned here, not read from flags.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hamcalc/analysis.hpp"
#include "hamcalc/cone.hpp"
#include "hamcalc/convex.hpp"
#include "hamcalc/counterexamples.hpp"
#include "hamcalc/flow.hpp"
#include "hamcalc/hamiltonian.hpp"
#include "hamcalc/rng.hpp"
#include "hamcalc/solver.hpp"

using namespace hamcalc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lp(Vec2 p, double alpha) {
  double ax = std::abs(p.x), ay = std::abs(p.y);
  if (std::isinf(alpha)) return std::max(ax, ay);
  if (alpha == 1.0) return ax + ay;
  double m = std::max(ax, ay);
  if (m == 0) return 0;
  return m * std::pow(std::pow(ax / m, alpha) + std::pow(ay / m, alpha),
                      1.0 / alpha);
}

Box shrink_half(Box b) {
  Vec2 c = b.center();
  return {{c.x - b.width() / 4, c.y - b.height() / 4},
          {c.x + b.width() / 4, c.y + b.height() / 4}};
}

struct Outcome {
  bool ok = true;
  std::ostringstream detail;
  void fail(const std::string& why) {
    ok = false;
    if (detail.tellp() > 0) detail << "; ";
    detail << why;
  }
};

bool criterion1(Outcome& out) {
  for (double alpha : {1.25, 1.5, 2.0, 4.0, 8.0}) {
    auto rep = check_condition_A(build_power_norm(alpha), 32, 1e-9);
    if (!rep.passes || rep.witness) {
      std::ostringstream os;
      os << "alpha " << alpha << " should pass cleanly";
      out.fail(os.str());
    }
  }
  for (double alpha : {1.0, kInf}) {
    auto rep = check_condition_A(build_power_norm(alpha), 32, 1e-9);
    if (rep.passes || !rep.witness) {
      std::ostringstream os;
      os << "alpha " << alpha << " should fail with a witness";
      out.fail(os.str());
    }
  }
  auto rep = check_condition_A(build_flat_edge({0, 0}, {0, 1}), 32, 1e-9);
  if (rep.passes || !rep.witness) out.fail("flat_edge should fail with a witness");
  return out.ok;
}

bool criterion2(Outcome& out) {
  struct Fixture {
    Hamiltonian H;
    std::function<double(Vec2)> L_exact;
    double lip;  // of H on the primal box
    const char* name;
  };
  double R = 3.0;
  int n = 257;
  double h = 2 * R / (n - 1);
  std::vector<Fixture> fixtures;
  double diag = R * std::sqrt(2.0);
  fixtures.push_back({build_quadratic(0.5),
                      [](Vec2 q) { return 0.5 * q.dot(q); }, diag, "half-square"});
  fixtures.push_back({build_quadratic(1.0),
                      [](Vec2 q) { return 0.25 * q.dot(q); }, 2 * diag, "square"});
  fixtures.push_back(
      {build_power_norm(4, 4, 0.25),
       [](Vec2 q) {
         return 0.75 * (std::pow(std::abs(q.x), 4.0 / 3) +
                        std::pow(std::abs(q.y), 4.0 / 3));
       },
       27 * std::sqrt(2.0), "quartic"});
  for (auto& fx : fixtures) {
    double bound = 4 * h * (1 + fx.lip);
    GridField L = legendre_transform(fx.H, Box::centered(R), n);
    Box Lhalf = shrink_half(L.box());
    double gapL = 0;
    for (int j = 0; j < L.ny; ++j)
      for (int i = 0; i < L.nx; ++i) {
        Vec2 q = L.point(i, j);
        if (!Lhalf.contains(q)) continue;
        gapL = std::max(gapL, std::abs(L.at(i, j) - fx.L_exact(q)));
      }
    GridField back = legendre_transform(L, n);
    Box half = Box::centered(R / 2);
    double gapH = 0;
    for (int j = 0; j < back.ny; ++j)
      for (int i = 0; i < back.nx; ++i) {
        Vec2 p = back.point(i, j);
        if (!half.contains(p)) continue;
        gapH = std::max(gapH, std::abs(back.at(i, j) - fx.H(p)));
      }
    if (gapH > bound) {
      std::ostringstream os;
      os << fx.name << " involution gap " << gapH << " > " << bound;
      out.fail(os.str());
    }
    if (gapL > bound) {
      std::ostringstream os;
      os << fx.name << " conjugate gap " << gapL << " > " << bound;
      out.fail(os.str());
    }
  }
  return out.ok;
}

bool criterion3(Outcome& out) {
  for (double alpha : {1.5, 2.0, 4.0}) {
    double dual = alpha / (alpha - 1);
    auto poly = sublevel_polygon(build_power_norm(alpha), 1.0, 4096);
    Rng rng(2026);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
      Vec2 x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
      double nx = x.norm();
      if (nx < 1e-9) continue;
      worst = std::max(worst, std::abs(cone_eval(poly, x) - lp(x, dual)) / nx);
    }
    if (worst > 1e-3) {
      std::ostringstream os;
      os << "alpha " << alpha << " relative gap " << worst;
      out.fail(os.str());
    }
  }
  return out.ok;
}

bool criterion4(Outcome& out) {
  CounterexampleSpec spec;  // a=(0,0), b=(0,1), f=abs, lambda0=1
  auto H = build_flat_edge(spec.a, spec.b);
  int n = 257;
  auto u = build_uf(spec, Box::centered(2.0), n);
  double h = u.h;

  auto cc = cone_comparison_check(u, H, CCSampler{});
  if (cc.worst_violation > 5 * h) {
    std::ostringstream os;
    os << "cc violation " << cc.worst_violation << " > " << 5 * h;
    out.fail(os.str());
  }

  Rng rng(7);
  double ha = H(spec.a);
  for (int i = 0; i < 20; ++i) {
    Vec2 x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    auto samples = slopes(u, H, x, {0.2, 0.1, 0.05}, 1e-2);
    double su = 0;
    bool have = false;
    for (const auto& s : samples)
      if (s.su_extrapolated) {
        su = *s.su_extrapolated;
        have = true;
      }
    if (!have || std::abs(su - ha) > 1e-2) {
      std::ostringstream os;
      os << "probe " << i << " Su " << su << " vs H(a) " << ha;
      out.fail(os.str());
      break;
    }
  }

  for (double r : {0.4, 0.2, 0.1}) {
    auto fit = lap_probe(u, {0.3, 0.0}, r);
    if (std::abs(fit.deviation - 0.5 * spec.lambda0) > 1e-3) {
      std::ostringstream os;
      os << "crease deviation " << fit.deviation << " at r " << r;
      out.fail(os.str());
    }
  }

  auto ds = blowup_probe(u, H, {0.3, 0.0}, {0.4, 0.2, 0.1});
  if (ds.diameter < 0.5 * spec.lambda0) {
    std::ostringstream os;
    os << "crease blowup diameter " << ds.diameter << " < 0.5";
    out.fail(os.str());
  }
  return out.ok;
}

GridField g_amle_field;  // criterion 5 output, probed again in criterion 7

bool criterion5(Outcome& out) {
  DirichletProblem prob;
  prob.domain = Box::centered(1.0);
  prob.g = aronsson_value;
  prob.H = build_quadratic(0.5);
  prob.h = 1.0 / 64;
  auto rep = solve_dirichlet(prob, 1e-7, 800);
  if (!rep.converged) out.fail("AMLE run did not converge");
  double err = 0;
  for (int j = 1; j < rep.field.ny - 1; ++j)
    for (int i = 1; i < rep.field.nx - 1; ++i)
      err = std::max(err, std::abs(rep.field.at(i, j) -
                                   aronsson_value(rep.field.point(i, j))));
  if (err > 0.02) {
    std::ostringstream os;
    os << "AMLE sup-error " << err << " > 0.02";
    out.fail(os.str());
  }
  g_amle_field = rep.field;

  DirichletProblem lin;
  lin.domain = Box::centered(1.0);
  lin.g = [](Vec2 x) { return 0.7 * x.x - 0.3 * x.y + 0.1; };
  lin.H = build_quadratic(0.5);
  lin.h = 1.0 / 32;
  auto lrep = solve_dirichlet(lin, 1e-10, 10);
  double lerr = 0;
  for (int j = 0; j < lrep.field.ny; ++j)
    for (int i = 0; i < lrep.field.nx; ++i) {
      Vec2 p = lrep.field.point(i, j);
      lerr = std::max(lerr, std::abs(lrep.field.at(i, j) -
                                     (0.7 * p.x - 0.3 * p.y + 0.1)));
    }
  if (!lrep.converged || lrep.sweeps > 3 || lerr > 1e-10) {
    std::ostringstream os;
    os << "linear solve sweeps " << lrep.sweeps << " error " << lerr;
    out.fail(os.str());
  }
  return out.ok;
}

bool criterion6(Outcome& out) {
  constexpr double kFitTol = 1e-3;
  DirichletProblem prob;
  prob.domain = Box::centered(1.0);
  prob.g = [](Vec2 x) {
    return 0.4 * std::sin(1.4 * x.x + 0.3) + 0.3 * std::cos(1.1 * x.y) -
           0.15 * x.x * x.y;
  };
  prob.H = build_power_norm(4);
  prob.h = 1.0 / 64;
  auto rep = solve_dirichlet(prob, 1e-7, 800);
  if (!rep.converged) out.fail("l4 solve did not converge");

  Rng rng(11);
  for (int p = 0; p < 10; ++p) {
    Vec2 x{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)};
    auto ds = blowup_probe(rep.field, prob.H, x, {0.4, 0.2, 0.1, 0.05});
    for (size_t i = 0; i + 1 < ds.set_diameters.size(); ++i)
      if (ds.set_diameters[i + 1] > ds.set_diameters[i] + 2 * kFitTol) {
        std::ostringstream os;
        os << "probe " << p << " slope-set extent grows " << ds.set_diameters[i]
           << " -> " << ds.set_diameters[i + 1];
        out.fail(os.str());
        break;
      }
    if (!(ds.slope_residual <= 5e-2)) {  // NaN fails too
      std::ostringstream os;
      os << "probe " << p << " slope residual " << ds.slope_residual;
      out.fail(os.str());
    }
    auto mt = modulus_estimate(rep.field, prob.H, x, 0.25, {0.25, 0.125});
    for (size_t i = 0; i + 1 < mt.rho.size(); ++i)
      if (mt.rho[i + 1] > mt.rho[i] + 0.02) {
        std::ostringstream os;
        os << "probe " << p << " modulus rises " << mt.rho[i] << " -> "
           << mt.rho[i + 1];
        out.fail(os.str());
      }
  }
  return out.ok;
}

bool criterion7(Outcome& out) {
  auto H = build_quadratic(0.5);
  auto lin = GridField::sample([](Vec2 x) { return 0.45 * x.x - 0.2 * x.y; },
                               Box::centered(1.0), 257);
  auto crit = convexity_criteria_check(lin, H, {{0, 0}, {0.2, -0.1}},
                                       {0.1, 0.2, 0.3});
  double worst = std::max(crit.worst_up_violation, crit.worst_down_violation);
  if (worst > 1e-10) {
    std::ostringstream os;
    os << "linear second differences " << worst;
    out.fail(os.str());
  }

  auto parab = GridField::sample([](Vec2 x) { return x.x * x.x; },
                                 Box::centered(1.0), 257);
  auto pc = convexity_criteria_check(parab, H, {{0.5, 0.0}}, {0.1, 0.2, 0.3});
  double closed = 0.25 / 1.2 + 0.25 / 1.6 - 2 * 0.25 / 1.4;
  double ratio = pc.worst_down_violation / closed;
  if (ratio < 0.9 || ratio > 1.1) {
    std::ostringstream os;
    os << "parabola violation " << pc.worst_down_violation << " vs closed form "
       << closed;
    out.fail(os.str());
  }

  if (g_amle_field.nx == 0) {
    out.fail("no solver field available from criterion 5");
    return out.ok;
  }
  auto rr = residual_report(g_amle_field, H);
  if (rr.criteria_violation > 1e-2) {
    std::ostringstream os;
    os << "solver output criteria violation " << rr.criteria_violation;
    out.fail(os.str());
  }
  return out.ok;
}

bool criterion8(Outcome& out) {
  struct Run {
    Hamiltonian H;
    Vec2 p0;
    Vec2 step_dir;  // gradient direction of H at p0
  };
  std::vector<Run> runs;
  runs.push_back({build_quadratic(0.5), {0.6, 0.8}, {0.6, 0.8}});
  runs.push_back({build_quadratic(0.5), {-0.45, 0.3}, {-0.45, 0.3}});
  Vec2 p4{0.5, 0.25};
  runs.push_back({build_power_norm(4), p4,
                  {p4.x * p4.x * p4.x, p4.y * p4.y * p4.y}});
  for (size_t rix = 0; rix < runs.size(); ++rix) {
    auto& run = runs[rix];
    auto u = GridField::sample([&](Vec2 x) { return run.p0.dot(x); },
                               Box::centered(3.0), 193);
    double t = 0.25;
    auto trace = gradient_flow_trace(u, run.H, {0, 0}, t, 8);
    Vec2 want = run.step_dir * (1.0 / run.step_dir.norm());
    for (size_t i = 0; i + 1 < trace.points.size(); ++i) {
      Vec2 d = trace.points[i + 1] - trace.points[i];
      if (std::abs(d.norm() - t) > 1e-9) {
        std::ostringstream os;
        os << "run " << rix << " step length " << d.norm();
        out.fail(os.str());
        break;
      }
      double ang = std::acos(std::min(1.0, d.dot(want) / d.norm())) * 180 /
                   3.14159265358979323846;
      if (ang > 2.0) {
        std::ostringstream os;
        os << "run " << rix << " step angle " << ang << " degrees";
        out.fail(os.str());
        break;
      }
    }
    for (size_t i = 0; i + 1 < trace.slope_values.size(); ++i)
      if (trace.slope_values[i + 1] < trace.slope_values[i] - 1e-7) {
        std::ostringstream os;
        os << "run " << rix << " slope drops at step " << i;
        out.fail(os.str());
      }
    for (double res : trace.cone_residuals)
      if (res > 1e-4) {
        std::ostringstream os;
        os << "run " << rix << " cone residual " << res;
        out.fail(os.str());
        break;
      }
  }
  return out.ok;
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    bool (*fn)(Outcome&);
    double budget_s;
  };
  const Entry entries[] = {
      {"condition-A classification over the norm family", criterion1, 30},
      {"Legendre involution and closed-form conjugates", criterion2, 10},
      {"cone gauge matches the dual norm", criterion3, 5},
      {"tilted-profile counterexample suite", criterion4, 120},
      {"solver benchmark: AMLE and linear data", criterion5, 300},
      {"regularity probes on the solved l4 field", criterion6, 600},
      {"convexity criteria: exact, closed-form, solver", criterion7, 60},
      {"discrete gradient flow on linear fields", criterion8, 30},
  };
  bool all = true;
  int idx = 0;
  for (const auto& e : entries) {
    ++idx;
    Outcome out;
    auto t0 = std::chrono::steady_clock::now();
    try {
      e.fn(out);
    } catch (const std::exception& ex) {
      out.fail(std::string("exception: ") + ex.what());
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (secs > e.budget_s) {
      std::ostringstream os;
      os << "runtime " << secs << "s over budget " << e.budget_s << "s";
      out.fail(os.str());
    }
    std::printf("%s criterion %d: %s [%.1fs]%s%s\n", out.ok ? "PASS" : "FAIL",
                idx, e.name, secs, out.detail.tellp() > 0 ? " -- " : "",
                out.detail.str().c_str());
    std::fflush(stdout);
    all = all && out.ok;
  }
  std::printf("%s\n", all ? "ALL CRITERIA PASS" : "CRITERIA FAILED");
  return all ? 0 : 1;
}
