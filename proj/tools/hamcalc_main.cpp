#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hamcalc/errors.hpp"
#include "hamcalc/report.hpp"
#include "hamcalc/rng.hpp"

using namespace hamcalc;

namespace {

std::string read_arg_payload(const std::string& flag, const std::string& arg) {
  if (std::filesystem::exists(arg)) {
    std::ifstream in(arg);
    if (!in) throw io_error(flag + ": cannot read " + arg);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }
  return arg;
}

Hamiltonian load_hamiltonian(const std::string& arg) {
  return build_hamiltonian(read_arg_payload("--H", arg));
}

std::vector<double> parse_schedule(const std::string& flag,
                                   const std::string& arg) {
  std::vector<double> out;
  std::stringstream ss(arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw domain_error(flag + ": bad number '" + tok + "'");
    }
  }
  if (out.empty()) throw domain_error(flag + ": empty schedule");
  return out;
}

// Named fields keep CLI fixtures reproducible without an expression language;
// anything else is taken as a CSV path.
std::function<double(Vec2)> named_oracle(const std::string& flag,
                                         const std::string& name) {
  if (name == "aronsson") return aronsson_value;
  if (name == "parabola") return [](Vec2 x) { return x.x * x.x; };
  if (name == "uf-abs") {
    CounterexampleSpec spec;
    return [spec](Vec2 x) { return uf_value(spec, x); };
  }
  if (name == "wave")
    return [](Vec2 x) {
      return 0.4 * std::sin(1.4 * x.x + 0.3) + 0.3 * std::cos(1.1 * x.y) -
             0.15 * x.x * x.y;
    };
  if (name.rfind("linear:", 0) == 0) {
    auto c = parse_schedule(flag, name.substr(7));
    if (c.size() != 3)
      throw domain_error(flag + ": linear takes three coefficients a,b,c");
    return [c](Vec2 x) { return c[0] * x.x + c[1] * x.y + c[2]; };
  }
  throw domain_error(flag + ": unknown field '" + name +
                     "' (named: aronsson, parabola, uf-abs, wave, linear:a,b,c; "
                     "or a CSV path)");
}

GridField load_field(const std::string& arg, double box_radius, int n) {
  if (std::filesystem::exists(arg)) return GridField::load_csv(arg);
  return GridField::sample(named_oracle("--u", arg), Box::centered(box_radius), n);
}

struct Common {
  std::string out = ".";
  std::uint64_t seed = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "sampling seed");
}

std::string out_path(const Common& c, const std::string& name) {
  std::filesystem::create_directories(c.out);
  return (std::filesystem::path(c.out) / name).string();
}

json base_config(const std::string& subcommand, const Common& c) {
  return {{"subcommand", subcommand},
          {"out", c.out},
          {"seed", c.seed},
          {"rng", Rng::algorithm()}};
}

int thread_cap() {
  const char* env = std::getenv("HAMCALC_THREADS");
  if (!env) return 1;
  int n = 0;
  try {
    n = std::stoi(env);
  } catch (const std::exception&) {
    throw domain_error("HAMCALC_THREADS: not an integer");
  }
  if (n < 1) throw domain_error("HAMCALC_THREADS: must be positive");
  return n;
}

std::vector<double> contour_levels(const GridField& f, int count) {
  double lo = f.values[0], hi = lo;
  for (double v : f.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<double> levels;
  for (int i = 1; i <= count; ++i)
    levels.push_back(lo + (hi - lo) * i / (count + 1));
  return levels;
}

int run_conjugate(const Common& c, const std::string& h_arg, double R, int n) {
  auto H = load_hamiltonian(h_arg);
  Box box = Box::centered(R);
  GridField L = legendre_transform(H, box, n);
  L.save_csv(out_path(c, "conjugate.csv"));

  GridField back = legendre_transform(L, n);
  double gap = 0;
  Box half = Box::centered(R / 2);
  for (int j = 0; j < back.ny; ++j)
    for (int i = 0; i < back.nx; ++i) {
      Vec2 p = back.point(i, j);
      if (!half.contains(p)) continue;
      gap = std::max(gap, std::abs(back.at(i, j) - H(p)));
    }

  json rep = base_config("conjugate", c);
  rep["H"] = json::parse(H.descriptor.empty() ? "null" : H.descriptor);
  rep["R"] = R;
  rep["n"] = n;
  rep["involution_gap_inner_halfbox"] = gap;
  write_json(out_path(c, "conjugate.json"), rep);

  SvgCanvas canvas(L.box());
  canvas.heatmap(L);
  draw_contours(canvas, [&](Vec2 q) { return L.interp(q); }, L.box(),
                contour_levels(L, 7), 161, "#222222");
  canvas.save(out_path(c, "conjugate.svg"));
  return 0;
}

int run_cone(const Common& c, const std::string& h_arg, double k, int vertices) {
  auto H = load_hamiltonian(h_arg);
  auto poly = sublevel_polygon(H, k, vertices);
  json rep = base_config("cone", c);
  rep["H"] = json::parse(H.descriptor.empty() ? "null" : H.descriptor);
  rep["k"] = k;
  rep["requested_vertices"] = vertices;
  rep["polygon"] = to_json(poly);
  write_json(out_path(c, "cone.json"), rep);

  double reach = 0.1;
  for (Vec2 v : poly.vertices) reach = std::max(reach, std::max(std::abs(v.x), std::abs(v.y)));
  SvgCanvas canvas(Box::centered(reach * 1.2));
  canvas.polygon(poly.vertices, "#0044cc", "#dce6f7");
  canvas.circle({0, 0}, 3, "#cc2200");
  canvas.save(out_path(c, "cone.svg"));
  return 0;
}

int run_condition_a(const Common& c, const std::string& h_arg, int levels,
                    double tol) {
  auto H = load_hamiltonian(h_arg);
  auto rep = check_condition_A(H, levels, tol);
  json j = base_config("condition-a", c);
  j["H"] = json::parse(H.descriptor.empty() ? "null" : H.descriptor);
  j["levels"] = levels;
  j["tol"] = tol;
  j["report"] = to_json(rep);
  write_json(out_path(c, "condition_a.json"), j);
  return rep.passes ? 0 : 1;
}

int run_flow(const Common& c, const std::string& u_arg, const std::string& h_arg,
             double box_radius, int n, Vec2 x, const std::string& sched_arg,
             double slope_tol) {
  auto H = load_hamiltonian(h_arg);
  auto u = load_field(u_arg, box_radius, n);
  auto schedule = parse_schedule("--schedule", sched_arg);
  json j = base_config("flow", c);
  j["u"] = u_arg;
  j["x"] = to_json(x);
  j["schedule"] = schedule;
  j["slope_tol"] = slope_tol;
  int rc = 0;
  try {
    auto samples = slopes(u, H, x, schedule, slope_tol);
    json arr = json::array();
    for (const auto& s : samples) arr.push_back(to_json(s));
    j["samples"] = arr;
    for (const auto& s : samples)
      if (s.su_extrapolated) j["su"] = *s.su_extrapolated;
  } catch (const convergence_error& e) {
    j["error"] = e.what();
    rc = 1;
  }
  write_json(out_path(c, "flow.json"), j);
  return rc;
}

int run_verify_am(const Common& c, const std::string& u_arg,
                  const std::string& h_arg, double box_radius, int n,
                  double tol) {
  auto H = load_hamiltonian(h_arg);
  auto u = load_field(u_arg, box_radius, n);
  CCSampler sampler;
  sampler.seed = c.seed;
  auto cc = cone_comparison_check(u, H, sampler);
  json j = base_config("verify-am", c);
  j["u"] = u_arg;
  j["tol"] = tol;
  j["cc"] = to_json(cc);
  double cap = slope_level_cap(u, H);
  double slack = 1e-3 * (1 + u.max_abs());
  double k_level;
  try {
    k_level = min_cone_lipschitz_level(u, H, cap, slack);
  } catch (const domain_error&) {
    k_level = cap;
  }
  j["k_level"] = k_level;
  j["cone_lipschitz_violation"] = cone_lipschitz_check(u, H, k_level);
  write_json(out_path(c, "verify_am.json"), j);
  return cc.worst_violation <= tol ? 0 : 1;
}

int run_probe_lap(const Common& c, const std::string& u_arg, double box_radius,
                  int n, Vec2 x, double r) {
  auto u = load_field(u_arg, box_radius, n);
  auto fit = lap_probe(u, x, r);
  json j = base_config("probe-lap", c);
  j["u"] = u_arg;
  j["fit"] = to_json(fit);
  write_json(out_path(c, "probe_lap.json"), j);
  return 0;
}

int run_flow_trace(const Common& c, const std::string& u_arg,
                   const std::string& h_arg, double box_radius, int n, Vec2 x,
                   double t, int steps) {
  auto H = load_hamiltonian(h_arg);
  auto u = load_field(u_arg, box_radius, n);
  auto trace = gradient_flow_trace(u, H, x, t, steps);
  json j = base_config("flow-trace", c);
  j["u"] = u_arg;
  j["x"] = to_json(x);
  j["t"] = t;
  j["steps"] = steps;
  j["trace"] = to_json(trace);
  write_json(out_path(c, "flow_trace.json"), j);

  SvgCanvas canvas(u.box());
  canvas.heatmap(u);
  canvas.polyline(trace.points, "#000000", 2.0);
  if (!trace.points.empty()) canvas.circle(trace.points.front(), 4, "#00aa00");
  canvas.save(out_path(c, "flow_trace.svg"));
  return 0;
}

int run_modulus(const Common& c, const std::string& u_arg,
                const std::string& h_arg, double box_radius, int n, Vec2 z,
                double r, const std::string& sched_arg) {
  auto H = load_hamiltonian(h_arg);
  auto u = load_field(u_arg, box_radius, n);
  auto table = modulus_estimate(u, H, z, r, parse_schedule("--schedule", sched_arg));
  json j = base_config("modulus", c);
  j["u"] = u_arg;
  j["z"] = to_json(z);
  j["r"] = r;
  j["table"] = to_json(table);
  write_json(out_path(c, "modulus.json"), j);
  return 0;
}

int run_solve(const Common& c, const std::string& h_arg, const std::string& g_arg,
              double box_radius, int n, double tol, double stencil,
              int max_sweeps) {
  DirichletProblem prob;
  prob.domain = Box::centered(box_radius);
  prob.g = named_oracle("--g", g_arg);
  prob.H = load_hamiltonian(h_arg);
  prob.h = 2 * box_radius / (n - 1);
  prob.stencil_radius = stencil;
  auto rep = solve_dirichlet(prob, tol, max_sweeps);
  rep.field.save_csv(out_path(c, "field.csv"));

  json j = base_config("solve", c);
  j["H"] = json::parse(prob.H.descriptor.empty() ? "null" : prob.H.descriptor);
  j["g"] = g_arg;
  j["box"] = box_radius;
  j["n"] = n;
  j["tol"] = tol;
  j["stencil_radius"] = stencil;
  j["max_sweeps"] = max_sweeps;
  j["report"] = to_json(rep);
  write_json(out_path(c, "solve.json"), j);

  SvgCanvas canvas(rep.field.box());
  canvas.heatmap(rep.field);
  draw_contours(canvas, [&](Vec2 q) { return rep.field.interp(q); },
                rep.field.box(), contour_levels(rep.field, 9), 161, "#222222");
  canvas.save(out_path(c, "field.svg"));
  return rep.converged ? 0 : 1;
}

int run_counterexample(const Common& c, const std::string& spec_arg,
                       double box_radius, int n) {
  auto spec = CounterexampleSpec::parse(read_arg_payload("--spec", spec_arg));
  validate(spec);
  auto field = build_uf(spec, Box::centered(box_radius), n);
  field.save_csv(out_path(c, "field.csv"));

  auto crease = uf_crease(spec);
  json j = base_config("counterexample", c);
  j["spec"] = json::parse(read_arg_payload("--spec", spec_arg));
  j["box"] = box_radius;
  j["n"] = n;
  j["field_csv"] = "field.csv";
  j["lambda0"] = spec.lambda0;
  j["crease"] = {{"dir", to_json(crease.dir)}, {"offsets", crease.offsets}};
  write_json(out_path(c, "manifest.json"), j);
  return 0;
}

int run_report(const Common& c, const std::string& u_arg,
               const std::string& h_arg, double box_radius, int n,
               double bound) {
  auto H = load_hamiltonian(h_arg);
  auto u = load_field(u_arg, box_radius, n);
  auto rep = residual_report(u, H);
  json j = base_config("report", c);
  j["u"] = u_arg;
  j["declared_bound"] = bound;
  j["report"] = to_json(rep);
  write_json(out_path(c, "report.json"), j);
  bool pass = rep.cone_lipschitz_violation <= bound &&
              rep.cc_violation <= bound && rep.criteria_violation <= bound;
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toolkit for L-infinity variational problems in the plane"};
  app.require_subcommand(1);
  int rc = 0;

  Common common;
  std::string h_arg, u_arg, g_arg = "linear:0,0,0", spec_arg = "{}";
  std::string sched_arg = "0.2,0.1,0.05";
  double R = 3.0, box_radius = 1.0, k = 1.0, tol = 1e-3, r = 0.2;
  double xf = 0, yf = 0, t = 0.25, stencil = 0, bound = 0.05, slope_tol = 1e-2;
  int n = 257, vertices = 512, levels = 6, steps = 8, max_sweeps = 500;

  auto* conj = app.add_subcommand("conjugate", "convex conjugate table and involution gap");
  conj->add_option("--H", h_arg, "Hamiltonian JSON or path")->required();
  conj->add_option("--R", R, "primal box radius");
  conj->add_option("--n", n, "grid resolution");
  add_common(conj, common);
  conj->callback([&] { rc = run_conjugate(common, h_arg, R, n); });

  auto* cone = app.add_subcommand("cone", "sublevel-set polygon of H");
  cone->add_option("--H", h_arg)->required();
  cone->add_option("--k", k, "level");
  cone->add_option("--vertices", vertices);
  add_common(cone, common);
  cone->callback([&] { rc = run_cone(common, h_arg, k, vertices); });

  auto* conda = app.add_subcommand("condition-a", "flat-run detection on level sets");
  conda->add_option("--H", h_arg)->required();
  conda->add_option("--levels", levels);
  conda->add_option("--tol", tol);
  add_common(conda, common);
  conda->callback([&] { rc = run_condition_a(common, h_arg, levels, tol); });

  auto* flow = app.add_subcommand("flow", "Hopf-Lax slopes at a point");
  flow->add_option("--u", u_arg, "field CSV or named field")->required();
  flow->add_option("--H", h_arg)->required();
  flow->add_option("--box", box_radius, "sampling radius for named fields");
  flow->add_option("--n", n, "sampling resolution for named fields");
  flow->add_option("--x", xf)->required();
  flow->add_option("--y", yf)->required();
  flow->add_option("--schedule", sched_arg, "comma-separated t values");
  flow->add_option("--slope-tol", slope_tol);
  add_common(flow, common);
  flow->callback([&] {
    rc = run_flow(common, u_arg, h_arg, box_radius, n, {xf, yf}, sched_arg,
                  slope_tol);
  });

  auto* vam = app.add_subcommand("verify-am", "comparison-with-cones verdict");
  vam->add_option("--u", u_arg)->required();
  vam->add_option("--H", h_arg)->required();
  vam->add_option("--box", box_radius);
  vam->add_option("--n", n);
  vam->add_option("--tol", bound, "pass threshold on the worst violation");
  add_common(vam, common);
  vam->callback([&] { rc = run_verify_am(common, u_arg, h_arg, box_radius, n, bound); });

  auto* plap = app.add_subcommand("probe-lap", "best linear fit on a ball");
  plap->add_option("--u", u_arg)->required();
  plap->add_option("--box", box_radius);
  plap->add_option("--n", n);
  plap->add_option("--x", xf)->required();
  plap->add_option("--y", yf)->required();
  plap->add_option("--r", r, "ball radius")->required();
  add_common(plap, common);
  plap->callback([&] { rc = run_probe_lap(common, u_arg, box_radius, n, {xf, yf}, r); });

  auto* ftr = app.add_subcommand("flow-trace", "discrete gradient flow polyline");
  ftr->add_option("--u", u_arg)->required();
  ftr->add_option("--H", h_arg)->required();
  ftr->add_option("--box", box_radius);
  ftr->add_option("--n", n);
  ftr->add_option("--x", xf)->required();
  ftr->add_option("--y", yf)->required();
  ftr->add_option("--t", t, "step length");
  ftr->add_option("--steps", steps);
  add_common(ftr, common);
  ftr->callback([&] {
    rc = run_flow_trace(common, u_arg, h_arg, box_radius, n, {xf, yf}, t, steps);
  });

  auto* mod = app.add_subcommand("modulus", "slope oscillation table around a point");
  mod->add_option("--u", u_arg)->required();
  mod->add_option("--H", h_arg)->required();
  mod->add_option("--box", box_radius);
  mod->add_option("--n", n);
  mod->add_option("--x", xf)->required();
  mod->add_option("--y", yf)->required();
  mod->add_option("--r", r, "outer radius")->required();
  mod->add_option("--schedule", sched_arg, "s values");
  add_common(mod, common);
  mod->callback([&] {
    rc = run_modulus(common, u_arg, h_arg, box_radius, n, {xf, yf}, r, sched_arg);
  });

  auto* slv = app.add_subcommand("solve", "Dirichlet relaxation on a square");
  slv->add_option("--H", h_arg)->required();
  slv->add_option("--g", g_arg, "boundary oracle (named field)")->required();
  slv->add_option("--box", box_radius, "half side of the square domain");
  slv->add_option("--n", n, "nodes per side");
  slv->add_option("--tol", tol, "sweep termination");
  slv->add_option("--stencil", stencil, "ring radius, 0 for 3h");
  slv->add_option("--max-sweeps", max_sweeps);
  add_common(slv, common);
  slv->callback([&] {
    rc = run_solve(common, h_arg, g_arg, box_radius, n, tol, stencil, max_sweeps);
  });

  auto* cex = app.add_subcommand("counterexample", "tilted profile field and manifest");
  cex->add_option("--spec", spec_arg, "spec JSON or path");
  cex->add_option("--box", box_radius);
  cex->add_option("--n", n);
  add_common(cex, common);
  cex->callback([&] { rc = run_counterexample(common, spec_arg, box_radius, n); });

  auto* repc = app.add_subcommand("report", "three-headline residual certificate");
  repc->add_option("--u", u_arg)->required();
  repc->add_option("--H", h_arg)->required();
  repc->add_option("--box", box_radius);
  repc->add_option("--n", n);
  repc->add_option("--bound", bound, "declared pass bound");
  add_common(repc, common);
  repc->callback([&] { rc = run_report(common, u_arg, h_arg, box_radius, n, bound); });

  try {
    thread_cap();  // validated; every pass currently runs on one worker
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const hamcalc::error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return rc;
}
