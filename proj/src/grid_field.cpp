#include "hamcalc/grid_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hamcalc/errors.hpp"

namespace hamcalc {

double GridField::interp(Vec2 p) const {
  double fx = (p.x - origin.x) / h;
  double fy = (p.y - origin.y) / h;
  const double eps = 1e-9;
  if (fx < -eps || fy < -eps || fx > nx - 1 + eps || fy > ny - 1 + eps)
    throw domain_error("interp: point outside grid");
  fx = std::clamp(fx, 0.0, static_cast<double>(nx - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(ny - 1));
  int i = std::min(static_cast<int>(fx), nx - 2);
  int j = std::min(static_cast<int>(fy), ny - 2);
  if (nx == 1) i = 0;
  if (ny == 1) j = 0;
  double sx = fx - i;
  double sy = fy - j;
  if (nx == 1) sx = 0;
  if (ny == 1) sy = 0;
  double v00 = at(i, j);
  double v10 = nx == 1 ? v00 : at(i + 1, j);
  double v01 = ny == 1 ? v00 : at(i, j + 1);
  double v11 = (nx == 1 || ny == 1) ? (nx == 1 ? v01 : v10) : at(i + 1, j + 1);
  return (1 - sx) * (1 - sy) * v00 + sx * (1 - sy) * v10 +
         (1 - sx) * sy * v01 + sx * sy * v11;
}

double GridField::max_abs() const {
  double m = 0;
  for (double v : values) m = std::max(m, std::fabs(v));
  return m;
}

GridField GridField::sample(const std::function<double(Vec2)>& f, Box box,
                            int nx, int ny) {
  if (nx < 1 || ny < 1) throw domain_error("sample: need at least one node");
  GridField g;
  g.origin = box.lo;
  g.nx = nx;
  g.ny = ny;
  g.h = nx > 1 ? (box.hi.x - box.lo.x) / (nx - 1)
               : (ny > 1 ? (box.hi.y - box.lo.y) / (ny - 1) : 1.0);
  if (ny > 1) {
    double hy = (box.hi.y - box.lo.y) / (ny - 1);
    if (nx > 1 && std::fabs(hy - g.h) > 1e-12 * (std::fabs(g.h) + 1))
      throw domain_error("sample: box/resolution give anisotropic spacing");
    g.h = nx > 1 ? g.h : hy;
  }
  g.values.resize(static_cast<size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) g.at(i, j) = f(g.point(i, j));
  return g;
}

GridField GridField::sample(const std::function<double(Vec2)>& f, Box box,
                            int n) {
  return sample(f, box, n, n);
}

void GridField::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw io_error("save_csv: cannot open " + path);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", h);
  out << nx << ',' << ny << ',' << buf << ',';
  std::snprintf(buf, sizeof buf, "%.17g", origin.x);
  out << buf << ',';
  std::snprintf(buf, sizeof buf, "%.17g", origin.y);
  out << buf << '\n';
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", at(i, j));
      out << buf << (i + 1 < nx ? "," : "\n");
    }
  }
  if (!out) throw io_error("save_csv: write failed for " + path);
}

GridField GridField::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw io_error("load_csv: empty file " + path);
  GridField g;
  {
    std::istringstream hs(line);
    char comma;
    if (!(hs >> g.nx >> comma >> g.ny >> comma >> g.h >> comma >> g.origin.x >>
          comma >> g.origin.y))
      throw io_error("load_csv: bad header in " + path);
  }
  if (g.nx < 1 || g.ny < 1 || !(g.h > 0))
    throw io_error("load_csv: invalid header dimensions in " + path);
  g.values.reserve(static_cast<size_t>(g.nx) * g.ny);
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      if (tok.empty()) continue;
      g.values.push_back(std::stod(tok));
    }
  }
  if (g.values.size() != static_cast<size_t>(g.nx) * g.ny)
    throw io_error("load_csv: value count mismatch in " + path);
  for (double v : g.values)
    if (!std::isfinite(v)) throw io_error("load_csv: non-finite value in " + path);
  return g;
}

}  // namespace hamcalc
