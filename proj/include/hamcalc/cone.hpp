#pragma once

#include <optional>
#include <vector>

#include "hamcalc/hamiltonian.hpp"
#include "hamcalc/vec2.hpp"

namespace hamcalc {

// Convex polygon inscribed in a sublevel set {H <= k}, vertices ccw around p0.
// Its exact support function stands in for the cone gauge; hausdorff_tol bounds
// the gap to the true set (radial search tolerance plus chord sagitta).
struct SublevelPolygon {
  double k = 0;
  std::vector<Vec2> vertices;
  double hausdorff_tol = 0;

  // max over vertices of v.x; O(log m) rotating-normal bisection.
  double support(Vec2 x) const;
  // index of the maximizing vertex, lowest index on exact ties
  int support_vertex(Vec2 x) const;
  bool degenerate() const { return vertices.size() == 1; }

 private:
  // Edge normal angles are ccw increasing with one wrap; built on first query.
  mutable std::vector<double> normal_angles_;
  mutable int wrap_ = 0;
  void build_cache() const;
};

// Radial bisection from p0 along equispaced directions. vertices <= 0 asks for
// the default 512 with doubling refinement until support values settle below
// 1e-8 on probe directions. Throws domain_error for k below the minimum.
SublevelPolygon sublevel_polygon(const Hamiltonian& H, double k, int vertices = 0);

double cone_eval(const SublevelPolygon& poly, Vec2 x);

struct SupportIdentityReport {
  double level;                  // H(p)
  double max_pq_residual;        // over subgradient extremes q: |C(q) - p.q|
  double max_vertex_angle;       // maximizing vertex direction vs its subgradient cone
  double tol;
};

SupportIdentityReport support_identity_check(const Hamiltonian& H, Vec2 p);

struct MarginCertificateRow {
  double k, delta;
  double worst_gap;  // min over directions of C_{k+C delta}(x) - C_k(x) - delta|x|
};

struct MarginResult {
  double C = 0;
  bool capped = false;  // no candidate up to the cap satisfied every row
  std::vector<MarginCertificateRow> certificate;
};

// Smallest candidate C from a doubling schedule with
// C_k(x) + delta|x| <= C_{k + C delta}(x) across the sampled table.
MarginResult cone_margin_constant(const Hamiltonian& H, double R);

// Support values on a fixed direction x level lattice, with monotone
// interpolation in k and the inverse lookup the ring schemes need.
class ConeTable {
 public:
  ConeTable(const Hamiltonian& H, int dirs, double k_max, int k_samples);

  int dirs() const { return dirs_; }
  double k_max() const { return k_max_; }
  double k_min() const { return k_min_; }
  Vec2 direction(int i) const;
  int opposite(int i) const { return (i + dirs_ / 2) % dirs_; }

  // support of {H <= k} in direction(i)
  double support(int i, double k) const;
  // min k with support(i, k) >= value; k_max when unattained
  double level_for(int i, double value) const;

 private:
  int dirs_;
  double k_max_;
  int k_samples_;
  double k_min_ = 0;
  std::vector<double> values_;  // dirs x k_samples, row-major per direction
};

}  // namespace hamcalc
