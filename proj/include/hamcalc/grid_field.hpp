#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hamcalc/vec2.hpp"

namespace hamcalc {

// Scalar field sampled on a uniform grid; node (i, j) sits at
// origin + (i*h, j*h), values row-major (j outer, i inner).
struct GridField {
  Vec2 origin;
  double h = 1.0;
  int nx = 0;
  int ny = 0;
  std::vector<double> values;

  double at(int i, int j) const { return values[static_cast<size_t>(j) * nx + i]; }
  double& at(int i, int j) { return values[static_cast<size_t>(j) * nx + i]; }
  Vec2 point(int i, int j) const { return {origin.x + i * h, origin.y + j * h}; }

  Box box() const {
    return {origin, {origin.x + (nx - 1) * h, origin.y + (ny - 1) * h}};
  }
  bool contains(Vec2 p, double margin = 0.0) const {
    return box().contains(p, margin);
  }

  // Bilinear interpolation; p must lie inside the grid box.
  double interp(Vec2 p) const;

  // Largest |value|; 0 for an empty field.
  double max_abs() const;

  static GridField sample(const std::function<double(Vec2)>& f, Box box,
                          int nx, int ny);
  // Square sampling: n nodes per axis over box.
  static GridField sample(const std::function<double(Vec2)>& f, Box box, int n);

  // Header `nx,ny,h,ox,oy`, then ny rows of nx comma-separated values.
  void save_csv(const std::string& path) const;
  static GridField load_csv(const std::string& path);
};

}  // namespace hamcalc
