#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hamcalc/analysis.hpp"
#include "hamcalc/cone.hpp"
#include "hamcalc/convex.hpp"
#include "hamcalc/counterexamples.hpp"
#include "hamcalc/flow.hpp"
#include "hamcalc/grid_field.hpp"
#include "hamcalc/hamiltonian.hpp"
#include "hamcalc/solver.hpp"
#include "hamcalc/vec2.hpp"

namespace hamcalc {

using nlohmann::json;

// Shortest round-trip decimal for a double. All JSON and CSV output goes
// through this so identical runs produce identical bytes.
std::string format_double(double v);

json to_json(Vec2 v);
json to_json(const MinimumResult& r);
json to_json(const FenchelGap& g);
json to_json(const SubdifferentialSet& s);
json to_json(const PhiResult& r);
json to_json(const ConditionAReport& r);
json to_json(const SublevelPolygon& poly);
json to_json(const SupportIdentityReport& r);
json to_json(const MarginResult& r);
json to_json(const SlopeSample& s);
json to_json(const CriteriaReport& r);
json to_json(const CCReport& r);
json to_json(const LinearFit& f);
json to_json(const DerivativeSet& d);
json to_json(const ConeSlopeResult& r);
json to_json(const FlowTrace& t);
json to_json(const ModulusTable& m);
json to_json(const SolveReport& r);
json to_json(const ResidualReport& r);

// Serializes with sorted keys, 2-space indent, and format_double numbers.
std::string dump_json(const json& j);
void write_json(const std::string& path, const json& j);

// CSV: header then rows, numbers via format_double.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Minimal SVG surface mapping a math-coordinate box onto a fixed pixel frame.
// Y axis points up in math coordinates.
class SvgCanvas {
 public:
  SvgCanvas(Box box, int width_px = 640, int height_px = 640);

  void polyline(const std::vector<Vec2>& pts, const std::string& stroke,
                double stroke_width = 1.5);
  void polygon(const std::vector<Vec2>& pts, const std::string& stroke,
               const std::string& fill, double stroke_width = 1.5);
  void circle(Vec2 center, double radius_px, const std::string& fill);
  void text(Vec2 anchor, const std::string& s, int font_px = 12);
  // Grid values as colored cells (blue-white-red around midrange).
  void heatmap(const GridField& f);

  std::string str() const;
  void save(const std::string& path) const;

 private:
  double px(double x) const;
  double py(double y) const;
  Box box_;
  int w_, h_;
  std::string body_;
};

// Level curves of a scalar field: polylines for each requested level.
void draw_contours(SvgCanvas& canvas, const std::function<double(Vec2)>& f,
                   Box box, const std::vector<double>& levels, int resolution,
                   const std::string& stroke);

}  // namespace hamcalc
