#include "hamcalc/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hamcalc/convex.hpp"
#include "hamcalc/errors.hpp"

namespace hamcalc {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json to_json(Vec2 v) { return json::array({v.x, v.y}); }

json to_json(const MinimumResult& r) {
  return {{"p0", to_json(r.p0)}, {"value", r.value}, {"tol", r.tol}};
}

json to_json(const FenchelGap& g) {
  return {{"max_violation", g.max_violation},
          {"max_equality_residual", g.max_equality_residual}};
}

json to_json(const SubdifferentialSet& s) {
  json pts = json::array();
  for (Vec2 p : s.extreme_points) pts.push_back(to_json(p));
  const char* kind = s.kind() == SubdifferentialSet::Kind::point     ? "point"
                     : s.kind() == SubdifferentialSet::Kind::segment ? "segment"
                                                                     : "polygon";
  return {{"base_point", to_json(s.base_point)},
          {"extreme_points", pts},
          {"kind", kind},
          {"tol", s.tol}};
}

json to_json(const PhiResult& r) {
  return {{"phi", r.phi}, {"p", to_json(r.p)}, {"e", to_json(r.e)}};
}

json to_json(const ConditionAReport& r) {
  json table = json::array();
  for (const auto& c : r.phi_table)
    table.push_back({{"R", c.R}, {"eta", c.eta}, {"phi", c.phi}});
  json j = {{"passes", r.passes},
            {"phi_table", table},
            {"strictly_convex", r.strictly_convex},
            {"conjugate_C1", r.conjugate_C1},
            {"phi_tol", r.phi_tol},
            {"collinear_tol", r.collinear_tol},
            {"run_span_min", r.run_span_min},
            {"conjugate_C1_tol", r.conjugate_C1_tol}};
  if (r.witness)
    j["witness"] = json::array({to_json((*r.witness)[0]), to_json((*r.witness)[1])});
  else
    j["witness"] = nullptr;
  return j;
}

json to_json(const SublevelPolygon& poly) {
  json pts = json::array();
  for (Vec2 p : poly.vertices) pts.push_back(to_json(p));
  return {{"k", poly.k},
          {"vertices", pts},
          {"hausdorff_tol", poly.hausdorff_tol},
          {"degenerate", poly.degenerate()}};
}

json to_json(const SupportIdentityReport& r) {
  return {{"level", r.level},
          {"max_pq_residual", r.max_pq_residual},
          {"max_vertex_angle", r.max_vertex_angle},
          {"tol", r.tol}};
}

json to_json(const MarginResult& r) {
  json rows = json::array();
  for (const auto& row : r.certificate)
    rows.push_back(
        {{"k", row.k}, {"delta", row.delta}, {"worst_gap", row.worst_gap}});
  return {{"C", r.C}, {"capped", r.capped}, {"certificate", rows}};
}

json to_json(const SlopeSample& s) {
  json j = {{"x", to_json(s.x)},
            {"t", s.t},
            {"s_plus", s.s_plus},
            {"s_minus", s.s_minus}};
  j["su_extrapolated"] = s.su_extrapolated ? json(*s.su_extrapolated) : json();
  return j;
}

json to_json(const CriteriaReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"x", to_json(row.x)},
                    {"worst_up_violation", row.worst_up_violation},
                    {"worst_down_violation", row.worst_down_violation},
                    {"largest_ok_t", row.largest_ok_t}});
  return {{"rows", rows},
          {"worst_up_violation", r.worst_up_violation},
          {"worst_down_violation", r.worst_down_violation},
          {"tol", r.tol},
          {"passes", r.passes()}};
}

json to_json(const CCReport& r) {
  json j = {{"worst_violation", r.worst_violation},
            {"rectangles", r.rectangles},
            {"k_cap", r.k_cap}};
  if (r.witness)
    j["witness"] = {{"V_lo", to_json(r.witness->V.lo)},
                    {"V_hi", to_json(r.witness->V.hi)},
                    {"x0", to_json(r.witness->x0)},
                    {"k", r.witness->k},
                    {"from_above", r.witness->from_above}};
  else
    j["witness"] = nullptr;
  return j;
}

json to_json(const LinearFit& f) {
  return {{"e", to_json(f.e)},
          {"deviation", f.deviation},
          {"x0", to_json(f.x0)},
          {"r", f.r},
          {"converged", f.converged}};
}

json to_json(const DerivativeSet& d) {
  json fits = json::array();
  for (const auto& f : d.fits) fits.push_back(to_json(f));
  return {{"scales", d.scales},
          {"fits", fits},
          {"set_diameters", d.set_diameters},
          {"diameter", d.diameter},
          {"slope_residual", d.slope_residual}};
}

json to_json(const ConeSlopeResult& r) {
  return {{"s_up", r.s_up},
          {"s_down", r.s_down},
          {"witness", to_json(r.witness)},
          {"residual", r.residual}};
}

json to_json(const FlowTrace& t) {
  json pts = json::array();
  for (Vec2 p : t.points) pts.push_back(to_json(p));
  return {{"points", pts},
          {"t", t.t},
          {"slope_values", t.slope_values},
          {"cone_residuals", t.cone_residuals},
          {"exited", t.exited}};
}

json to_json(const ModulusTable& m) {
  return {{"s_over_r", m.s_over_r}, {"rho", m.rho}, {"fit_scale", m.fit_scale}};
}

json to_json(const SolveReport& r) {
  return {{"sweeps", r.sweeps},
          {"update_residual", r.update_residual},
          {"cc_violation", r.cc_violation},
          {"slope_level", r.slope_level},
          {"converged", r.converged}};
}

json to_json(const ResidualReport& r) {
  return {{"k_level", r.k_level},
          {"cone_lipschitz_violation", r.cone_lipschitz_violation},
          {"cc_violation", r.cc_violation},
          {"criteria_violation", r.criteria_violation}};
}

namespace {

// Non-finite floats have no JSON literal; they serialize as null.
void emit(const json& j, std::string& out, int indent) {
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::string pad(indent + 2, ' ');
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        out += json(it.key()).dump();
        out += ": ";
        emit(it.value(), out, indent + 2);
      }
      out += "\n" + std::string(indent, ' ') + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      std::string pad(indent + 2, ' ');
      bool first = true;
      for (const auto& el : j) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        emit(el, out, indent + 2);
      }
      out += "\n" + std::string(indent, ' ') + "]";
      return;
    }
    case json::value_t::number_float: {
      double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : "null";
      return;
    }
    case json::value_t::number_integer:
      out += std::to_string(j.get<long long>());
      return;
    case json::value_t::number_unsigned:
      out += std::to_string(j.get<unsigned long long>());
      return;
    case json::value_t::boolean:
      out += j.get<bool>() ? "true" : "false";
      return;
    case json::value_t::string:
      out += j.dump();
      return;
    default:
      out += "null";
      return;
  }
}

}  // namespace

std::string dump_json(const json& j) {
  std::string out;
  emit(j, out, 0);
  out += "\n";
  return out;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw io_error("write_json: cannot open " + path);
  out << dump_json(j);
  if (!out) throw io_error("write_json: write failed for " + path);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw io_error("write_csv: cannot open " + path);
  for (size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
  if (!out) throw io_error("write_csv: write failed for " + path);
}

SvgCanvas::SvgCanvas(Box box, int width_px, int height_px)
    : box_(box), w_(width_px), h_(height_px) {}

double SvgCanvas::px(double x) const {
  return (x - box_.lo.x) / box_.width() * w_;
}

double SvgCanvas::py(double y) const {
  return (box_.hi.y - y) / box_.height() * h_;
}

void SvgCanvas::polyline(const std::vector<Vec2>& pts, const std::string& stroke,
                         double stroke_width) {
  if (pts.size() < 2) return;
  body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
           format_double(stroke_width) + "\" points=\"";
  for (size_t i = 0; i < pts.size(); ++i) {
    if (i) body_ += " ";
    body_ += format_double(px(pts[i].x)) + "," + format_double(py(pts[i].y));
  }
  body_ += "\"/>\n";
}

void SvgCanvas::polygon(const std::vector<Vec2>& pts, const std::string& stroke,
                        const std::string& fill, double stroke_width) {
  if (pts.size() < 3) return;
  body_ += "<polygon fill=\"" + fill + "\" stroke=\"" + stroke +
           "\" stroke-width=\"" + format_double(stroke_width) + "\" points=\"";
  for (size_t i = 0; i < pts.size(); ++i) {
    if (i) body_ += " ";
    body_ += format_double(px(pts[i].x)) + "," + format_double(py(pts[i].y));
  }
  body_ += "\"/>\n";
}

void SvgCanvas::circle(Vec2 center, double radius_px, const std::string& fill) {
  body_ += "<circle cx=\"" + format_double(px(center.x)) + "\" cy=\"" +
           format_double(py(center.y)) + "\" r=\"" + format_double(radius_px) +
           "\" fill=\"" + fill + "\"/>\n";
}

void SvgCanvas::text(Vec2 anchor, const std::string& s, int font_px) {
  std::string esc;
  for (char c : s) {
    if (c == '&')
      esc += "&amp;";
    else if (c == '<')
      esc += "&lt;";
    else if (c == '>')
      esc += "&gt;";
    else
      esc += c;
  }
  body_ += "<text x=\"" + format_double(px(anchor.x)) + "\" y=\"" +
           format_double(py(anchor.y)) + "\" font-size=\"" +
           std::to_string(font_px) + "\" font-family=\"monospace\">" + esc +
           "</text>\n";
}

void SvgCanvas::heatmap(const GridField& f) {
  double lo = f.values.empty() ? 0 : f.values[0], hi = lo;
  for (double v : f.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double mid = 0.5 * (lo + hi);
  double half = std::max(0.5 * (hi - lo), 1e-300);
  double cw = f.h / box_.width() * w_;
  double ch = f.h / box_.height() * h_;
  char color[8];
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      double t = (f.at(i, j) - mid) / half;
      t = std::max(-1.0, std::min(1.0, t));
      int r, g, b;
      if (t < 0) {
        r = g = static_cast<int>(std::lround(255 * (1 + t)));
        b = 255;
      } else {
        r = 255;
        g = b = static_cast<int>(std::lround(255 * (1 - t)));
      }
      std::snprintf(color, sizeof color, "#%02x%02x%02x", r, g, b);
      Vec2 p = f.point(i, j);
      body_ += "<rect x=\"" + format_double(px(p.x) - 0.5 * cw) + "\" y=\"" +
               format_double(py(p.y) - 0.5 * ch) + "\" width=\"" +
               format_double(cw + 0.25) + "\" height=\"" +
               format_double(ch + 0.25) + "\" fill=\"" + color + "\"/>\n";
    }
}

std::string SvgCanvas::str() const {
  std::string head =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
      std::to_string(w_) + "\" height=\"" + std::to_string(h_) +
      "\" viewBox=\"0 0 " + std::to_string(w_) + " " + std::to_string(h_) +
      "\">\n";
  return head + body_ + "</svg>\n";
}

void SvgCanvas::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw io_error("svg save: cannot open " + path);
  out << str();
  if (!out) throw io_error("svg save: write failed for " + path);
}

void draw_contours(SvgCanvas& canvas, const std::function<double(Vec2)>& f,
                   Box box, const std::vector<double>& levels, int resolution,
                   const std::string& stroke) {
  for (double level : levels) {
    auto lines = level_polylines(f, box, resolution, level);
    for (const auto& line : lines) canvas.polyline(line, stroke, 1.0);
  }
}

}  // namespace hamcalc
