#pragma once

#include <cmath>

namespace hamcalc {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr bool operator==(const Vec2&) const = default;

  constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
  constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  constexpr double norm2() const { return x * x + y * y; }
  Vec2 unit() const {
    double n = norm();
    return n > 0 ? Vec2{x / n, y / n} : Vec2{0, 0};
  }
  constexpr Vec2 perp() const { return {-y, x}; }
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

inline Vec2 dir(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Axis-aligned rectangle [lo.x, hi.x] x [lo.y, hi.y].
struct Box {
  Vec2 lo;
  Vec2 hi;

  constexpr bool contains(Vec2 p, double margin = 0.0) const {
    return p.x >= lo.x + margin && p.x <= hi.x - margin &&
           p.y >= lo.y + margin && p.y <= hi.y - margin;
  }
  constexpr Vec2 center() const { return (lo + hi) * 0.5; }
  constexpr double width() const { return hi.x - lo.x; }
  constexpr double height() const { return hi.y - lo.y; }
  double radius() const {
    Vec2 c = center();
    return std::max(std::max(hi.x - c.x, c.x - lo.x),
                    std::max(hi.y - c.y, c.y - lo.y));
  }
  static constexpr Box centered(double r) { return {{-r, -r}, {r, r}}; }
};

}  // namespace hamcalc
