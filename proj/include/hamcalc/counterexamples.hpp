#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hamcalc/grid_field.hpp"
#include "hamcalc/vec2.hpp"

namespace hamcalc {

// Tilted 1-Lipschitz profile field u(x) = ((b+a)/2).x + f(((b-a)/2).x).
struct CounterexampleSpec {
  enum class Profile { abs, sin_log, custom };

  Vec2 a{0, 0};
  Vec2 b{0, 1};
  Profile f = Profile::abs;
  double lambda0 = 1;  // |b - a|
  std::function<double(double)> custom_f;      // used when f == custom
  std::vector<double> custom_kinks;

  static CounterexampleSpec parse(const std::string& json);
};

// Validates the spec (a != b, profile 1-Lipschitz on samples, lambda0
// consistent with |b-a|); throws domain_error otherwise.
void validate(const CounterexampleSpec& spec);

double uf_value(const CounterexampleSpec& spec, Vec2 x);
GridField build_uf(const CounterexampleSpec& spec, Box box, int n);

// Crease lines {x : dir.x = offset} where the profile has a kink.
struct CreaseSet {
  Vec2 dir;  // (b - a)/2
  std::vector<double> offsets;
};
CreaseSet uf_crease(const CounterexampleSpec& spec);

// x sin(log|log|x||), 0 at 0, with |x| confined to [1e-6, 1 - 1e-6] to keep
// the double logarithm finite.
double preiss_w(double x1);
GridField preiss_profile(double lo, double hi, int n);  // single row, ny = 1
GridField preiss_field(Box box, int n);                 // lifted, constant in x2

double aronsson_value(Vec2 x);  // |x1|^{4/3} - |x2|^{4/3}
GridField aronsson_exact(Box box, int n);

}  // namespace hamcalc
