#include "hamcalc/counterexamples.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "hamcalc/errors.hpp"
#include "hamcalc/hamiltonian.hpp"

namespace hamcalc {
namespace {

// Active band of the oscillating profile. Below the lower cut the phase is
// frozen so the field is linear there; above the upper cut the log factor
// would push the slope past 1, so the phase freezes again. With the 1/1.5
// rescale the profile is 1-Lipschitz: |sin| <= 1 and the chain-rule term is
// bounded by 1/|log s| <= 1/2 on the band.
constexpr double kSinLogLo = 1e-6;
const double kSinLogHi = std::exp(-2.0);

double sin_log_profile(double s) {
  double m = std::clamp(std::abs(s), kSinLogLo, kSinLogHi);
  return s * std::sin(std::log(-std::log(m))) / 1.5;
}

std::function<double(double)> profile_fn(const CounterexampleSpec& spec) {
  switch (spec.f) {
    case CounterexampleSpec::Profile::abs:
      return [](double s) { return std::abs(s); };
    case CounterexampleSpec::Profile::sin_log:
      return sin_log_profile;
    case CounterexampleSpec::Profile::custom:
      if (!spec.custom_f)
        throw domain_error("custom profile selected but no function was given");
      return spec.custom_f;
  }
  throw domain_error("unknown profile");
}

}  // namespace

CounterexampleSpec CounterexampleSpec::parse(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw domain_error(std::string("counterexample spec json: ") + e.what());
  }
  CounterexampleSpec spec;
  try {
    if (j.contains("a")) spec.a = {j["a"][0].get<double>(), j["a"][1].get<double>()};
    if (j.contains("b")) spec.b = {j["b"][0].get<double>(), j["b"][1].get<double>()};
    std::string f = j.value("f", std::string("abs"));
    if (f == "abs")
      spec.f = Profile::abs;
    else if (f == "sin_log")
      spec.f = Profile::sin_log;
    else
      throw domain_error("profile must be \"abs\" or \"sin_log\" in json specs");
    spec.lambda0 = j.value("lambda0", (spec.b - spec.a).norm());
  } catch (const nlohmann::json::exception& e) {
    throw domain_error(std::string("counterexample spec json: ") + e.what());
  }
  return spec;
}

void validate(const CounterexampleSpec& spec) {
  double span = (spec.b - spec.a).norm();
  if (!(span > 1e-12))
    throw domain_error("the segment endpoints a and b must differ");
  if (std::abs(spec.lambda0 - span) > 1e-9 * (1 + span))
    throw domain_error("lambda0 disagrees with |b - a|");

  auto f = profile_fn(spec);
  // Difference quotients on a dense sample over the range the working box
  // can feed the profile.
  double S = (1 + span) * 2 * kWorkingBoxRadius;
  int n = 4001;
  double step = 2 * S / (n - 1);
  double prev = f(-S);
  for (int i = 1; i < n; ++i) {
    double cur = f(-S + i * step);
    if (std::abs(cur - prev) > step * (1 + 1e-6))
      throw domain_error("profile is not 1-Lipschitz on samples");
    prev = cur;
  }
}

double uf_value(const CounterexampleSpec& spec, Vec2 x) {
  Vec2 hs = (spec.a + spec.b) * 0.5;
  Vec2 hd = (spec.b - spec.a) * 0.5;
  return hs.dot(x) + profile_fn(spec)(hd.dot(x));
}

GridField build_uf(const CounterexampleSpec& spec, Box box, int n) {
  validate(spec);
  Vec2 hs = (spec.a + spec.b) * 0.5;
  Vec2 hd = (spec.b - spec.a) * 0.5;
  auto f = profile_fn(spec);
  return GridField::sample(
      [&](Vec2 x) { return hs.dot(x) + f(hd.dot(x)); }, box, n);
}

CreaseSet uf_crease(const CounterexampleSpec& spec) {
  CreaseSet c;
  c.dir = (spec.b - spec.a) * 0.5;
  switch (spec.f) {
    case CounterexampleSpec::Profile::abs:
      c.offsets = {0.0};
      break;
    case CounterexampleSpec::Profile::sin_log:
      c.offsets = {-kSinLogHi, -kSinLogLo, kSinLogLo, kSinLogHi};
      break;
    case CounterexampleSpec::Profile::custom:
      c.offsets = spec.custom_kinks;
      std::sort(c.offsets.begin(), c.offsets.end());
      break;
  }
  return c;
}

double preiss_w(double x1) {
  if (x1 == 0) return 0.0;
  double t = std::clamp(std::abs(x1), 1e-6, 1 - 1e-6);
  return x1 * std::sin(std::log(std::abs(std::log(t))));
}

GridField preiss_profile(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo))
    throw domain_error("profile grid needs hi > lo and at least two nodes");
  GridField g;
  g.origin = {lo, 0};
  g.h = (hi - lo) / (n - 1);
  g.nx = n;
  g.ny = 1;
  g.values.resize(n);
  for (int i = 0; i < n; ++i) g.values[i] = preiss_w(lo + i * g.h);
  return g;
}

GridField preiss_field(Box box, int n) {
  return GridField::sample([](Vec2 x) { return preiss_w(x.x); }, box, n);
}

double aronsson_value(Vec2 x) {
  auto p43 = [](double v) { return std::cbrt(v * v * v * v); };
  return p43(x.x) - p43(x.y);
}

GridField aronsson_exact(Box box, int n) {
  return GridField::sample(aronsson_value, box, n);
}

}  // namespace hamcalc
