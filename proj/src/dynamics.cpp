#include "speclab/dynamics.hpp"

#include <algorithm>
#include <numbers>

#include <nlohmann/json.hpp>

namespace speclab {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

HyperbolicToralAutomorphism make_map(std::int64_t a, std::int64_t b, std::int64_t c,
                                     std::int64_t d) {
  require(a * d - b * c == 1, Err::NotUnimodular, "det must be 1");
  const std::int64_t tr = a + d;
  require(std::llabs(tr) > 2, Err::NotHyperbolic, "|trace| must exceed 2");
  const double t = static_cast<double>(std::llabs(tr));
  HyperbolicToralAutomorphism map{a, b, c, d, 0.0};
  map.expansion_rate = std::log((t + std::sqrt(t * t - 4.0)) / 2.0);
  return map;
}

HyperbolicToralAutomorphism HyperbolicToralAutomorphism::inverse() const {
  return {d, -b, -c, a, expansion_rate};
}

TorusPoint apply_map(const HyperbolicToralAutomorphism& map, TorusPoint rho,
                     std::int64_t steps) {
  const double a = static_cast<double>(map.a), b = static_cast<double>(map.b);
  const double c = static_cast<double>(map.c), d = static_cast<double>(map.d);
  if (steps >= 0) {
    for (std::int64_t t = 0; t < steps; ++t) rho = wrap(a * rho.x + b * rho.p, c * rho.x + d * rho.p);
  } else {
    // kappa^{-1} = (d, -b; -c, a)
    for (std::int64_t t = 0; t < -steps; ++t)
      rho = wrap(d * rho.x - b * rho.p, -c * rho.x + a * rho.p);
  }
  return rho;
}

LatticePoint pushforward_mode(const HyperbolicToralAutomorphism& map, LatticePoint m) {
  return {map.a * m.m1 + map.c * m.m2, map.b * m.m1 + map.d * m.m2};
}

void TorusObservable::set_mode(LatticePoint m, Complex c) {
  if (m.is_zero()) {
    require(std::abs(c.imag()) < 1e-14, Err::NonRealMean, "zero mode must be real");
    c = Complex(c.real(), 0.0);
  }
  if (std::abs(c) == 0.0) {
    modes_.erase(m);
    modes_.erase(-m);
  } else {
    modes_[m] = c;
    modes_[-m] = std::conj(c);
  }
  rebuild_plan();
}

void TorusObservable::add_mode(LatticePoint m, Complex c) {
  Complex cur = 0.0;
  if (auto it = modes_.find(m); it != modes_.end()) cur = it->second;
  set_mode(m, cur + c);
}

double TorusObservable::mean() const {
  auto it = modes_.find(LatticePoint{0, 0});
  return it == modes_.end() ? 0.0 : it->second.real();
}

double TorusObservable::sup_norm_bound() const {
  double s = 0.0;
  for (const auto& [m, c] : modes_) s += std::abs(c);
  return s;
}

std::int64_t TorusObservable::radius() const {
  std::int64_t r = 0;
  for (const auto& [m, c] : modes_) r = std::max(r, m.linf());
  return r;
}

void TorusObservable::rebuild_plan() {
  plan_.clear();
  plan_constant_ = mean();
  plan_has_sin_ = false;
  for (const auto& [m, c] : modes_) {
    if (!m.lex_positive()) continue;
    PlanEntry e;
    e.m1 = static_cast<double>(m.m1);
    e.m2 = static_cast<double>(m.m2);
    e.re2 = 2.0 * c.real();
    e.im2 = -2.0 * c.imag();
    if (e.im2 != 0.0) plan_has_sin_ = true;
    plan_.push_back(e);
  }
}

double TorusObservable::evaluate(const TorusPoint& rho) const {
  double v = plan_constant_;
  if (plan_has_sin_) {
    for (const auto& e : plan_) {
      const double phase = kTwoPi * (e.m1 * rho.x + e.m2 * rho.p);
      v += e.re2 * std::cos(phase) + e.im2 * std::sin(phase);
    }
  } else {
    for (const auto& e : plan_) {
      const double phase = kTwoPi * (e.m1 * rho.x + e.m2 * rho.p);
      v += e.re2 * std::cos(phase);
    }
  }
  return v;
}

Complex TorusObservable::evaluate_complex(const TorusPoint& rho) const {
  Complex v = 0.0;
  for (const auto& [m, c] : modes_) {
    const double phase =
        kTwoPi * (static_cast<double>(m.m1) * rho.x + static_cast<double>(m.m2) * rho.p);
    v += c * Complex(std::cos(phase), std::sin(phase));
  }
  return v;
}

TorusObservable TorusObservable::operator+(const TorusObservable& other) const {
  TorusObservable out = *this;
  for (const auto& [m, c] : other.modes_) {
    if (!m.lex_positive() && !m.is_zero()) continue;
    out.add_mode(m, c);
  }
  return out;
}

TorusObservable TorusObservable::operator-(const TorusObservable& other) const {
  return *this + other.scaled(-1.0);
}

TorusObservable TorusObservable::scaled(double s) const {
  TorusObservable out;
  for (const auto& [m, c] : modes_) {
    if (!m.lex_positive() && !m.is_zero()) continue;
    out.set_mode(m, c * s);
  }
  return out;
}

TorusObservable TorusObservable::pullback(const HyperbolicToralAutomorphism& map) const {
  TorusObservable out;
  for (const auto& [m, c] : modes_) {
    if (!m.lex_positive() && !m.is_zero()) continue;
    out.add_mode(pushforward_mode(map, m), c);
  }
  return out;
}

nlohmann::json TorusObservable::to_json() const {
  nlohmann::json j;
  j["K"] = radius();
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [m, c] : modes_) {
    if (!m.lex_positive() && !m.is_zero()) continue;  // conjugate half is implicit
    arr.push_back({{"m", {m.m1, m.m2}}, {"re", c.real()}, {"im", c.imag()}});
  }
  j["modes"] = arr;
  return j;
}

TorusObservable TorusObservable::from_json(const nlohmann::json& j) {
  require(j.contains("K") && j.contains("modes"), Err::MissingField,
          "observable needs K and modes");
  TorusObservable q;
  const std::int64_t K = j.at("K").get<std::int64_t>();
  for (const auto& e : j.at("modes")) {
    LatticePoint m{e.at("m").at(0).get<std::int64_t>(), e.at("m").at(1).get<std::int64_t>()};
    require(m.linf() <= K, Err::RadiusExceedsK, "mode outside declared truncation radius");
    q.add_mode(m, Complex(e.at("re").get<double>(), e.at("im").get<double>()));
  }
  return q;
}

TorusObservable constant_observable(double value) {
  TorusObservable q;
  q.set_mode({0, 0}, value);
  return q;
}

TorusObservable cosine_observable(LatticePoint m, double amplitude) {
  TorusObservable q;
  q.set_mode(m, amplitude / 2.0);
  return q;
}

TorusObservable coboundary_observable(const HyperbolicToralAutomorphism& map,
                                      const TorusObservable& h) {
  return h.pullback(map) - h;
}

double birkhoff_symmetric(const HyperbolicToralAutomorphism& map, const TorusObservable& q,
                          const TorusPoint& rho, std::int64_t T) {
  require(T >= 2 && T % 2 == 0, Err::OddWindow, "window length must be even and >= 2");
  TorusPoint pt = apply_map(map, rho, -T / 2);
  double sum = 0.0;
  for (std::int64_t t = 0; t < T; ++t) {
    sum += q.evaluate(pt);
    pt = apply_map(map, pt, 1);
  }
  return sum / static_cast<double>(T);
}

}  // namespace speclab
