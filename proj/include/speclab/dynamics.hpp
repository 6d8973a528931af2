#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "speclab/errors.hpp"

namespace speclab {

using Complex = std::complex<double>;

// Integer Fourier mode / lattice point on Z^2.
struct LatticePoint {
  std::int64_t m1 = 0;
  std::int64_t m2 = 0;

  friend bool operator==(const LatticePoint&, const LatticePoint&) = default;
  friend auto operator<=>(const LatticePoint&, const LatticePoint&) = default;

  LatticePoint operator-() const { return {-m1, -m2}; }
  std::int64_t linf() const { return std::max(std::llabs(m1), std::llabs(m2)); }
  bool is_zero() const { return m1 == 0 && m2 == 0; }
  // Lexicographic positivity picks one representative of each {m, -m} pair.
  bool lex_positive() const { return m1 > 0 || (m1 == 0 && m2 > 0); }
};

// Point on the 2-torus, both coordinates kept in [0,1).
struct TorusPoint {
  double x = 0.0;
  double p = 0.0;
};

inline double wrap_unit(double v) {
  double w = v - std::floor(v);
  return w < 1.0 ? w : 0.0;  // floor rounding can land exactly on 1.0
}

inline TorusPoint wrap(double x, double p) { return {wrap_unit(x), wrap_unit(p)}; }

// Hyperbolic element of SL(2,Z) acting on T^2 as (x,p) -> (a x + b p, c x + d p) mod 1.
// expansion_rate is the log of the large eigenvalue (natural-log units per step).
struct HyperbolicToralAutomorphism {
  std::int64_t a = 0, b = 0, c = 0, d = 0;
  double expansion_rate = 0.0;

  std::int64_t trace() const { return a + d; }
  HyperbolicToralAutomorphism inverse() const;
  Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d m;
    m << static_cast<double>(a), static_cast<double>(b), static_cast<double>(c),
        static_cast<double>(d);
    return m;
  }
};

// Validates unimodularity and hyperbolicity, computes the expansion rate.
HyperbolicToralAutomorphism make_map(std::int64_t a, std::int64_t b, std::int64_t c,
                                     std::int64_t d);

// kappa^steps applied to rho, one step at a time (so orbit segments compose
// exactly: apply(apply(rho,s),t) runs the identical operation sequence as
// apply(rho,s+t) whenever s and t share a sign).
TorusPoint apply_map(const HyperbolicToralAutomorphism& map, TorusPoint rho,
                     std::int64_t steps);

// Koopman action on Fourier modes: e_m \circ kappa = e_{kappa^T m}.
LatticePoint pushforward_mode(const HyperbolicToralAutomorphism& map, LatticePoint m);

// Real-valued trigonometric polynomial q(x,p) = sum_m c_m e^{2 pi i m.(x,p)}
// with c_{-m} = conj(c_m) maintained on every insertion.
class TorusObservable {
 public:
  TorusObservable() = default;

  // Sets c_m and c_{-m} = conj(c). The zero mode must be real.
  void set_mode(LatticePoint m, Complex c);
  void add_mode(LatticePoint m, Complex c);

  double mean() const;                 // c_{(0,0)}
  double sup_norm_bound() const;       // sum_m |c_m| >= sup |q|
  std::int64_t radius() const;         // max linf over stored modes
  const std::map<LatticePoint, Complex>& modes() const { return modes_; }
  bool empty() const { return modes_.empty(); }

  double evaluate(const TorusPoint& rho) const;           // real half-mode form
  Complex evaluate_complex(const TorusPoint& rho) const;  // full complex sum

  TorusObservable operator+(const TorusObservable& other) const;
  TorusObservable operator-(const TorusObservable& other) const;
  TorusObservable scaled(double s) const;
  // Composition with the map: modes move to kappa^T m, coefficients unchanged.
  TorusObservable pullback(const HyperbolicToralAutomorphism& map) const;

  nlohmann::json to_json() const;
  static TorusObservable from_json(const nlohmann::json& j);

 private:
  void rebuild_plan();

  std::map<LatticePoint, Complex> modes_;

  // Evaluation plan over one representative per conjugate pair.
  struct PlanEntry {
    double m1, m2;
    double re2, im2;  // 2 Re c_m, -2 Im c_m
  };
  std::vector<PlanEntry> plan_;
  double plan_constant_ = 0.0;
  bool plan_has_sin_ = false;
};

// Convenience builders used throughout the tests and the CLI.
TorusObservable constant_observable(double value);
TorusObservable cosine_observable(LatticePoint m, double amplitude);  // amp*cos(2 pi m.rho)
// h o kappa - h: mean-zero, sigma^2 = 0, symmetric Birkhoff averages bounded by 2||h||/T.
TorusObservable coboundary_observable(const HyperbolicToralAutomorphism& map,
                                      const TorusObservable& h);

// (1/T) sum_{t=-T/2}^{T/2-1} q(kappa^t rho); T must be even and >= 2.
double birkhoff_symmetric(const HyperbolicToralAutomorphism& map, const TorusObservable& q,
                          const TorusPoint& rho, std::int64_t T);

}  // namespace speclab
