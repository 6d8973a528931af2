#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "speclab/deviation.hpp"
#include "speclab/dynamics.hpp"

namespace speclab {

// Weighted transfer operator L_xi f = e^{xi q} (f o kappa) on the Fourier
// box [-K_op, K_op]^2. In mode coordinates this is a relabeling
// m -> kappa^T m (modes leaving the box are dropped) followed by a
// convolution with the Fourier coefficients of e^{xi q}.
class TransferModel {
 public:
  TransferModel(HyperbolicToralAutomorphism map, TorusObservable observable, double xi,
                std::int64_t box_radius);

  std::int64_t box_radius() const { return box_radius_; }
  double xi() const { return xi_; }
  std::size_t dim() const { return dim_; }
  const HyperbolicToralAutomorphism& map() const { return map_; }
  const std::map<LatticePoint, Complex>& weight() const { return weight_; }

  // y = L x and y = L^H x on flattened box vectors.
  void apply(const std::vector<Complex>& x, std::vector<Complex>& y) const;
  void apply_adjoint(const std::vector<Complex>& x, std::vector<Complex>& y) const;

  std::size_t index_of(LatticePoint m) const;  // flattened index, box membership assumed

 private:
  HyperbolicToralAutomorphism map_;
  TorusObservable observable_;
  double xi_;
  std::int64_t box_radius_;
  std::size_t side_, dim_;
  std::vector<std::ptrdiff_t> relabel_;  // kappa^T image per box index, -1 when dropped
  std::map<LatticePoint, Complex> weight_;
  std::vector<std::pair<LatticePoint, Complex>> weight_support_;
};

struct PressureCurve {
  std::vector<double> xi_grid;
  std::vector<double> F_values;       // F(xi) = log lambda(xi)
  std::vector<double> lambda_values;  // > 0
  std::vector<double> gap_ratios;     // |second eigenvalue| / lambda, diagnostic
  double sigma_sq_from_pressure = 0.0;  // central second difference at 0
};

struct RateFunction {
  std::vector<double> eta_grid;
  std::vector<double> I_values;
};

struct GartnerEllisEntry {
  std::int64_t T = 0;
  double empirical_rate = 0.0;
  double predicted_rate = 0.0;
  double relative_error = 0.0;
  bool zero_probability_bound = false;
};

struct GartnerEllisComparison {
  std::vector<GartnerEllisEntry> entries;
  double extrapolated_rate = 0.0;  // intercept of empirical rates in a(T)^2/T
  double predicted_rate = 0.0;     // -inf over the closed half-line of I
  double relative_error = 0.0;     // of the extrapolated rate
};

// Fourier coefficients of e^{xi q}, evaluated on a uniform grid of
// grid_factor * K_op points per axis and transformed; modes below the drop
// threshold are discarded. Entire functions of trigonometric polynomials
// have super-exponentially small tails, so the truncation is benign.
std::map<LatticePoint, Complex> exponential_weight_coefficients(const TorusObservable& q,
                                                                double xi,
                                                                std::int64_t half_range,
                                                                std::int64_t grid_points,
                                                                double drop_threshold = 1e-15);

TransferModel build_weighted_transfer(const HyperbolicToralAutomorphism& map,
                                      const TorusObservable& q, double xi,
                                      std::int64_t box_radius);

// Power iteration seeded with the constant mode; returns the leading value
// and a gap certificate |lambda_2| / lambda_1 obtained by deflating with the
// left eigenvector. tol bounds the change of successive Rayleigh quotients.
std::pair<double, double> leading_eigenvalue(const TransferModel& model, double tol);

PressureCurve pressure_curve(const HyperbolicToralAutomorphism& map, const TorusObservable& q,
                             const std::vector<double>& xi_grid, std::int64_t box_radius,
                             double tol = 1e-11, int jobs = 1);

// Symmetric grid {-K dx, ..., 0, ..., K dx}.
std::vector<double> symmetric_grid(double max_abs, double step);

// (1/T) log E[e^{xi (S_T - T q_bar)}] over uniform samples, in log space.
double monte_carlo_cumulant(const HyperbolicToralAutomorphism& map, const TorusObservable& q,
                            double xi, std::int64_t T, std::int64_t samples,
                            std::uint64_t seed, int jobs = 1);

// Discrete Legendre-Fenchel transform with three-point parabolic refinement
// at the argmax. eta values outside the attainable slope range are rejected.
RateFunction legendre_fenchel(const PressureCurve& curve, const std::vector<double>& eta_grid);

// Pairs each empirical moderate-deviation rate with -inf_{eta >= epsilon} I
// and extrapolates the finite-T rates to their limit.
GartnerEllisComparison gartner_ellis_check(const RateFunction& rate,
                                           const std::vector<DeviationEstimate>& estimates);

// Quadratic cumulant limit xi -> sigma^2 xi^2 / 2 sampled so that the slope
// range covers |eta| <= eta_max; the rescaled cumulant of any observable
// with variance sigma^2 converges to exactly this curve.
PressureCurve quadratic_pressure(double sigma_sq, double eta_max, double step);

}  // namespace speclab
