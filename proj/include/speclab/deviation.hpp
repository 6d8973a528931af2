#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "speclab/dynamics.hpp"

namespace speclab {

// sigma^2 of the normalized Birkhoff sums together with the correlation
// terms that produced it.
struct VarianceResult {
  double sigma_sq = 0.0;
  std::vector<std::pair<std::int64_t, double>> terms;  // (lag t, C(t))
  std::string method;                                  // "exact-lattice" | "monte-carlo"
  double std_error = 0.0;                              // Monte-Carlo only
};

// One moderate-deviation tail estimate at window T with a(T) = T^gamma.
struct DeviationEstimate {
  std::int64_t T = 0;
  double gamma = 0.0;
  double epsilon = 0.0;
  double probability = 0.0;
  double std_error = 0.0;
  double rate = 0.0;  // (a(T)^2 / T) log p
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  bool zero_probability_bound = false;  // p-hat = 0; rate uses the 1/(samples+1) pseudo-count
};

struct SpectralConstant {
  double lambda0 = 0.0;
  double sigma_sq = 0.0;
  double c = std::numeric_limits<double>::infinity();
  bool c_infinite = false;
};

struct RateFitRecord {
  double measured_rate = 0.0;   // intercept of rate vs a(T)^2/T
  double predicted_rate = 0.0;  // -epsilon^2 / (2 sigma^2)
  double relative_error = 0.0;
  double slope = 0.0;  // finite-size correction coefficient
};

// Number of steps until every nonzero mode of q has left the box
// [-K,K]^2 under kappa^T; hyperbolicity guarantees this is finite.
std::int64_t mode_escape_time(const HyperbolicToralAutomorphism& map, const TorusObservable& q,
                              std::int64_t hard_cap = 200);

// Exact lattice autocorrelation sum: C(t) = sum_m c_m conj(c_{(kappa^T)^t m})
// over nonzero modes, sigma^2 = C(0) + 2 sum_{t>=1} C(t). All C(t) past the
// escape time vanish identically.
VarianceResult exact_variance(const HyperbolicToralAutomorphism& map, const TorusObservable& q,
                              std::int64_t max_lag);

// Direct estimate of E[(S_T - T q-bar)^2] / T over uniformly sampled points.
VarianceResult mc_variance(const HyperbolicToralAutomorphism& map, const TorusObservable& q,
                           std::int64_t T, std::int64_t samples, std::uint64_t seed,
                           int jobs = 1);

// Estimates mu{rho : <q>_T(rho) - q_bar >= epsilon / T^gamma}, one-sided.
DeviationEstimate mdp_probability(const HyperbolicToralAutomorphism& map,
                                  const TorusObservable& q, std::int64_t T, double gamma,
                                  double epsilon, std::int64_t samples, std::uint64_t seed,
                                  int jobs = 1);

// Extrapolates the finite-T rates to their limit (linear in a(T)^2/T) and
// compares with the Gaussian prediction for the given sigma^2.
RateFitRecord mdp_rate_fit(const std::vector<DeviationEstimate>& estimates, double sigma_sq);

// c(q, M) = 1 / (2 Lambda_0 sigma^2), infinite when sigma^2 = 0.
SpectralConstant concentration_constant(const HyperbolicToralAutomorphism& map,
                                        const TorusObservable& q);
SpectralConstant concentration_constant_from(double lambda0, double sigma_sq);

}  // namespace speclab
