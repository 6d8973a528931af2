#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "speclab/deviation.hpp"
#include "speclab/quantize.hpp"

namespace speclab {

// Per-step decay rates r_j = -log|lambda_j| of one damped propagator,
// with the shrinking window w(N) = (log N)^{-(1-alpha)/2}.
struct DecayRateSample {
  std::int64_t N = 0;
  std::vector<double> rates;  // sorted ascending, exactly N entries
  double center = 0.0;        // mean of the damping function
  double alpha = 0.0;
  double width = 0.0;
  std::vector<std::string> warnings;
};

struct WindowSpec {
  enum class Kind { Shrinking, Fixed } kind = Kind::Shrinking;
  double epsilon = 0.0;  // Fixed only

  static WindowSpec shrinking() { return {Kind::Shrinking, 0.0}; }
  static WindowSpec fixed(double eps) { return {Kind::Fixed, eps}; }
};

struct OutsideCount {
  std::int64_t count = 0;
  double fraction = 0.0;
  std::int64_t count_above = 0;  // one-sided tallies, reported alongside
  std::int64_t count_below = 0;
};

struct ConcentrationRow {
  std::int64_t N = 0;
  double width = 0.0;
  std::int64_t count_outside = 0;
  double fraction_outside = 0.0;
  std::int64_t count_above = 0;
  std::int64_t count_below = 0;
  double bound_value = 0.0;  // fraction-scale bound shape e^{-c w^2 log N} / (w^2 log N)
};

struct ConcentrationReport {
  std::vector<ConcentrationRow> rows;
  double alpha = 0.0;
  std::optional<double> epsilon_fixed;          // Fixed mode only
  std::optional<double> fitted_exponent;        // Fixed mode, fractions > 0 only
  bool perfect_concentration = false;           // every fraction is zero
  bool monotone_up_to_noise = false;            // 10% relative allowance
  std::optional<double> empirical_center_drift; // mean rate - center at largest N
  std::vector<std::string> warnings;
};

double width_function(std::int64_t N, double alpha);

DecayRateSample decay_rates(const QuantizedSystem& system, const TorusObservable& g,
                            double alpha);
DecayRateSample decay_rates_from(std::vector<double> rates, double center, std::int64_t N,
                                 double alpha);

OutsideCount count_outside(const DecayRateSample& sample, const WindowSpec& window);

// Post-processing over precomputed samples.
ConcentrationReport concentration_report(const std::vector<DecayRateSample>& samples,
                                         const WindowSpec& window,
                                         const SpectralConstant& constant);

// Convenience sweep: builds the damped propagators, diagonalizes, reports.
ConcentrationReport concentration_sweep(const HyperbolicToralAutomorphism& map,
                                        const TorusObservable& g,
                                        const std::vector<std::int64_t>& N_list, double alpha,
                                        const WindowSpec& window,
                                        const SpectralConstant& constant, int jobs = 1);

// True iff the sample carries exactly N rates (finite-model eigenvalue count).
bool weyl_count_check(const DecayRateSample& sample);

}  // namespace speclab
