#include "speclab/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "speclab/parallel.hpp"

namespace speclab {

double width_function(std::int64_t N, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, Err::BadAlpha, "alpha must lie in (0,1)");
  require(N >= 2, Err::BadNList, "N must be at least 2");
  return std::pow(std::log(static_cast<double>(N)), -(1.0 - alpha) / 2.0);
}

DecayRateSample decay_rates_from(std::vector<double> rates, double center, std::int64_t N,
                                 double alpha) {
  DecayRateSample s;
  s.N = N;
  s.center = center;
  s.alpha = alpha;
  s.width = width_function(N, alpha);
  std::sort(rates.begin(), rates.end());
  s.rates = std::move(rates);
  for (double r : s.rates)
    if (r < -1e-8) {
      // kept as computed, never clamped
      s.warnings.push_back("rate below -1e-8: " + std::to_string(r));
      break;
    }
  return s;
}

DecayRateSample decay_rates(const QuantizedSystem& system, const TorusObservable& g,
                            double alpha) {
  const auto eigenvalues = spectrum(system);
  std::vector<double> rates;
  rates.reserve(eigenvalues.size());
  for (const auto& z : eigenvalues) rates.push_back(-std::log(std::abs(z)));
  return decay_rates_from(std::move(rates), g.mean(), system.N, alpha);
}

OutsideCount count_outside(const DecayRateSample& sample, const WindowSpec& window) {
  const double w = window.kind == WindowSpec::Kind::Fixed ? window.epsilon : sample.width;
  OutsideCount out;
  for (double r : sample.rates) {
    const double dev = r - sample.center;
    if (dev >= w) ++out.count_above;
    if (-dev >= w) ++out.count_below;
    if (std::abs(dev) >= w) ++out.count;
  }
  out.fraction = static_cast<double>(out.count) / static_cast<double>(sample.rates.size());
  return out;
}

bool weyl_count_check(const DecayRateSample& sample) {
  return static_cast<std::int64_t>(sample.rates.size()) == sample.N;
}

namespace {

// Fraction-scale bound shape from the counting estimate:
// e^{-c w^2 log N} / (w^2 log N); zero when c is infinite.
double bound_value(std::int64_t N, double w, const SpectralConstant& constant) {
  if (constant.c_infinite) return 0.0;
  const double logN = std::log(static_cast<double>(N));
  return std::exp(-constant.c * w * w * logN) / (w * w * logN);
}

}  // namespace

ConcentrationReport concentration_report(const std::vector<DecayRateSample>& samples,
                                         const WindowSpec& window,
                                         const SpectralConstant& constant) {
  require(samples.size() >= 3, Err::BadNList, "need at least 3 sample sizes");
  for (std::size_t i = 1; i < samples.size(); ++i)
    require(samples[i].N > samples[i - 1].N, Err::BadNList, "N list must be ascending");

  ConcentrationReport report;
  report.alpha = samples[0].alpha;
  if (window.kind == WindowSpec::Kind::Fixed) report.epsilon_fixed = window.epsilon;

  for (const auto& s : samples) {
    const auto oc = count_outside(s, window);
    ConcentrationRow row;
    row.N = s.N;
    row.width = window.kind == WindowSpec::Kind::Fixed ? window.epsilon : s.width;
    row.count_outside = oc.count;
    row.fraction_outside = oc.fraction;
    row.count_above = oc.count_above;
    row.count_below = oc.count_below;
    row.bound_value = bound_value(s.N, row.width, constant);
    report.rows.push_back(row);
    for (const auto& w : s.warnings) report.warnings.push_back(w);
    if (row.fraction_outside > 10.0 * row.bound_value && !constant.c_infinite)
      report.warnings.push_back("fraction exceeds 10x the asymptotic bound at N = " +
                                std::to_string(s.N));
  }

  report.perfect_concentration = std::all_of(report.rows.begin(), report.rows.end(),
                                             [](const auto& r) { return r.count_outside == 0; });

  report.monotone_up_to_noise = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i)
    if (report.rows[i].fraction_outside > 1.10 * report.rows[i - 1].fraction_outside + 1e-12)
      report.monotone_up_to_noise = false;

  if (window.kind == WindowSpec::Kind::Fixed && !report.perfect_concentration) {
    // least squares of log(fraction) on log N over the nonzero rows
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::int64_t n = 0;
    for (const auto& r : report.rows) {
      if (r.fraction_outside <= 0.0) continue;
      const double x = std::log(static_cast<double>(r.N));
      const double y = std::log(r.fraction_outside);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++n;
    }
    if (n >= 2) {
      const double denom = static_cast<double>(n) * sxx - sx * sx;
      if (std::abs(denom) > 1e-30)
        report.fitted_exponent = -((static_cast<double>(n) * sxy - sx * sy) / denom);
    }
  }

  const auto& last = samples.back();
  double mean_rate = 0.0;
  for (double r : last.rates) mean_rate += r;
  mean_rate /= static_cast<double>(last.rates.size());
  report.empirical_center_drift = mean_rate - last.center;
  return report;
}

ConcentrationReport concentration_sweep(const HyperbolicToralAutomorphism& map,
                                        const TorusObservable& g,
                                        const std::vector<std::int64_t>& N_list, double alpha,
                                        const WindowSpec& window,
                                        const SpectralConstant& constant, int jobs) {
  require(N_list.size() >= 3, Err::BadNList, "need at least 3 Hilbert dimensions");
  std::vector<DecayRateSample> samples(N_list.size());
  parallel_for(N_list.size(), jobs, [&](std::size_t i) {
    const QuantizedSystem sys = damped_propagator(map, g, N_list[i]);
    samples[i] = decay_rates(sys, g, alpha);
  });
  return concentration_report(samples, window, constant);
}

}  // namespace speclab
