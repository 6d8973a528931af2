// Development scratch: validates acceptance-scale numerics ahead of the
// real test suites.
#include <chrono>
#include <cstdio>
#include <vector>

#include "speclab/deviation.hpp"
#include "speclab/dynamics.hpp"
#include "speclab/quantize.hpp"
#include "speclab/spectral.hpp"
#include "speclab/transfer.hpp"

using namespace speclab;

int main() {
  const auto arnold = make_map(2, 1, 1, 1);
  const auto q = cosine_observable({1, 0}, 1.0);

  // Legendre-Fenchel of the computed pressure vs eta^2/(2 sigma^2)
  {
    const auto grid = symmetric_grid(0.8, 0.05);
    const auto curve = pressure_curve(arnold, q, grid, 32, 1e-11, 1);
    std::vector<double> etas;
    for (int k = -6; k <= 6; ++k) etas.push_back(0.05 * k);
    const auto rate = legendre_fenchel(curve, etas);
    for (std::size_t i = 0; i < etas.size(); ++i) {
      const double target = etas[i] * etas[i] / (2.0 * 0.5);
      const double rel = target > 0 ? std::abs(rate.I_values[i] - target) / target : 0.0;
      std::printf("eta=%+.2f I=%.8f target=%.8f rel=%.4f\n", etas[i], rate.I_values[i],
                  target, rel);
    }
  }

  // MDP probabilities, small-sample trend
  {
    std::vector<DeviationEstimate> est;
    for (std::int64_t T : {50, 100, 200})
      est.push_back(mdp_probability(arnold, q, T, 0.25, 1.0, 200000, 42, 1));
    for (const auto& e : est)
      std::printf("T=%lld p=%.3e rate=%.4f zerobound=%d\n", (long long)e.T, e.probability,
                  e.rate, int(e.zero_probability_bound));
    const auto rq = quadratic_pressure(0.5, 1.5, 0.05);
    const auto rate = legendre_fenchel(rq, symmetric_grid(1.2, 0.05));
    const auto cmp = gartner_ellis_check(rate, est);
    std::printf("GE: extrapolated=%.4f predicted=%.4f rel=%.4f\n", cmp.extrapolated_rate,
                cmp.predicted_rate, cmp.relative_error);
  }

  // quantum side: damped Arnold at N=128 and 256
  {
    TorusObservable g = constant_observable(0.3) + cosine_observable({1, 0}, 0.3);
    for (std::int64_t N : {128, 256}) {
      auto t0 = std::chrono::steady_clock::now();
      const auto sys = damped_propagator(arnold, g, N);
      const auto sample = decay_rates(sys, g, 0.5);
      auto t1 = std::chrono::steady_clock::now();
      double mean = 0.0, rmin = 1e9, rmax = -1e9;
      for (double r : sample.rates) {
        mean += r;
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
      }
      mean /= sample.rates.size();
      const auto fixed = count_outside(sample, WindowSpec::fixed(0.1));
      const auto shrink = count_outside(sample, WindowSpec::shrinking());
      std::printf(
          "N=%lld symbol_radius=%lld mean_rate=%.6f [%.4f, %.4f] w=%.4f out_fix=%lld "
          "out_shr=%lld  (%.2f s)\n",
          (long long)N, (long long)sys.symbol.radius(), mean, rmin, rmax, sample.width,
          (long long)fixed.count, (long long)shrink.count,
          std::chrono::duration<double>(t1 - t0).count());
    }
  }

  // constant damping exactness
  {
    const auto sys = damped_propagator(arnold, constant_observable(0.3), 64);
    const auto vals = spectrum(sys);
    double worst = 0.0;
    for (const auto& z : vals) worst = std::max(worst, std::abs(std::abs(z) - std::exp(-0.3)));
    std::printf("constant damping modulus deviation: %.3e\n", worst);
  }
  return 0;
}
