#include "speclab/deviation.hpp"

#include <algorithm>
#include <cmath>

#include "speclab/parallel.hpp"
#include "speclab/rng.hpp"

namespace speclab {

namespace {

// Past this size a mode can never re-enter a desk-scale box; stopping here
// keeps the integer orbit far away from int64 overflow.
constexpr std::int64_t kFarAway = std::int64_t(1) << 40;

}  // namespace

std::int64_t mode_escape_time(const HyperbolicToralAutomorphism& map, const TorusObservable& q,
                              std::int64_t hard_cap) {
  const std::int64_t K = q.radius();
  std::int64_t worst = 0;
  for (const auto& [m0, c] : q.modes()) {
    if (m0.is_zero()) continue;
    LatticePoint m = m0;
    std::int64_t t = 0;
    while (m.linf() <= K) {
      m = pushforward_mode(map, m);
      ++t;
      require(t <= hard_cap, Err::LagTooSmall,
              "mode failed to leave the truncation box within the step cap");
    }
    worst = std::max(worst, t);
  }
  return worst;
}

VarianceResult exact_variance(const HyperbolicToralAutomorphism& map, const TorusObservable& q,
                              std::int64_t max_lag) {
  const std::int64_t escape = mode_escape_time(map, q);
  require(max_lag >= escape, Err::LagTooSmall,
          "max_lag " + std::to_string(max_lag) + " below certified escape time " +
              std::to_string(escape));

  VarianceResult out;
  out.method = "exact-lattice";

  const auto& modes = q.modes();
  // Imaginary parts cancel over conjugate mode pairs, so C(t) is real.
  for (std::int64_t t = 0; t <= max_lag; ++t) {
    Complex ct = 0.0;
    for (const auto& [m, c] : modes) {
      if (m.is_zero()) continue;
      LatticePoint img = m;
      bool lost = false;
      for (std::int64_t s = 0; s < t; ++s) {
        img = pushforward_mode(map, img);
        if (img.linf() > kFarAway) {
          lost = true;
          break;
        }
      }
      if (lost) continue;
      auto it = modes.find(img);
      if (it != modes.end()) ct += c * std::conj(it->second);
    }
    out.terms.emplace_back(t, ct.real());
  }

  double sigma = 0.0;
  for (const auto& [t, c] : out.terms) sigma += (t == 0) ? c : 2.0 * c;
  out.sigma_sq = sigma;
  return out;
}

VarianceResult mc_variance(const HyperbolicToralAutomorphism& map, const TorusObservable& q,
                           std::int64_t T, std::int64_t samples, std::uint64_t seed, int jobs) {
  require(T >= 2, Err::BadWindowLength, "T must be >= 2");
  require(samples >= 1000, Err::TooFewSamples, "need at least 1000 samples");

  const double mean = q.mean();
  const CounterRng gen(seed, "mc-variance", static_cast<std::uint64_t>(T));

  const std::size_t blocks = block_count(static_cast<std::size_t>(samples));
  std::vector<double> sum1(blocks, 0.0), sum2(blocks, 0.0);

  parallel_for(blocks, jobs, [&](std::size_t b) {
    const std::int64_t lo = static_cast<std::int64_t>(b * kMonteCarloBlock);
    const std::int64_t hi = std::min<std::int64_t>(samples, lo + kMonteCarloBlock);
    double s1 = 0.0, s2 = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::uint64_t ctr = static_cast<std::uint64_t>(i);
      TorusPoint rho{gen.uniform(2 * ctr), gen.uniform(2 * ctr + 1)};
      double sum = 0.0;
      for (std::int64_t t = 0; t < T; ++t) {
        sum += q.evaluate(rho) - mean;
        rho = apply_map(map, rho, 1);
      }
      const double v = sum * sum / static_cast<double>(T);
      s1 += v;
      s2 += v * v;
    }
    sum1[b] = s1;
    sum2[b] = s2;
  });

  double s1 = 0.0, s2 = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    s1 += sum1[b];
    s2 += sum2[b];
  }
  const double n = static_cast<double>(samples);
  VarianceResult out;
  out.method = "monte-carlo";
  out.sigma_sq = s1 / n;
  const double var = std::max(0.0, s2 / n - out.sigma_sq * out.sigma_sq);
  out.std_error = std::sqrt(var / n);
  out.terms.emplace_back(0, out.sigma_sq);
  return out;
}

DeviationEstimate mdp_probability(const HyperbolicToralAutomorphism& map,
                                  const TorusObservable& q, std::int64_t T, double gamma,
                                  double epsilon, std::int64_t samples, std::uint64_t seed,
                                  int jobs) {
  require(gamma > 0.0 && gamma < 0.5, Err::BadScaling, "gamma must lie in (0, 1/2)");
  require(epsilon > 0.0, Err::BadEpsilon, "epsilon must be positive");
  require(T >= 2 && T % 2 == 0, Err::OddWindow, "window length must be even and >= 2");
  require(samples >= 1, Err::TooFewSamples, "need at least one sample");

  const double mean = q.mean();
  const double aT = std::pow(static_cast<double>(T), gamma);
  const double threshold = epsilon / aT;

  // Stream key excludes epsilon and gamma so tail counts at different
  // thresholds reuse the same orbits (monotonicity in epsilon is then exact).
  const CounterRng gen(seed, "mdp", static_cast<std::uint64_t>(T));

  const std::size_t blocks = block_count(static_cast<std::size_t>(samples));
  std::vector<std::int64_t> hits(blocks, 0);

  parallel_for(blocks, jobs, [&](std::size_t b) {
    const std::int64_t lo = static_cast<std::int64_t>(b * kMonteCarloBlock);
    const std::int64_t hi = std::min<std::int64_t>(samples, lo + kMonteCarloBlock);
    std::int64_t h = 0;
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::uint64_t ctr = static_cast<std::uint64_t>(i);
      const TorusPoint rho{gen.uniform(2 * ctr), gen.uniform(2 * ctr + 1)};
      TorusPoint pt = apply_map(map, rho, -T / 2);
      double sum = 0.0;
      for (std::int64_t t = 0; t < T; ++t) {
        sum += q.evaluate(pt);
        pt = apply_map(map, pt, 1);
      }
      if (sum / static_cast<double>(T) - mean >= threshold) ++h;
    }
    hits[b] = h;
  });

  std::int64_t total = 0;
  for (auto h : hits) total += h;

  DeviationEstimate est;
  est.T = T;
  est.gamma = gamma;
  est.epsilon = epsilon;
  est.samples = samples;
  est.seed = seed;
  const double n = static_cast<double>(samples);
  est.probability = static_cast<double>(total) / n;
  est.std_error = std::sqrt(est.probability * (1.0 - est.probability) / n);
  const double scale = aT * aT / static_cast<double>(T);
  if (total == 0) {
    est.zero_probability_bound = true;
    est.rate = scale * std::log(1.0 / (n + 1.0));
  } else {
    est.rate = scale * std::log(est.probability);
  }
  return est;
}

RateFitRecord mdp_rate_fit(const std::vector<DeviationEstimate>& estimates, double sigma_sq) {
  require(estimates.size() >= 3, Err::InsufficientData, "need at least 3 estimates");
  require(sigma_sq > 0.0, Err::InsufficientData, "sigma^2 must be positive");
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const auto& e = estimates[i];
    require(e.probability > 0.0, Err::InsufficientData, "zero-probability estimate in fit");
    require(e.gamma == estimates[0].gamma && e.epsilon == estimates[0].epsilon,
            Err::InsufficientData, "estimates must share gamma and epsilon");
    if (i > 0)
      require(e.T > estimates[i - 1].T, Err::InsufficientData, "estimates must have increasing T");
  }

  // rate(T) = rate_inf + slope * u with u = a(T)^2 / T -> 0.
  double su = 0.0, sr = 0.0, suu = 0.0, sur = 0.0;
  const double n = static_cast<double>(estimates.size());
  for (const auto& e : estimates) {
    const double a = std::pow(static_cast<double>(e.T), e.gamma);
    const double u = a * a / static_cast<double>(e.T);
    su += u;
    sr += e.rate;
    suu += u * u;
    sur += u * e.rate;
  }
  const double denom = n * suu - su * su;
  require(std::abs(denom) > 1e-30, Err::InsufficientData, "degenerate T grid");
  RateFitRecord fit;
  fit.slope = (n * sur - su * sr) / denom;
  fit.measured_rate = (sr - fit.slope * su) / n;
  const double eps = estimates[0].epsilon;
  fit.predicted_rate = -eps * eps / (2.0 * sigma_sq);
  fit.relative_error = std::abs(fit.measured_rate - fit.predicted_rate) /
                       std::abs(fit.predicted_rate);
  return fit;
}

SpectralConstant concentration_constant_from(double lambda0, double sigma_sq) {
  SpectralConstant sc;
  sc.lambda0 = lambda0;
  sc.sigma_sq = sigma_sq;
  if (sigma_sq > 0.0) {
    sc.c = 1.0 / (2.0 * lambda0 * sigma_sq);
    sc.c_infinite = false;
  } else {
    sc.c = std::numeric_limits<double>::infinity();
    sc.c_infinite = true;
  }
  return sc;
}

SpectralConstant concentration_constant(const HyperbolicToralAutomorphism& map,
                                        const TorusObservable& q) {
  const std::int64_t lag = std::max<std::int64_t>(mode_escape_time(map, q), 1);
  const VarianceResult var = exact_variance(map, q, lag);
  return concentration_constant_from(map.expansion_rate, var.sigma_sq);
}

}  // namespace speclab
