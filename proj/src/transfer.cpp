#include "speclab/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "speclab/parallel.hpp"
#include "speclab/rng.hpp"

namespace speclab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// 1D centered DFT of the columns/rows of a grid, keeping |freq| <= half_range.
// Naive O(G^2 R) transforms; the grids here are tiny.
std::vector<std::vector<Complex>> dft_axis(const std::vector<std::vector<Complex>>& grid,
                                           std::int64_t half_range, std::int64_t G) {
  const std::int64_t R = 2 * half_range + 1;
  std::vector<std::vector<Complex>> out(static_cast<std::size_t>(R),
                                        std::vector<Complex>(grid[0].size(), Complex(0, 0)));
  for (std::int64_t r = -half_range; r <= half_range; ++r) {
    auto& row = out[static_cast<std::size_t>(r + half_range)];
    for (std::size_t j2 = 0; j2 < grid[0].size(); ++j2) {
      Complex acc = 0.0;
      for (std::int64_t j1 = 0; j1 < G; ++j1) {
        const double phase = -kTwoPi * static_cast<double>(r) * static_cast<double>(j1) /
                             static_cast<double>(G);
        acc += grid[static_cast<std::size_t>(j1)][j2] * Complex(std::cos(phase), std::sin(phase));
      }
      row[j2] = acc / static_cast<double>(G);
    }
  }
  return out;
}

}  // namespace

std::map<LatticePoint, Complex> exponential_weight_coefficients(const TorusObservable& q,
                                                                double xi,
                                                                std::int64_t half_range,
                                                                std::int64_t grid_points,
                                                                double drop_threshold) {
  std::map<LatticePoint, Complex> w;
  if (xi == 0.0) {
    w[{0, 0}] = 1.0;  // e^0 = 1 exactly; keeps lambda(0) = 1 exact
    return w;
  }
  const std::int64_t G = std::max<std::int64_t>(grid_points, 2 * half_range + 1);

  // values[j1][j2] = e^{xi q(j1/G, j2/G)}
  std::vector<std::vector<Complex>> values(static_cast<std::size_t>(G),
                                           std::vector<Complex>(static_cast<std::size_t>(G)));
  for (std::int64_t j1 = 0; j1 < G; ++j1)
    for (std::int64_t j2 = 0; j2 < G; ++j2) {
      const TorusPoint rho{static_cast<double>(j1) / static_cast<double>(G),
                           static_cast<double>(j2) / static_cast<double>(G)};
      values[static_cast<std::size_t>(j1)][static_cast<std::size_t>(j2)] =
          std::exp(xi * q.evaluate(rho));
    }

  // Separable transform: x-axis then p-axis.
  auto half1 = dft_axis(values, half_range, G);
  // Transpose, transform, read coefficients.
  std::vector<std::vector<Complex>> transposed(static_cast<std::size_t>(G));
  for (std::int64_t j2 = 0; j2 < G; ++j2) {
    transposed[static_cast<std::size_t>(j2)].resize(half1.size());
    for (std::size_t r1 = 0; r1 < half1.size(); ++r1)
      transposed[static_cast<std::size_t>(j2)][r1] = half1[r1][static_cast<std::size_t>(j2)];
  }
  auto full = dft_axis(transposed, half_range, G);

  for (std::int64_t r2 = -half_range; r2 <= half_range; ++r2)
    for (std::int64_t r1 = -half_range; r1 <= half_range; ++r1) {
      const Complex c = full[static_cast<std::size_t>(r2 + half_range)]
                            [static_cast<std::size_t>(r1 + half_range)];
      if (std::abs(c) >= drop_threshold) w[{r1, r2}] = c;
    }
  return w;
}

TransferModel::TransferModel(HyperbolicToralAutomorphism map, TorusObservable observable,
                             double xi, std::int64_t box_radius)
    : map_(map),
      observable_(std::move(observable)),
      xi_(xi),
      box_radius_(box_radius),
      side_(static_cast<std::size_t>(2 * box_radius + 1)),
      dim_(side_ * side_) {
  // Relabeling m -> kappa^T m with out-of-box drop.
  relabel_.assign(dim_, -1);
  for (std::int64_t m1 = -box_radius_; m1 <= box_radius_; ++m1)
    for (std::int64_t m2 = -box_radius_; m2 <= box_radius_; ++m2) {
      const LatticePoint src{m1, m2};
      const LatticePoint dst = pushforward_mode(map_, src);
      if (dst.linf() <= box_radius_)
        relabel_[index_of(src)] = static_cast<std::ptrdiff_t>(index_of(dst));
    }

  weight_ = exponential_weight_coefficients(observable_, xi_, 2 * box_radius_,
                                            4 * box_radius_);
  weight_support_.assign(weight_.begin(), weight_.end());
}

std::size_t TransferModel::index_of(LatticePoint m) const {
  return static_cast<std::size_t>(m.m1 + box_radius_) * side_ +
         static_cast<std::size_t>(m.m2 + box_radius_);
}

void TransferModel::apply(const std::vector<Complex>& x, std::vector<Complex>& y) const {
  std::vector<Complex> relabeled(dim_, Complex(0, 0));
  for (std::size_t i = 0; i < dim_; ++i)
    if (relabel_[i] >= 0) relabeled[static_cast<std::size_t>(relabel_[i])] += x[i];

  y.assign(dim_, Complex(0, 0));
  for (std::int64_t m1 = -box_radius_; m1 <= box_radius_; ++m1)
    for (std::int64_t m2 = -box_radius_; m2 <= box_radius_; ++m2) {
      Complex acc = 0.0;
      for (const auto& [r, wr] : weight_support_) {
        const LatticePoint src{m1 - r.m1, m2 - r.m2};
        if (src.linf() <= box_radius_) acc += wr * relabeled[index_of(src)];
      }
      y[index_of({m1, m2})] = acc;
    }
}

void TransferModel::apply_adjoint(const std::vector<Complex>& x, std::vector<Complex>& y) const {
  // adjoint of the convolution: correlation with conj(w)
  std::vector<Complex> correlated(dim_, Complex(0, 0));
  for (std::int64_t m1 = -box_radius_; m1 <= box_radius_; ++m1)
    for (std::int64_t m2 = -box_radius_; m2 <= box_radius_; ++m2) {
      Complex acc = 0.0;
      for (const auto& [r, wr] : weight_support_) {
        const LatticePoint dst{m1 + r.m1, m2 + r.m2};
        if (dst.linf() <= box_radius_) acc += std::conj(wr) * x[index_of(dst)];
      }
      correlated[index_of({m1, m2})] = acc;
    }
  // adjoint of the relabeling
  y.assign(dim_, Complex(0, 0));
  for (std::size_t i = 0; i < dim_; ++i)
    if (relabel_[i] >= 0) y[i] = correlated[static_cast<std::size_t>(relabel_[i])];
}

TransferModel build_weighted_transfer(const HyperbolicToralAutomorphism& map,
                                      const TorusObservable& q, double xi,
                                      std::int64_t box_radius) {
  require(box_radius >= std::max<std::int64_t>(2, 2 * q.radius()), Err::BoxTooSmall,
          "box radius must be at least twice the observable radius");
  require(std::abs(xi) * q.sup_norm_bound() <= 30.0, Err::WeightOverflow,
          "|xi| sup|q| must stay below the overflow guard");
  return TransferModel(map, q, xi, box_radius);
}

namespace {

double norm2(const std::vector<Complex>& v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

Complex dot(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

void scale(std::vector<Complex>& v, double s) {
  for (auto& z : v) z *= s;
}

// Power iteration with a Rayleigh-quotient stopping rule; the iterate stays
// in the conjugate-symmetric subspace when started there, so the quotient is
// real for the Perron-type leading value.
double power_iterate(const TransferModel& model, bool adjoint, std::vector<Complex>& vec,
                     double tol) {
  constexpr int kMaxIter = 50000;
  double nrm = norm2(vec);
  require(nrm > 0.0, Err::PowerIterationStall, "zero start vector");
  scale(vec, 1.0 / nrm);
  std::vector<Complex> next;
  double rq_prev = 0.0;
  int stable = 0;
  for (int it = 0; it < kMaxIter; ++it) {
    if (adjoint)
      model.apply_adjoint(vec, next);
    else
      model.apply(vec, next);
    const Complex rq_c = dot(vec, next);
    const double rq = rq_c.real();
    const double nn = norm2(next);
    if (nn == 0.0) return 0.0;  // operator annihilated the iterate
    vec = next;
    scale(vec, 1.0 / nn);
    if (it > 0 && std::abs(rq - rq_prev) < tol) {
      if (++stable >= 3) return rq;
    } else {
      stable = 0;
    }
    rq_prev = rq;
  }
  fail(Err::PowerIterationStall, "Rayleigh quotient did not settle");
}

// Modulus of the dominant eigenvalue of the deflated operator
// (I - v u^H / (u^H v)) L, from the geometric mean of late growth ratios.
double deflated_modulus(const TransferModel& model, const std::vector<Complex>& right,
                        const std::vector<Complex>& left) {
  const Complex uv = dot(left, right);
  if (std::abs(uv) < 1e-12) return 1.0;  // cannot certify isolation
  constexpr int kIters = 384;
  const std::size_t dim = model.dim();
  std::vector<Complex> x(dim);
  CounterRng gen(20240915u, "deflation-start");
  for (std::size_t i = 0; i < dim; ++i)
    x[i] = Complex(gen.uniform(2 * i) - 0.5, gen.uniform(2 * i + 1) - 0.5);
  double nrm = norm2(x);
  scale(x, 1.0 / nrm);
  std::vector<Complex> y;
  std::vector<double> log_ratios;
  log_ratios.reserve(kIters);
  for (int it = 0; it < kIters; ++it) {
    model.apply(x, y);
    const Complex coef = dot(left, y) / uv;
    for (std::size_t i = 0; i < dim; ++i) y[i] -= coef * right[i];
    const double nn = norm2(y);
    if (nn < 1e-280) return 0.0;  // nilpotent bulk
    log_ratios.push_back(std::log(nn));
    x = y;
    scale(x, 1.0 / nn);
  }
  // average over the last half to wash out transients
  const std::size_t half = log_ratios.size() / 2;
  double s = 0.0;
  for (std::size_t i = half; i < log_ratios.size(); ++i) s += log_ratios[i];
  return std::exp(s / static_cast<double>(log_ratios.size() - half));
}

}  // namespace

std::pair<double, double> leading_eigenvalue(const TransferModel& model, double tol) {
  require(tol > 1e-14 && tol < 1e-4, Err::BadTolerance, "tol must lie in (1e-14, 1e-4)");

  const std::size_t dim = model.dim();
  std::vector<Complex> right(dim, Complex(0, 0));
  right[model.index_of({0, 0})] = 1.0;  // constant mode seed
  const double lambda = power_iterate(model, false, right, tol);
  require(lambda > 0.0, Err::NoGap, "leading value not positive under truncation");

  std::vector<Complex> left(dim, Complex(0, 0));
  left[model.index_of({0, 0})] = 1.0;
  power_iterate(model, true, left, tol);

  const double sub = deflated_modulus(model, right, left);
  const double gap_ratio = sub / lambda;
  require(gap_ratio <= 0.95, Err::NoGap,
          "leading eigenvalue not reliably isolated (gap ratio " + std::to_string(gap_ratio) +
              ")");
  return {lambda, gap_ratio};
}

std::vector<double> symmetric_grid(double max_abs, double step) {
  require(step > 0.0 && max_abs >= step, Err::BadXiGrid, "need step > 0 and max >= step");
  const auto K = static_cast<std::int64_t>(std::llround(max_abs / step));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(2 * K + 1));
  for (std::int64_t k = -K; k <= K; ++k) grid.push_back(static_cast<double>(k) * step);
  return grid;
}

PressureCurve pressure_curve(const HyperbolicToralAutomorphism& map, const TorusObservable& q,
                             const std::vector<double>& xi_grid, std::int64_t box_radius,
                             double tol, int jobs) {
  require(!xi_grid.empty(), Err::BadXiGrid, "empty grid");
  std::size_t zero_idx = xi_grid.size();
  for (std::size_t i = 0; i < xi_grid.size(); ++i) {
    if (xi_grid[i] == 0.0) zero_idx = i;
    if (i > 0) require(xi_grid[i] > xi_grid[i - 1], Err::BadXiGrid, "grid must be increasing");
  }
  require(zero_idx < xi_grid.size(), Err::BadXiGrid, "grid must contain 0");
  for (std::size_t i = 0; i < xi_grid.size(); ++i) {
    const double mirror = -xi_grid[xi_grid.size() - 1 - i];
    require(std::abs(xi_grid[i] - mirror) < 1e-12, Err::BadXiGrid, "grid must be symmetric");
  }

  PressureCurve curve;
  curve.xi_grid = xi_grid;
  curve.F_values.assign(xi_grid.size(), 0.0);
  curve.lambda_values.assign(xi_grid.size(), 0.0);
  curve.gap_ratios.assign(xi_grid.size(), 0.0);

  parallel_for(xi_grid.size(), jobs, [&](std::size_t i) {
    const TransferModel model = build_weighted_transfer(map, q, xi_grid[i], box_radius);
    const auto [lambda, gap] = leading_eigenvalue(model, tol);
    curve.lambda_values[i] = lambda;
    curve.F_values[i] = std::log(lambda);
    curve.gap_ratios[i] = gap;
  });

  // Second central difference at 0 from the neighbors of the zero node.
  if (zero_idx > 0 && zero_idx + 1 < xi_grid.size()) {
    const double h = xi_grid[zero_idx + 1] - xi_grid[zero_idx];
    curve.sigma_sq_from_pressure =
        (curve.F_values[zero_idx + 1] - 2.0 * curve.F_values[zero_idx] +
         curve.F_values[zero_idx - 1]) /
        (h * h);
  }
  return curve;
}

double monte_carlo_cumulant(const HyperbolicToralAutomorphism& map, const TorusObservable& q,
                            double xi, std::int64_t T, std::int64_t samples,
                            std::uint64_t seed, int jobs) {
  require(T >= 1, Err::BadWindowLength, "T must be >= 1");
  require(samples >= 1, Err::TooFewSamples, "need at least one sample");
  require(std::abs(xi) * static_cast<double>(T) * q.sup_norm_bound() <= 600.0,
          Err::WeightOverflow, "|xi| T sup|q| must stay below the log-sum-exp guard");
  if (xi == 0.0) return 0.0;

  const double mean = q.mean();
  const CounterRng gen(seed, "mc-cumulant", static_cast<std::uint64_t>(T));

  // Per-block log-sum-exp partials, folded in block order.
  const std::size_t blocks = block_count(static_cast<std::size_t>(samples));
  std::vector<double> block_max(blocks, 0.0), block_sum(blocks, 0.0);

  parallel_for(blocks, jobs, [&](std::size_t b) {
    const std::int64_t lo = static_cast<std::int64_t>(b * kMonteCarloBlock);
    const std::int64_t hi = std::min<std::int64_t>(samples, lo + kMonteCarloBlock);
    std::vector<double> exponents;
    exponents.reserve(static_cast<std::size_t>(hi - lo));
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::uint64_t ctr = static_cast<std::uint64_t>(i);
      TorusPoint rho{gen.uniform(2 * ctr), gen.uniform(2 * ctr + 1)};
      double sum = 0.0;
      for (std::int64_t t = 0; t < T; ++t) {
        sum += q.evaluate(rho) - mean;
        rho = apply_map(map, rho, 1);
      }
      exponents.push_back(xi * sum);
    }
    double mx = exponents[0];
    for (double e : exponents) mx = std::max(mx, e);
    double s = 0.0;
    for (double e : exponents) s += std::exp(e - mx);
    block_max[b] = mx;
    block_sum[b] = s;
  });

  double mx = block_max[0];
  for (std::size_t b = 0; b < blocks; ++b) mx = std::max(mx, block_max[b]);
  double s = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) s += block_sum[b] * std::exp(block_max[b] - mx);
  const double log_mean = mx + std::log(s) - std::log(static_cast<double>(samples));
  return log_mean / static_cast<double>(T);
}

namespace {

void require_convex(const std::vector<double>& x, const std::vector<double>& f) {
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const double left = (f[i] - f[i - 1]) / (x[i] - x[i - 1]);
    const double right = (f[i + 1] - f[i]) / (x[i + 1] - x[i]);
    require(right - left >= -1e-9, Err::NonConvexCurve, "curve is not convex on the grid");
  }
}

// Value at the vertex of the parabola through three samples of a concave g.
double parabolic_peak(double x0, double g0, double x1, double g1, double x2, double g2) {
  const double d1 = (g1 - g0) / (x1 - x0);
  const double d2 = (g2 - g1) / (x2 - x1);
  const double curv = (d2 - d1) / (x2 - x0);  // half the second derivative
  if (!(curv < 0.0)) return std::max({g0, g1, g2});
  const double xv = 0.5 * (x0 + x1) - d1 / (2.0 * curv);
  const double xc = std::clamp(xv, x0, x2);
  // evaluate the interpolant at xc
  const double l0 = (xc - x1) * (xc - x2) / ((x0 - x1) * (x0 - x2));
  const double l1 = (xc - x0) * (xc - x2) / ((x1 - x0) * (x1 - x2));
  const double l2 = (xc - x0) * (xc - x1) / ((x2 - x0) * (x2 - x1));
  return g0 * l0 + g1 * l1 + g2 * l2;
}

}  // namespace

RateFunction legendre_fenchel(const PressureCurve& curve, const std::vector<double>& eta_grid) {
  const auto& xi = curve.xi_grid;
  const auto& F = curve.F_values;
  require(xi.size() >= 3, Err::BadXiGrid, "need at least 3 grid points");
  require_convex(xi, F);

  RateFunction rate;
  rate.eta_grid = eta_grid;
  rate.I_values.reserve(eta_grid.size());
  for (const double eta : eta_grid) {
    std::size_t best = 0;
    double gbest = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xi.size(); ++i) {
      const double g = xi[i] * eta - F[i];
      if (g > gbest) {
        gbest = g;
        best = i;
      }
    }
    require(best > 0 && best + 1 < xi.size(), Err::EtaOutOfRange,
            "eta = " + std::to_string(eta) + " exceeds the attainable slope range");
    rate.I_values.push_back(parabolic_peak(xi[best - 1], xi[best - 1] * eta - F[best - 1],
                                           xi[best], gbest, xi[best + 1],
                                           xi[best + 1] * eta - F[best + 1]));
  }
  return rate;
}

PressureCurve quadratic_pressure(double sigma_sq, double eta_max, double step) {
  require(sigma_sq > 0.0, Err::InsufficientData, "sigma^2 must be positive");
  // slope at xi is sigma^2 xi; pad so eta_max is interior
  const double xi_max = 1.5 * eta_max / sigma_sq;
  PressureCurve curve;
  curve.xi_grid = symmetric_grid(xi_max, std::min(step, xi_max / 8.0));
  for (const double x : curve.xi_grid) {
    curve.F_values.push_back(0.5 * sigma_sq * x * x);
    curve.lambda_values.push_back(std::exp(curve.F_values.back()));
    curve.gap_ratios.push_back(0.0);
  }
  curve.sigma_sq_from_pressure = sigma_sq;
  return curve;
}

GartnerEllisComparison gartner_ellis_check(const RateFunction& rate,
                                           const std::vector<DeviationEstimate>& estimates) {
  require(!estimates.empty(), Err::InsufficientData, "no estimates supplied");
  const double eps = estimates[0].epsilon;
  const double gamma = estimates[0].gamma;
  for (const auto& e : estimates)
    require(e.epsilon == eps && e.gamma == gamma, Err::InsufficientData,
            "estimates must share gamma and epsilon");

  // -inf over the closed half-line [eps, inf): I is convex with its minimum
  // left of eps here, so the infimum sits at eta = eps (interpolated).
  const auto& eta = rate.eta_grid;
  const auto& I = rate.I_values;
  require(!eta.empty() && eta.back() >= eps, Err::EtaOutOfRange,
          "rate function does not cover the deviation threshold");
  double inf_I = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < eta.size(); ++i)
    if (eta[i] >= eps) inf_I = std::min(inf_I, I[i]);
  for (std::size_t i = 0; i + 1 < eta.size(); ++i)
    if (eta[i] <= eps && eps <= eta[i + 1]) {
      const double t = (eps - eta[i]) / (eta[i + 1] - eta[i]);
      inf_I = std::min(inf_I, (1.0 - t) * I[i] + t * I[i + 1]);
    }
  const double predicted = -inf_I;

  GartnerEllisComparison cmp;
  cmp.predicted_rate = predicted;
  double su = 0.0, sr = 0.0, suu = 0.0, sur = 0.0;
  for (const auto& e : estimates) {
    GartnerEllisEntry entry;
    entry.T = e.T;
    entry.empirical_rate = e.rate;
    entry.predicted_rate = predicted;
    entry.relative_error = std::abs(e.rate - predicted) / std::abs(predicted);
    entry.zero_probability_bound = e.zero_probability_bound;
    cmp.entries.push_back(entry);
    const double a = std::pow(static_cast<double>(e.T), e.gamma);
    const double u = a * a / static_cast<double>(e.T);
    su += u;
    sr += e.rate;
    suu += u * u;
    sur += u * e.rate;
  }
  const double n = static_cast<double>(estimates.size());
  const double denom = n * suu - su * su;
  if (estimates.size() >= 2 && std::abs(denom) > 1e-30) {
    const double slope = (n * sur - su * sr) / denom;
    cmp.extrapolated_rate = (sr - slope * su) / n;
  } else {
    cmp.extrapolated_rate = sr / n;
  }
  cmp.relative_error = std::abs(cmp.extrapolated_rate - predicted) / std::abs(predicted);
  return cmp;
}

}  // namespace speclab
