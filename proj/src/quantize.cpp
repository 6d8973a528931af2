#include "speclab/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "speclab/transfer.hpp"

namespace speclab {

namespace {

constexpr double kPi = std::numbers::pi;

std::int64_t mod_positive(std::int64_t v, std::int64_t n) {
  const std::int64_t r = v % n;
  return r < 0 ? r + n : r;
}

// exp(i pi q / n) with the integer phase reduced exactly first.
Complex root_of_unity(std::int64_t q, std::int64_t n) {
  const double angle = kPi * static_cast<double>(mod_positive(q, 2 * n)) /
                       static_cast<double>(n);
  return {std::cos(angle), std::sin(angle)};
}

}  // namespace

Eigen::MatrixXcd translation_matrix(LatticePoint m, std::int64_t N) {
  require(N >= 2, Err::Aliasing, "Hilbert dimension must be at least 2");
  Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(N, N);
  for (std::int64_t j = 0; j < N; ++j) {
    const std::int64_t k = mod_positive(j - m.m1, N);
    // phase i pi (2 m2 j - m1 m2) / N
    T(j, k) = root_of_unity(2 * m.m2 * j - m.m1 * m.m2, N);
  }
  return T;
}

TranslationOperator translation_operator(LatticePoint m, std::int64_t N) {
  return {m, N, translation_matrix(m, N)};
}

Eigen::MatrixXcd weyl_quantize(const TorusObservable& q, std::int64_t N) {
  require(N > 2 * q.radius(), Err::Aliasing,
          "N must exceed twice the observable radius (aliasing)");
  Eigen::MatrixXcd op = Eigen::MatrixXcd::Zero(N, N);
  for (const auto& [m, c] : q.modes()) {
    for (std::int64_t j = 0; j < N; ++j) {
      const std::int64_t k = mod_positive(j - m.m1, N);
      op(j, k) += c * root_of_unity(2 * m.m2 * j - m.m1 * m.m2, N);
    }
  }
  return op;
}

bool quantizable(const HyperbolicToralAutomorphism& map, std::int64_t N) {
  const bool parity = (map.a * map.b) % 2 == 0 && (map.c * map.d) % 2 == 0;
  return parity || N % 2 == 0;
}

Eigen::MatrixXcd metaplectic_propagator(const HyperbolicToralAutomorphism& map,
                                        std::int64_t N) {
  require(N >= 2, Err::Aliasing, "Hilbert dimension must be at least 2");
  require(map.b != 0, Err::SingularKernel, "shear maps (b = 0) have no Gauss kernel");
  require(quantizable(map, N), Err::NotQuantizable,
          "map needs the checkerboard parity condition or even N");
  if (map.b < 0) return metaplectic_propagator(map.inverse(), N).adjoint();

  const std::int64_t b = map.b;
  const double norm = 1.0 / std::sqrt(static_cast<double>(N * b));
  Eigen::MatrixXcd U(N, N);
  for (std::int64_t j = 0; j < N; ++j)
    for (std::int64_t k = 0; k < N; ++k) {
      Complex acc = 0.0;
      for (std::int64_t r = 0; r < b; ++r) {
        const std::int64_t K = k + r * N;
        // exact integer phase, reduced mod 2 N b
        const std::int64_t Q = map.a * K * K - 2 * j * K + map.d * j * j;
        acc += root_of_unity(Q, N * b);
      }
      U(j, k) = norm * acc;
    }

  const double defect =
      (U.adjoint() * U - Eigen::MatrixXcd::Identity(N, N)).norm();
  require(defect < 1e-10, Err::NotQuantizable,
          "Gauss kernel failed the unitarity check (defect " + std::to_string(defect) + ")");
  return U;
}

HyperbolicToralAutomorphism egorov_matrix(const HyperbolicToralAutomorphism& map) {
  // U^H T(m) U = (phase) T(kappa^{-1} m) for this kernel and translation
  // convention; pinned by the exhaustive N = 8 overlap scan in the tests.
  return map.inverse();
}

double egorov_overlap(const Eigen::MatrixXcd& U, const HyperbolicToralAutomorphism& map,
                      LatticePoint m) {
  const std::int64_t N = U.rows();
  const HyperbolicToralAutomorphism conv = egorov_matrix(map);
  // the convention matrix acts on the mode as a column vector
  const LatticePoint mp{conv.a * m.m1 + conv.b * m.m2, conv.c * m.m1 + conv.d * m.m2};
  const Eigen::MatrixXcd conjugated = U.adjoint() * translation_matrix(m, N) * U;
  const Complex overlap =
      (translation_matrix(mp, N).adjoint() * conjugated).trace() / static_cast<double>(N);
  return std::abs(overlap);
}

TorusObservable damping_symbol(const TorusObservable& g) {
  const std::int64_t half_range = std::max<std::int64_t>(24, 6 * g.radius());
  const auto coeffs =
      exponential_weight_coefficients(g, -1.0, half_range, 4 * half_range);
  TorusObservable a;
  for (const auto& [m, c] : coeffs) {
    if (!m.lex_positive() && !m.is_zero()) continue;
    a.set_mode(m, c);
  }
  return a;
}

QuantizedSystem damped_propagator(const HyperbolicToralAutomorphism& map,
                                  const TorusObservable& g, std::int64_t N) {
  // g >= 0 keeps |a| <= 1; check on a dense grid
  constexpr int kGrid = 128;
  double gmin = std::numeric_limits<double>::infinity();
  for (int j1 = 0; j1 < kGrid; ++j1)
    for (int j2 = 0; j2 < kGrid; ++j2)
      gmin = std::min(gmin, g.evaluate({static_cast<double>(j1) / kGrid,
                                        static_cast<double>(j2) / kGrid}));
  require(gmin >= -1e-12, Err::NegativeDamping, "damping function must be nonnegative");

  QuantizedSystem sys;
  sys.N = N;
  sys.map = map;
  sys.symbol = damping_symbol(g);

  double sup = 0.0;
  for (int j1 = 0; j1 < kGrid; ++j1)
    for (int j2 = 0; j2 < kGrid; ++j2)
      sup = std::max(sup, std::abs(sys.symbol.evaluate({static_cast<double>(j1) / kGrid,
                                                        static_cast<double>(j2) / kGrid})));
  require(sup <= 1.0 + 1e-12, Err::NegativeDamping, "damping symbol must satisfy sup|a| <= 1");
  sys.sup_symbol = sup;

  sys.propagator = metaplectic_propagator(map, N);
  sys.damping_op = weyl_quantize(sys.symbol, N);
  sys.damped = sys.damping_op * sys.propagator;

  // post-construction invariants
  const auto I = Eigen::MatrixXcd::Identity(N, N);
  require((sys.propagator.adjoint() * sys.propagator - I).norm() < 1e-10, Err::NotQuantizable,
          "propagator unitarity defect too large");
  require((sys.damping_op - sys.damping_op.adjoint()).norm() < 1e-12, Err::EigFailure,
          "damping operator must be Hermitian for a real symbol");
  require(std::abs(sys.damping_op.trace().real() -
                   static_cast<double>(N) * sys.symbol.mean()) < 1e-10 &&
              std::abs(sys.damping_op.trace().imag()) < 1e-10,
          Err::EigFailure, "trace of the damping operator must equal N times the mean");
  return sys;
}

std::vector<Complex> sorted_eigenvalues(const Eigen::MatrixXcd& matrix) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(matrix, /*computeEigenvectors=*/false);
  require(solver.info() == Eigen::Success, Err::EigFailure,
          "dense eigensolver failed to converge");
  std::vector<Complex> values(solver.eigenvalues().data(),
                              solver.eigenvalues().data() + matrix.rows());
  std::sort(values.begin(), values.end(), [](const Complex& u, const Complex& v) {
    const double mu = std::abs(u), mv = std::abs(v);
    if (mu != mv) return mu > mv;
    return std::arg(u) < std::arg(v);
  });
  return values;
}

std::vector<Complex> spectrum(const QuantizedSystem& system) {
  return sorted_eigenvalues(system.damped);
}

}  // namespace speclab
