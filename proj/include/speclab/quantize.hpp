#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "speclab/dynamics.hpp"

namespace speclab {

// Phase-space translation on C^N: a cyclic shift by m1 combined with the
// diagonal modulation omega^{m2 j}, phased so that T(m)^H = T(-m) and
// T(m) T(m') = (unimodular phase) T(m + m'). Entries are exact roots of
// unity times a permutation.
struct TranslationOperator {
  LatticePoint m;
  std::int64_t N = 0;
  Eigen::MatrixXcd matrix;
};

TranslationOperator translation_operator(LatticePoint m, std::int64_t N);
Eigen::MatrixXcd translation_matrix(LatticePoint m, std::int64_t N);

// Op_N(q) = sum_m c_m T_N(m); Hermitian for real q, operator norm bounded by
// sum |c_m|. Requires N > 2 * radius(q) so no mode aliases.
Eigen::MatrixXcd weyl_quantize(const TorusObservable& q, std::int64_t N);

// Whether the quadratic Gauss kernel exists for this map and dimension:
// either the checkerboard parity condition (a b and c d even) or the even-N
// fallback.
bool quantizable(const HyperbolicToralAutomorphism& map, std::int64_t N);

// Unitary propagator from the lift-summed quadratic Gauss kernel
//   U[j,k] = (N b)^{-1/2} sum_{r=0}^{b-1}
//            exp( (pi i / (N b)) (a (k + rN)^2 - 2 j (k + rN) + d j^2) ),
// for b > 0; maps with b < 0 are built as the adjoint of the inverse map's
// propagator. Unitarity is asserted after construction.
Eigen::MatrixXcd metaplectic_propagator(const HyperbolicToralAutomorphism& map,
                                        std::int64_t N);

// The fixed conjugation convention: U^H T(m) U = (unimodular) T(egorov_matrix(map) m).
// Pinned once by exhaustive small-N overlap testing (see the quantization tests).
HyperbolicToralAutomorphism egorov_matrix(const HyperbolicToralAutomorphism& map);

// |tr(T(m')^H U^H T(m) U)| / N with m' = egorov_matrix(map) m; equals 1 when
// the conjugation sends T(m) to a unimodular multiple of T(m').
double egorov_overlap(const Eigen::MatrixXcd& U, const HyperbolicToralAutomorphism& map,
                      LatticePoint m);

// Trigonometric-polynomial coefficients of e^{-g}, truncated below 1e-15.
TorusObservable damping_symbol(const TorusObservable& g);

struct QuantizedSystem {
  std::int64_t N = 0;
  HyperbolicToralAutomorphism map;
  Eigen::MatrixXcd propagator;   // U_N(kappa)
  Eigen::MatrixXcd damping_op;   // Op_N(a)
  Eigen::MatrixXcd damped;       // M_N = Op_N(a) U_N(kappa)
  TorusObservable symbol;        // a = e^{-g} as a trig polynomial
  double sup_symbol = 1.0;
};

// M_N(a, kappa) = Op_N(e^{-g}) U_N(kappa) with g >= 0, so sup a <= 1 and the
// per-step decay-rate observable is g itself at the symbol level.
QuantizedSystem damped_propagator(const HyperbolicToralAutomorphism& map,
                                  const TorusObservable& g, std::int64_t N);

// All N eigenvalues, sorted by (modulus descending, phase ascending).
std::vector<Complex> spectrum(const QuantizedSystem& system);
std::vector<Complex> sorted_eigenvalues(const Eigen::MatrixXcd& matrix);

}  // namespace speclab
