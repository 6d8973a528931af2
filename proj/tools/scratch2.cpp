#include <cstdio>
#include "speclab/dynamics.hpp"
#include "speclab/transfer.hpp"
using namespace speclab;
int main() {
  const auto arnold = make_map(2, 1, 1, 1);
  // coboundary pressure flatness under truncation
  const auto h = cosine_observable({1, 0}, 1.0);
  const auto cob = coboundary_observable(arnold, h);
  for (std::int64_t K : {8, 16}) {
    for (double xi : {0.25, 0.5}) {
      const auto m = build_weighted_transfer(arnold, cob, xi, K);
      const auto [lam, gap] = leading_eigenvalue(m, 1e-11);
      std::printf("cob K=%lld xi=%.2f F=%.3e gap=%.3f\n", (long long)K, xi, std::log(lam), gap);
    }
  }
  // NoGap trigger attempt: large xi
  for (double xi : {5.0, 10.0, 20.0, 25.0}) {
    try {
      const auto q = cosine_observable({1, 0}, 1.0);
      const auto m = build_weighted_transfer(arnold, q, xi, 12);
      const auto [lam, gap] = leading_eigenvalue(m, 1e-10);
      std::printf("xi=%.1f lambda=%.6f gap=%.4f\n", xi, lam, gap);
    } catch (const Error& e) {
      std::printf("xi=%.1f -> %s\n", xi, e.what());
    }
  }
  return 0;
}
