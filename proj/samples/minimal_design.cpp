// Designs the robust transceiver for one seeded 2x2 channel and compares it
// with the non-robust water-filling design under the same uncertainty.

#include <cmath>
#include <cstdio>

#include "robust_mimo/bench.hpp"
#include "robust_mimo/design.hpp"

int main() {
  using namespace robust_mimo;
  const ComplexMatrix H = bench::generate_channel(2, 2, 7);
  const DesignProblem problem{H, std::sqrt(0.01) * H.norm(), 1.0, bench::dbw_to_linear(20.0), 2};

  const RobustDesign robust = robust_design(problem);
  const NonrobustDesign nominal = nonrobust_design(problem);

  std::printf("robust    worst-case MSE %.6f (%d solver iterations)\n", robust.transceiver.worst_case_mse,
              robust.solution.iterations);
  std::printf("nonrobust worst-case MSE %.6f\n", nominal.transceiver.worst_case_mse);
  std::printf("certificate omega %.6f, KKT residual %.2e\n", robust.certificate.omega,
              robust.certificate.kkt_residual);
  return 0;
}
