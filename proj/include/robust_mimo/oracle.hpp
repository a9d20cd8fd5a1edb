#pragma once

// Brute-force verifiers for the worst-case and design routines. They are
// slow and only meant for tests at desk scale.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "robust_mimo/design.hpp"
#include "robust_mimo/errors.hpp"
#include "robust_mimo/linalg.hpp"
#include "robust_mimo/random.hpp"
#include "robust_mimo/worstcase.hpp"

namespace robust_mimo::oracle {

/// Uniform point on the Frobenius sphere of the given radius.
inline ComplexMatrix sphere_sample(Eigen::Index rows, Eigen::Index cols, double radius, std::mt19937_64& rng) {
  ComplexMatrix A = complex_gaussian(rows, cols, rng);
  double norm = A.norm();
  while (norm == 0.0) {
    A = complex_gaussian(rows, cols, rng);
    norm = A.norm();
  }
  return A * (radius / norm);
}

/// Largest mse(F, G, E) over n_samples errors drawn uniformly on the sphere
/// ||E||_F = epsilon. A lower bound on the true worst case.
inline double sampled_worst_case(const ComplexMatrix& F, const ComplexMatrix& G, const DesignProblem& problem,
                                 long n_samples, std::uint64_t seed) {
  require(n_samples >= 1, "sampled_worst_case: n_samples must be >= 1");
  const auto M = problem.h_tilde.rows();
  const auto N = problem.h_tilde.cols();
  if (problem.epsilon == 0.0) return mse(F, G, ComplexMatrix::Zero(M, N), problem);

  // The MSE is an explicit quadratic in E; expanding it once keeps each
  // sample to a few small products.
  const Eigen::Index L = F.cols();
  const ComplexMatrix R0 = G * problem.h_tilde * F - ComplexMatrix::Identity(L, L);
  const double noise = problem.noise_var * G.squaredNorm();
  double best = -std::numeric_limits<double>::infinity();
  for (long k = 0; k < n_samples; ++k) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    const ComplexMatrix E = sphere_sample(M, N, problem.epsilon, rng);
    best = std::max(best, (R0 + G * E * F).squaredNorm() + noise);
  }
  return best;
}

/// Axis-aligned grid: dimension k runs over `points[k]` equally spaced
/// values from lower[k] to upper[k] inclusive.
struct GridSpec {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> points;

  /// The same grid on [-radius, radius] in every dimension.
  static GridSpec ball(int dims, double radius, int points_per_dim) {
    return {std::vector<double>(dims, -radius), std::vector<double>(dims, radius),
            std::vector<int>(dims, points_per_dim)};
  }

  void validate() const {
    require(!lower.empty() && lower.size() == upper.size() && lower.size() == points.size(),
            "GridSpec: dimension mismatch");
    for (std::size_t k = 0; k < lower.size(); ++k) {
      require(std::isfinite(lower[k]) && std::isfinite(upper[k]) && lower[k] <= upper[k],
              "GridSpec: bounds must be finite and ordered");
      require(points[k] >= 2, "GridSpec: at least two points per dimension");
    }
  }

  double value(std::size_t dim, int index) const {
    if (index == points[dim] - 1) return upper[dim];
    return lower[dim] + (upper[dim] - lower[dim]) * index / (points[dim] - 1);
  }
};

struct GridResult {
  RealVector x;
  double value = 0.0;
};

/// Exhaustive search for the diagonal worst case over the grid points
/// inside the ball sum x_i^2 <= epsilon^2.
inline GridResult grid_worst_case_diagonal(const RealVector& f, const RealVector& g, const RealVector& gamma,
                                           double epsilon, const GridSpec& grid, double noise_var = 1.0) {
  const Eigen::Index L = f.size();
  require(L <= 3, "grid_worst_case_diagonal: refusing more than 3 streams");
  require(g.size() == L && gamma.size() == L, "grid_worst_case_diagonal: size mismatch");
  require(epsilon >= 0.0 && noise_var > 0.0, "grid_worst_case_diagonal: bad parameters");
  if (epsilon == 0.0) {
    const RealVector zero = RealVector::Zero(L);
    return {zero, diagonal_mse(f, g, gamma, zero, noise_var)};
  }
  grid.validate();
  require(static_cast<Eigen::Index>(grid.points.size()) == L, "grid_worst_case_diagonal: grid dimension mismatch");

  const double limit = epsilon * epsilon * (1.0 + 1e-12);
  GridResult best{RealVector::Zero(L), -std::numeric_limits<double>::infinity()};
  std::vector<int> idx(L, 0);
  RealVector x(L);
  while (true) {
    for (Eigen::Index k = 0; k < L; ++k) x(k) = grid.value(k, idx[k]);
    if (x.squaredNorm() <= limit) {
      const double v = diagonal_mse(f, g, gamma, x, noise_var);
      if (v > best.value) best = {x, v};
    }
    Eigen::Index k = 0;
    while (k < L && ++idx[k] == grid.points[k]) idx[k++] = 0;
    if (k == L) break;
  }
  return best;
}

struct MinimaxGridResult {
  double g = 0.0;
  double x = 0.0;
  double value = 0.0;
};

/// Single-stream robust design by brute force: f = sqrt(P), then
/// min over g of max over x in [-epsilon, epsilon] on a g-by-x grid. The
/// product f g is all that matters, so fixing f at full power loses nothing.
inline MinimaxGridResult grid_single_stream_design(double gamma, double epsilon, double noise_var, double power,
                                                   double g_max, int points) {
  require(points >= 2 && g_max > 0.0 && epsilon >= 0.0, "grid_single_stream_design: bad grid");
  const double f = std::sqrt(power);
  MinimaxGridResult best{0.0, 0.0, std::numeric_limits<double>::infinity()};
  for (int a = 0; a < points; ++a) {
    const double g = g_max * a / (points - 1);
    MinimaxGridResult inner{g, 0.0, -std::numeric_limits<double>::infinity()};
    for (int b = 0; b < points; ++b) {
      const double x = epsilon * (2.0 * b / (points - 1) - 1.0);
      const double r = f * g * (gamma + x) - 1.0;
      const double v = r * r + noise_var * g * g;
      if (v > inner.value) inner = {g, x, v};
    }
    if (inner.value < best.value) best = inner;
  }
  return best;
}

/// Minimizes `fn` over R^n by Nelder-Mead with dimension-adapted
/// coefficients, restarting the simplex around the incumbent until a full
/// run no longer improves it.
template <class Fn>
RealVector nelder_mead(const Fn& fn, RealVector start, double step, int max_evals, double& best_value) {
  const Eigen::Index n = start.size();
  const double dn = static_cast<double>(n);
  const double reflect = 1.0;
  const double expand = 1.0 + 2.0 / dn;
  const double contract = 0.75 - 1.0 / (2.0 * dn);
  const double shrink = 1.0 - 1.0 / dn;

  int evals = 0;
  best_value = fn(start);
  ++evals;
  RealVector best = start;

  while (evals < max_evals) {
    std::vector<RealVector> pts(n + 1, best);
    std::vector<double> vals(n + 1, best_value);
    for (Eigen::Index i = 0; i < n; ++i) {
      pts[i + 1](i) += step;
      vals[i + 1] = fn(pts[i + 1]);
      ++evals;
    }
    const double run_start = best_value;
    std::vector<int> order(n + 1);
    while (evals < max_evals) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] < vals[b]; });
      const int lo = order.front();
      const int hi = order.back();
      const int second = order[n - 1];
      if (std::abs(vals[hi] - vals[lo]) <= 1e-13 * (1.0 + std::abs(vals[lo]))) break;

      RealVector centroid = RealVector::Zero(n);
      for (int i = 0; i <= n; ++i) {
        if (i != hi) centroid += pts[i];
      }
      centroid /= dn;
      const RealVector xr = centroid + reflect * (centroid - pts[hi]);
      const double fr = fn(xr);
      ++evals;
      if (fr < vals[lo]) {
        const RealVector xe = centroid + expand * (xr - centroid);
        const double fe = fn(xe);
        ++evals;
        if (fe < fr) {
          pts[hi] = xe;
          vals[hi] = fe;
        } else {
          pts[hi] = xr;
          vals[hi] = fr;
        }
        continue;
      }
      if (fr < vals[second]) {
        pts[hi] = xr;
        vals[hi] = fr;
        continue;
      }
      const bool outside = fr < vals[hi];
      const RealVector xc = outside ? RealVector(centroid + contract * (xr - centroid))
                                    : RealVector(centroid + contract * (pts[hi] - centroid));
      const double fc = fn(xc);
      ++evals;
      if (fc < (outside ? fr : vals[hi])) {
        pts[hi] = xc;
        vals[hi] = fc;
        continue;
      }
      for (int i = 0; i <= n; ++i) {
        if (i == lo) continue;
        pts[i] = pts[lo] + shrink * (pts[i] - pts[lo]);
        vals[i] = fn(pts[i]);
        ++evals;
      }
    }
    const auto it = std::min_element(vals.begin(), vals.end());
    if (*it < best_value) {
      best_value = *it;
      best = pts[it - vals.begin()];
    }
    if (!(best_value < run_start - 1e-12 * (1.0 + std::abs(run_start)))) break;
    step = std::max(step * 0.5, 1e-6);
  }
  return best;
}

namespace detail {

// Packs (F, G), both 2x2 complex, into 16 reals and back.
inline RealVector pack(const ComplexMatrix& F, const ComplexMatrix& G) {
  RealVector v(16);
  for (int k = 0; k < 4; ++k) {
    v(2 * k) = F(k % 2, k / 2).real();
    v(2 * k + 1) = F(k % 2, k / 2).imag();
    v(8 + 2 * k) = G(k % 2, k / 2).real();
    v(8 + 2 * k + 1) = G(k % 2, k / 2).imag();
  }
  return v;
}

inline std::pair<ComplexMatrix, ComplexMatrix> unpack(const RealVector& v, double power) {
  ComplexMatrix F(2, 2);
  ComplexMatrix G(2, 2);
  for (int k = 0; k < 4; ++k) {
    F(k % 2, k / 2) = Complex(v(2 * k), v(2 * k + 1));
    G(k % 2, k / 2) = Complex(v(8 + 2 * k), v(8 + 2 * k + 1));
  }
  // Projection onto the power ball.
  const double used = F.squaredNorm();
  if (used > power) F *= std::sqrt(power / used);
  return {F, G};
}

}  // namespace detail

/// Gradient-free search over all complex entries of a 2x2 precoder and
/// equalizer, ignoring the channel-diagonalizing structure. Starts from the
/// structured optimum and from `restarts` random points; returns the best
/// design found, with its worst-case MSE from the general inner solver.
inline Transceiver unstructured_design_search(const DesignProblem& problem, int restarts, std::uint64_t seed,
                                              int evals_per_start = 6000) {
  require(problem.h_tilde.rows() == 2 && problem.h_tilde.cols() == 2 && problem.streams == 2,
          "unstructured_design_search: only M = N = L = 2 is supported");
  require(restarts >= 0, "unstructured_design_search: restarts must be >= 0");
  validate(problem);

  auto objective = [&](const RealVector& v) {
    const auto [F, G] = detail::unpack(v, problem.power);
    const double value = worst_case_error_general(F, G, problem).mse_value;
    return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
  };

  std::vector<RealVector> starts;
  const RobustDesign structured = robust_design(problem);
  starts.push_back(detail::pack(structured.transceiver.F, structured.transceiver.G));
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    ComplexMatrix F = complex_gaussian(2, 2, rng);
    F *= std::sqrt(problem.power) / F.norm();
    ComplexMatrix G = complex_gaussian(2, 2, rng);
    G *= 1.0 / (std::sqrt(problem.power) * std::max(1e-12, problem.h_tilde.norm()));
    starts.push_back(detail::pack(F, G));
  }

  double best_value = std::numeric_limits<double>::infinity();
  RealVector best;
  for (const RealVector& s : starts) {
    double value = 0.0;
    const double step = 0.1 * std::max(1e-3, s.cwiseAbs().maxCoeff());
    RealVector x = nelder_mead(objective, s, step, evals_per_start, value);
    if (value < best_value) {
      best_value = value;
      best = std::move(x);
    }
  }
  auto [F, G] = detail::unpack(best, problem.power);
  const double wc = worst_case_error_general(F, G, problem).mse_value;
  return {std::move(F), std::move(G), wc, Method::unstructured_search};
}

}  // namespace robust_mimo::oracle
