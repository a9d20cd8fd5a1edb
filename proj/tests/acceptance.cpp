// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "robust_mimo/bench.hpp"
#include "robust_mimo/conic.hpp"
#include "robust_mimo/design.hpp"
#include "robust_mimo/oracle.hpp"
#include "robust_mimo/random.hpp"
#include "robust_mimo/worstcase.hpp"

using namespace robust_mimo;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

DesignProblem rayleigh(std::uint64_t seed, int L, double rho, double power) {
  const ComplexMatrix H = bench::generate_channel(L, L, seed);
  return {H, std::sqrt(rho) * H.norm(), 1.0, power, L};
}

// Every conic solve issued by criteria 1-6 lands here.
conic::SolveStats solver_stats;

conic::SolverOptions recorded() {
  conic::SolverOptions opts;
  opts.stats = &solver_stats;
  return opts;
}

void zero_radius_closed_form() {
  const auto start = Clock::now();
  const int Ls[] = {1, 2, 4};
  const double dbw[] = {0.0, 10.0, 20.0, 30.0};
  double worst = 0.0;
  int errors = 0;
  for (int t = 0; t < 100; ++t) {
    const DesignProblem p = rayleigh(derive_seed(1001, t), Ls[t % 3], 0.0, bench::dbw_to_linear(dbw[t % 4]));
    try {
      const double robust = robust_design(p, recorded()).transceiver.worst_case_mse;
      const ScalarDesign wf = nonrobust_design(p).scalars;
      const double closed = nominal_scalar_mse(wf, p.noise_var);
      worst = std::max(worst, std::abs(robust - closed) / closed);
    } catch (const std::exception&) {
      ++errors;
    }
  }
  const double elapsed = seconds_since(start);
  report(1, "zero-radius design equals water-filling", errors == 0 && worst < 1e-6 && elapsed < 10.0,
         fmt("100 instances, max relative difference %.3e (< 1e-6), errors %d, %.2f s (< 10 s)", worst, errors,
             elapsed));
}

void worked_single_stream() {
  const auto start = Clock::now();
  const double target = 4.0 / 13.0;
  const oracle::MinimaxGridResult grid = oracle::grid_single_stream_design(2.0, 0.5, 1.0, 1.0, 1.0, 2001);
  const bool grid_ok = std::abs(grid.value - target) < 1e-6 && std::abs(grid.x + 0.5) < 1e-12 &&
                       std::abs(grid.g - 6.0 / 13.0) <= 1.0 / 2000.0;

  const ComplexMatrix H = ComplexMatrix::Constant(1, 1, Complex(2.0, 0.0));
  const DesignProblem p{H, 0.5, 1.0, 1.0, 1};
  double mse_err = 1.0, g_err = 1.0, x_err = 1.0;
  try {
    const RobustDesign d = robust_design(p, recorded());
    mse_err = std::abs(d.transceiver.worst_case_mse - target);
    g_err = std::abs(d.scalars.g(0) - 6.0 / 13.0);
    x_err = std::abs(d.certificate.e_star(0, 0).real() + 0.5);
  } catch (const std::exception&) {
  }
  const bool pass = grid_ok && mse_err < 1e-6 && g_err < 1e-6 && x_err < 1e-6;
  report(2, "worked single-stream instance", pass,
         fmt("grid oracle 2001^2 value %.9f (g %.6f, x %.3f); design |mse-4/13| %.2e, |g-6/13| %.2e, "
             "|x+0.5| %.2e (all < 1e-6), %.2f s",
             grid.value, grid.g, grid.x, mse_err, g_err, x_err, seconds_since(start)));
}

void inner_max_certificate() {
  const auto start = Clock::now();
  double worst_excess = -1e300;
  double worst_kkt = 0.0;
  int errors = 0;
  for (int t = 0; t < 100; ++t) {
    std::mt19937_64 rng(derive_seed(3003, t));
    const int M = 1 + static_cast<int>(rng() % 4);
    const int N = 1 + static_cast<int>(rng() % 4);
    const int L = 1 + static_cast<int>(rng() % std::min(M, N));
    const ComplexMatrix H = complex_gaussian(M, N, rng);
    const ComplexMatrix F = complex_gaussian(N, L, rng);
    const ComplexMatrix G = complex_gaussian(L, M, rng) * 0.5;
    const double eps = std::sqrt(0.05) * H.norm();
    const DesignProblem p{H, eps, 1.0, 1.0, L};
    try {
      const WorstCaseCertificate c = worst_case_error_general(F, G, p);
      const double sampled = oracle::sampled_worst_case(F, G, p, 10000, derive_seed(3004, t));
      worst_excess = std::max(worst_excess, sampled - c.mse_value);
      worst_kkt = std::max(worst_kkt, c.kkt_residual);
      if (!c.converged) ++errors;
    } catch (const std::exception&) {
      ++errors;
    }
  }
  const double elapsed = seconds_since(start);
  const bool pass = errors == 0 && worst_excess <= 1e-9 && worst_kkt < 1e-7 && elapsed < 60.0;
  report(3, "inner-max certificate dominates sampling", pass,
         fmt("100 instances, max(sampled - certified) %.3e (<= 1e-9), max KKT residual %.3e (< 1e-7), errors %d, "
             "%.2f s (< 60 s)",
             worst_excess, worst_kkt, errors, elapsed));
}

void structure_optimality() {
  const auto start = Clock::now();
  double worst_gain = -1e300;
  int errors = 0;
  for (int t = 0; t < 50; ++t) {
    const double rho = t % 2 == 0 ? 0.01 : 0.05;
    const DesignProblem p = rayleigh(derive_seed(4004, t), 2, rho, bench::dbw_to_linear(20.0));
    try {
      const double structured = robust_design(p, recorded()).transceiver.worst_case_mse;
      // The search also runs one robust design for its structured start.
      const Transceiver found = oracle::unstructured_design_search(p, 20, derive_seed(4005, t));
      worst_gain = std::max(worst_gain, structured - found.worst_case_mse);
    } catch (const std::exception&) {
      ++errors;
    }
  }
  const double elapsed = seconds_since(start);
  report(4, "unstructured search never beats the structured optimum",
         errors == 0 && worst_gain <= 1e-3 && elapsed < 600.0,
         fmt("50 instances (rho 0.01/0.05, 20 dBW), 20 restarts each, max improvement %.3e (<= 1e-3), errors %d, "
             "%.1f s (< 600 s)",
             worst_gain, errors, elapsed));
}

bench::BenchConfig dominance_config() {
  bench::BenchConfig cfg;
  cfg.dims = {2, 4};
  cfg.power_dbw = {20.0};
  cfg.rho = {0.01, 0.03};
  cfg.trials = 100;
  cfg.seed = 5005;
  cfg.methods = {Method::robust_optimal, Method::alternating_I, Method::alternating_II, Method::alternating_III};
  return cfg;
}

void global_dominance(const std::vector<bench::TrialRecord>& records, double elapsed) {
  // (trial, L, rho) -> robust worst-case MSE
  std::map<std::tuple<int, int, double>, double> robust;
  for (const auto& r : records) {
    if (r.method == Method::robust_optimal && r.usable()) robust[{r.trial, r.L, r.rho}] = r.worst_case_mse;
  }
  double worst_excess = -1e300;
  int unusable = 0;
  // (L, rho, scheme) -> summed gap
  std::map<std::tuple<int, double, int>, double> gap_sum;
  std::map<std::tuple<int, double, int>, int> gap_count;
  for (const auto& r : records) {
    if (!r.usable()) {
      ++unusable;
      continue;
    }
    if (r.method == Method::robust_optimal) continue;
    const auto it = robust.find({r.trial, r.L, r.rho});
    if (it == robust.end()) continue;
    const double gap = r.worst_case_mse - it->second;
    worst_excess = std::max(worst_excess, -gap);
    gap_sum[{r.L, r.rho, static_cast<int>(r.method)}] += gap;
    gap_count[{r.L, r.rho, static_cast<int>(r.method)}] += 1;
  }
  bool ordering = true;
  std::string cells;
  for (int L : {2, 4}) {
    for (double rho : {0.01, 0.03}) {
      auto mean = [&](Method m) {
        const auto key = std::make_tuple(L, rho, static_cast<int>(m));
        return gap_count[key] ? gap_sum[key] / gap_count[key] : std::nan("");
      };
      const double g1 = mean(Method::alternating_I);
      const double g2 = mean(Method::alternating_II);
      const double g3 = mean(Method::alternating_III);
      ordering = ordering && g3 >= g1 && g3 >= g2;
      cells += fmt("; L=%d rho=%.2f mean gaps I %.4g II %.4g III %.4g", L, rho, g1, g2, g3);
    }
  }
  const bool pass = unusable == 0 && worst_excess <= 1e-6 && ordering;
  report(5, "robust optimum dominates alternating schemes", pass,
         fmt("%zu rows, unusable %d, max(robust - alternating) %.3e (<= 1e-6), scheme III gap largest in every "
             "cell: %s, %.1f s",
             records.size(), unusable, worst_excess, ordering ? "yes" : "no", elapsed) +
             cells);
}

void monotonicity() {
  const auto start = Clock::now();
  double worst_rho = -1e300;
  double worst_power = -1e300;
  int errors = 0;
  std::string first_error;
  for (int t = 0; t < 20; ++t) {
    const int L = 2 + 2 * (t % 2);
    const std::uint64_t seed = derive_seed(6006, t);
    try {
      double previous = -1e300;
      for (int k = 0; k <= 10; ++k) {
        const DesignProblem p = rayleigh(seed, L, 0.005 * k, bench::dbw_to_linear(20.0));
        const double v = robust_design(p, recorded()).transceiver.worst_case_mse;
        worst_rho = std::max(worst_rho, previous - v);
        previous = v;
      }
      previous = 1e300;
      for (int k = 0; k <= 15; ++k) {
        const DesignProblem p = rayleigh(seed, L, 0.01, bench::dbw_to_linear(2.0 * k));
        const double v = robust_design(p, recorded()).transceiver.worst_case_mse;
        worst_power = std::max(worst_power, v - previous);
        previous = v;
      }
    } catch (const std::exception& e) {
      if (errors++ == 0) first_error = e.what();
    }
  }
  const bool pass = errors == 0 && worst_rho <= 1e-8 && worst_power <= 1e-8;
  report(6, "monotone in uncertainty and power", pass,
         fmt("20 instances (L 2/4); rho 0..0.05 step 0.005: max decrease %.3e; P 0..30 dBW step 2: max increase "
             "%.3e (both <= 1e-8), errors %d, %.2f s",
             worst_rho, worst_power, errors, seconds_since(start)) +
             (first_error.empty() ? "" : "; first error: " + first_error));
}

void solver_health() {
  const auto& s = solver_stats;
  const bool pass = s.solves > 0 && s.non_optimal == 0 && s.max_relative_gap < 1e-8 && s.max_violation < 1e-8 &&
                    s.max_iterations <= 60;
  report(7, "conic solver health", pass,
         fmt("%ld solves, non-optimal %ld, max relative gap %.3e (< 1e-8), max violation %.3e (< 1e-8), max "
             "iterations %d (<= 60)",
             s.solves, s.non_optimal, s.max_relative_gap, s.max_violation, s.max_iterations));
}

std::string without_wall_time(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string cell;
    int k = 0;
    while (std::getline(cells, cell, ',')) {
      if (k++ != 9) out += cell + ",";
    }
    out += "\n";
  }
  return out;
}

}  // namespace

int main() {
  const auto start = Clock::now();
  zero_radius_closed_form();
  worked_single_stream();
  inner_max_certificate();
  structure_optimality();

  const bench::BenchConfig cfg = dominance_config();
  std::ostringstream first_rows;
  const auto bench_start = Clock::now();
  const auto records = bench::run_experiment(cfg, &first_rows, nullptr, recorded());
  global_dominance(records, seconds_since(bench_start));

  monotonicity();
  solver_health();

  const auto repeat_start = Clock::now();
  std::ostringstream second_rows;
  bench::run_experiment(cfg, &second_rows);
  const std::string a = without_wall_time(first_rows.str());
  const std::string b = without_wall_time(second_rows.str());
  report(8, "benchmark rows are reproducible", a == b && !a.empty(),
         fmt("%zu bytes of rows without wall time, identical: %s, rerun %.1f s", a.size(), a == b ? "yes" : "no",
             seconds_since(repeat_start)));

  std::printf("%d of 8 criteria failed, total %.1f s\n", failures, seconds_since(start));
  return failures == 0 ? 0 : 1;
}
