#pragma once

// Monte Carlo benchmark over Rayleigh channels: for every trial and every
// (L, P, rho, method) cell, draw H~ with CN(0, 1) entries, set
// epsilon^2 = rho ||H~||_F^2, run the design and record its worst-case MSE.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "robust_mimo/design.hpp"
#include "robust_mimo/errors.hpp"
#include "robust_mimo/linalg.hpp"
#include "robust_mimo/random.hpp"
#include "robust_mimo/worstcase.hpp"

namespace robust_mimo::bench {

inline constexpr const char* kRowsHeader =
    "trial,seed,L,P_dBW,rho,method,status,worst_case_mse,nominal_mse,wall_time_s,iterations";
inline constexpr const char* kSummaryHeader =
    "L,P_dBW,rho,method,trials,ok,mean_worst_case_mse,mean_nominal_mse,mean_wall_time_s,mean_iterations";

struct BenchConfig {
  std::vector<int> dims{2};
  std::vector<double> power_dbw{20.0};
  std::vector<double> rho{0.01};
  int trials = 100;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::robust_optimal, Method::alternating_I, Method::alternating_II,
                              Method::alternating_III, Method::nonrobust};
  double noise_var = 1.0;
  int max_iters = 100;  // alternating baseline
  double tol = 1e-8;    // alternating baseline

  void validate() const {
    require(!dims.empty() && !power_dbw.empty() && !rho.empty() && !methods.empty(),
            "bench config: dims, power_dbw, rho and methods must be nonempty");
    for (int L : dims) require(L >= 1, "bench config: dims must be >= 1");
    for (double p : power_dbw) require(std::isfinite(p), "bench config: power_dbw must be finite");
    for (double r : rho) require(std::isfinite(r) && r >= 0.0 && r < 1.0, "bench config: rho must lie in [0, 1)");
    for (Method m : methods) {
      require(m != Method::unstructured_search, "bench config: unstructured_search is not a benchmark method");
    }
    require(trials >= 1, "bench config: trials must be >= 1");
    require(std::isfinite(noise_var) && noise_var > 0.0, "bench config: noise_var must be > 0");
    require(max_iters >= 1 && tol > 0.0, "bench config: bad alternating settings");
  }
};

/// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_scalar(const std::string& text, const std::string& key) {
  T v{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  require(res.ec == std::errc() && res.ptr == end, "bench config: bad value '" + text + "' for " + key);
  return v;
}

template <class T>
std::vector<T> parse_list(const std::string& value, const std::string& key) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) out.push_back(parse_scalar<T>(item, key));
  return out;
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_number(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

}  // namespace detail

/// Flat `key = value` text; '#' starts a comment and list values are
/// comma-separated. Keys absent from the text keep their defaults.
inline BenchConfig parse_config(std::istream& in) {
  BenchConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, "bench config: line " + std::to_string(lineno) + " is not key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "dims") {
      cfg.dims = detail::parse_list<int>(value, key);
    } else if (key == "power_dbw") {
      cfg.power_dbw = detail::parse_list<double>(value, key);
    } else if (key == "rho") {
      cfg.rho = detail::parse_list<double>(value, key);
    } else if (key == "trials") {
      cfg.trials = detail::parse_scalar<int>(value, key);
    } else if (key == "seed") {
      cfg.seed = detail::parse_scalar<std::uint64_t>(value, key);
    } else if (key == "methods") {
      cfg.methods.clear();
      for (const auto& name : detail::split_list(value)) cfg.methods.push_back(parse_method(name));
    } else if (key == "noise_var") {
      cfg.noise_var = detail::parse_scalar<double>(value, key);
    } else if (key == "max_iters") {
      cfg.max_iters = detail::parse_scalar<int>(value, key);
    } else if (key == "tol") {
      cfg.tol = detail::parse_scalar<double>(value, key);
    } else {
      throw PreconditionError("bench config: unknown key '" + key + "' on line " + std::to_string(lineno));
    }
  }
  cfg.validate();
  return cfg;
}

inline BenchConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline BenchConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "bench config: cannot open '" + path + "'");
  return parse_config(in);
}

inline std::string format_config(const BenchConfig& cfg) {
  std::string methods;
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    if (i) methods += ",";
    methods += to_string(cfg.methods[i]);
  }
  std::ostringstream out;
  out << "dims = " << detail::join(cfg.dims) << "\n"
      << "power_dbw = " << detail::join(cfg.power_dbw) << "\n"
      << "rho = " << detail::join(cfg.rho) << "\n"
      << "trials = " << cfg.trials << "\n"
      << "seed = " << cfg.seed << "\n"
      << "methods = " << methods << "\n"
      << "noise_var = " << format_number(cfg.noise_var) << "\n"
      << "max_iters = " << cfg.max_iters << "\n"
      << "tol = " << format_number(cfg.tol) << "\n";
  return out.str();
}

inline double dbw_to_linear(double dbw) { return std::pow(10.0, dbw / 10.0); }

/// M x N channel with i.i.d. CN(0, 1) entries, fixed by the seed.
inline ComplexMatrix generate_channel(int M, int N, std::uint64_t seed) {
  require(M >= 1 && N >= 1, "generate_channel: dimensions must be >= 1");
  std::mt19937_64 rng(seed);
  return complex_gaussian(M, N, rng);
}

/// Channel seed of a (trial, L) pair; every P, rho and method of the pair
/// sees the same channel.
inline std::uint64_t channel_seed(std::uint64_t seed, int trial, int L) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(trial)), static_cast<std::uint64_t>(L));
}

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  int L = 0;
  double power_dbw = 0.0;
  double rho = 0.0;
  Method method = Method::robust_optimal;
  std::string status;  // ok, not_converged, solver_failure, numerical_failure, precondition_failure
  double worst_case_mse = std::numeric_limits<double>::quiet_NaN();
  double nominal_mse = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
  int iterations = 0;

  /// A design was produced (possibly without meeting the convergence test).
  bool usable() const { return status == "ok" || status == "not_converged"; }
};

struct CellSummary {
  int L = 0;
  double power_dbw = 0.0;
  double rho = 0.0;
  Method method = Method::robust_optimal;
  int trials = 0;
  int ok = 0;
  double mean_worst_case_mse = std::numeric_limits<double>::quiet_NaN();
  double mean_nominal_mse = std::numeric_limits<double>::quiet_NaN();
  double mean_wall_time_s = std::numeric_limits<double>::quiet_NaN();
  double mean_iterations = std::numeric_limits<double>::quiet_NaN();
};

inline std::string format_row(const TrialRecord& r) {
  char wall[32];
  std::snprintf(wall, sizeof(wall), "%.6f", r.wall_time_s);
  std::string out;
  out += std::to_string(r.trial) + "," + std::to_string(r.seed) + "," + std::to_string(r.L) + ",";
  out += format_number(r.power_dbw) + "," + format_number(r.rho) + "," + to_string(r.method) + ",";
  out += r.status + "," + format_number(r.worst_case_mse) + "," + format_number(r.nominal_mse) + ",";
  out += std::string(wall) + "," + std::to_string(r.iterations);
  return out;
}

inline std::string format_summary(const CellSummary& c) {
  char wall[32];
  std::snprintf(wall, sizeof(wall), "%.6f", c.mean_wall_time_s);
  std::string out;
  out += std::to_string(c.L) + "," + format_number(c.power_dbw) + "," + format_number(c.rho) + ",";
  out += std::string(to_string(c.method)) + "," + std::to_string(c.trials) + "," + std::to_string(c.ok) + ",";
  out += format_number(c.mean_worst_case_mse) + "," + format_number(c.mean_nominal_mse) + ",";
  out += std::string(std::isnan(c.mean_wall_time_s) ? "nan" : wall) + "," + format_number(c.mean_iterations);
  return out;
}

/// Runs one method on one problem and fills the outcome fields of `rec`.
inline void run_method(const DesignProblem& problem, Method method, const BenchConfig& cfg,
                       const conic::SolverOptions& solver, TrialRecord& rec) {
  const auto start = std::chrono::steady_clock::now();
  try {
    Transceiver t;
    switch (method) {
      case Method::robust_optimal: {
        RobustDesign d = robust_design(problem, solver);
        rec.iterations = d.solution.iterations;
        rec.status = "ok";
        t = std::move(d.transceiver);
        break;
      }
      case Method::alternating_I:
      case Method::alternating_II:
      case Method::alternating_III: {
        AlternatingOptions opts;
        opts.max_iters = cfg.max_iters;
        opts.tol = cfg.tol;
        opts.seed = rec.seed;
        opts.solver = solver;
        const InitScheme scheme = method == Method::alternating_I    ? InitScheme::I
                                  : method == Method::alternating_II ? InitScheme::II
                                                                     : InitScheme::III;
        AlternatingDesign d = alternating_design(problem, scheme, opts);
        rec.iterations = d.iterations;
        if (!d.failure.empty()) {
          rec.status = "solver_failure";
          rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          return;
        }
        rec.status = d.converged ? "ok" : "not_converged";
        t = std::move(d.transceiver);
        break;
      }
      case Method::nonrobust: {
        NonrobustDesign d = nonrobust_design(problem);
        rec.iterations = 0;
        rec.status = "ok";
        t = std::move(d.transceiver);
        break;
      }
      case Method::unstructured_search:
        throw PreconditionError("unstructured_search is not a benchmark method");
    }
    rec.worst_case_mse = t.worst_case_mse;
    rec.nominal_mse = mse(t.F, t.G, ComplexMatrix::Zero(problem.h_tilde.rows(), problem.h_tilde.cols()), problem);
  } catch (const SolverError&) {
    rec.status = "solver_failure";
  } catch (const NumericalError&) {
    rec.status = "numerical_failure";
  } catch (const PreconditionError&) {
    rec.status = "precondition_failure";
  }
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Per-cell means over the usable rows, in (L, P, rho, method) order of the
/// configuration.
inline std::vector<CellSummary> summarize(const BenchConfig& cfg, const std::vector<TrialRecord>& records) {
  using Key = std::tuple<int, double, double, int>;
  std::map<Key, CellSummary> acc;
  for (const TrialRecord& r : records) {
    CellSummary& c = acc[{r.L, r.power_dbw, r.rho, static_cast<int>(r.method)}];
    if (c.trials == 0) {
      c = {r.L, r.power_dbw, r.rho, r.method, 0, 0, 0.0, 0.0, 0.0, 0.0};
    }
    ++c.trials;
    if (!r.usable()) continue;
    ++c.ok;
    c.mean_worst_case_mse += r.worst_case_mse;
    c.mean_nominal_mse += r.nominal_mse;
    c.mean_wall_time_s += r.wall_time_s;
    c.mean_iterations += r.iterations;
  }
  std::vector<CellSummary> out;
  for (int L : cfg.dims) {
    for (double p : cfg.power_dbw) {
      for (double rho : cfg.rho) {
        for (Method m : cfg.methods) {
          auto it = acc.find({L, p, rho, static_cast<int>(m)});
          if (it == acc.end()) continue;
          CellSummary c = it->second;
          if (c.ok > 0) {
            c.mean_worst_case_mse /= c.ok;
            c.mean_nominal_mse /= c.ok;
            c.mean_wall_time_s /= c.ok;
            c.mean_iterations /= c.ok;
          } else {
            c.mean_worst_case_mse = c.mean_nominal_mse = c.mean_wall_time_s = c.mean_iterations =
                std::numeric_limits<double>::quiet_NaN();
          }
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

/// Runs every (trial, L, P, rho, method) cell in that nesting order. Rows
/// are streamed to `rows` as they finish and the per-cell means go to
/// `summary` at the end; either stream may be null.
inline std::vector<TrialRecord> run_experiment(const BenchConfig& cfg, std::ostream* rows = nullptr,
                                               std::ostream* summary = nullptr,
                                               const conic::SolverOptions& solver = {}) {
  cfg.validate();
  if (rows) *rows << kRowsHeader << "\n";
  std::vector<TrialRecord> records;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    for (int L : cfg.dims) {
      const std::uint64_t seed = channel_seed(cfg.seed, trial, L);
      const ComplexMatrix H = generate_channel(L, L, seed);
      const double h_norm = H.norm();
      for (double p_dbw : cfg.power_dbw) {
        for (double rho : cfg.rho) {
          const DesignProblem problem{H, std::sqrt(rho) * h_norm, cfg.noise_var, dbw_to_linear(p_dbw), L};
          for (Method m : cfg.methods) {
            TrialRecord rec;
            rec.trial = trial;
            rec.seed = seed;
            rec.L = L;
            rec.power_dbw = p_dbw;
            rec.rho = rho;
            rec.method = m;
            run_method(problem, m, cfg, solver, rec);
            if (rows) *rows << format_row(rec) << "\n" << std::flush;
            records.push_back(std::move(rec));
          }
        }
      }
    }
  }
  if (summary) {
    *summary << kSummaryHeader << "\n";
    for (const CellSummary& c : summarize(cfg, records)) *summary << format_summary(c) << "\n";
  }
  return records;
}

}  // namespace robust_mimo::bench
