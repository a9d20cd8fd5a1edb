#pragma once

// Command-line front end: `design`, `worstcase` and `bench` subcommands.
// Exit status: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <complex>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "robust_mimo/bench.hpp"
#include "robust_mimo/design.hpp"
#include "robust_mimo/errors.hpp"
#include "robust_mimo/linalg.hpp"
#include "robust_mimo/worstcase.hpp"

namespace robust_mimo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Input file that cannot be read; reported as a runtime failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rows separated by ';', entries by whitespace. An entry is a real number
/// or "(re,im)". A leading '@' reads the literal from the named file, where
/// newlines also separate rows.
inline ComplexMatrix parse_matrix(const std::string& literal) {
  std::string text = literal;
  if (!text.empty() && text[0] == '@') {
    std::ifstream in(text.substr(1));
    if (!in) throw IoError("cannot open matrix file '" + text.substr(1) + "'");
    std::stringstream buf;
    std::string line;
    while (std::getline(in, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      buf << line << ";";
    }
    text = buf.str();
  }

  std::vector<std::vector<Complex>> rows;
  std::stringstream rs(text);
  std::string row;
  while (std::getline(rs, row, ';')) {
    std::istringstream es(row);
    std::vector<Complex> entries;
    es >> std::ws;
    while (!es.eof()) {
      Complex z;
      es >> z;
      require(!es.fail(), "matrix literal: cannot parse entry in row '" + row + "'");
      entries.push_back(z);
      es >> std::ws;
    }
    if (!entries.empty()) rows.push_back(std::move(entries));
  }
  require(!rows.empty(), "matrix literal: no entries");
  const std::size_t cols = rows.front().size();
  ComplexMatrix A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == cols, "matrix literal: rows have different lengths");
    for (std::size_t j = 0; j < cols; ++j) A(i, j) = rows[i][j];
  }
  require(A.allFinite(), "matrix literal: non-finite entry");
  return A;
}

inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v == 0.0 ? 0.0 : v);
  return buf;
}

inline std::string format_entry(Complex z) {
  if (z.imag() == 0.0) return format_value(z.real());
  return "(" + format_value(z.real()) + "," + format_value(z.imag()) + ")";
}

/// Matrix in the same literal syntax parse_matrix accepts.
inline std::string format_matrix(const ComplexMatrix& A) {
  std::string out;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    if (i) out += "; ";
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      if (j) out += " ";
      out += format_entry(A(i, j));
    }
  }
  return out;
}

inline std::string format_vector(const RealVector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += " ";
    out += format_value(v(i));
  }
  return out;
}

inline void print_certificate(std::ostream& out, const WorstCaseCertificate& cert) {
  out << "omega " << format_value(cert.omega) << "\n";
  out << "lambda_max " << format_value(cert.lambda_max) << "\n";
  out << "hard_case " << (cert.hard_case ? "true" : "false") << "\n";
  out << "kkt_residual " << format_value(cert.kkt_residual) << "\n";
  out << "error_norm " << format_value(cert.e_star.norm()) << "\n";
  out << "E " << format_matrix(cert.e_star) << "\n";
}

struct DesignArgs {
  std::uint64_t seed = 0;
  int L = 0;
  double rho = -1.0;
  double epsilon = -1.0;
  double power_dbw = 20.0;
  double noise_var = 1.0;
  std::string channel;
  std::string method = "robust_optimal";
  int max_iters = 100;
  double tol = 1e-8;
};

inline int run_design(const DesignArgs& a, bool have_seed, std::ostream& out) {
  ComplexMatrix H;
  if (!a.channel.empty()) {
    H = parse_matrix(a.channel);
  } else {
    require(have_seed, "design: give --seed or --channel");
    require(a.L >= 1, "design: --L must be >= 1 with --seed");
    H = bench::generate_channel(a.L, a.L, a.seed);
  }
  require((a.rho >= 0.0) != (a.epsilon >= 0.0), "design: give exactly one of --rho and --epsilon");
  require(a.rho < 1.0, "design: --rho must lie in [0, 1)");
  const int streams = a.L >= 1 ? a.L : static_cast<int>(std::min(H.rows(), H.cols()));
  const double eps = a.epsilon >= 0.0 ? a.epsilon : std::sqrt(a.rho) * H.norm();
  const DesignProblem problem{H, eps, a.noise_var, bench::dbw_to_linear(a.power_dbw), streams};
  const Method method = parse_method(a.method);
  require(method != Method::unstructured_search, "design: unsupported method");

  const ChannelModes cm = channel_modes(problem);
  Transceiver t;
  ScalarDesign sd;
  std::string extra;
  switch (method) {
    case Method::robust_optimal: {
      RobustDesign d = robust_design(problem);
      t = d.transceiver;
      sd = d.scalars;
      extra = "solver_iterations " + std::to_string(d.solution.iterations) + "\n";
      break;
    }
    case Method::nonrobust: {
      NonrobustDesign d = nonrobust_design(problem);
      t = d.transceiver;
      sd = d.scalars;
      break;
    }
    default: {
      AlternatingOptions opts;
      opts.max_iters = a.max_iters;
      opts.tol = a.tol;
      opts.seed = a.seed;
      const InitScheme scheme = method == Method::alternating_I    ? InitScheme::I
                                : method == Method::alternating_II ? InitScheme::II
                                                                   : InitScheme::III;
      AlternatingDesign d = alternating_design(problem, scheme, opts);
      if (!d.failure.empty()) throw NumericalError(d.failure);
      t = d.transceiver;
      sd = d.scalars;
      extra = "outer_iterations " + std::to_string(d.iterations) + "\nconverged " +
              (d.converged ? "true" : "false") + "\n";
      break;
    }
  }

  out << "method " << to_string(method) << "\n";
  out << "H " << format_matrix(H) << "\n";
  out << "epsilon " << format_value(eps) << "\n";
  out << "power " << format_value(problem.power) << "\n";
  out << "gamma " << format_vector(cm.gamma) << "\n";
  out << "f " << format_vector(sd.f) << "\n";
  out << "g " << format_vector(sd.g) << "\n";
  out << "F " << format_matrix(t.F) << "\n";
  out << "G " << format_matrix(t.G) << "\n";
  out << extra;
  out << "worst_case_mse " << format_value(t.worst_case_mse) << "\n";
  out << "nominal_mse " << format_value(mse(t.F, t.G, ComplexMatrix::Zero(H.rows(), H.cols()), problem)) << "\n";
  print_certificate(out, worst_case_error_general(t.F, t.G, problem));
  return kExitOk;
}

struct WorstCaseArgs {
  std::string F, G, H;
  double epsilon = 0.0;
  double noise_var = 1.0;
};

inline int run_worstcase(const WorstCaseArgs& a, std::ostream& out) {
  const ComplexMatrix F = parse_matrix(a.F);
  const ComplexMatrix G = parse_matrix(a.G);
  const ComplexMatrix H = parse_matrix(a.H);
  require(F.cols() == G.rows() && F.rows() == H.cols() && G.cols() == H.rows(),
          "worstcase: F must be N x L, G must be L x M and H must be M x N");
  const DesignProblem problem{H, a.epsilon, a.noise_var, 1.0, static_cast<int>(F.cols())};
  require(std::isfinite(a.epsilon) && a.epsilon >= 0.0 && a.noise_var > 0.0,
          "worstcase: epsilon must be >= 0 and noise variance > 0");
  const WorstCaseCertificate cert = worst_case_error_general(F, G, problem);
  out << "mse " << format_value(cert.mse_value) << "\n";
  out << "nominal_mse " << format_value(mse(F, G, ComplexMatrix::Zero(H.rows(), H.cols()), problem)) << "\n";
  print_certificate(out, cert);
  if (!cert.converged) throw NumericalError("worstcase: secular solver did not converge");
  return kExitOk;
}

struct BenchArgs {
  std::string config;
  std::string rows = "bench_rows.csv";
  std::string summary = "bench_summary.csv";
};

inline int run_bench(const BenchArgs& a, std::ostream& out) {
  const bench::BenchConfig cfg = bench::load_config(a.config);
  std::ofstream rows(a.rows);
  if (!rows) throw IoError("cannot write '" + a.rows + "'");
  std::ofstream summary(a.summary);
  if (!summary) throw IoError("cannot write '" + a.summary + "'");
  const auto records = bench::run_experiment(cfg, &rows, &summary);
  long bad = 0;
  for (const auto& r : records) bad += r.usable() ? 0 : 1;
  out << "rows " << records.size() << " failed " << bad << "\n";
  out << "wrote " << a.rows << " and " << a.summary << "\n";
  if (!rows || !summary) throw IoError("write failed");
  return kExitOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Worst-case robust MIMO transceiver design"};
  app.require_subcommand(1);

  DesignArgs da;
  auto* design = app.add_subcommand("design", "Design one transceiver from a seeded or given channel");
  auto* seed_opt = design->add_option("--seed", da.seed, "Seed of the CN(0,1) channel draw");
  design->add_option("--L", da.L, "Streams; with --seed also the antenna count (M = N = L)");
  design->add_option("--channel", da.channel, "Channel matrix literal or @file");
  design->add_option("--rho", da.rho, "Uncertainty as epsilon^2 = rho ||H||_F^2");
  design->add_option("--epsilon", da.epsilon, "Uncertainty radius");
  design->add_option("--power-dbw", da.power_dbw, "Power budget in dBW")->capture_default_str();
  design->add_option("--noise-var", da.noise_var, "Noise variance")->capture_default_str();
  design->add_option("--method", da.method, "robust_optimal, alternating_I/II/III or nonrobust")
      ->capture_default_str();
  design->add_option("--max-iters", da.max_iters, "Alternating baseline iteration cap")->capture_default_str();
  design->add_option("--tol", da.tol, "Alternating baseline relative tolerance")->capture_default_str();
  seed_opt->excludes(design->get_option("--channel"));

  WorstCaseArgs wa;
  auto* worst = app.add_subcommand("worstcase", "Worst-case channel error for a given F, G and H");
  worst->add_option("--F", wa.F, "Precoder (N x L) literal or @file")->required();
  worst->add_option("--G", wa.G, "Equalizer (L x M) literal or @file")->required();
  worst->add_option("--H", wa.H, "Estimated channel (M x N) literal or @file")->required();
  worst->add_option("--epsilon", wa.epsilon, "Uncertainty radius")->required();
  worst->add_option("--noise-var", wa.noise_var, "Noise variance")->capture_default_str();

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Run a Monte Carlo benchmark configuration");
  bench_cmd->add_option("--config", ba.config, "Configuration file")->required();
  bench_cmd->add_option("--rows", ba.rows, "Per-trial CSV output")->capture_default_str();
  bench_cmd->add_option("--summary", ba.summary, "Per-cell summary CSV output")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitUsage;
  }

  try {
    if (*design) return run_design(da, seed_opt->count() > 0, out);
    if (*worst) return run_worstcase(wa, out);
    if (*bench_cmd) return run_bench(ba, out);
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace robust_mimo::cli
