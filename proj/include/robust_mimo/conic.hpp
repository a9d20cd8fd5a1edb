#pragma once

// Small dense conic programs over rotated quadratic cones and the
// nonnegative orthant, and the scalar robust-design programs built on them.
//
// Every 2x2 linear matrix inequality [a b; b c] >= 0 is exactly the rotated
// cone membership a >= 0, c >= 0, a*c >= b^2, so the scalar robust program
// is a second-order cone program with no loss:
//
//   [z_i, gamma_i m_i - 1; gamma_i m_i - 1, 1 - s_i] >= 0
//       <=>  z_i (1 - s_i) >= (gamma_i m_i - 1)^2,  z_i, 1 - s_i >= 0
//   [mu, eps m_i; eps m_i, s_i] >= 0
//       <=>  mu s_i >= eps^2 m_i^2,  mu, s_i >= 0
//   sum_i m_i^2 / n_i <= P
//       <=>  n_i p_i >= m_i^2 for auxiliary p_i,  sum_i p_i <= P
//
// and the strict bound s_i < 1 becomes s_i <= 1 - kStrictMargin.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "robust_mimo/errors.hpp"
#include "robust_mimo/linalg.hpp"

namespace robust_mimo::conic {

/// Margin replacing the strict inequality s_i < 1.
inline constexpr double kStrictMargin = 1e-9;
/// Lower bound on mu when epsilon > 0.
inline constexpr double kMuFloor = 1e-12;

/// sum_k coef_k * x[index_k] + constant
struct AffineExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  static AffineExpr variable(int index, double coef = 1.0) { return {{{index, coef}}, 0.0}; }
  static AffineExpr value(double c) { return {{}, c}; }

  AffineExpr& add(int index, double coef) {
    terms.emplace_back(index, coef);
    return *this;
  }

  double evaluate(const RealVector& x) const {
    double v = constant;
    for (const auto& [i, a] : terms) v += a * x(i);
    return v;
  }
};

/// u * v >= w^2 with u >= 0 and v >= 0.
struct RotatedCone {
  AffineExpr u;
  AffineExpr v;
  AffineExpr w;
};

/// expr >= 0.
struct LinearInequality {
  AffineExpr expr;
};

struct ConeProgram {
  int num_vars = 0;
  std::vector<std::string> var_names;
  RealVector objective;        // linear cost
  double objective_offset = 0.0;
  std::vector<RotatedCone> cones;
  std::vector<LinearInequality> linear;
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iters, numerical_failure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iters: return "max_iters";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

struct ConeSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  RealVector primal;
  double objective_value = 0.0;
  double duality_gap = 0.0;
  double max_violation = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
};

/// Running health figures over a batch of solves.
struct SolveStats {
  long solves = 0;
  long non_optimal = 0;
  int max_iterations = 0;
  double max_relative_gap = 0.0;  // duality_gap / (1 + |objective|)
  double max_violation = 0.0;

  void add(const ConeSolution& sol, double offset);
};

struct SolverOptions {
  int max_iterations = 200;
  double feasibility_tol = 1e-10;
  double gap_tol = 1e-10;  // relative to 1 + |objective|
  // A run that stalls before the targets above still reports optimal when
  // its last iterate meets this looser level on every measure.
  double acceptable_tol = 1e-8;
  std::ostream* log = nullptr;  // per-iteration progress when set
  SolveStats* stats = nullptr;  // accumulates every finished solve when set
};

inline void SolveStats::add(const ConeSolution& sol, double offset) {
  ++solves;
  if (sol.status != SolveStatus::optimal) {
    ++non_optimal;
    return;
  }
  max_iterations = std::max(max_iterations, sol.iterations);
  max_relative_gap =
      std::max(max_relative_gap, sol.duality_gap / (1.0 + std::abs(sol.objective_value - offset)));
  max_violation = std::max(max_violation, sol.max_violation);
}

inline bool lmi2x2_check(double a, double b, double c) { return a >= 0.0 && c >= 0.0 && a * c >= b * b; }

namespace detail {

inline void check_expr(const AffineExpr& e, int n) {
  for (const auto& [i, a] : e.terms) {
    require(i >= 0 && i < n, "ConeProgram: variable index out of range");
    require(std::isfinite(a), "ConeProgram: non-finite coefficient");
  }
  require(std::isfinite(e.constant), "ConeProgram: non-finite constant");
}

}  // namespace detail

/// Throws PreconditionError if any cone or inequality references a variable
/// outside [0, num_vars) or the objective has the wrong length.
inline void validate(const ConeProgram& p) {
  require(p.num_vars > 0, "ConeProgram: no variables");
  require(p.objective.size() == p.num_vars, "ConeProgram: objective length mismatch");
  require(p.objective.allFinite(), "ConeProgram: non-finite objective");
  for (const auto& k : p.cones) {
    detail::check_expr(k.u, p.num_vars);
    detail::check_expr(k.v, p.num_vars);
    detail::check_expr(k.w, p.num_vars);
  }
  for (const auto& l : p.linear) detail::check_expr(l.expr, p.num_vars);
}

/// Largest amount by which x violates any constraint of the program.
inline double max_violation(const ConeProgram& p, const RealVector& x) {
  double worst = 0.0;
  for (const auto& l : p.linear) worst = std::max(worst, -l.expr.evaluate(x));
  for (const auto& k : p.cones) {
    const double u = k.u.evaluate(x);
    const double v = k.v.evaluate(x);
    const double w = k.w.evaluate(x);
    worst = std::max(worst, std::hypot(u - v, 2.0 * w) - (u + v));
  }
  return std::max(worst, 0.0);
}

// ---------------------------------------------------------------------------
// Interior-point solver

namespace detail {

// Standard form: minimize c^T x  subject to  G x + s = h,  s in K, where K is
// an orthant of dimension `orthant` followed by three-dimensional
// second-order cones {(t, y): t >= ||y||}. A rotated cone (u, v, w) maps to
// (u + v, u - v, 2 w).
struct StandardForm {
  RealVector c;
  RealMatrix G;
  RealVector h;
  int orthant = 0;
  int soc_count = 0;
};

inline void fill_row(const AffineExpr& e, double scale, RealMatrix& G, RealVector& h, int row) {
  for (const auto& [i, a] : e.terms) G(row, i) -= scale * a;
  h(row) += scale * e.constant;
}

inline StandardForm to_standard_form(const ConeProgram& p) {
  StandardForm sf;
  sf.orthant = static_cast<int>(p.linear.size());
  sf.soc_count = static_cast<int>(p.cones.size());
  const int rows = sf.orthant + 3 * sf.soc_count;
  sf.c = p.objective;
  sf.G = RealMatrix::Zero(rows, p.num_vars);
  sf.h = RealVector::Zero(rows);
  for (int r = 0; r < sf.orthant; ++r) fill_row(p.linear[r].expr, 1.0, sf.G, sf.h, r);
  for (int k = 0; k < sf.soc_count; ++k) {
    const int r = sf.orthant + 3 * k;
    const auto& cone = p.cones[k];
    fill_row(cone.u, 1.0, sf.G, sf.h, r);
    fill_row(cone.v, 1.0, sf.G, sf.h, r);
    fill_row(cone.u, 1.0, sf.G, sf.h, r + 1);
    fill_row(cone.v, -1.0, sf.G, sf.h, r + 1);
    fill_row(cone.w, 2.0, sf.G, sf.h, r + 2);
  }
  return sf;
}

// Nesterov-Todd scaling for the product cone. For the orthant W is diagonal;
// for each second-order cone it is the 3x3 block
//   eta * [a, q^T; q, I + q q^T / (1 + a)],
// with W z = W^{-1} s = lambda.
struct Scaling {
  RealVector w;                  // orthant diagonal
  std::vector<Eigen::Matrix3d> W;
  std::vector<Eigen::Matrix3d> Winv;
};

inline double soc_det(const Eigen::Vector3d& u) {
  const double r = u.tail<2>().norm();
  return (u(0) - r) * (u(0) + r);
}

inline bool soc_interior(const Eigen::Vector3d& u) { return u(0) > u.tail<2>().norm(); }

inline Scaling nt_scaling(const StandardForm& sf, const RealVector& s, const RealVector& z) {
  Scaling sc;
  sc.w = (s.head(sf.orthant).array() / z.head(sf.orthant).array()).sqrt();
  sc.W.resize(sf.soc_count);
  sc.Winv.resize(sf.soc_count);
  for (int k = 0; k < sf.soc_count; ++k) {
    const int r = sf.orthant + 3 * k;
    const Eigen::Vector3d sk = s.segment<3>(r);
    const Eigen::Vector3d zk = z.segment<3>(r);
    const double ds = std::sqrt(soc_det(sk));
    const double dz = std::sqrt(soc_det(zk));
    const Eigen::Vector3d sb = sk / ds;
    const Eigen::Vector3d zb = zk / dz;
    const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
    Eigen::Vector3d wb;
    wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
    wb.tail<2>() = (sb.tail<2>() - zb.tail<2>()) / (2.0 * gamma);
    const double eta = std::sqrt(ds / dz);
    const double a = wb(0);
    const Eigen::Vector2d q = wb.tail<2>();
    Eigen::Matrix3d B;
    B(0, 0) = a;
    B.block<1, 2>(0, 1) = q.transpose();
    B.block<2, 1>(1, 0) = q;
    B.block<2, 2>(1, 1) = Eigen::Matrix2d::Identity() + q * q.transpose() / (1.0 + a);
    Eigen::Matrix3d Bi = B;
    Bi.block<1, 2>(0, 1) = -q.transpose();
    Bi.block<2, 1>(1, 0) = -q;
    sc.W[k] = eta * B;
    sc.Winv[k] = Bi / eta;
  }
  return sc;
}

inline RealVector apply_w(const StandardForm& sf, const Scaling& sc, const RealVector& v, bool inverse) {
  RealVector out(v.size());
  if (inverse) {
    out.head(sf.orthant) = v.head(sf.orthant).cwiseQuotient(sc.w);
  } else {
    out.head(sf.orthant) = v.head(sf.orthant).cwiseProduct(sc.w);
  }
  for (int k = 0; k < sf.soc_count; ++k) {
    const int r = sf.orthant + 3 * k;
    out.segment<3>(r) = (inverse ? sc.Winv[k] : sc.W[k]) * v.segment<3>(r);
  }
  return out;
}

// Jordan product u o v.
inline RealVector jordan_product(const StandardForm& sf, const RealVector& u, const RealVector& v) {
  RealVector out(u.size());
  out.head(sf.orthant) = u.head(sf.orthant).cwiseProduct(v.head(sf.orthant));
  for (int k = 0; k < sf.soc_count; ++k) {
    const int r = sf.orthant + 3 * k;
    const Eigen::Vector3d a = u.segment<3>(r);
    const Eigen::Vector3d b = v.segment<3>(r);
    out(r) = a.dot(b);
    out.segment<2>(r + 1) = a(0) * b.tail<2>() + b(0) * a.tail<2>();
  }
  return out;
}

// Solves lambda o x = v.
inline RealVector jordan_divide(const StandardForm& sf, const RealVector& lambda, const RealVector& v) {
  RealVector out(v.size());
  out.head(sf.orthant) = v.head(sf.orthant).cwiseQuotient(lambda.head(sf.orthant));
  for (int k = 0; k < sf.soc_count; ++k) {
    const int r = sf.orthant + 3 * k;
    const Eigen::Vector3d l = lambda.segment<3>(r);
    const Eigen::Vector3d b = v.segment<3>(r);
    const double x0 = (l(0) * b(0) - l.tail<2>().dot(b.tail<2>())) / soc_det(l);
    out(r) = x0;
    out.segment<2>(r + 1) = (b.tail<2>() - x0 * l.tail<2>()) / l(0);
  }
  return out;
}

inline RealVector identity_element(const StandardForm& sf) {
  RealVector e = RealVector::Zero(sf.orthant + 3 * sf.soc_count);
  e.head(sf.orthant).setOnes();
  for (int k = 0; k < sf.soc_count; ++k) e(sf.orthant + 3 * k) = 1.0;
  return e;
}

// Largest alpha in [0, cap] keeping u + alpha d in the closed cone.
inline double max_step(const StandardForm& sf, const RealVector& u, const RealVector& d, double cap) {
  double alpha = cap;
  for (int i = 0; i < sf.orthant; ++i) {
    if (d(i) < 0.0) alpha = std::min(alpha, -u(i) / d(i));
  }
  for (int k = 0; k < sf.soc_count; ++k) {
    const int r = sf.orthant + 3 * k;
    const Eigen::Vector3d x = u.segment<3>(r);
    const Eigen::Vector3d y = d.segment<3>(r);
    // q(a) = (x0 + a y0)^2 - ||x1 + a y1||^2 = A a^2 + 2 B a + C, C > 0.
    const double A = y(0) * y(0) - y.tail<2>().squaredNorm();
    const double B = x(0) * y(0) - x.tail<2>().dot(y.tail<2>());
    const double C = soc_det(x);
    double root = std::numeric_limits<double>::infinity();
    if (A == 0.0) {
      if (B < 0.0) root = -C / (2.0 * B);
    } else {
      const double disc = B * B - A * C;
      if (disc >= 0.0) {
        // Stable roots of A a^2 + 2 B a + C.
        const double sq = std::sqrt(disc);
        const double t = -(B + std::copysign(sq, B));
        const double r1 = t / A;
        const double r2 = (t != 0.0) ? C / t : std::numeric_limits<double>::infinity();
        for (double cand : {r1, r2}) {
          if (cand > 0.0) root = std::min(root, cand);
        }
      }
    }
    alpha = std::min(alpha, root);
    if (y(0) < 0.0) alpha = std::min(alpha, -x(0) / y(0));
  }
  return std::max(alpha, 0.0);
}

// Solves [0 G^T; G -W^2] [dx; dz] = [r1; r2]. With Gs = W^{-1} G = Q R the
// system is Gs^T y = r1, Gs dx - y = W^{-1} r2 (y = W dz), so
//   R dx = R^{-T} r1 + Q^T W^{-1} r2,   y = Gs dx - W^{-1} r2.
// Working with R avoids squaring the condition number of Gs; a few rounds of
// iterative refinement on the full system clean up the rest.
class KktSolver {
 public:
  KktSolver(const StandardForm& sf, const Scaling& sc) : sf_(sf), sc_(sc) {
    const int n = static_cast<int>(sf.G.cols());
    gs_.resize(sf.G.rows(), n);
    for (int j = 0; j < n; ++j) gs_.col(j) = apply_w(sf, sc, sf.G.col(j), true);
    qr_.compute(gs_);
    const RealVector diag = qr_.matrixQR().diagonal().cwiseAbs();
    ok_ = diag.allFinite() && diag.minCoeff() > 1e-14 * std::max(1.0, diag.maxCoeff());
  }

  bool ok() const { return ok_; }

  void solve(const RealVector& r1, const RealVector& r2, RealVector& dx, RealVector& dz) const {
    solve_once(r1, r2, dx, dz);
    for (int it = 0; it < 3; ++it) {
      const RealVector e1 = r1 - sf_.G.transpose() * dz;
      const RealVector e2 = r2 - (sf_.G * dx - apply_w(sf_, sc_, apply_w(sf_, sc_, dz, false), false));
      const double err = std::max(e1.lpNorm<Eigen::Infinity>(), e2.lpNorm<Eigen::Infinity>());
      const double ref = 1e-15 * (1.0 + std::max(r1.lpNorm<Eigen::Infinity>(), r2.lpNorm<Eigen::Infinity>()));
      if (err <= ref) break;
      RealVector cx, cz;
      solve_once(e1, e2, cx, cz);
      dx += cx;
      dz += cz;
    }
  }

 private:
  void solve_once(const RealVector& r1, const RealVector& r2, RealVector& dx, RealVector& dz) const {
    const Eigen::Index n = gs_.cols();
    const auto R = qr_.matrixQR().topLeftCorner(n, n).template triangularView<Eigen::Upper>();
    const RealVector r2s = apply_w(sf_, sc_, r2, true);
    RealVector qt = qr_.householderQ().transpose() * r2s;
    RealVector rhs = R.transpose().solve(r1) + qt.head(n);
    dx = R.solve(rhs);
    const RealVector y = gs_ * dx - r2s;
    dz = apply_w(sf_, sc_, y, true);
  }

  const StandardForm& sf_;
  const Scaling& sc_;
  RealMatrix gs_;
  Eigen::HouseholderQR<RealMatrix> qr_;
  bool ok_ = false;
};

}  // namespace detail

namespace detail {

inline ConeSolution solve_core(const ConeProgram& program, const SolverOptions& opts) {
  validate(program);
  using namespace detail;
  const StandardForm sf = to_standard_form(program);
  const int n = program.num_vars;
  const double degree = sf.orthant + sf.soc_count;

  const RealVector e = identity_element(sf);
  RealVector x = RealVector::Zero(n);
  RealVector s = e;
  RealVector z = e;
  double tau = 1.0;
  double kappa = 1.0;

  const double h_scale = std::max(1.0, sf.h.norm());
  const double c_scale = std::max(1.0, sf.c.norm());

  ConeSolution out;
  out.primal = RealVector::Zero(n);
  out.status = SolveStatus::max_iters;

  auto record = [&](SolveStatus status) {
    out.status = status;
    if (status == SolveStatus::infeasible || status == SolveStatus::unbounded) return;
    const RealVector xh = x / tau;
    const RealVector zh = z / tau;
    out.primal = xh;
    const double pcost = sf.c.dot(xh);
    const double dcost = -sf.h.dot(zh);
    out.objective_value = pcost + program.objective_offset;
    out.duality_gap = std::max(std::abs(pcost - dcost), std::max(0.0, s.dot(z) / (tau * tau)));
    out.max_violation = max_violation(program, xh);
    out.dual_residual = (sf.G.transpose() * zh + sf.c).norm() / c_scale;
  };
  // Best iterate so far by the largest of its normalized residuals.
  struct Snapshot {
    RealVector x, s, z;
    double tau = 0.0, kappa = 0.0;
    double merit = std::numeric_limits<double>::infinity();
  } best;

  // Stalled runs fall back to the best iterate and are promoted to optimal
  // when it is acceptable.
  auto finish_stalled = [&](SolveStatus fallback) {
    if (std::isfinite(best.merit)) {
      x = best.x;
      s = best.s;
      z = best.z;
      tau = best.tau;
      kappa = best.kappa;
    }
    record(fallback);
    const double pres = (sf.G * x + s - sf.h * tau).norm() / tau / h_scale;
    const double tol = opts.acceptable_tol;
    if (pres < tol && out.dual_residual < tol && out.max_violation < tol &&
        out.duality_gap < tol * (1.0 + std::abs(out.objective_value - program.objective_offset))) {
      out.status = SolveStatus::optimal;
    }
  };

  for (int iter = 0; iter <= opts.max_iterations; ++iter) {
    out.iterations = iter;
    const RealVector rx = sf.G.transpose() * z + sf.c * tau;
    const RealVector rz = sf.G * x + s - sf.h * tau;
    const double rtau = kappa + sf.c.dot(x) + sf.h.dot(z);
    const double mu = (s.dot(z) + tau * kappa) / (degree + 1.0);

    // Termination tests on the de-homogenized iterate.
    {
      const RealVector xh = x / tau;
      const double pcost = sf.c.dot(xh);
      const double dcost = -sf.h.dot(z) / tau;
      const double pres = rz.norm() / tau / h_scale;
      const double dres = rx.norm() / tau / c_scale;
      const double gap = std::max(std::abs(pcost - dcost), s.dot(z) / (tau * tau));
      if (opts.log) {
        *opts.log << "iter " << iter << " pcost " << pcost << " dcost " << dcost << " pres " << pres << " dres "
                  << dres << " gap " << gap << " tau " << tau << " kappa " << kappa << "\n";
      }
      const double merit = std::max({pres, dres, gap / (1.0 + std::abs(pcost))});
      if (merit < best.merit) best = {x, s, z, tau, kappa, merit};
      if (pres < opts.feasibility_tol && dres < opts.feasibility_tol &&
          gap < opts.gap_tol * (1.0 + std::abs(pcost))) {
        if (max_violation(program, xh) < opts.feasibility_tol) {
          record(SolveStatus::optimal);
          return out;
        }
      }
      const double hz = sf.h.dot(z);
      if (hz < 0.0 && (sf.G.transpose() * z).norm() / -hz < opts.feasibility_tol) {
        record(SolveStatus::infeasible);
        return out;
      }
      const double cx = sf.c.dot(x);
      if (cx < 0.0 && (sf.G * x + s).norm() / -cx < opts.feasibility_tol) {
        record(SolveStatus::unbounded);
        return out;
      }
    }
    if (iter == opts.max_iterations) break;

    const Scaling sc = nt_scaling(sf, s, z);
    const RealVector lambda = apply_w(sf, sc, z, false);
    const RealVector lambda_sq = jordan_product(sf, lambda, lambda);
    const KktSolver kkt(sf, sc);
    if (!kkt.ok()) {
      finish_stalled(SolveStatus::numerical_failure);
      return out;
    }

    RealVector x1, z1;
    kkt.solve(-sf.c, sf.h, x1, z1);
    const double denom_base = sf.c.dot(x1) + sf.h.dot(z1);

    // Direction for a given complementarity target.
    struct Direction {
      RealVector dx, dz, ds;
      double dtau = 0.0, dkappa = 0.0;
    };
    auto direction = [&](double sigma, const RealVector& nu, double rk) {
      Direction d;
      const RealVector xi = jordan_divide(sf, lambda, nu);
      const RealVector r1 = -(1.0 - sigma) * rx;
      const RealVector r2 = -(1.0 - sigma) * rz - apply_w(sf, sc, xi, false);
      RealVector x2, z2;
      kkt.solve(r1, r2, x2, z2);
      d.dtau = (-(1.0 - sigma) * rtau - rk / tau - sf.c.dot(x2) - sf.h.dot(z2)) /
               (denom_base - kappa / tau);
      d.dx = x2 + d.dtau * x1;
      d.dz = z2 + d.dtau * z1;
      d.ds = apply_w(sf, sc, xi - apply_w(sf, sc, d.dz, false), false);
      d.dkappa = (rk - kappa * d.dtau) / tau;
      return d;
    };
    auto step_length = [&](const Direction& d) {
      double a = 1.0;
      a = max_step(sf, s, d.ds, a);
      a = max_step(sf, z, d.dz, a);
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    // Predictor.
    const Direction aff = direction(0.0, -lambda_sq, -tau * kappa);
    const double alpha_aff = step_length(aff);
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

    // Corrector with the second-order term (W^{-1} ds_a) o (W dz_a).
    const RealVector ds_scaled = apply_w(sf, sc, aff.ds, true);
    const RealVector dz_scaled = apply_w(sf, sc, aff.dz, false);
    const RealVector nu = -lambda_sq + sigma * mu * e - jordan_product(sf, ds_scaled, dz_scaled);
    const double rk = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
    const Direction d = direction(sigma, nu, rk);

    if (!(d.dx.allFinite() && d.dz.allFinite() && d.ds.allFinite() && std::isfinite(d.dtau))) {
      finish_stalled(SolveStatus::numerical_failure);
      return out;
    }
    const double alpha = std::min(1.0, 0.99 * step_length(d));
    const RealVector s_next = s + alpha * d.ds;
    const RealVector z_next = z + alpha * d.dz;
    const double tau_next = tau + alpha * d.dtau;
    const double kappa_next = kappa + alpha * d.dkappa;

    // Rounding can push an iterate hugging the boundary out of the cone.
    bool interior = tau_next > 0.0 && kappa_next > 0.0 && (s_next.head(sf.orthant).array() > 0.0).all() &&
                    (z_next.head(sf.orthant).array() > 0.0).all();
    for (int k = 0; interior && k < sf.soc_count; ++k) {
      const int r = sf.orthant + 3 * k;
      interior = soc_interior(s_next.segment<3>(r)) && soc_interior(z_next.segment<3>(r));
    }
    if (!interior || alpha < 1e-12) {
      finish_stalled(SolveStatus::numerical_failure);
      return out;
    }
    x += alpha * d.dx;
    s = s_next;
    z = z_next;
    tau = tau_next;
    kappa = kappa_next;
  }
  finish_stalled(SolveStatus::max_iters);
  return out;
}

}  // namespace detail

/// Primal-dual interior-point method on the homogeneous self-dual embedding
/// with Nesterov-Todd scaling and Mehrotra predictor-corrector steps. The
/// embedding detects infeasibility and unboundedness through certificates.
inline ConeSolution solve(const ConeProgram& program, const SolverOptions& opts = {}) {
  ConeSolution sol = detail::solve_core(program, opts);
  if (opts.stats) opts.stats->add(sol, program.objective_offset);
  return sol;
}

// ---------------------------------------------------------------------------
// Scalar robust-design programs

/// Variable offsets of a scalar program; -1 marks an absent block. Blocks
/// appear in the order z, mu, n, m, s, p, each of length `streams` except mu.
/// The s block exists only alongside mu.
struct Layout {
  int streams = 0;
  int z = -1;
  int mu = -1;
  int n = -1;
  int m = -1;
  int s = -1;
  int p = -1;
  int num_vars = 0;
};

inline Layout make_layout(int streams, bool with_mu, bool with_n, bool with_p) {
  Layout l;
  l.streams = streams;
  int next = 0;
  l.z = next;
  next += streams;
  if (with_mu) l.mu = next++;
  if (with_n) {
    l.n = next;
    next += streams;
  }
  l.m = next;
  next += streams;
  if (with_mu) {
    l.s = next;
    next += streams;
  }
  if (with_p) {
    l.p = next;
    next += streams;
  }
  l.num_vars = next;
  return l;
}

/// A scalar program with its variable layout and the streams it covers.
struct ScalarProgram {
  ConeProgram program;
  Layout layout;
  std::vector<int> streams;  // indices into the caller's stream vector
};

namespace detail {

inline std::vector<std::string> layout_names(const Layout& l) {
  std::vector<std::string> names(l.num_vars);
  auto block = [&](int off, const char* tag) {
    if (off < 0) return;
    for (int i = 0; i < l.streams; ++i) names[off + i] = std::string(tag) + "[" + std::to_string(i) + "]";
  };
  block(l.z, "z");
  if (l.mu >= 0) names[l.mu] = "mu";
  block(l.n, "n");
  block(l.m, "m");
  block(l.s, "s");
  block(l.p, "p");
  return names;
}

inline void check_gamma(const RealVector& gamma) {
  require(gamma.size() >= 1, "scalar program: at least one stream required");
  require(gamma.allFinite() && (gamma.array() > 0.0).all(), "scalar program: gamma must be positive");
  for (Eigen::Index i = 1; i < gamma.size(); ++i) {
    require(gamma(i) <= gamma(i - 1), "scalar program: gamma must be nonincreasing");
  }
  require(gamma(gamma.size() - 1) > kRankTolerance * gamma(0),
          "scalar program: smallest gamma is below the rank threshold");
}

// Constraints shared by every scalar program on streams 0..L-1 of `layout`:
// the error cones, the mu cones, the bounds on s and the floor on mu. The
// stream variable in slot m enters with gain a_i in the error term and b_i
// in the perturbation term.
inline void add_mse_blocks(ConeProgram& prog, const Layout& l, const std::vector<double>& a,
                           const std::vector<double>& b) {
  for (int i = 0; i < l.streams; ++i) {
    const int zi = l.z + i;
    const int mi = l.m + i;
    if (l.s < 0) {
      // z_i >= (a_i m_i - 1)^2
      prog.cones.push_back({AffineExpr::variable(zi), AffineExpr::value(1.0), AffineExpr{{{mi, a[i]}}, -1.0}});
      continue;
    }
    const int si = l.s + i;
    // [z_i, a_i m_i - 1; a_i m_i - 1, 1 - s_i] >= 0
    prog.cones.push_back({AffineExpr::variable(zi), AffineExpr{{{si, -1.0}}, 1.0},
                          AffineExpr{{{mi, a[i]}}, -1.0}});
    // [mu, b_i m_i; b_i m_i, s_i] >= 0
    prog.cones.push_back({AffineExpr::variable(l.mu), AffineExpr::variable(si), AffineExpr::variable(mi, b[i])});
    prog.linear.push_back({AffineExpr{{{si, -1.0}}, 1.0 - kStrictMargin}});
    prog.linear.push_back({AffineExpr::variable(si)});
  }
  if (l.mu >= 0) prog.linear.push_back({AffineExpr{{{l.mu, 1.0}}, -kMuFloor}});
}

inline void rename_block(std::vector<std::string>& names, int off, int count, const char* tag) {
  for (int i = 0; i < count; ++i) names[off + i] = std::string(tag) + "[" + std::to_string(i) + "]";
}

}  // namespace detail

/// Layout of build_robust_program's variables for L streams.
inline Layout robust_layout(int streams, double epsilon) { return make_layout(streams, epsilon > 0.0, true, true); }

/// Scalar robust program over (z, mu, n, m, s, p):
///   minimize   sum z_i + mu + noise_var * sum n_i
///   subject to z_i (1 - s_i) >= (gamma_i m_i - 1)^2
///              mu s_i >= eps^2 m_i^2          (dropped with mu and s when eps = 0)
///              n_i p_i >= m_i^2,  sum p_i <= P
///              0 <= s_i <= 1 - kStrictMargin,  mu >= kMuFloor
/// The optimal value is the minimal worst-case MSE; f_i = m_i / sqrt(n_i) and
/// g_i = sqrt(n_i) recover the transceiver gains.
inline ConeProgram build_robust_program(const RealVector& gamma, double epsilon, double noise_var, double power) {
  detail::check_gamma(gamma);
  require(std::isfinite(epsilon) && epsilon >= 0.0, "build_robust_program: epsilon must be >= 0");
  require(std::isfinite(noise_var) && noise_var > 0.0, "build_robust_program: noise_var must be > 0");
  require(std::isfinite(power) && power > 0.0, "build_robust_program: power must be > 0");

  const int L = static_cast<int>(gamma.size());
  const Layout l = robust_layout(L, epsilon);
  ConeProgram prog;
  prog.num_vars = l.num_vars;
  prog.var_names = detail::layout_names(l);
  prog.objective = RealVector::Zero(l.num_vars);
  prog.objective.segment(l.z, L).setOnes();
  if (l.mu >= 0) prog.objective(l.mu) = 1.0;
  prog.objective.segment(l.n, L).setConstant(noise_var);

  detail::add_mse_blocks(prog, l, std::vector<double>(gamma.data(), gamma.data() + L),
                         std::vector<double>(L, epsilon));
  AffineExpr budget = AffineExpr::value(power);
  for (int i = 0; i < L; ++i) {
    prog.cones.push_back({AffineExpr::variable(l.n + i), AffineExpr::variable(l.p + i), AffineExpr::variable(l.m + i)});
    budget.add(l.p + i, -1.0);
  }
  prog.linear.push_back({budget});
  return prog;
}

/// Restriction with the equalizer gains g fixed. Slot m holds the precoder
/// gains f directly:
///   minimize   sum z_i + mu + noise_var ||g||^2
///   subject to z_i (1 - s_i) >= (gamma_i g_i f_i - 1)^2
///              mu s_i >= eps^2 g_i^2 f_i^2
///              p_i >= f_i^2,  sum p_i <= P
/// Streams with g_i = 0 carry nothing and add a constant 1 to the objective.
inline ScalarProgram build_fixed_g_program(const RealVector& gamma, const RealVector& g, double epsilon,
                                           double noise_var, double power) {
  detail::check_gamma(gamma);
  require(g.size() == gamma.size() && g.allFinite() && (g.array() >= 0.0).all(), "build_fixed_g_program: bad g");
  require(std::isfinite(epsilon) && epsilon >= 0.0 && noise_var > 0.0 && power > 0.0,
          "build_fixed_g_program: bad parameters");
  ScalarProgram sp;
  std::vector<double> a, b;
  for (int i = 0; i < gamma.size(); ++i) {
    if (g(i) > 0.0) {
      sp.streams.push_back(i);
      a.push_back(gamma(i) * g(i));
      b.push_back(epsilon * g(i));
    }
  }
  const int L = static_cast<int>(sp.streams.size());
  const int dead = static_cast<int>(gamma.size()) - L;
  require(L > 0, "build_fixed_g_program: every equalizer gain is zero");

  sp.layout = make_layout(L, epsilon > 0.0, false, true);
  auto& prog = sp.program;
  const Layout& l = sp.layout;
  prog.num_vars = l.num_vars;
  prog.var_names = detail::layout_names(l);
  detail::rename_block(prog.var_names, l.m, L, "f");
  prog.objective = RealVector::Zero(l.num_vars);
  prog.objective.segment(l.z, L).setOnes();
  if (l.mu >= 0) prog.objective(l.mu) = 1.0;
  prog.objective_offset = noise_var * g.squaredNorm() + dead;

  detail::add_mse_blocks(prog, l, a, b);
  AffineExpr budget = AffineExpr::value(power);
  for (int i = 0; i < L; ++i) {
    prog.cones.push_back({AffineExpr::variable(l.p + i), AffineExpr::value(1.0), AffineExpr::variable(l.m + i)});
    budget.add(l.p + i, -1.0);
  }
  prog.linear.push_back({budget});
  return sp;
}

/// Restriction with the precoder gains f fixed. Slot m holds the equalizer
/// gains g directly:
///   minimize   sum z_i + mu + noise_var sum n_i
///   subject to z_i (1 - s_i) >= (gamma_i f_i g_i - 1)^2
///              mu s_i >= eps^2 f_i^2 g_i^2
///              n_i >= g_i^2
/// The power budget holds by construction. Streams with f_i = 0 add a
/// constant 1 to the objective.
inline ScalarProgram build_fixed_f_program(const RealVector& gamma, const RealVector& f, double epsilon,
                                           double noise_var) {
  detail::check_gamma(gamma);
  require(f.size() == gamma.size() && f.allFinite() && (f.array() >= 0.0).all(), "build_fixed_f_program: bad f");
  require(std::isfinite(epsilon) && epsilon >= 0.0 && noise_var > 0.0, "build_fixed_f_program: bad parameters");
  ScalarProgram sp;
  std::vector<double> a, b;
  for (int i = 0; i < gamma.size(); ++i) {
    if (f(i) > 0.0) {
      sp.streams.push_back(i);
      a.push_back(gamma(i) * f(i));
      b.push_back(epsilon * f(i));
    }
  }
  const int L = static_cast<int>(sp.streams.size());
  const int dead = static_cast<int>(gamma.size()) - L;
  require(L > 0, "build_fixed_f_program: every precoder gain is zero");

  sp.layout = make_layout(L, epsilon > 0.0, true, false);
  auto& prog = sp.program;
  const Layout& l = sp.layout;
  prog.num_vars = l.num_vars;
  prog.var_names = detail::layout_names(l);
  detail::rename_block(prog.var_names, l.m, L, "g");
  prog.objective = RealVector::Zero(l.num_vars);
  prog.objective.segment(l.z, L).setOnes();
  if (l.mu >= 0) prog.objective(l.mu) = 1.0;
  prog.objective.segment(l.n, L).setConstant(noise_var);
  prog.objective_offset = dead;

  detail::add_mse_blocks(prog, l, a, b);
  for (int i = 0; i < L; ++i) {
    prog.cones.push_back({AffineExpr::variable(l.n + i), AffineExpr::value(1.0), AffineExpr::variable(l.m + i)});
  }
  return sp;
}

// ---------------------------------------------------------------------------
// Text dump

namespace detail {

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string var_name(const ConeProgram& p, int i) {
  if (i < static_cast<int>(p.var_names.size()) && !p.var_names[i].empty()) return p.var_names[i];
  return "x[" + std::to_string(i) + "]";
}

inline std::string format_expr(const AffineExpr& e, const ConeProgram& p) {
  std::string out;
  for (const auto& [i, a] : e.terms) {
    if (!out.empty()) out += " ";
    out += (a < 0 ? "- " : "+ ") + format_number(std::abs(a)) + "*" + var_name(p, i);
  }
  if (e.constant != 0.0 || out.empty()) {
    if (!out.empty()) out += " ";
    out += (e.constant < 0 ? "- " : "+ ") + format_number(std::abs(e.constant));
  }
  return out;
}

}  // namespace detail

/// Deterministic plain-text listing of a program, one item per line.
inline std::string dump(const ConeProgram& p) {
  validate(p);
  std::ostringstream os;
  os << "vars " << p.num_vars << "\n";
  for (int i = 0; i < p.num_vars; ++i) os << "var " << i << " " << detail::var_name(p, i) << "\n";
  AffineExpr obj;
  for (int i = 0; i < p.num_vars; ++i) {
    if (p.objective(i) != 0.0) obj.add(i, p.objective(i));
  }
  obj.constant = p.objective_offset;
  os << "minimize " << detail::format_expr(obj, p) << "\n";
  for (const auto& k : p.cones) {
    os << "rcone (" << detail::format_expr(k.u, p) << ") * (" << detail::format_expr(k.v, p) << ") >= ("
       << detail::format_expr(k.w, p) << ")^2\n";
  }
  for (const auto& l : p.linear) os << "linear " << detail::format_expr(l.expr, p) << " >= 0\n";
  return os.str();
}

}  // namespace robust_mimo::conic
