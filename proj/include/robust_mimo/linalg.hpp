#pragma once

// Dense complex linear algebra used throughout the library. Matrices are
// small (a few hundred entries at most), so everything is dense and backed
// by Eigen's Jacobi SVD and self-adjoint eigensolver.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "robust_mimo/errors.hpp"

namespace robust_mimo {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

/// Singular values below this fraction of the largest one count as zero.
inline constexpr double kRankTolerance = 1e-12;

struct SvdFactors {
  ComplexMatrix U;   // rows x rows, unitary
  RealVector sigma;  // min(rows, cols), nonincreasing
  ComplexMatrix V;   // cols x cols, unitary
};

struct HermitianEigen {
  RealVector values;      // nonincreasing
  ComplexMatrix vectors;  // columns are orthonormal eigenvectors
};

inline bool all_finite(const ComplexMatrix& A) { return A.allFinite(); }

inline double frobenius_norm(const ComplexMatrix& A) {
  require(A.allFinite(), "frobenius_norm: non-finite entry");
  return A.norm();
}

namespace detail {

// Index of the first entry whose magnitude is distinguishable from zero.
inline Eigen::Index first_nonzero(const ComplexVector& v) {
  const double cutoff = 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > cutoff) return i;
  }
  return 0;
}

inline Complex unit_phase_to_real(Complex z) {
  const double r = std::abs(z);
  return r > 0.0 ? std::conj(z) / r : Complex(1.0, 0.0);
}

}  // namespace detail

/// Full SVD A = U diag(sigma) V^H. Each right singular vector is rotated so
/// its first nonzero entry is real and nonnegative, and the paired left
/// vector follows the same rotation; the result is therefore deterministic.
inline SvdFactors svd(const ComplexMatrix& A) {
  require(A.rows() > 0 && A.cols() > 0, "svd: empty matrix");
  require(A.allFinite(), "svd: non-finite entry");

  Eigen::JacobiSVD<ComplexMatrix> solver(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("svd: Jacobi iteration did not succeed");
  }

  SvdFactors out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  const Eigen::Index k = out.sigma.size();

  for (Eigen::Index j = 0; j < out.V.cols(); ++j) {
    const Complex v0 = out.V(detail::first_nonzero(out.V.col(j)), j);
    const Complex phase = detail::unit_phase_to_real(v0);
    out.V.col(j) *= phase;
    if (j < k) out.U.col(j) *= phase;
  }
  for (Eigen::Index j = k; j < out.U.cols(); ++j) {
    const Complex u0 = out.U(detail::first_nonzero(out.U.col(j)), j);
    out.U.col(j) *= detail::unit_phase_to_real(u0);
  }

  // Jacobi SVD has no failure mode on finite input, but a result that does
  // not reconstruct is never handed back.
  ComplexMatrix S = ComplexMatrix::Zero(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < k; ++i) S(i, i) = out.sigma(i);
  const double scale = std::max(A.norm(), 1e-300);
  const double recon = (out.U * S * out.V.adjoint() - A).norm() / scale;
  if (!(recon < 1e-10)) {
    throw NumericalError("svd: reconstruction check failed (" + std::to_string(recon) + ")");
  }
  return out;
}

/// Number of singular values above kRankTolerance * sigma_max.
inline Eigen::Index numerical_rank(const RealVector& sigma) {
  if (sigma.size() == 0 || sigma(0) <= 0.0) return 0;
  const double cutoff = kRankTolerance * sigma(0);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff) ++r;
  }
  return r;
}

inline double hermitian_defect(const ComplexMatrix& A) {
  return (A - A.adjoint()).norm() / std::max(1.0, A.norm());
}

/// A = Q diag(values) Q^H with values sorted nonincreasing.
inline HermitianEigen hermitian_eigen(const ComplexMatrix& A) {
  require(A.rows() == A.cols() && A.rows() > 0, "hermitian_eigen: matrix must be square");
  require(A.allFinite(), "hermitian_eigen: non-finite entry");
  require(hermitian_defect(A) <= 1e-10, "hermitian_eigen: matrix is not Hermitian");

  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(A);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("hermitian_eigen: QR iteration did not converge");
  }
  // Eigen sorts ascending.
  const Eigen::Index n = A.rows();
  HermitianEigen out{RealVector(n), ComplexMatrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return out;
}

/// Column-stacking vectorization vec(X).
inline ComplexVector vec(const ComplexMatrix& X) {
  return Eigen::Map<const ComplexVector>(X.data(), X.size());
}

inline ComplexMatrix unvec(const ComplexVector& v, Eigen::Index rows, Eigen::Index cols) {
  require(v.size() == rows * cols, "unvec: size mismatch");
  return Eigen::Map<const ComplexMatrix>(v.data(), rows, cols);
}

inline ComplexMatrix kronecker(const ComplexMatrix& A, const ComplexMatrix& B) {
  ComplexMatrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return K;
}

/// Rectangular matrix with the given values on its main diagonal.
inline ComplexMatrix rectangular_diagonal(const RealVector& d, Eigen::Index rows,
                                          Eigen::Index cols) {
  ComplexMatrix D = ComplexMatrix::Zero(rows, cols);
  const Eigen::Index k = std::min<Eigen::Index>({d.size(), rows, cols});
  for (Eigen::Index i = 0; i < k; ++i) D(i, i) = d(i);
  return D;
}

}  // namespace robust_mimo
