#pragma once

#include <complex>

#include <Eigen/Dense>

namespace dsring::linalg {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Singular values in decreasing order (LAPACK zgesdd, no vectors).
VectorXd singular_values(const MatrixXcd& a);

/// Eigenvalues of a general complex matrix (LAPACK zgeev with balancing, no vectors).
VectorXcd eigenvalues(const MatrixXcd& a);

/// Eigenvalues of a Hermitian matrix in increasing order (LAPACK zheevd, upper triangle read).
VectorXd hermitian_eigenvalues(const MatrixXcd& a);

/// Householder QR of a square matrix. Returns Q and fills `r_diagonal` with diag(R).
MatrixXcd qr_q_factor(const MatrixXcd& a, VectorXcd& r_diagonal);

/// log|det a| from an LU factorization (LAPACK zgetrf). -inf if singular.
double log_abs_det(const MatrixXcd& a);

/// Singular values (decreasing) of the real upper bidiagonal matrix with the
/// given diagonal and superdiagonal (LAPACK dbdsqr).
VectorXd bidiagonal_singular_values(const VectorXd& diagonal, const VectorXd& superdiagonal);

/// (eta^2 + X X^*)^{-1} rhs via a Cholesky factorization (LAPACK zpotrf/zpotrs).
MatrixXcd regularized_gram_solve(const MatrixXcd& x, double eta, const MatrixXcd& rhs);

/// tr[(eta^2 + X X^*)^{-1}] as the squared Frobenius norm of the inverse
/// Cholesky factor (LAPACK zpotrf/ztrtri).
double regularized_gram_inverse_trace(const MatrixXcd& x, double eta);

}  // namespace dsring::linalg
