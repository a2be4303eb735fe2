#include "dsring/linalg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <lapacke.h>

namespace dsring::linalg {

namespace {

lapack_complex_double* as_lapack(std::complex<double>* p) {
  return reinterpret_cast<lapack_complex_double*>(p);
}

void check_info(lapack_int info, const char* routine) {
  if (info != 0) {
    throw std::runtime_error(std::string(routine) + " failed with info " + std::to_string(info));
  }
}

void check_square(const MatrixXcd& a, const char* what) {
  if (a.rows() != a.cols()) throw std::invalid_argument(std::string(what) + ": matrix not square");
  if (!a.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

}  // namespace

VectorXd singular_values(const MatrixXcd& a) {
  check_square(a, "singular_values");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  VectorXd s(n);
  if (n == 0) return s;
  MatrixXcd work = a;
  check_info(LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', n, n, as_lapack(work.data()), n, s.data(),
                            nullptr, 1, nullptr, 1),
             "zgesdd");
  return s;
}

VectorXcd eigenvalues(const MatrixXcd& a) {
  check_square(a, "eigenvalues");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  VectorXcd w(n);
  if (n == 0) return w;
  MatrixXcd work = a;
  check_info(LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, as_lapack(work.data()), n,
                           as_lapack(w.data()), nullptr, 1, nullptr, 1),
             "zgeev");
  return w;
}

VectorXd hermitian_eigenvalues(const MatrixXcd& a) {
  check_square(a, "hermitian_eigenvalues");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  VectorXd w(n);
  if (n == 0) return w;
  MatrixXcd work = a;
  check_info(LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'U', n, as_lapack(work.data()), n, w.data()),
             "zheevd");
  return w;
}

MatrixXcd qr_q_factor(const MatrixXcd& a, VectorXcd& r_diagonal) {
  check_square(a, "qr_q_factor");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  MatrixXcd work = a;
  VectorXcd tau(n);
  r_diagonal.resize(n);
  if (n == 0) return work;
  check_info(LAPACKE_zgeqrf(LAPACK_COL_MAJOR, n, n, as_lapack(work.data()), n, as_lapack(tau.data())),
             "zgeqrf");
  r_diagonal = work.diagonal();
  check_info(LAPACKE_zungqr(LAPACK_COL_MAJOR, n, n, n, as_lapack(work.data()), n, as_lapack(tau.data())),
             "zungqr");
  return work;
}

double log_abs_det(const MatrixXcd& a) {
  check_square(a, "log_abs_det");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  MatrixXcd work = a;
  std::vector<lapack_int> ipiv(static_cast<std::size_t>(n));
  const lapack_int info = LAPACKE_zgetrf(LAPACK_COL_MAJOR, n, n, as_lapack(work.data()), n, ipiv.data());
  if (info < 0) check_info(info, "zgetrf");
  if (info > 0) return -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (lapack_int i = 0; i < n; ++i) acc += std::log(std::abs(work(i, i)));
  return acc;
}

VectorXd bidiagonal_singular_values(const VectorXd& diagonal, const VectorXd& superdiagonal) {
  const lapack_int n = static_cast<lapack_int>(diagonal.size());
  if (n > 0 && superdiagonal.size() != n - 1) {
    throw std::invalid_argument("bidiagonal_singular_values: superdiagonal must have n-1 entries");
  }
  VectorXd d = diagonal;
  VectorXd e(std::max<lapack_int>(n, 1));
  e.setZero();
  if (n > 1) e.head(n - 1) = superdiagonal;
  if (n == 0) return d;
  check_info(LAPACKE_dbdsqr(LAPACK_COL_MAJOR, 'U', n, 0, 0, 0, d.data(), e.data(), nullptr, 1,
                            nullptr, 1, nullptr, 1),
             "dbdsqr");
  return d;
}

namespace {

MatrixXcd cholesky_of_gram(const MatrixXcd& x, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("regularized gram: eta must be positive");
  const lapack_int n = static_cast<lapack_int>(x.rows());
  MatrixXcd gram = MatrixXcd::Zero(n, n);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
  gram.diagonal().array() += eta * eta;
  check_info(LAPACKE_zpotrf(LAPACK_COL_MAJOR, 'L', n, as_lapack(gram.data()), n), "zpotrf");
  return gram;
}

}  // namespace

MatrixXcd regularized_gram_solve(const MatrixXcd& x, double eta, const MatrixXcd& rhs) {
  MatrixXcd factor = cholesky_of_gram(x, eta);
  const lapack_int n = static_cast<lapack_int>(x.rows());
  MatrixXcd out = rhs;
  check_info(LAPACKE_zpotrs(LAPACK_COL_MAJOR, 'L', n, static_cast<lapack_int>(out.cols()),
                            as_lapack(factor.data()), n, as_lapack(out.data()), n),
             "zpotrs");
  return out;
}

double regularized_gram_inverse_trace(const MatrixXcd& x, double eta) {
  MatrixXcd factor = cholesky_of_gram(x, eta);
  const lapack_int n = static_cast<lapack_int>(x.rows());
  check_info(LAPACKE_ztrtri(LAPACK_COL_MAJOR, 'L', 'N', n, as_lapack(factor.data()), n), "ztrtri");
  return factor.triangularView<Eigen::Lower>().toDenseMatrix().squaredNorm();
}

}  // namespace dsring::linalg
