#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dsring/measures.hpp"

namespace dsring::randmat {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Substream roles. Each (seed, trial, role) triple gets its own generator.
enum class Role : std::uint64_t { U = 1, V = 2, W = 3, Q = 4, perturbation = 5, sample = 6 };

/// mt19937_64 seeded from a SplitMix64 mix of (seed, trial, role).
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t trial, Role role);

/// Haar unitary by QR of a standard complex Gaussian matrix with the phases
/// of diag(R) divided out.
MatrixXcd haar_unitary(int n, std::mt19937_64& rng);

/// N x N matrix of i.i.d. standard complex Gaussians (E|z|^2 = 1).
MatrixXcd complex_gaussian(int n, std::mt19937_64& rng);

struct SigmaSpec {
  enum class Kind { explicit_list, two_level, law_quantiles };
  Kind kind = Kind::explicit_list;
  std::vector<double> values;       // explicit_list: tiled to N by index scaling
  double v1 = 1.0;                  // two_level
  double v2 = 0.0;
  std::optional<double> v2_power;   // two_level: v2 = N^power when set
  double fraction = 0.5;            // share of entries equal to v1
  AtomicMeasure law;                // law_quantiles

  VectorXd diagonal(int n) const;
  /// Law the diagonal converges to as N grows (v2 = N^power < 0 tends to 0).
  AtomicMeasure limit_law() const;
};

struct ASpec {
  enum class Kind { zero, hermitian_diag, unitary_perm, jordan_block, file };
  Kind kind = Kind::zero;
  std::vector<double> values;  // hermitian_diag: tiled to N by index scaling
  std::string path;            // file
  MatrixXcd matrix;            // file contents once loaded

  MatrixXcd build(int n) const;
};

/// Square matrix from a JSON file {"re": [[...]], "im": [[...]]} ("im" optional).
MatrixXcd load_matrix(const std::string& path);

const char* to_string(SigmaSpec::Kind k);
const char* to_string(ASpec::Kind k);

struct EnsembleSpec {
  int N = 100;
  SigmaSpec sigma;
  ASpec a;
  double norm_bound = 10.0;  // M
  std::uint64_t seed = 1;
  int trials = 1;
  std::optional<double> alpha;  // declared invertibility: min Sigma_ii >= N^-alpha

  VectorXd sigma_diagonal() const { return sigma.diagonal(N); }
  MatrixXcd a_matrix() const { return a.build(N); }
  /// Throws DomainError on a violated invariant (naming it).
  void validate() const;
  /// Same spec with another N (file-backed A cannot be resized).
  EnsembleSpec with_n(int n) const;
};

void to_json(nlohmann::json& j, const SigmaSpec& s);
void from_json(const nlohmann::json& j, SigmaSpec& s);
void to_json(nlohmann::json& j, const ASpec& s);
void from_json(const nlohmann::json& j, ASpec& s);
void to_json(nlohmann::json& j, const EnsembleSpec& s);
void from_json(const nlohmann::json& j, EnsembleSpec& s);

struct Assembly {
  MatrixXcd Y;
  MatrixXcd U;
  MatrixXcd V;
  VectorXd sigma;
  MatrixXcd A;
};

/// Y = U Sigma V^* + A for the given trial; U and V come from the U and V
/// substreams of (seed, trial).
Assembly assemble(const EnsembleSpec& spec, int trial);
/// Same with a precomputed Sigma diagonal and A (avoids rebuilding them per trial).
Assembly assemble(const EnsembleSpec& spec, int trial, const VectorXd& sigma, const MatrixXcd& a);

/// Singular values of Y - lambda in decreasing order.
VectorXd hermitize_svals(const MatrixXcd& y, cplx lambda);
/// Same values from the 2N x 2N Hermitization [[0, Y - lambda], [(Y - lambda)^*, 0]].
VectorXd hermitization_route_svals(const MatrixXcd& y, cplx lambda);

/// G^lambda(i eta) = (1/2N) sum [1/(i eta - s) + 1/(i eta + s)]; real part exactly 0.
cplx empirical_cauchy(const VectorXd& svals, double eta);

struct SpectrumSample {
  int trial = 0;
  VectorXcd eigenvalues;
  std::vector<cplx> probes;
  std::vector<VectorXd> svals;  // per probe, decreasing
  std::uint64_t seed = 0;
};

SpectrumSample sample_spectrum(const EnsembleSpec& spec, int trial, const std::vector<cplx>& probes = {});

/// (1/N) sum log s_i(Y - lambda) and (1/N) log|det(Y - lambda)|.
std::pair<double, double> girko_log_dets(const MatrixXcd& y, cplx lambda);

struct SminTail {
  cplx lambda;
  std::vector<double> thresholds;
  std::vector<double> exceedance;  // P(s_min < t_k)
  std::vector<double> smin;        // per trial
  int trials = 0;
};

/// Requires the declared alpha to hold for Sigma or for A - lambda.
SminTail smin_tail(const EnsembleSpec& spec, cplx lambda, const std::vector<double>& thresholds);
/// s_min(Y_t - lambda_j) for every trial t (rows) and probe j (columns).
Eigen::MatrixXd smin_grid(const EnsembleSpec& spec, const std::vector<cplx>& lambdas, int threads = 1);
std::vector<double> geometric_thresholds(double lo, double hi, int count);

/// s_min(A1 A2) >= s_min(A1) s_min(A2) with 1e-12 slack.
bool product_smin_property(const MatrixXcd& a1, const MatrixXcd& a2);

struct ApproxSubordination {
  cplx omega_A;
  cplx omega_B;
  cplx cauchy_H;                 // trial mean of G_H(i eta)
  double omega_A_std_error = 0;  // standard error of the per-trial omega_A
  double omega_B_std_error = 0;
  std::vector<cplx> omega_A_trials;
  std::vector<cplx> omega_B_trials;
};

/// Monte Carlo omega_A, omega_B at z = i eta for H the Hermitization of
/// Y - lambda, A-part Xi = A - lambda and B-part U Sigma V^*:
/// omega_A = z - E tr[(z - H)^-1 B] / (2N E G_H), omega_B likewise with A.
ApproxSubordination approx_subordination(const EnsembleSpec& spec, cplx lambda, double eta, int trials,
                                         int threads = 1);

/// Upper Jordan block (ones on the superdiagonal).
MatrixXcd jordan_matrix(int n);
/// Cyclic permutation: the Jordan block plus E_{N1}.
MatrixXcd cyclic_permutation(int n);
/// Singular values of J - lambda (decreasing) from the real bidiagonal with
/// diagonal |lambda| and superdiagonal 1.
VectorXd jordan_singular_values(int n, cplx lambda);
/// All but one singular value >= 1 - |lambda| when |lambda| < 1; all >= |lambda| - 1 when |lambda| > 1.
bool jordan_sv_check(int n, cplx lambda);

enum class Interlacing { holds, fails, indeterminate };
const char* to_string(Interlacing r);

struct InterlacingResult {
  Interlacing result;
  int rank = 0;
};

/// s_n(lambda - L) >= s_{n+k}(lambda - U_ref) - 1e-10 with k the numerical
/// rank of L - U_ref (threshold 1e-10 ||L - U_ref||, ambiguous band [1e-12, 1e-8]).
InterlacingResult interlacing_check(const MatrixXcd& l, const MatrixXcd& u_ref, cplx lambda);

}  // namespace dsring::randmat
