#pragma once

#include <complex>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace dsring {

using cplx = std::complex<double>;

/// Raised when an argument lies outside the domain of an operation
/// (non-positive imaginary part, negative atom for a half-line law, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when an iterative or quadrature routine fails to reach its
/// tolerance. Carries the best residual that was achieved.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

struct Atom {
  double location;
  double weight;
};

/// Finite atomic probability measure on the real line.
///
/// Atoms are kept sorted by location and coincident atoms (closer than
/// 1e-12 * support_bound) are merged. Weights are positive and sum to one.
class AtomicMeasure {
 public:
  AtomicMeasure() = default;

  /// Validates and normalizes the given atoms. Throws DomainError if a weight
  /// is not positive, a location is not finite, or the total mass differs from
  /// one by more than 1e-12 (use `normalized` to rescale first).
  static AtomicMeasure from_atoms(std::vector<Atom> atoms);
  /// Rescales the weights to unit mass before validating.
  static AtomicMeasure normalized(std::vector<Atom> atoms);
  static AtomicMeasure dirac(double location);
  /// Equal weights 1/n on the given samples (duplicates merged).
  static AtomicMeasure empirical(std::span<const double> samples);

  std::span<const Atom> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  double support_bound() const { return support_bound_; }
  bool is_point_mass() const { return atoms_.size() == 1; }
  bool nonnegative() const { return atoms_.empty() || atoms_.front().location >= 0.0; }

  /// mu({t}) for an atom location t (0 if t is not an atom).
  double mass_at(double t) const;
  /// F(x) = mu((-inf, x]).
  double cdf(double x) const;
  /// F(x-) = mu((-inf, x)).
  double cdf_left(double x) const;
  /// Integral of |t|^p.
  double abs_moment(double p) const;
  /// Integral of |t|^-2, +inf if there is an atom at 0.
  double inverse_square_moment() const;

 private:
  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;
  double support_bound_ = 0.0;
};

struct HalfPlanePoint {
  double re;
  double im;

  HalfPlanePoint(double re_, double im_);
  static HalfPlanePoint on_axis(double eta) { return {0.0, eta}; }
  cplx value() const { return {re, im}; }
};

/// Even measure built from a law on [0, inf):  B -> (mu(B) + mu(-B)) / 2.
class SymmetricMeasure {
 public:
  SymmetricMeasure() = default;
  explicit SymmetricMeasure(AtomicMeasure half);

  const AtomicMeasure& half() const { return half_; }
  /// The symmetric law written out on the whole line.
  AtomicMeasure full() const;
  double mass_at_zero() const { return half_.mass_at(0.0); }
  bool is_point_mass() const { return half_.is_point_mass() && half_.atoms()[0].location == 0.0; }
  double support_bound() const { return half_.support_bound(); }
  double cdf(double x) const;
  double cdf_left(double x) const;
  double second_moment() const { return half_.abs_moment(2.0); }

  /// sum_k w_k / (y^2 + t_k^2) over the half atoms.  G(iy) = -i y * axis_kernel(y).
  double axis_kernel(double y) const;
  /// d/dy axis_kernel(y).
  double axis_kernel_derivative(double y) const;

 private:
  AtomicMeasure half_;
};

cplx cauchy_transform(const AtomicMeasure& mu, HalfPlanePoint z);
cplx cauchy_transform(const SymmetricMeasure& mu, HalfPlanePoint z);
/// G'(z) for the symmetric law (used by Newton steps in the subordination solver).
cplx cauchy_derivative(const SymmetricMeasure& mu, cplx z);

cplx f_transform(const AtomicMeasure& mu, HalfPlanePoint z);
cplx f_transform(const SymmetricMeasure& mu, HalfPlanePoint z);

/// Throws DomainError when mu has an atom below zero.
SymmetricMeasure symmetrize(const AtomicMeasure& mu);

/// Levy distance between the distribution functions, computed on the merged
/// jump grid with a bisection on epsilon to 1e-10.
double levy_distance(const AtomicMeasure& mu, const AtomicMeasure& nu);
double levy_distance(const SymmetricMeasure& mu, const SymmetricMeasure& nu);

/// Empirical law of the singular values of a square matrix, weight 1/N each.
AtomicMeasure singular_value_law(const Eigen::MatrixXcd& matrix);

struct LogMomentSettings {
  double eta_floor = 1e-8;
  double abs_tolerance = 1e-9;
};

/// Axis excess e(eta) = Im F(i eta) - eta >= 0 of a symmetric law, eta > 0.
/// Im G(i eta) = -1 / (eta + e(eta)); working with e avoids the cancellation
/// in G(i eta) + 1/eta at large eta.
using AxisExcessFn = std::function<double(double eta)>;

/// q / (eta k) with k, q the axis sums of the half atoms.
double axis_excess(const SymmetricMeasure& mu, double eta);

/// Integral of log|u| against a symmetric atomic law: the log|u - i| part by
/// atom summation plus Im of the integral of G(i eta) over (0, 1].
/// Returns -inf when the law has an atom at zero.
double log_moment(const SymmetricMeasure& mu, const LogMomentSettings& settings = {});

/// Same quantity when only the transform is available (no atoms): the
/// log|u - i| part is written as the integral over [1, inf) of
/// Im G(i eta) + 1/eta. Returns -inf when the small-eta behaviour of the
/// transform shows an atom at zero.
double log_moment_from_excess(const AxisExcessFn& excess, const LogMomentSettings& settings = {});

/// Im of the integral of G(i eta) over (0, 1] with geometric subdivision;
/// shared by both log-moment routes.
double axis_integral_unit(const AxisExcessFn& excess, const LogMomentSettings& settings);

void to_json(nlohmann::json& j, const AtomicMeasure& mu);
void from_json(const nlohmann::json& j, AtomicMeasure& mu);

}  // namespace dsring
