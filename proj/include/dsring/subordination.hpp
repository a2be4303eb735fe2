#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dsring/measures.hpp"

namespace dsring {

/// Solver knobs for the subordination system. Serializable as a flat JSON record.
struct SolverSettings {
  double tolerance = 1e-12;  // residual target, relative to 1 + |z| + |F(z)|
  int max_iter = 100000;
  double damping = 1.0;      // initial step of the damped fixed-point fallback
  int ladder_first = 10;     // boundary ladder eta_k = 2^-k, k = first..last
  int ladder_last = 26;
  double zero_threshold = 1e-6;
  double infinite_threshold = 1e6;
  double divergence_floor = 1e4;
  double divergence_ratio = 1.5;
};

void to_json(nlohmann::json& j, const SolverSettings& s);
void from_json(const nlohmann::json& j, SolverSettings& s);

struct SubordinationResult {
  cplx omega1;
  cplx omega2;
  double residual = 0.0;
  int iterations = 0;
};

/// Solves F1(w1) = F2(w2) = w1 + w2 - z for the symmetric laws mu1, mu2.
///
/// w1 is the Denjoy-Wolff point of
///   phi(w) = F2(F1(w) - w + z) - (F1(w) - w + z) + z
/// and w2 = F1(w1) - w1 + z. On the imaginary axis both are purely imaginary
/// and the fixed point is bracketed on (Im z, inf). Off the axis a Newton
/// iteration with backtracking is used, with a damped fixed-point step as
/// fallback and continuation from Im z = 1 when no warm start is given.
///
/// Throws DomainError for point-mass inputs and NumericError when the
/// residual target is not met within max_iter steps.
SubordinationResult solve(const SymmetricMeasure& mu1, const SymmetricMeasure& mu2, HalfPlanePoint z,
                          const SolverSettings& settings = {}, std::optional<cplx> warm_start = std::nullopt);

enum class BoundaryClass { finite_positive, zero, infinite };

const char* to_string(BoundaryClass c);

/// |omega_j(0)| extrapolated along the eta ladder, with its classification.
struct BoundaryValue {
  double value = 0.0;
  BoundaryClass classified = BoundaryClass::finite_positive;
};

/// Classifies |omega(i eta_k)| sampled on the ladder eta_k = 2^-k (coarse to fine).
BoundaryValue extrapolate_boundary(const std::vector<double>& ladder, const SolverSettings& settings);

/// Handle on mu1 [+] mu2 (free additive convolution) for symmetric mu1, mu2.
class ConvolvedMeasure {
 public:
  ConvolvedMeasure(SymmetricMeasure mu1, SymmetricMeasure mu2, SolverSettings settings = {});

  const SymmetricMeasure& mu1() const { return mu1_; }
  const SymmetricMeasure& mu2() const { return mu2_; }
  const SolverSettings& settings() const { return settings_; }

  SubordinationResult subordination(HalfPlanePoint z, std::optional<cplx> warm_start = std::nullopt) const;

  /// G(z) = 1 / F1(omega1(z)).
  cplx cauchy(HalfPlanePoint z) const;

  /// Im G(i eta) together with |omega1(i eta)|. `hint` carries |omega1| from
  /// a nearby eta (updated in place), which makes sweeps along the axis cheap.
  double cauchy_on_axis(double eta, double* hint = nullptr) const;

  /// Im F(i eta) - eta, computed as e1(omega1) + e2(omega2) without
  /// cancellation. `hint` as for cauchy_on_axis.
  double axis_excess(double eta, double* hint = nullptr) const;

  BoundaryValue boundary_omega(int j) const;
  std::pair<BoundaryValue, BoundaryValue> boundary_omegas() const;

  /// Density of the absolutely continuous part at x, by Stieltjes inversion
  /// at eta = 2^-26 with one Richardson step from 2^-25.
  double density_at(double x) const;
  /// Estimate of the point mass at x from eta * |Im G(x + i eta)| on the ladder.
  double atom_mass_at(double x) const;
  /// x is in the bulk: density in (delta, 1/delta), stable along the ladder,
  /// and no atom.
  bool bulk_test(double x, double delta_bulk = 1e-6) const;

  double second_moment() const { return mu1_.second_moment() + mu2_.second_moment(); }

 private:
  cplx cauchy_near_axis(double x, double eta) const;

  SymmetricMeasure mu1_;
  SymmetricMeasure mu2_;
  SolverSettings settings_;
};

}  // namespace dsring
