#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dsring/measures.hpp"
#include "dsring/subordination.hpp"

namespace dsring {

/// Limit data for y = T + a: the law of sigma = |T| and the family of laws
/// of |a - lambda|.
class OperatorModel {
 public:
  enum class Kind { scalar_zero, hermitian, haar_unitary, normal_from_matrix, general_from_matrix };

  static OperatorModel scalar_zero(AtomicMeasure sigma_law);
  static OperatorModel hermitian(AtomicMeasure sigma_law, AtomicMeasure spectrum);
  static OperatorModel haar_unitary(AtomicMeasure sigma_law, int atom_count = 4096);
  static OperatorModel normal_from_matrix(AtomicMeasure sigma_law, const Eigen::MatrixXcd& a);
  static OperatorModel general_from_matrix(AtomicMeasure sigma_law, const Eigen::MatrixXcd& a);

  Kind kind() const { return kind_; }
  const AtomicMeasure& sigma_law() const { return sigma_law_; }
  int atom_count() const { return atom_count_; }
  /// Law of |a - lambda|.
  AtomicMeasure abs_law(cplx lambda) const;
  /// Upper bound on the spectral radius / norm of a.
  double a_bound() const;
  double sigma_bound() const { return sigma_law_.support_bound(); }
  /// Brown measure is invariant under rotations about 0.
  bool rotation_invariant() const { return kind_ == Kind::scalar_zero || kind_ == Kind::haar_unitary; }

  nlohmann::json to_json() const;

 private:
  OperatorModel(Kind kind, AtomicMeasure sigma_law);

  Kind kind_;
  AtomicMeasure sigma_law_;
  std::optional<AtomicMeasure> spectrum_;
  std::vector<cplx> eigenvalues_;
  Eigen::MatrixXcd matrix_;
  int atom_count_ = 0;
  double a_bound_ = 0.0;
};

const char* to_string(OperatorModel::Kind k);

/// Second moments entering the support region: L2 norms of a - lambda, its
/// inverse, T and T^-1. Infinite values are legitimate.
struct L2Data {
  double norm_a_minus_lambda;
  double inv_norm_a_minus_lambda;
  double norm_T;
  double inv_norm_T;
};

L2Data l2_data(const OperatorModel& m, cplx lambda);

enum class Region { omega_interior, singular_S, exterior };
const char* to_string(Region r);

struct RegionLabel {
  Region label = Region::exterior;
  BoundaryValue omega1_0;
  BoundaryValue omega2_0;
  /// Label from the (non-strict) moment inequalities and the mass condition.
  Region moment_label = Region::exterior;
  bool agrees = true;
};

/// mu1 = symmetrized |a - lambda|, mu2 = symmetrized sigma.
std::pair<SymmetricMeasure, SymmetricMeasure> convolution_pair(const OperatorModel& m, cplx lambda);

Region moment_region(const OperatorModel& m, cplx lambda);
/// min(||(a - lambda)^-1||_2 ||T||_2, ||a - lambda||_2 ||T^-1||_2) - 1: nonnegative
/// exactly on the closed region; its size over its slope bounds the distance to the boundary.
double moment_margin(const OperatorModel& m, cplx lambda);
RegionLabel classify(const OperatorModel& m, cplx lambda, const SolverSettings& settings = {});

/// h(lambda) = integral of log|u| against mu1 [+] mu2. -inf when the
/// convolution has an atom at zero (or the integral falls below -1e3).
double log_potential(const OperatorModel& m, cplx lambda, const SolverSettings& settings = {});

struct GridSpec {
  cplx center{0.0, 0.0};
  double spacing = 0.0;
  int nx = 0;
  int ny = 0;

  static GridSpec square(cplx center, double half_width, int nodes);
  /// 201 x 201 nodes on the centered square of side 2 (a_bound + sigma_bound) + 1.
  static GridSpec default_for(const OperatorModel& m, int nodes = 201);

  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i); }
  cplx node(int i, int j) const;
  cplx node(std::size_t idx) const { return node(static_cast<int>(idx % static_cast<std::size_t>(nx)), static_cast<int>(idx / static_cast<std::size_t>(nx))); }
  bool interior(int i, int j) const { return i > 0 && j > 0 && i + 1 < nx && j + 1 < ny; }
};

void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);

struct BrownAtom {
  std::size_t node;
  double mass;
};

struct BrownField {
  GridSpec grid;
  std::vector<double> potential;
  std::vector<double> density;  // 0 on the grid boundary
  std::vector<RegionLabel> labels;
  std::vector<BrownAtom> atoms;
  double density_mass = 0.0;
  /// Every node on the outer ring is labeled exterior.
  bool covers_support = false;

  double total_mass() const;
  /// Mass of each cell (density * spacing^2), atoms added at their nodes.
  std::vector<double> cell_masses() const;
};

struct FieldOptions {
  SolverSettings solver;
  int threads = 1;
  bool labels = true;
};

BrownField brown_field(const OperatorModel& m, const GridSpec& grid, const FieldOptions& options = {});

/// Potential on an arbitrary list of points (shares the law cache of brown_field).
std::vector<double> potentials_at(const OperatorModel& m, const std::vector<cplx>& points,
                                  const FieldOptions& options = {});

std::vector<RegionLabel> classify_grid(const OperatorModel& m, const GridSpec& grid, const FieldOptions& options = {});

/// Nodes where both boundary magnitudes lie in (eps, 1/eps).
std::vector<bool> d_epsilon(const std::vector<RegionLabel>& labels, double eps);
std::vector<bool> d_epsilon(const OperatorModel& m, const GridSpec& grid, double eps, const FieldOptions& options = {});

struct ExteriorBound {
  double bound = 0.0;
  std::vector<double> per_node;
  std::vector<std::size_t> flagged;  // nodes not confirmed exterior
};

/// sup over the nodes and the ladder eta = 2^-k, k = 0..ladder_last, of
/// |G_{mu1 [+] mu2}(i eta)|.
ExteriorBound exterior_cauchy_bound(const OperatorModel& m, const std::vector<cplx>& nodes,
                                    const SolverSettings& settings = {});

/// CSV with columns re, im, potential, density, label (17 significant digits).
void write_field_csv(const BrownField& field, const std::string& path);
nlohmann::json field_summary(const BrownField& field);

}  // namespace dsring
