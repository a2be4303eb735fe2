#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsring/brown.hpp"
#include "dsring/randmat.hpp"
#include "dsring/subordination.hpp"

namespace dsring::experiments {

enum class ScenarioKind {
  convolve,
  single_ring,
  deformed_hermitian,
  deformed_unitary,
  jordan,
  local_law,
  local_window,
  lsv_tail,
  assumption_audit
};

const char* to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(const std::string& s);

struct ProbeCircle {
  double radius = 1.0;
  int count = 16;
};

struct ScenarioConfig {
  std::string id = "scenario";
  ScenarioKind kind = ScenarioKind::single_ring;
  int threads = 1;

  std::optional<randmat::EnsembleSpec> ensemble;
  std::vector<int> n_list;  // scaling studies; falls back to ensemble N
  nlohmann::json model_json;  // empty: derived from the ensemble's limit
  std::optional<GridSpec> grid;
  int grid_nodes = 201;
  SolverSettings solver;

  std::vector<double> eta_ladder;  // local law, convolve
  std::vector<cplx> probes;        // lambda probes
  std::vector<ProbeCircle> probe_circles;
  std::map<std::string, double> thresholds;  // overrides of the declared defaults

  // convolve
  std::optional<AtomicMeasure> mu1;  // laws on [0, inf), symmetrized before use
  std::optional<AtomicMeasure> mu2;
  std::vector<double> x_points;

  // local law / window / audit / lsv
  double epsilon = 1e-3;  // D^(eps) membership for probes
  double kappa1 = 1.0;
  double beta = 0.25;
  cplx w0{0.0, 0.0};
  double window_radius = 1.0;
  double bump_amplitude = 1.0;
  int lsv_grid_nodes = 5;
  int field_samples = 10000;

  /// Full resolved config (every default filled in).
  nlohmann::json to_json() const;
  /// Rejects specs that violate the ensemble invariants (norm bound etc.).
  void validate() const;
  /// Model from model_json, or the limit of the ensemble.
  OperatorModel model() const;
  std::vector<cplx> probe_points() const;
  double threshold(const std::string& name, double fallback) const;
};

ScenarioConfig config_from_json(const nlohmann::json& j);
ScenarioConfig load_config(const std::filesystem::path& path);

OperatorModel model_from_json(const nlohmann::json& j);
/// zero -> scalar_zero, hermitian_diag -> hermitian, unitary_perm / jordan_block
/// -> haar_unitary, file -> general_from_matrix; sigma law is the generator limit.
OperatorModel model_from_ensemble(const randmat::EnsembleSpec& e);

struct RunReport {
  std::string id;
  std::string kind;
  std::map<std::string, double> metrics;
  std::map<std::string, bool> flags;
  std::map<std::string, double> thresholds;
  std::vector<std::string> notes;
  double seconds = 0.0;
  nlohmann::json provenance;
  nlohmann::json config;
  nlohmann::json extra;  // curves and tables for re-plotting

  bool passed() const;
  nlohmann::json to_json() const;
};

/// Where artifacts go; an empty directory means "do not write".
struct Output {
  std::filesystem::path dir;
  bool enabled() const { return !dir.empty(); }
};

struct EsdComparison {
  double radial_ks = 0.0;
  std::optional<double> angular_ks;
  double energy = 0.0;
};

/// Eigenvalue cloud vs field: radial KS, angular KS (rotation-invariant
/// models only) and the squared energy distance to a cloud sampled from the field.
EsdComparison compare_esd_to_brown(const std::vector<cplx>& eigenvalues, const BrownField& field,
                                   bool rotation_invariant, std::size_t field_samples, std::uint64_t seed,
                                   int threads = 1);

/// Bump (1 - |w|^2)^4 on the unit disk.
double bump(cplx w);
/// Laplacian of the bump, in closed form.
double bump_laplacian(cplx w);
/// L1 norm of the bump's Laplacian (for unit radius).
double bump_laplacian_l1();

RunReport run_convolve(const ScenarioConfig& c, const Output& out = {});
RunReport run_brown(const ScenarioConfig& c, const Output& out = {});
RunReport run_simulate(const ScenarioConfig& c, const Output& out = {});
RunReport run_compare(const ScenarioConfig& c, const Output& out = {});
RunReport run_jordan(const ScenarioConfig& c, const Output& out = {});
RunReport run_local_law(const ScenarioConfig& c, const Output& out = {});
RunReport run_local_window(const ScenarioConfig& c, const Output& out = {});
RunReport run_lsv(const ScenarioConfig& c, const Output& out = {});
RunReport run_assumption_audit(const ScenarioConfig& c, const Output& out = {});

/// Writes report.json into the output directory.
void write_report(const RunReport& r, const Output& out);

}  // namespace dsring::experiments
