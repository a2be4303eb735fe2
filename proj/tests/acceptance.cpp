// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dsring/experiments.hpp"
#include "dsring/linalg.hpp"
#include "dsring/randmat.hpp"
#include "dsring/statistics.hpp"

using namespace dsring;
namespace ex = dsring::experiments;
using Eigen::MatrixXcd;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Detail {
 public:
  template <class T>
  Detail& operator()(const std::string& key, T value) {
    if (!os_.str().empty()) os_ << ", ";
    os_ << key << ' ' << value;
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

ex::ScenarioConfig config_file(const std::string& name) {
  return ex::load_config(std::string(DSRING_CONFIG_DIR) + "/" + name + ".json");
}

std::string failed_checks(const ex::RunReport& r) {
  std::string s;
  for (const auto& [k, ok] : r.flags) {
    if (!ok) s += (s.empty() ? "" : " ") + k;
  }
  return s.empty() ? "none" : s;
}

// --- 1 --------------------------------------------------------------------

Outcome bernoulli_exactness() {
  const SymmetricMeasure b = symmetrize(AtomicMeasure::dirac(1.0));
  const ConvolvedMeasure conv(b, b);
  double worst_g = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double eta = std::pow(10.0, -4.0 + 7.0 * k / 49.0);
    const cplx exact(0.0, -1.0 / std::sqrt(eta * eta + 4.0));
    worst_g = std::max(worst_g, std::abs(conv.cauchy(HalfPlanePoint::on_axis(eta)) - exact));
  }
  const SubordinationResult r = solve(b, b, HalfPlanePoint::on_axis(1.0));
  const cplx golden(0.0, 0.5 * (1.0 + std::sqrt(5.0)));
  const double omega_err = std::max(std::abs(r.omega1 - golden), std::abs(r.omega2 - golden));
  Detail d;
  d("max |G - closed form|", worst_g)("|omega(i) - golden|", omega_err);
  return {worst_g <= 1e-8 && omega_err <= 1e-10, d.str()};
}

// --- 2 --------------------------------------------------------------------

SymmetricMeasure random_symmetric(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(2, 12);
  std::uniform_real_distribution<double> loc(0.0, 3.0), w(0.05, 1.0);
  std::vector<Atom> atoms;
  const int n = count(rng);
  for (int k = 0; k < n; ++k) atoms.push_back({loc(rng), w(rng)});
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.location < b.location; });
  return symmetrize(AtomicMeasure::normalized(atoms));
}

Outcome residual_invariant() {
  std::mt19937_64 rng(20240);
  std::uniform_real_distribution<double> re(-5.0, 5.0), lim(-3.0, 2.0);
  double worst_residual = 0.0, worst_re = 0.0;
  int accepted = 0, rejected = 0;
  for (int pair = 0; pair < 200; ++pair) {
    const SymmetricMeasure mu1 = random_symmetric(rng), mu2 = random_symmetric(rng);
    for (int k = 0; k < 6; ++k) {
      const double eta = std::pow(10.0, lim(rng));
      const HalfPlanePoint z = k % 2 == 0 ? HalfPlanePoint(re(rng), eta) : HalfPlanePoint::on_axis(eta);
      try {
        const SubordinationResult r = solve(mu1, mu2, z);
        const cplx f1 = f_transform(mu1, {r.omega1.real(), r.omega1.imag()});
        const cplx f2 = f_transform(mu2, {r.omega2.real(), r.omega2.imag()});
        const double res = std::abs(f1 - f2) + std::abs(r.omega1 + r.omega2 - z.value() - f1);
        worst_residual = std::max(worst_residual, res / (1.0 + std::abs(z.value())));
        if (z.re == 0.0) worst_re = std::max({worst_re, std::abs(r.omega1.real()), std::abs(r.omega2.real())});
        ++accepted;
      } catch (const NumericError&) {
        ++rejected;
      }
    }
  }
  Detail d;
  d("points", accepted)("rejected", rejected)("max residual/(1+|z|)", worst_residual)("max |Re omega| on axis", worst_re);
  return {worst_residual <= 1e-10 && worst_re <= 1e-12, d.str()};
}

// --- 3 --------------------------------------------------------------------

Outcome matrix_oracle() {
  const int n = 2000, trials = 20;
  const SymmetricMeasure mu1 = symmetrize(AtomicMeasure::dirac(1.0)), mu2 = symmetrize(AtomicMeasure::dirac(2.0));
  const ConvolvedMeasure conv(mu1, mu2);

  // Model CDF by integrating the Stieltjes-inverted density on a fine grid.
  const double lo = -3.5, step = 0.005;
  const int cells = 1400;
  std::vector<double> knots(cells + 1), cdf(cells + 1, 0.0);
  for (int k = 0; k <= cells; ++k) knots[k] = lo + step * k;
  for (int k = 0; k < cells; ++k) {
    const double piece = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        [&](double x) { return conv.density_at(x); }, knots[k], knots[k + 1], 0);
    cdf[k + 1] = cdf[k] + piece;
  }
  const double model_mass = cdf.back();
  auto model_cdf = [&](double x) {
    if (x <= knots.front()) return 0.0;
    if (x >= knots.back()) return 1.0;
    const auto k = static_cast<std::size_t>((x - lo) / step);
    const double t = (x - knots[k]) / step;
    return std::min(1.0, (cdf[k] + t * (cdf[k + 1] - cdf[k])) / model_mass);
  };
  // Free symmetries in general position: x^2 = 1 + 4 + 4 cos(theta), theta uniform on [0, pi].
  auto oracle_cdf = [](double x) {
    const double c = std::clamp((x * x - 5.0) / 4.0, -1.0, 1.0);
    const double half = 1.0 - std::acos(c) / std::numbers::pi;
    return x >= 0.0 ? 0.5 + 0.5 * half : 0.5 - 0.5 * half;
  };
  double model_vs_oracle = 0.0;
  for (int k = 0; k <= cells; ++k) model_vs_oracle = std::max(model_vs_oracle, std::abs(model_cdf(knots[k]) - oracle_cdf(knots[k])));

  Eigen::VectorXd h1(n), h2(n);
  for (int i = 0; i < n; ++i) {
    h1(i) = i % 2 == 0 ? 1.0 : -1.0;
    h2(i) = i < n / 2 ? 2.0 : -2.0;
  }
  std::vector<double> eigenvalues;
  for (int t = 0; t < trials; ++t) {
    auto rng = randmat::stream(33, static_cast<std::uint64_t>(t), randmat::Role::Q);
    const MatrixXcd q = randmat::haar_unitary(n, rng);
    MatrixXcd m = q * h2.cast<cplx>().asDiagonal() * q.adjoint();
    m.diagonal() += h1.cast<cplx>();
    const VectorXd ev = linalg::hermitian_eigenvalues(m);
    eigenvalues.insert(eigenvalues.end(), ev.data(), ev.data() + n);
  }
  const double ks = stats::ks_one_sample(eigenvalues, model_cdf);
  Detail d;
  d("sup-CDF distance", ks)("model mass", model_mass)("model vs closed-form CDF", model_vs_oracle);
  return {ks < 0.02, d.str()};
}

// --- 4, 5 -----------------------------------------------------------------

Outcome annulus_radii() {
  const OperatorModel m = OperatorModel::scalar_zero(AtomicMeasure::from_atoms({{0.5, 0.5}, {1.0, 0.5}}));
  const BrownField f = brown_field(m, GridSpec::default_for(m));
  const double r_in = std::sqrt(0.4), r_out = std::sqrt(0.625), h = f.grid.spacing;
  const std::vector<double> mass = f.cell_masses();
  double inside = 0.0;
  for (std::size_t k = 0; k < mass.size(); ++k) {
    const double r = std::abs(f.grid.node(k));
    if (r >= r_in - 2.0 * h && r <= r_out + 2.0 * h) inside += mass[k];
  }
  const double total = f.total_mass();
  Detail d;
  d("fraction in dilated annulus", inside / total)("total mass", total);
  return {inside / total >= 0.99 && total >= 0.98 && total <= 1.02, d.str()};
}

Outcome degenerate_ring() {
  const OperatorModel m = OperatorModel::scalar_zero(AtomicMeasure::dirac(1.0));
  const BrownField f = brown_field(m, GridSpec::default_for(m));
  const std::vector<double> mass = f.cell_masses();
  double ring = 0.0, potential_err = 0.0;
  for (std::size_t k = 0; k < mass.size(); ++k) {
    const double r = std::abs(f.grid.node(k));
    if (r > 0.9 && r < 1.1) ring += mass[k];
    if (std::abs(r - 1.0) > 0.05) potential_err = std::max(potential_err, std::abs(f.potential[k] - std::max(0.0, std::log(r))));
  }
  const double fraction = ring / f.total_mass();
  Detail d;
  d("ring fraction", fraction)("max potential error", potential_err);
  return {fraction >= 0.95 && potential_err <= 1e-4, d.str()};
}

// --- 6, 7 -----------------------------------------------------------------

Outcome deformed_single_ring() {
  const ex::RunReport r = ex::run_compare(config_file("deformed_hermitian"));
  Detail d;
  d("radial KS", r.metrics.at("radial_ks"))("energy", r.metrics.at("energy_distance"))("failed", failed_checks(r));
  return {r.metrics.at("radial_ks") < 0.05 && r.metrics.at("energy_distance") < 0.05, d.str()};
}

Outcome jordan_reproduction() {
  const ex::RunReport r = ex::run_jordan(config_file("jordan"));
  const double aw = r.metrics.at("energy_A_W"), af = r.metrics.at("energy_A_field"), wf = r.metrics.at("energy_W_field");
  Detail d;
  d("energy A-W", aw)("A-field", af)("W-field", wf)("failed", failed_checks(r));
  return {aw < 0.05 && af <= 0.07 && wf <= 0.07, d.str()};
}

// --- 8, 9 -----------------------------------------------------------------

Outcome jordan_lemma() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  int failures = 0, checked = 0;
  double oracle_err = 0.0;
  for (int n : {50, 200, 1000}) {
    for (double radius : {0.3, 0.7, 1.5, 3.0}) {
      for (int k = 0; k < 16; ++k) {
        const cplx lambda = std::polar(radius, angle(rng));
        failures += !randmat::jordan_sv_check(n, lambda);
        ++checked;
        if (n <= 200 || k == 0) {
          MatrixXcd shifted = randmat::jordan_matrix(n);
          shifted.diagonal().array() -= lambda;
          const VectorXd direct = linalg::singular_values(shifted);
          oracle_err = std::max(oracle_err, (direct - randmat::jordan_singular_values(n, lambda)).cwiseAbs().maxCoeff());
        }
      }
    }
  }
  Detail d;
  d("checks", checked)("failures", failures)("bidiagonal vs SVD", oracle_err);
  return {failures == 0 && oracle_err <= 1e-10, d.str()};
}

Outcome interlacing() {
  const int n = 40;
  int failures = 0, indeterminate = 0, rank_mismatch = 0;
  for (int k = 1; k <= 3; ++k) {
    for (int t = 0; t < 100; ++t) {
      auto rng = randmat::stream(9, static_cast<std::uint64_t>(100 * k + t), randmat::Role::perturbation);
      const MatrixXcd u = randmat::haar_unitary(n, rng);
      const MatrixXcd low = randmat::complex_gaussian(n, rng).leftCols(k) * randmat::complex_gaussian(n, rng).topRows(k);
      std::uniform_real_distribution<double> coord(-1.5, 1.5);
      const cplx lambda(coord(rng), coord(rng));
      const randmat::InterlacingResult r = randmat::interlacing_check(u + low / std::sqrt(n), u, lambda);
      failures += r.result == randmat::Interlacing::fails;
      indeterminate += r.result == randmat::Interlacing::indeterminate;
      rank_mismatch += r.rank != k;
    }
  }
  Detail d;
  d("trials", 300)("failures", failures)("indeterminate", indeterminate)("rank mismatches", rank_mismatch);
  return {failures == 0 && indeterminate == 0 && rank_mismatch == 0, d.str()};
}

// --- 10, 11, 12 -----------------------------------------------------------

Outcome local_law() {
  const ex::RunReport r = ex::run_local_law(config_file("local_law"));
  const double hi = r.metrics.at("slope_max"), lo = r.metrics.at("slope_min");
  const bool decreasing = r.flags.at("strictly_decreasing");
  Detail d;
  d("slope", hi)("strictly decreasing", decreasing ? "yes" : "no")("failed", failed_checks(r));
  return {hi <= -0.6 && lo >= -1.4 && decreasing, d.str()};
}

Outcome least_singular_value() {
  ex::ScenarioConfig unitary = config_file("lsv");
  unitary.ensemble->N = 300;
  unitary.ensemble->trials = 20;
  unitary.ensemble->sigma = {};
  unitary.ensemble->sigma.values = {1.0};
  unitary.ensemble->a = {};
  unitary.ensemble->alpha.reset();
  unitary.probes.clear();
  unitary.lsv_grid_nodes = 7;
  const ex::RunReport floor = ex::run_lsv(unitary);
  const ex::RunReport stress = ex::run_lsv(config_file("lsv"));
  const double margin = floor.metrics.at("unitarity_floor_margin");
  const double below = stress.metrics.at("fraction_below_tiny");
  Detail d;
  d("unitarity floor margin", margin)("stress min s_min", stress.metrics.at("global_min_smin"))("N^-8", std::pow(500.0, -8.0))(
      "fraction below", below);
  return {margin >= -1e-10 && below == 0.0, d.str()};
}

Outcome audit_bounds() {
  ex::ScenarioConfig inner = config_file("audit_jordan");
  ex::ScenarioConfig outer = inner;
  outer.probe_circles = {{2.0, 16}};
  outer.thresholds["kappa2"] = 0.5;
  const ex::RunReport ri = ex::run_assumption_audit(inner);
  const ex::RunReport ro = ex::run_assumption_audit(outer);
  const double ki = ri.metrics.at("kappa2"), ko = ro.metrics.at("kappa2");
  Detail d;
  d("kappa2 at |lambda| 0.5", ki)("at |lambda| 2", ko);
  return {ki <= 2.0 && ko <= 0.5, d.str()};
}

// --- 13 -------------------------------------------------------------------

MatrixXcd hermitization(const MatrixXcd& x) {
  const Eigen::Index n = x.rows();
  MatrixXcd h = MatrixXcd::Zero(2 * n, 2 * n);
  h.topRightCorner(n, n) = x;
  h.bottomLeftCorner(n, n) = x.adjoint();
  return h;
}

Outcome approx_subordination() {
  randmat::EnsembleSpec s = config_file("deformed_hermitian").ensemble.value();
  s.N = 500;
  const cplx lambda(0.3, 0.2);
  const double eta = 0.5;
  const randmat::ApproxSubordination r = randmat::approx_subordination(s, lambda, eta, 100);
  const double re_a = std::abs(r.omega_A.real()), re_b = std::abs(r.omega_B.real());
  const double se_a = r.omega_A_std_error, se_b = r.omega_B_std_error;

  // Per-trial estimator against the full 2N x 2N resolvent at small N.
  randmat::EnsembleSpec small = s.with_n(24);
  const randmat::ApproxSubordination rs = randmat::approx_subordination(small, lambda, eta, 4);
  const cplx z(0.0, eta);
  double resolvent_err = 0.0;
  for (int t = 0; t < 4; ++t) {
    const randmat::Assembly a = randmat::assemble(small, t);
    MatrixXcd x = a.Y;
    x.diagonal().array() -= lambda;
    MatrixXcd m = -hermitization(x);
    m.diagonal().array() += z;
    const MatrixXcd g = m.partialPivLu().inverse();
    const cplx gh = g.trace() / 48.0;
    const cplx tb = (g * hermitization(a.Y - a.A)).trace() / 48.0;
    resolvent_err = std::max(resolvent_err, std::abs(rs.omega_A_trials[static_cast<std::size_t>(t)] - (z - tb / gh)));
  }
  Detail d;
  d("|Re omega_A|", re_a)("SE", se_a)("|Re omega_B|", re_b)("SE", se_b)("Im omega_A", r.omega_A.imag())(
      "resolvent cross-check", resolvent_err);
  return {re_a <= 3.0 * se_a && re_b <= 3.0 * se_b && resolvent_err <= 1e-10, d.str()};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "subordination exactness (Bernoulli square)", bernoulli_exactness},
      {2, "subordination residual and purely imaginary axis values", residual_invariant},
      {3, "matrix-oracle convolution", matrix_oracle},
      {4, "Brown support radii of the annulus", annulus_radii},
      {5, "degenerate ring", degenerate_ring},
      {6, "deformed single ring at desk scale", deformed_single_ring},
      {7, "Jordan reproduction", jordan_reproduction},
      {8, "Jordan singular-value lemma", jordan_lemma},
      {9, "interlacing under rank-k perturbation", interlacing},
      {10, "local-law scaling", local_law},
      {11, "least-singular-value floor", least_singular_value},
      {12, "assumption audit bounds", audit_bounds},
      {13, "approximate-subordination diagnostics", approx_subordination},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("[%2d] %s  %s: %s (%.1f s)\n", c.number, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, selected.empty() ? criteria.size() : selected.size());
  return failed == 0 ? 0 : 1;
}
