#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "dsring/brown.hpp"

using namespace dsring;

namespace {

const AtomicMeasure kHalfHalf = AtomicMeasure::from_atoms({{0.5, 0.5}, {1.0, 0.5}});
const double kInner = std::sqrt(0.4);    // 1 / ||T^-1||_2
const double kOuter = std::sqrt(0.625);  // ||T||_2

OperatorModel circle() { return OperatorModel::scalar_zero(AtomicMeasure::dirac(1.0)); }
OperatorModel annulus() { return OperatorModel::scalar_zero(kHalfHalf); }
OperatorModel two_point_hermitian(double shift = 0.0) {
  return OperatorModel::hermitian(kHalfHalf, AtomicMeasure::from_atoms({{-1.0 + shift, 0.5}, {1.0 + shift, 0.5}}));
}

double stencil_density(const OperatorModel& m, cplx c, double h) {
  const std::vector<double> p = potentials_at(m, {c, c + h, c - h, c + cplx(0.0, h), c - cplx(0.0, h)});
  return (p[1] + p[2] + p[3] + p[4] - 4.0 * p[0]) / (2.0 * std::numbers::pi * h * h);
}

}  // namespace

TEST_CASE("l2 data") {
  const L2Data a = l2_data(circle(), {2.0, 0.0});
  CHECK(a.norm_a_minus_lambda == doctest::Approx(2.0));
  CHECK(a.inv_norm_a_minus_lambda == doctest::Approx(0.5));
  CHECK(a.norm_T == doctest::Approx(1.0));
  CHECK(a.inv_norm_T == doctest::Approx(1.0));

  const L2Data b = l2_data(annulus(), {0.3, 0.1});
  CHECK(b.norm_T == doctest::Approx(0.7905694150420949).epsilon(1e-12));
  CHECK(b.inv_norm_T == doctest::Approx(1.5811388300841898).epsilon(1e-12));

  const L2Data c = l2_data(OperatorModel::haar_unitary(AtomicMeasure::dirac(1.0)), {0.0, 0.0});
  CHECK(c.norm_a_minus_lambda == doctest::Approx(1.0));
  CHECK(c.inv_norm_a_minus_lambda == doctest::Approx(1.0));

  CHECK(std::isinf(l2_data(two_point_hermitian(), {1.0, 0.0}).inv_norm_a_minus_lambda));
}

TEST_CASE("classification") {
  const OperatorModel m = annulus();
  CHECK(classify(m, {0.7, 0.0}).label == Region::omega_interior);
  CHECK(classify(m, {0.0, 0.7}).label == Region::omega_interior);
  CHECK(classify(m, {2.0, 0.0}).label == Region::exterior);
  CHECK(classify(m, {0.3, 0.0}).label == Region::exterior);
  CHECK(moment_region(m, {0.7, 0.0}) == Region::omega_interior);
  CHECK(moment_region(m, {kOuter + 1e-3, 0.0}) == Region::exterior);

  const OperatorModel h = two_point_hermitian();
  for (double x = -2.5; x <= 2.5; x += 0.25) {
    for (double y : {0.0, 0.2, 0.6}) CHECK(classify(h, {x, y}).label != Region::singular_S);
  }

  // Unit circle: the closed inequalities keep |lambda| = 1 in the support.
  CHECK(moment_region(circle(), {1.0, 0.0}) == Region::omega_interior);
  CHECK(moment_region(circle(), {1.01, 0.0}) == Region::exterior);
}

TEST_CASE("circle potential") {
  const OperatorModel m = circle();
  CHECK(log_potential(m, {2.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(log_potential(m, {0.0, -2.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(std::abs(log_potential(m, {0.5, 0.0})) < 1e-6);
  CHECK(std::abs(log_potential(m, {-0.3, 0.4})) < 1e-6);

  for (const OperatorModel& any : {circle(), annulus(), two_point_hermitian()}) {
    const double r = 1e4 * (any.a_bound() + any.sigma_bound());
    CHECK(log_potential(any, {0.0, r}) == doctest::Approx(std::log(r)).epsilon(1e-3 / std::log(r)));
  }
}

TEST_CASE("matrix-backed models agree with the hermitian model") {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(4, 4);
  a.diagonal() << -1.0, 1.0, -1.0, 1.0;
  const OperatorModel h = two_point_hermitian();
  const OperatorModel n = OperatorModel::normal_from_matrix(kHalfHalf, a);
  const OperatorModel g = OperatorModel::general_from_matrix(kHalfHalf, a);
  for (const cplx lambda : {cplx(0.0, 0.5), cplx(0.8, 0.3), cplx(3.0, 0.0)}) {
    const double ref = log_potential(h, lambda);
    CHECK(log_potential(n, lambda) == doctest::Approx(ref).epsilon(1e-10));
    CHECK(log_potential(g, lambda) == doctest::Approx(ref).epsilon(1e-10));
  }
}

TEST_CASE("circle field") {
  const OperatorModel m = circle();
  const BrownField f = brown_field(m, GridSpec::default_for(m, 201));
  double ring = 0.0;
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    const double r = std::abs(f.grid.node(i));
    if (r > 0.9 && r < 1.1) ring += f.density[i] * f.grid.spacing * f.grid.spacing;
  }
  CHECK(ring >= 0.95);
  CHECK(f.covers_support);
  CHECK(f.total_mass() == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("annulus field") {
  const OperatorModel m = annulus();
  const BrownField f = brown_field(m, GridSpec::default_for(m, 201));
  const double h = f.grid.spacing;
  double inside = 0.0, total = 0.0, worst_exterior = 0.0;
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    const double r = std::abs(f.grid.node(i));
    const double mass = f.density[i] * h * h;
    total += mass;
    if (r >= kInner - 2.0 * h && r <= kOuter + 2.0 * h) inside += mass;
    if (r < kInner - 2.0 * h || r > kOuter + 2.0 * h) worst_exterior = std::max(worst_exterior, f.density[i]);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(0.02));
  CHECK(inside >= 0.99 * total);
  CHECK(worst_exterior <= 1e-4);
  for (double d : f.density) CHECK(d >= -1e-4);
  CHECK(f.atoms.empty());
}

TEST_CASE("rotation invariance of the scalar model") {
  const OperatorModel m = annulus();
  for (double r : {0.66, 0.7, 0.75}) {
    const double ref = stencil_density(m, {r, 0.0}, 1e-3);
    REQUIRE(ref > 0.0);
    for (double theta : {0.3, 1.1, 2.0, 4.4}) {
      CHECK(std::abs(stencil_density(m, std::polar(r, theta), 1e-3) - ref) <= 0.02 * ref);
    }
  }
}

TEST_CASE("translation covariance of the hermitian model") {
  const double c = 0.37;
  const OperatorModel base = two_point_hermitian(), shifted = two_point_hermitian(c);
  const GridSpec g = GridSpec::square({0.0, 0.0}, 2.0, 21);
  GridSpec gs = g;
  gs.center += c;
  const BrownField a = brown_field(base, g), b = brown_field(shifted, gs);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(a.potential[i] - b.potential[i]) <= 1e-8);
}

TEST_CASE("subharmonicity with a fine stencil") {
  const OperatorModel m = annulus();
  for (double r = 0.55; r < 0.9; r += 0.0213) CHECK(stencil_density(m, {r, 0.0}, 1e-3) >= -1e-6);
  const OperatorModel h = two_point_hermitian();
  for (double x = -2.4; x < 2.4; x += 0.173) {
    for (double y : {0.0, 0.31, 0.77}) CHECK(stencil_density(h, {x, y}, 1e-3) >= -1e-6);
  }
}

TEST_CASE("D epsilon") {
  const OperatorModel m = circle();
  const RegionLabel on_circle = classify(m, {1.0, 0.0});
  CHECK(d_epsilon(std::vector<RegionLabel>{on_circle}, 0.1)[0]);
  CHECK(on_circle.omega1_0.value == doctest::Approx(1.0).epsilon(1e-4));

  const OperatorModel a = annulus();
  const GridSpec g = GridSpec::square({0.0, 0.0}, 1.2, 41);
  const std::vector<RegionLabel> labels = classify_grid(a, g);
  for (double eps : {0.5, 0.1, 1e-3}) {
    const std::vector<bool> mask = d_epsilon(labels, eps);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i].label == Region::exterior) CHECK_FALSE(mask[i]);
    }
  }
  const std::vector<bool> limit = d_epsilon(labels, 1e-9);
  for (std::size_t i = 0; i < labels.size(); ++i) CHECK(limit[i] == (labels[i].label == Region::omega_interior));
  CHECK_THROWS_AS(d_epsilon(labels, 0.0), DomainError);
  CHECK_THROWS_AS(d_epsilon(labels, 1.0), DomainError);
}

TEST_CASE("exterior cauchy bound") {
  const OperatorModel m = annulus();
  std::vector<cplx> ring;
  for (int k = 0; k < 8; ++k) ring.push_back(std::polar(1.5, k * std::numbers::pi / 4.0));
  const ExteriorBound b = exterior_cauchy_bound(m, ring);
  CHECK(std::isfinite(b.bound));
  CHECK(b.bound <= 2.0);
  CHECK(b.flagged.empty());

  const ExteriorBound far = exterior_cauchy_bound(m, {cplx(1e3, 0.0), cplx(0.0, -1e3)});
  CHECK(far.bound <= 2e-3);
  CHECK(far.bound == doctest::Approx(1e-3).epsilon(1e-3));

  const ExteriorBound mixed = exterior_cauchy_bound(m, {cplx(1.5, 0.0), cplx(0.7, 0.0)});
  REQUIRE(mixed.flagged.size() == 1);
  CHECK(mixed.flagged[0] == 1);
}

TEST_CASE("field export") {
  const OperatorModel m = annulus();
  const BrownField f = brown_field(m, GridSpec::square({0.0, 0.0}, 1.2, 9));
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / "dsring_test_brown";
  std::filesystem::create_directories(dir);
  write_field_csv(f, (dir / "field.csv").string());
  std::ifstream in(dir / "field.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "re,im,potential,density,label");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == f.grid.size());

  const nlohmann::json j = field_summary(f);
  CHECK(j.contains("grid"));
  const GridSpec back = j.at("grid").get<GridSpec>();
  CHECK(back.nx == 9);
  CHECK(back.spacing == f.grid.spacing);
  std::filesystem::remove_all(dir);
}
