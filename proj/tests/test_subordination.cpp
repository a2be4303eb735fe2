#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dsring/linalg.hpp"
#include "dsring/randmat.hpp"
#include "dsring/subordination.hpp"

using namespace dsring;

namespace {

SymmetricMeasure bern(double a) { return symmetrize(AtomicMeasure::dirac(a)); }

// |F1(w1) - F2(w2)| + |w1 + w2 - z - F1(w1)| from the transforms alone.
double independent_residual(const SymmetricMeasure& mu1, const SymmetricMeasure& mu2, cplx z,
                            const SubordinationResult& r) {
  const cplx f1 = f_transform(mu1, {r.omega1.real(), r.omega1.imag()});
  const cplx f2 = f_transform(mu2, {r.omega2.real(), r.omega2.imag()});
  return std::abs(f1 - f2) + std::abs(r.omega1 + r.omega2 - z - f1);
}

SymmetricMeasure random_symmetric(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(2, 12);
  std::uniform_real_distribution<double> loc(0.0, 3.0), w(0.05, 1.0);
  std::vector<Atom> atoms;
  const int n = count(rng);
  for (int k = 0; k < n; ++k) atoms.push_back({loc(rng), w(rng)});
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.location < b.location; });
  return symmetrize(AtomicMeasure::normalized(atoms));
}

// The root of w + 1/w = z with Im w >= Im z, for z = i eta: w = i (eta + sqrt(eta^2 + 4)) / 2.
double bernoulli_omega(double eta) { return 0.5 * (eta + std::sqrt(eta * eta + 4.0)); }

}  // namespace

TEST_CASE("bernoulli square: quadratic oracle") {
  const SymmetricMeasure b = bern(1.0);
  for (double eta : {1.0, 3.0}) {
    const SubordinationResult r = solve(b, b, HalfPlanePoint::on_axis(eta));
    CHECK(std::abs(r.omega1 - cplx(0.0, bernoulli_omega(eta))) < 1e-10);
    CHECK(std::abs(r.omega1 - r.omega2) < 1e-12);
  }
  CHECK(bernoulli_omega(1.0) == doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0));
  CHECK(bernoulli_omega(3.0) == doctest::Approx((3.0 + std::sqrt(13.0)) / 2.0));

  const ConvolvedMeasure c(b, b);
  for (int k = 0; k < 50; ++k) {
    const double eta = 1e-4 * std::pow(1e7, k / 49.0);
    const cplx g = c.cauchy(HalfPlanePoint::on_axis(eta));
    CHECK(std::abs(g - cplx(0.0, -1.0 / std::sqrt(eta * eta + 4.0))) < 1e-8);
  }
  const cplx far = c.cauchy(HalfPlanePoint::on_axis(1e6));
  CHECK(std::abs(far - cplx(0.0, -1e-6)) < 1e-5 * 1e-6);
}

TEST_CASE("point masses are rejected") {
  CHECK_THROWS_AS(solve(bern(1.0), symmetrize(AtomicMeasure::dirac(0.0)), {0.0, 1.0}), DomainError);
  CHECK_THROWS_AS(ConvolvedMeasure(symmetrize(AtomicMeasure::dirac(0.0)), bern(1.0)), DomainError);
}

TEST_CASE("near-identity second law") {
  const SymmetricMeasure mu1 = symmetrize(AtomicMeasure::from_atoms({{0.5, 0.3}, {1.5, 0.7}}));
  const SymmetricMeasure mu2 = symmetrize(AtomicMeasure::from_atoms({{0.0, 1.0 - 1e-9}, {1.0, 1e-9}}));
  const ConvolvedMeasure c(mu1, mu2);
  for (const HalfPlanePoint z : {HalfPlanePoint(0.0, 0.5), HalfPlanePoint(0.7, 0.2), HalfPlanePoint(-2.0, 1.0)}) {
    const SubordinationResult r = c.subordination(z);
    CHECK(std::abs(r.omega1 - z.value()) < 1e-6);
    CHECK(std::abs(c.cauchy(z) - cauchy_transform(mu1, z)) < 1e-6);
  }
}

TEST_CASE("residual and axis structure on random pairs") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> re(-5.0, 5.0), lim(-3.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const SymmetricMeasure mu1 = random_symmetric(rng), mu2 = random_symmetric(rng);
    for (int k = 0; k < 4; ++k) {
      const HalfPlanePoint z{re(rng), std::pow(10.0, lim(rng))};
      const SubordinationResult r = solve(mu1, mu2, z);
      CHECK(independent_residual(mu1, mu2, z.value(), r) <= 1e-10 * (1.0 + std::abs(z.value())));
      CHECK(r.omega1.imag() >= z.im - 1e-12);
      CHECK(r.omega2.imag() >= z.im - 1e-12);
      const HalfPlanePoint axis = HalfPlanePoint::on_axis(z.im);
      const SubordinationResult a = solve(mu1, mu2, axis);
      CHECK(a.omega1.real() == 0.0);
      CHECK(a.omega2.real() == 0.0);
      CHECK(independent_residual(mu1, mu2, axis.value(), a) <= 1e-10 * (1.0 + z.im));
    }
  }
}

TEST_CASE("exchange symmetry") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const SymmetricMeasure mu1 = random_symmetric(rng), mu2 = random_symmetric(rng);
    const ConvolvedMeasure a(mu1, mu2), b(mu2, mu1);
    for (const HalfPlanePoint z : {HalfPlanePoint(0.0, 0.3), HalfPlanePoint(1.1, 0.4)}) {
      const cplx ga = a.cauchy(z), gb = b.cauchy(z);
      CHECK(std::abs(ga - gb) <= 1e-12 * std::max(1.0, std::abs(ga)));
      const SubordinationResult ra = a.subordination(z), rb = b.subordination(z);
      CHECK(std::abs(ra.omega1 - rb.omega2) <= 1e-10 * (1.0 + std::abs(ra.omega1)));
    }
  }
}

TEST_CASE("second moment adds under free convolution") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const SymmetricMeasure mu1 = random_symmetric(rng), mu2 = random_symmetric(rng);
    const ConvolvedMeasure c(mu1, mu2);
    const cplx z(0.0, 1e3);
    const cplx g = c.cauchy({0.0, 1e3});
    // G(z) = 1/z + m2/z^3 + O(z^-5)
    const double m2 = (z * z * z * (g - 1.0 / z)).real();
    CHECK(std::abs(m2 - (mu1.second_moment() + mu2.second_moment())) <= 1e-4 * c.second_moment());
  }
}

TEST_CASE("monotone omega along the ladder") {
  // Identical laws: omega(i eta) = i (eta + sqrt(eta^2 + 4)) / 2 for Bernoulli,
  // and Im omega = Im F(omega) - eta stays monotone in general.
  const std::vector<SymmetricMeasure> laws = {bern(1.0),
                                              symmetrize(AtomicMeasure::from_atoms({{0.2, 0.4}, {1.0, 0.6}})),
                                              symmetrize(AtomicMeasure::from_atoms({{0.5, 0.5}, {1.0, 0.5}}))};
  for (const SymmetricMeasure& mu : laws) {
    const ConvolvedMeasure c(mu, mu);
    double prev = INFINITY;
    for (int k = 0; k <= 20; ++k) {
      const SubordinationResult r = c.subordination(HalfPlanePoint::on_axis(std::ldexp(1.0, -k)));
      CHECK(r.omega1.imag() <= prev + 1e-12);
      CHECK(r.omega2.imag() <= prev + 1e-12);
      prev = std::min(r.omega1.imag(), r.omega2.imag());
    }
  }
}

TEST_CASE("omega need not be monotone for distinct laws") {
  // 0 is in the bulk and the solution is accurate, yet |omega_1| grows as eta falls.
  const SymmetricMeasure mu1 = symmetrize(AtomicMeasure::from_atoms({{0.2, 0.4}, {1.0, 0.6}}));
  const SymmetricMeasure mu2 = bern(0.7);
  const ConvolvedMeasure c(mu1, mu2);
  REQUIRE(c.bulk_test(0.0));
  const SubordinationResult hi = solve(mu1, mu2, HalfPlanePoint::on_axis(0.25));
  const SubordinationResult lo = solve(mu1, mu2, HalfPlanePoint::on_axis(1.0 / 64.0));
  CHECK(independent_residual(mu1, mu2, {0.0, 0.25}, hi) < 1e-12);
  CHECK(independent_residual(mu1, mu2, {0.0, 1.0 / 64.0}, lo) < 1e-12);
  CHECK(lo.omega1.imag() > hi.omega1.imag() + 0.1);
}

TEST_CASE("boundary values") {
  const ConvolvedMeasure arcsine(bern(1.0), bern(1.0));
  const auto [b1, b2] = arcsine.boundary_omegas();
  CHECK(b1.classified == BoundaryClass::finite_positive);
  CHECK(b1.value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(b2.value == doctest::Approx(1.0).epsilon(1e-6));

  // Atoms of mass 1/2 at zero in both laws: both boundary values vanish.
  const SymmetricMeasure half_zero = symmetrize(AtomicMeasure::from_atoms({{0.0, 0.5}, {2.0, 0.5}}));
  const ConvolvedMeasure singular(half_zero, half_zero);
  CHECK(singular.boundary_omega(1).classified == BoundaryClass::zero);
  CHECK(singular.boundary_omega(2).classified == BoundaryClass::zero);

  // Magnitudes 3 and 1: the support is +-[2, 4], so 0 lies outside it and one
  // boundary value is infinite.
  const ConvolvedMeasure gap(bern(3.0), bern(1.0));
  const auto [g1, g2] = gap.boundary_omegas();
  CHECK((g1.classified == BoundaryClass::infinite) != (g2.classified == BoundaryClass::infinite));
  CHECK(gap.density_at(0.0) < 1e-9);
}

TEST_CASE("the gap at zero is visible in the matrix model") {
  const int n = 400;
  auto rng = randmat::stream(99, 0, randmat::Role::Q);
  const Eigen::MatrixXcd q = randmat::haar_unitary(n, rng);
  Eigen::VectorXd h1(n), h2(n);
  for (int i = 0; i < n; ++i) {
    h1(i) = i % 2 == 0 ? 3.0 : -3.0;
    h2(i) = i < n / 2 ? 1.0 : -1.0;
  }
  const Eigen::MatrixXcd m = Eigen::MatrixXcd(h1.cast<cplx>().asDiagonal()) + q * h2.cast<cplx>().asDiagonal() * q.adjoint();
  const Eigen::VectorXd ev = linalg::hermitian_eigenvalues(m);
  CHECK(ev.cwiseAbs().minCoeff() > 1.5);
}

TEST_CASE("density and bulk") {
  const ConvolvedMeasure arcsine(bern(1.0), bern(1.0));
  CHECK(arcsine.density_at(0.0) == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-4));
  for (double x : {0.5, 1.3, -1.7}) {
    CHECK(arcsine.density_at(x) ==
          doctest::Approx(1.0 / (std::numbers::pi * std::sqrt(4.0 - x * x))).epsilon(1e-4));
  }
  CHECK(std::abs(arcsine.density_at(3.0)) < 1e-6);
  CHECK(std::abs(arcsine.density_at(20.0)) < 1e-9);
  CHECK(arcsine.bulk_test(0.0));
  CHECK_FALSE(arcsine.bulk_test(2.5));

  const SymmetricMeasure half_zero = symmetrize(AtomicMeasure::from_atoms({{0.0, 0.5}, {2.0, 0.5}}));
  const ConvolvedMeasure singular(half_zero, half_zero);
  CHECK_FALSE(singular.bulk_test(0.0));
  CHECK(singular.atom_mass_at(0.0) == doctest::Approx(0.0));
  const SymmetricMeasure heavy_zero = symmetrize(AtomicMeasure::from_atoms({{0.0, 0.6}, {2.0, 0.4}}));
  CHECK(ConvolvedMeasure(heavy_zero, heavy_zero).atom_mass_at(0.0) == doctest::Approx(0.2).epsilon(1e-6));

  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const ConvolvedMeasure c(random_symmetric(rng), random_symmetric(rng));
    for (double x = -6.0; x <= 6.0; x += 0.37) CHECK(c.density_at(x) >= -1e-9);
  }
}

TEST_CASE("solver settings json") {
  SolverSettings s;
  s.tolerance = 1e-11;
  s.ladder_last = 30;
  const nlohmann::json j = s;
  const SolverSettings back = j.get<SolverSettings>();
  CHECK(back.tolerance == 1e-11);
  CHECK(back.ladder_last == 30);
}
