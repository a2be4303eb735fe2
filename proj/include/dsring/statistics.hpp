#pragma once

#include <functional>
#include <random>
#include <vector>

#include "dsring/brown.hpp"

namespace dsring::stats {

/// Squared energy distance D^2 = 2E|X-Y| - E|X-X'| - E|Y-Y'| between two
/// planar clouds, with the within-sample terms as U-statistics.
double energy_distance(const std::vector<cplx>& x, const std::vector<cplx>& y, int threads = 1);

/// sup |F_n - F| for samples against a continuous CDF.
double ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Discretized planar law: point masses at sub-cell centers (each grid cell
/// split 4 x 4) plus the Brown atoms. Negative cell masses are clamped to 0
/// and the total renormalized to 1.
struct PlanarMass {
  std::vector<cplx> points;
  std::vector<double> weights;
};

PlanarMass discretize(const BrownField& field, int subdivisions = 4);

/// CDF of a weighted sample, as a step function of the projected coordinate.
class WeightedCdf {
 public:
  WeightedCdf(std::vector<double> values, const std::vector<double>& weights);
  double operator()(double x) const;       // mass of {v <= x}
  double left(double x) const;             // mass of {v < x}

 private:
  std::vector<double> values_;
  std::vector<double> cumulative_;
};

/// KS distance between the empirical law of f(sample) and of f under the
/// discretized field, checking both sides of every jump.
double ks_against_planar(const std::vector<cplx>& sample, const PlanarMass& mass,
                         const std::function<double(cplx)>& projection);

double radial_ks(const std::vector<cplx>& sample, const PlanarMass& mass);
/// Angles in (-pi, pi].
double angular_ks(const std::vector<cplx>& sample, const PlanarMass& mass);

/// i.i.d. draws from the field: a cell by inverse CDF on the clamped cell
/// masses, then a uniform point in that cell; atoms land on their node.
std::vector<cplx> sample_from_field(const BrownField& field, std::size_t count, std::mt19937_64& rng);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace dsring::stats
