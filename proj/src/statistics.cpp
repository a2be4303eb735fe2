#include "dsring/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dsring/parallel.hpp"

namespace dsring::stats {

namespace {

// Sum over i of sum over j in [lo(i), m) of |x_i - y_j|, rows split across threads.
template <class Lower>
double pair_sum(const std::vector<cplx>& x, const std::vector<cplx>& y, int threads, Lower lo) {
  std::vector<double> rows(x.size(), 0.0);
  parallel_for(static_cast<int>(x.size()), threads, [&](int i) {
    double acc = 0.0;
    const cplx xi = x[static_cast<std::size_t>(i)];
    for (std::size_t j = lo(static_cast<std::size_t>(i)); j < y.size(); ++j) acc += std::abs(xi - y[j]);
    rows[static_cast<std::size_t>(i)] = acc;
  });
  return std::accumulate(rows.begin(), rows.end(), 0.0);
}

// sup |F_a - F_b| for two weighted step laws; both are right-continuous, so
// checking the union of jump points from the right suffices.
double weighted_ks(std::vector<std::pair<double, double>> a, std::vector<std::pair<double, double>> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double fa = 0.0, fb = 0.0, sup = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    const double x = std::min(i < a.size() ? a[i].first : INFINITY, j < b.size() ? b[j].first : INFINITY);
    while (i < a.size() && a[i].first == x) fa += a[i++].second;
    while (j < b.size() && b[j].first == x) fb += b[j++].second;
    sup = std::max(sup, std::abs(fa - fb));
  }
  return std::min(sup, 1.0);
}

std::vector<std::pair<double, double>> uniform_weights(const std::vector<double>& v) {
  std::vector<std::pair<double, double>> out;
  out.reserve(v.size());
  const double w = 1.0 / static_cast<double>(v.size());
  for (double x : v) out.emplace_back(x, w);
  return out;
}

}  // namespace

double energy_distance(const std::vector<cplx>& x, const std::vector<cplx>& y, int threads) {
  if (x.size() < 2 || y.size() < 2) throw DomainError("energy_distance needs at least two points per cloud");
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  const double cross = pair_sum(x, y, threads, [](std::size_t) { return std::size_t{0}; }) / (n * m);
  const double within_x = 2.0 * pair_sum(x, x, threads, [](std::size_t i) { return i + 1; }) / (n * (n - 1.0));
  const double within_y = 2.0 * pair_sum(y, y, threads, [](std::size_t i) { return i + 1; }) / (m * (m - 1.0));
  return 2.0 * cross - within_x - within_y;
}

double ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw DomainError("ks_one_sample: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    sup = std::max({sup, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return sup;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  return weighted_ks(uniform_weights(a), uniform_weights(b));
}

PlanarMass discretize(const BrownField& field, int subdivisions) {
  if (subdivisions < 1) throw DomainError("discretize needs at least one subdivision");
  const GridSpec& g = field.grid;
  const double h = g.spacing;
  const double sub = h / subdivisions;
  PlanarMass out;
  double total = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double d = field.density[g.index(i, j)];
      if (!(d > 0.0)) continue;
      const double w = d * sub * sub;
      const cplx c = g.node(i, j);
      for (int b = 0; b < subdivisions; ++b) {
        for (int a = 0; a < subdivisions; ++a) {
          out.points.push_back(c + cplx(-0.5 * h + (a + 0.5) * sub, -0.5 * h + (b + 0.5) * sub));
          out.weights.push_back(w);
          total += w;
        }
      }
    }
  }
  for (const BrownAtom& atom : field.atoms) {
    if (!(atom.mass > 0.0)) continue;
    out.points.push_back(g.node(atom.node));
    out.weights.push_back(atom.mass);
    total += atom.mass;
  }
  if (!(total > 0.0)) throw DomainError("field carries no positive mass");
  for (double& w : out.weights) w /= total;
  return out;
}

WeightedCdf::WeightedCdf(std::vector<double> values, const std::vector<double>& weights) {
  if (values.size() != weights.size() || values.empty()) throw DomainError("WeightedCdf: bad input sizes");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return values[l] < values[r]; });
  double acc = 0.0;
  for (std::size_t k : order) {
    acc += weights[k];
    values_.push_back(values[k]);
    cumulative_.push_back(acc);
  }
  for (double& c : cumulative_) c /= acc;
}

double WeightedCdf::operator()(double x) const {
  const auto it = std::upper_bound(values_.begin(), values_.end(), x);
  return it == values_.begin() ? 0.0 : cumulative_[static_cast<std::size_t>(it - values_.begin()) - 1];
}

double WeightedCdf::left(double x) const {
  const auto it = std::lower_bound(values_.begin(), values_.end(), x);
  return it == values_.begin() ? 0.0 : cumulative_[static_cast<std::size_t>(it - values_.begin()) - 1];
}

double ks_against_planar(const std::vector<cplx>& sample, const PlanarMass& mass,
                         const std::function<double(cplx)>& projection) {
  if (sample.empty()) throw DomainError("ks_against_planar: empty sample");
  std::vector<std::pair<double, double>> a;
  a.reserve(sample.size());
  const double w = 1.0 / static_cast<double>(sample.size());
  for (const cplx& s : sample) a.emplace_back(projection(s), w);
  std::vector<std::pair<double, double>> b;
  b.reserve(mass.points.size());
  for (std::size_t k = 0; k < mass.points.size(); ++k) b.emplace_back(projection(mass.points[k]), mass.weights[k]);
  return weighted_ks(std::move(a), std::move(b));
}

double radial_ks(const std::vector<cplx>& sample, const PlanarMass& mass) {
  return ks_against_planar(sample, mass, [](cplx z) { return std::abs(z); });
}

double angular_ks(const std::vector<cplx>& sample, const PlanarMass& mass) {
  return ks_against_planar(sample, mass, [](cplx z) { return std::arg(z); });
}

std::vector<cplx> sample_from_field(const BrownField& field, std::size_t count, std::mt19937_64& rng) {
  const GridSpec& g = field.grid;
  std::vector<double> cumulative;
  std::vector<std::size_t> node;
  std::vector<bool> is_atom;
  double acc = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double d = field.density[k];
    if (!(d > 0.0)) continue;
    acc += d * g.spacing * g.spacing;
    cumulative.push_back(acc);
    node.push_back(k);
    is_atom.push_back(false);
  }
  for (const BrownAtom& atom : field.atoms) {
    if (!(atom.mass > 0.0)) continue;
    acc += atom.mass;
    cumulative.push_back(acc);
    node.push_back(atom.node);
    is_atom.push_back(true);
  }
  if (!(acc > 0.0)) throw DomainError("field carries no positive mass");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<cplx> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const double u = unit(rng) * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    const auto k = static_cast<std::size_t>(it - cumulative.begin());
    cplx p = g.node(node[k]);
    if (!is_atom[k]) {
      const double dx = unit(rng) - 0.5;
      const double dy = unit(rng) - 0.5;
      p += g.spacing * cplx(dx, dy);
    }
    out.push_back(p);
  }
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("loglog_slope needs two or more matching points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0 && y[k] > 0.0)) throw DomainError("loglog_slope needs positive data");
    mx += std::log(x[k]) / n;
    my += std::log(y[k]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace dsring::stats
