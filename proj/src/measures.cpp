#include "dsring/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dsring/linalg.hpp"

namespace dsring {

namespace {

constexpr double kMassTolerance = 1e-12;
constexpr double kMergeTolerance = 1e-12;

std::vector<Atom> sort_and_merge(std::vector<Atom> atoms) {
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.location < b.location; });
  double bound = 0.0;
  for (const auto& a : atoms) bound = std::max(bound, std::abs(a.location));
  const double gap = kMergeTolerance * bound;
  std::vector<Atom> merged;
  merged.reserve(atoms.size());
  for (const auto& a : atoms) {
    if (!merged.empty() && a.location - merged.back().location <= gap) {
      Atom& m = merged.back();
      const double w = m.weight + a.weight;
      m.location = (m.location * m.weight + a.location * a.weight) / w;
      m.weight = w;
    } else {
      merged.push_back(a);
    }
  }
  return merged;
}

void validate_atoms(const std::vector<Atom>& atoms) {
  if (atoms.empty()) throw DomainError("atomic measure needs at least one atom");
  for (const auto& a : atoms) {
    if (!std::isfinite(a.location)) throw DomainError("atom location is not finite");
    if (!(a.weight > 0.0) || !std::isfinite(a.weight)) throw DomainError("atom weight must be positive");
  }
}

}  // namespace

AtomicMeasure AtomicMeasure::from_atoms(std::vector<Atom> atoms) {
  validate_atoms(atoms);
  double total = 0.0;
  for (const auto& a : atoms) total += a.weight;
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw DomainError("atom weights sum to " + std::to_string(total) + ", expected 1");
  }
  AtomicMeasure mu;
  mu.atoms_ = sort_and_merge(std::move(atoms));
  double acc = 0.0;
  mu.cumulative_.reserve(mu.atoms_.size());
  for (const auto& a : mu.atoms_) {
    mu.support_bound_ = std::max(mu.support_bound_, std::abs(a.location));
    acc += a.weight;
    mu.cumulative_.push_back(std::min(acc, 1.0));
  }
  return mu;
}

AtomicMeasure AtomicMeasure::normalized(std::vector<Atom> atoms) {
  validate_atoms(atoms);
  double total = 0.0;
  for (const auto& a : atoms) total += a.weight;
  for (auto& a : atoms) a.weight /= total;
  // Renormalized sums can drift by an ulp or two; pin the last weight.
  double partial = 0.0;
  for (std::size_t i = 0; i + 1 < atoms.size(); ++i) partial += atoms[i].weight;
  if (atoms.size() > 1 && 1.0 - partial > 0.0) atoms.back().weight = 1.0 - partial;
  return from_atoms(std::move(atoms));
}

AtomicMeasure AtomicMeasure::dirac(double location) { return from_atoms({{location, 1.0}}); }

AtomicMeasure AtomicMeasure::empirical(std::span<const double> samples) {
  if (samples.empty()) throw DomainError("empirical law of an empty sample");
  const double w = 1.0 / static_cast<double>(samples.size());
  std::vector<Atom> atoms;
  atoms.reserve(samples.size());
  for (double s : samples) atoms.push_back({s, w});
  return normalized(std::move(atoms));
}

double AtomicMeasure::mass_at(double t) const {
  auto it = std::lower_bound(atoms_.begin(), atoms_.end(), t,
                             [](const Atom& a, double x) { return a.location < x; });
  if (it != atoms_.end() && it->location == t) return it->weight;
  return 0.0;
}

double AtomicMeasure::cdf(double x) const {
  auto it = std::upper_bound(atoms_.begin(), atoms_.end(), x,
                             [](double v, const Atom& a) { return v < a.location; });
  const auto n = it - atoms_.begin();
  return n == 0 ? 0.0 : cumulative_[static_cast<std::size_t>(n - 1)];
}

double AtomicMeasure::cdf_left(double x) const {
  auto it = std::lower_bound(atoms_.begin(), atoms_.end(), x,
                             [](const Atom& a, double v) { return a.location < v; });
  const auto n = it - atoms_.begin();
  return n == 0 ? 0.0 : cumulative_[static_cast<std::size_t>(n - 1)];
}

double AtomicMeasure::abs_moment(double p) const {
  double acc = 0.0;
  for (const auto& a : atoms_) acc += a.weight * std::pow(std::abs(a.location), p);
  return acc;
}

double AtomicMeasure::inverse_square_moment() const {
  double acc = 0.0;
  for (const auto& a : atoms_) {
    if (a.location == 0.0) return std::numeric_limits<double>::infinity();
    acc += a.weight / (a.location * a.location);
  }
  return acc;
}

HalfPlanePoint::HalfPlanePoint(double re_, double im_) : re(re_), im(im_) {
  if (!(im_ > 0.0) || !std::isfinite(re_) || !std::isfinite(im_)) {
    throw DomainError("point is not in the upper half plane");
  }
}

SymmetricMeasure::SymmetricMeasure(AtomicMeasure half) : half_(std::move(half)) {
  if (!half_.nonnegative()) throw DomainError("symmetrization needs a law on [0, inf)");
}

AtomicMeasure SymmetricMeasure::full() const {
  std::vector<Atom> atoms;
  atoms.reserve(2 * half_.size());
  for (const auto& a : half_.atoms()) {
    if (a.location == 0.0) {
      atoms.push_back(a);
    } else {
      atoms.push_back({-a.location, 0.5 * a.weight});
      atoms.push_back({a.location, 0.5 * a.weight});
    }
  }
  return AtomicMeasure::normalized(std::move(atoms));
}

double SymmetricMeasure::cdf(double x) const {
  // mu~((-inf, x]) = (mu((-inf, x]) + mu([-x, inf))) / 2
  if (x >= 0.0) return 0.5 * (1.0 + half_.cdf(x));
  return 0.5 * (1.0 - half_.cdf_left(-x));
}

double SymmetricMeasure::cdf_left(double x) const {
  if (x > 0.0) return 0.5 * (1.0 + half_.cdf_left(x));
  return 0.5 * (1.0 - half_.cdf(-x));
}

double SymmetricMeasure::axis_kernel(double y) const {
  const double y2 = y * y;
  double acc = 0.0;
  for (const auto& a : half_.atoms()) acc += a.weight / (y2 + a.location * a.location);
  return acc;
}

double SymmetricMeasure::axis_kernel_derivative(double y) const {
  const double y2 = y * y;
  double acc = 0.0;
  for (const auto& a : half_.atoms()) {
    const double d = y2 + a.location * a.location;
    acc += a.weight / (d * d);
  }
  return -2.0 * y * acc;
}

cplx cauchy_transform(const AtomicMeasure& mu, HalfPlanePoint z) {
  const cplx zz = z.value();
  cplx acc = 0.0;
  for (const auto& a : mu.atoms()) acc += a.weight / (zz - a.location);
  return acc;
}

cplx cauchy_transform(const SymmetricMeasure& mu, HalfPlanePoint z) {
  if (z.re == 0.0) return {0.0, -z.im * mu.axis_kernel(z.im)};
  const cplx zz = z.value();
  cplx acc = 0.0;
  for (const auto& a : mu.half().atoms()) acc += a.weight / ((zz - a.location) * (zz + a.location));
  return zz * acc;
}

cplx cauchy_derivative(const SymmetricMeasure& mu, cplx z) {
  const cplx z2 = z * z;
  cplx acc = 0.0;
  for (const auto& a : mu.half().atoms()) {
    const double t2 = a.location * a.location;
    const cplx d = (z - a.location) * (z + a.location);
    acc += a.weight * (z2 + t2) / (d * d);
  }
  return -acc;
}

cplx f_transform(const AtomicMeasure& mu, HalfPlanePoint z) { return 1.0 / cauchy_transform(mu, z); }

cplx f_transform(const SymmetricMeasure& mu, HalfPlanePoint z) {
  const cplx g = cauchy_transform(mu, z);
  if (z.re == 0.0) return {0.0, -1.0 / g.imag()};
  return 1.0 / g;
}

SymmetricMeasure symmetrize(const AtomicMeasure& mu) {
  if (!mu.nonnegative()) throw DomainError("symmetrize: negative atom");
  return SymmetricMeasure(mu);
}

namespace {

// sup over y of Fa(y) - Fb(y + eps); the difference is piecewise constant and
// right-continuous with breaks at the atoms of a and at (atoms of b) - eps.
double one_sided_excess(const AtomicMeasure& a, const AtomicMeasure& b, double eps) {
  double best = 0.0;
  for (const auto& at : a.atoms()) best = std::max(best, a.cdf(at.location) - b.cdf(at.location + eps));
  for (const auto& bt : b.atoms()) best = std::max(best, a.cdf(bt.location - eps) - b.cdf(bt.location));
  return best;
}

bool within_levy_band(const AtomicMeasure& mu, const AtomicMeasure& nu, double eps) {
  return one_sided_excess(mu, nu, eps) <= eps && one_sided_excess(nu, mu, eps) <= eps;
}

}  // namespace

double levy_distance(const AtomicMeasure& mu, const AtomicMeasure& nu) {
  if (within_levy_band(mu, nu, 0.0)) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (within_levy_band(mu, nu, mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double levy_distance(const SymmetricMeasure& mu, const SymmetricMeasure& nu) {
  return levy_distance(mu.full(), nu.full());
}

AtomicMeasure singular_value_law(const Eigen::MatrixXcd& matrix) {
  const Eigen::VectorXd s = linalg::singular_values(matrix);
  std::vector<double> v(s.data(), s.data() + s.size());
  return AtomicMeasure::empirical(v);
}

namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
constexpr unsigned kMaxDepth = 12;
constexpr double kRelTolerance = 1e-11;
constexpr double kPanelAbsTolerance = 1e-13;

// Adaptive Gauss-Kronrod on [a, b] to relative 1e-11 or absolute 1e-13,
// whichever is looser. The panel is mapped onto [-1, 1] first: the installed
// Boost compares unscaled subinterval errors against scaled tolerances, which
// on narrow panels recurses to full depth.
template <class F>
double integrate_panel(const F& f, double a, double b, double* error) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  auto g = [&](double x) { return half * f(mid + half * x); };
  double l1 = 0.0;
  const double coarse = Kronrod::integrate(g, -1.0, 1.0, 0, 0.0, error, &l1);
  if (*error <= kPanelAbsTolerance) return coarse;
  const double tol = std::max(kRelTolerance, kPanelAbsTolerance / std::max(l1, 1e-300));
  return Kronrod::integrate(g, -1.0, 1.0, kMaxDepth, tol, error);
}

double axis_cauchy(const AxisExcessFn& excess, double eta) { return -1.0 / (eta + excess(eta)); }

// Tail of the axis integral on (0, eta_t] from a power-law fit through the
// two lowest ladder values. Returns NaN to signal an atom at zero.
double axis_tail(const AxisExcessFn& excess, double eta_t) {
  const double g1 = axis_cauchy(excess, eta_t);
  const double g2 = axis_cauchy(excess, 2.0 * eta_t);
  if (g1 == 0.0) return 0.0;
  double p = std::log2(g2 / g1);
  if (!std::isfinite(p)) p = 0.0;
  // |G(i eta)| ~ m / eta with m the mass at zero: exponent -1.
  if (p <= -0.95 && eta_t * std::abs(g1) > 1e-6) return std::numeric_limits<double>::quiet_NaN();
  p = std::clamp(p, -0.9, 2.0);
  return eta_t * g1 / (p + 1.0);
}

}  // namespace

double axis_excess(const SymmetricMeasure& mu, double eta) {
  const double y2 = eta * eta;
  double k = 0.0, q = 0.0;
  for (const auto& a : mu.half().atoms()) {
    const double t2 = a.location * a.location;
    const double pk = a.weight / (y2 + t2);
    k += pk;
    q += pk * t2;
  }
  return q / (eta * k);
}

double axis_integral_unit(const AxisExcessFn& excess, const LogMomentSettings& settings) {
  auto g = [&](double eta) { return axis_cauchy(excess, eta); };
  double total = 0.0;
  double error_total = 0.0;
  double upper = 1.0;
  while (upper > settings.eta_floor) {
    const double lower = 0.5 * upper;
    double err = 0.0;
    total += integrate_panel(g, lower, upper, &err);
    error_total += err;
    upper = lower;
  }
  const double tail = axis_tail(excess, upper);
  if (std::isnan(tail)) return -std::numeric_limits<double>::infinity();
  total += tail;
  if (!(error_total <= settings.abs_tolerance) || !std::isfinite(total)) {
    throw NumericError("axis quadrature did not reach tolerance", error_total);
  }
  return total;
}

double log_moment(const SymmetricMeasure& mu, const LogMomentSettings& settings) {
  if (mu.mass_at_zero() > 0.0) return -std::numeric_limits<double>::infinity();
  double shifted = 0.0;
  for (const auto& a : mu.half().atoms()) shifted += a.weight * 0.5 * std::log1p(a.location * a.location);
  return shifted + axis_integral_unit([&](double eta) { return axis_excess(mu, eta); }, settings);
}

double log_moment_from_excess(const AxisExcessFn& excess, const LogMomentSettings& settings) {
  const double lower = axis_integral_unit(excess, settings);
  if (std::isinf(lower)) return lower;
  // Integral over [1, inf) of Im G(i eta) + 1/eta = e / (eta (eta + e)); with
  // eta = 1/s this is the integral over (0, 1] of e / (1 + e s). The
  // integrand is ~1/s for s above 1/support_bound and ~m2 s below it, so the
  // panels are geometric in s until two consecutive ones are negligible.
  auto upper_integrand = [&](double s) {
    const double e = excess(1.0 / s);
    return e / (1.0 + e * s);
  };
  double upper = 0.0;
  double error_total = 0.0;
  double right = 1.0;
  int quiet = 0;
  for (int panel = 0; panel < 400 && quiet < 2; ++panel) {
    double err = 0.0;
    const double v = integrate_panel(upper_integrand, 0.5 * right, right, &err);
    upper += v;
    error_total += err;
    right *= 0.5;
    quiet = std::abs(v) < 1e-14 ? quiet + 1 : 0;
  }
  // linear behaviour below the last panel
  upper += 0.5 * right * upper_integrand(right);
  if (!(error_total <= settings.abs_tolerance) || !std::isfinite(upper) || quiet < 2) {
    throw NumericError("log|u - i| quadrature did not reach tolerance", error_total);
  }
  return upper + lower;
}

void to_json(nlohmann::json& j, const AtomicMeasure& mu) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : mu.atoms()) atoms.push_back({a.location, a.weight});
  j = nlohmann::json{{"atoms", atoms}};
}

void from_json(const nlohmann::json& j, AtomicMeasure& mu) {
  if (!j.contains("atoms") || !j.at("atoms").is_array()) throw DomainError("measure JSON needs an \"atoms\" array");
  std::vector<Atom> atoms;
  double previous = -std::numeric_limits<double>::infinity();
  for (const auto& pair : j.at("atoms")) {
    if (!pair.is_array() || pair.size() != 2) throw DomainError("each atom must be a [location, weight] pair");
    const double t = pair[0].get<double>();
    const double w = pair[1].get<double>();
    if (!(t > previous)) throw DomainError("atom locations must be strictly increasing");
    previous = t;
    atoms.push_back({t, w});
  }
  mu = AtomicMeasure::from_atoms(std::move(atoms));
}

}  // namespace dsring
