#include "dsring/subordination.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace dsring {

void to_json(nlohmann::json& j, const SolverSettings& s) {
  j = nlohmann::json{{"tolerance", s.tolerance},
                     {"max_iter", s.max_iter},
                     {"damping", s.damping},
                     {"ladder_first", s.ladder_first},
                     {"ladder_last", s.ladder_last},
                     {"zero_threshold", s.zero_threshold},
                     {"infinite_threshold", s.infinite_threshold},
                     {"divergence_floor", s.divergence_floor},
                     {"divergence_ratio", s.divergence_ratio}};
}

void from_json(const nlohmann::json& j, SolverSettings& s) {
  s.tolerance = j.value("tolerance", s.tolerance);
  s.max_iter = j.value("max_iter", s.max_iter);
  s.damping = j.value("damping", s.damping);
  s.ladder_first = j.value("ladder_first", s.ladder_first);
  s.ladder_last = j.value("ladder_last", s.ladder_last);
  s.zero_threshold = j.value("zero_threshold", s.zero_threshold);
  s.infinite_threshold = j.value("infinite_threshold", s.infinite_threshold);
  s.divergence_floor = j.value("divergence_floor", s.divergence_floor);
  s.divergence_ratio = j.value("divergence_ratio", s.divergence_ratio);
  if (!(s.tolerance > 0.0) || s.max_iter < 1 || !(s.damping > 0.0 && s.damping <= 1.0) ||
      s.ladder_first < 1 || s.ladder_last < s.ladder_first + 5) {
    throw DomainError("invalid solver settings");
  }
}

const char* to_string(BoundaryClass c) {
  switch (c) {
    case BoundaryClass::finite_positive: return "finite_positive";
    case BoundaryClass::zero: return "zero";
    case BoundaryClass::infinite: return "infinite";
  }
  return "?";
}

namespace {

// ---------------------------------------------------------------------------
// Imaginary axis. With w = iy and a symmetric law with half atoms (t, p):
//   k(y) = sum p / (y^2 + t^2),  q(y) = sum p t^2 / (y^2 + t^2)
//   G(iy) = -i y k(y),  F(iy) = i / (y k(y)),  F(iy) - iy = i q(y) / (y k(y)).
// Writing the excess e(y) = q / (y k) avoids the cancellation in F - w at
// large y.

struct AxisExcess {
  double e;
  double de;
};

AxisExcess excess_with_derivative(const SymmetricMeasure& mu, double y) {
  const double y2 = y * y;
  double k = 0.0, q = 0.0, dk = 0.0, dq = 0.0;
  for (const auto& a : mu.half().atoms()) {
    const double t2 = a.location * a.location;
    const double inv = 1.0 / (y2 + t2);
    const double pk = a.weight * inv;
    k += pk;
    q += pk * t2;
    dk += pk * inv;
    dq += pk * inv * t2;
  }
  dk *= -2.0 * y;
  dq *= -2.0 * y;
  const double yk = y * k;
  const double e = q / yk;
  const double de = (dq * yk - q * (k + y * dk)) / (yk * yk);
  return {e, de};
}

struct AxisEval {
  double r;   // psi(y) - y
  double dr;
  double v;   // Im omega2
  double e1;  // Im F1(omega1) - y
  double e2;  // Im F2(omega2) - v
};

AxisEval axis_eval(const SymmetricMeasure& mu1, const SymmetricMeasure& mu2, double eta, double y) {
  const AxisExcess a1 = excess_with_derivative(mu1, y);
  const double v = a1.e + eta;
  const AxisExcess a2 = excess_with_derivative(mu2, v);
  return {a2.e + eta - y, a2.de * a1.de - 1.0, v, a1.e, a2.e};
}

SubordinationResult solve_on_axis(const SymmetricMeasure& mu1, const SymmetricMeasure& mu2, double eta,
                                  const SolverSettings& settings, std::optional<double> hint) {
  int iterations = 0;
  double lo = eta;
  double hi = std::max(2.0 * eta, hint ? 2.0 * *hint : 1.0 + eta);
  AxisEval at_hi = axis_eval(mu1, mu2, eta, hi);
  ++iterations;
  while (at_hi.r > 0.0) {
    lo = hi;
    hi *= 4.0;
    at_hi = axis_eval(mu1, mu2, eta, hi);
    if (++iterations > 600 || !std::isfinite(hi)) {
      throw NumericError("subordination fixed point not bracketed on the axis", at_hi.r);
    }
  }
  double y = hint ? std::clamp(*hint, lo, hi) : std::sqrt(lo * hi);
  if (y <= lo || y >= hi) y = 0.5 * (lo + hi);
  AxisEval cur = axis_eval(mu1, mu2, eta, y);
  double best_r = std::abs(cur.r);
  double best_y = y;
  AxisEval best = cur;
  // r = e2 + eta - y is a sum of three positive terms; measuring the residual
  // against them keeps y accurate when it is tiny (exterior points).
  auto target = [&](const AxisEval& ev, double yy) {
    return settings.tolerance * (eta + ev.e2 + yy);
  };
  while (true) {
    ++iterations;
    if (std::abs(cur.r) < best_r || (std::abs(cur.r) == best_r && y != best_y)) {
      best_r = std::abs(cur.r);
      best_y = y;
      best = cur;
    }
    if (cur.r == 0.0 || std::abs(cur.r) <= 0.01 * target(cur, y)) break;
    if (cur.r > 0.0) {
      lo = y;
    } else {
      hi = y;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    if (iterations > settings.max_iter) break;
    double next = y - cur.r / cur.dr;
    if (!(next > lo && next < hi) || cur.dr >= 0.0) {
      next = (hi > 4.0 * lo) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    }
    y = next;
    cur = axis_eval(mu1, mu2, eta, y);
  }
  if (best_r > target(best, best_y)) {
    throw NumericError("subordination solve on the axis did not converge", best_r);
  }
  SubordinationResult out;
  out.omega1 = {0.0, best_y};
  out.omega2 = {0.0, best.v};
  out.residual = best_r;
  out.iterations = iterations;
  return out;
}

// ---------------------------------------------------------------------------
// Off the axis. E(w) = F(w) - w = -Q(w)/G(w) with Q = sum p t^2/(w^2 - t^2).

struct Excess {
  cplx e;
  cplx de;
};

Excess excess(const SymmetricMeasure& mu, cplx w) {
  const cplx w2 = w * w;
  cplx kk = 0.0, q = 0.0, dsum = 0.0;
  for (const auto& a : mu.half().atoms()) {
    const double t2 = a.location * a.location;
    const cplx d = (w - a.location) * (w + a.location);
    const cplx inv = 1.0 / d;
    kk += a.weight * inv;
    q += a.weight * t2 * inv;
    dsum += a.weight * (w2 + t2) * inv * inv;
  }
  const cplx g = w * kk;
  const cplx dg = -dsum;
  const cplx e = -q / g;
  const cplx df = -dg / (g * g);
  return {e, df - 1.0};
}

struct GeneralEval {
  cplx h;  // phi(w) - w
  cplx dh;
  cplx v;  // omega2
  cplx f1;
};

GeneralEval general_eval(const SymmetricMeasure& mu1, const SymmetricMeasure& mu2, cplx z, cplx w) {
  const Excess a1 = excess(mu1, w);
  const cplx v = a1.e + z;
  const Excess a2 = excess(mu2, v);
  return {a2.e + z - w, a2.de * a1.de - 1.0, v, a1.e + w};
}

SubordinationResult solve_general(const SymmetricMeasure& mu1, const SymmetricMeasure& mu2, cplx z,
                                  const SolverSettings& settings, cplx w, int& iterations) {
  auto target = [&](const GeneralEval& ev) {
    return settings.tolerance * (1.0 + std::abs(z) + std::abs(ev.f1));
  };
  GeneralEval cur = general_eval(mu1, mu2, z, w);
  double res = std::abs(cur.h);
  double theta = settings.damping;
  while (res > 0.01 * target(cur)) {
    if (++iterations > settings.max_iter) break;
    bool accepted = false;
    const cplx step = -cur.h / cur.dh;
    double t = 1.0;
    for (int k = 0; k < 40 && std::isfinite(std::abs(step)); ++k, t *= 0.5) {
      const cplx trial = w + t * step;
      if (!(trial.imag() > 0.0)) continue;
      const GeneralEval ev = general_eval(mu1, mu2, z, trial);
      const double r = std::abs(ev.h);
      if (std::isfinite(r) && r < res) {
        w = trial;
        cur = ev;
        res = r;
        accepted = true;
        break;
      }
    }
    if (accepted) continue;
    // Damped fixed-point step: phi maps the half plane into itself.
    const cplx phi = cur.h + w;
    const cplx trial = (1.0 - theta) * w + theta * phi;
    const GeneralEval ev = general_eval(mu1, mu2, z, trial);
    const double r = std::abs(ev.h);
    if (!(r < res)) theta = std::max(0.5 * theta, 1e-6);
    if (r == res && trial == w) break;
    w = trial;
    cur = ev;
    res = r;
  }
  if (!(res <= target(cur))) {
    throw NumericError("subordination solve did not converge", res);
  }
  SubordinationResult out;
  out.omega1 = w;
  out.omega2 = cur.v;
  out.residual = res + std::abs(w + cur.v - z - cur.f1);
  out.iterations = iterations;
  return out;
}

void require_not_point_mass(const SymmetricMeasure& mu1, const SymmetricMeasure& mu2) {
  if (mu1.is_point_mass() || mu2.is_point_mass()) {
    throw DomainError("subordination needs laws that are not a single point mass");
  }
}

}  // namespace

SubordinationResult solve(const SymmetricMeasure& mu1, const SymmetricMeasure& mu2, HalfPlanePoint z,
                          const SolverSettings& settings, std::optional<cplx> warm_start) {
  require_not_point_mass(mu1, mu2);
  if (z.re == 0.0) {
    std::optional<double> hint;
    if (warm_start && warm_start->imag() > 0.0) hint = warm_start->imag();
    return solve_on_axis(mu1, mu2, z.im, settings, hint);
  }
  int iterations = 0;
  if (warm_start && warm_start->imag() > 0.0) {
    return solve_general(mu1, mu2, z.value(), settings, *warm_start, iterations);
  }
  if (z.im >= 0.5) return solve_general(mu1, mu2, z.value(), settings, z.value(), iterations);
  // Continuation from Im z = 1 down to the requested height.
  double eta = 1.0;
  cplx w{z.re, 1.0};
  SubordinationResult r;
  while (true) {
    const cplx zz{z.re, eta};
    r = solve_general(mu1, mu2, zz, settings, w, iterations);
    if (eta == z.im) break;
    w = r.omega1;
    eta = std::max(0.5 * eta, z.im);
  }
  r.iterations = iterations;
  return r;
}

ConvolvedMeasure::ConvolvedMeasure(SymmetricMeasure mu1, SymmetricMeasure mu2, SolverSettings settings)
    : mu1_(std::move(mu1)), mu2_(std::move(mu2)), settings_(settings) {
  require_not_point_mass(mu1_, mu2_);
}

SubordinationResult ConvolvedMeasure::subordination(HalfPlanePoint z, std::optional<cplx> warm_start) const {
  return solve(mu1_, mu2_, z, settings_, warm_start);
}

cplx ConvolvedMeasure::cauchy(HalfPlanePoint z) const {
  const SubordinationResult r = subordination(z);
  if (z.re == 0.0) {
    const double y = r.omega1.imag();
    return {0.0, -y * mu1_.axis_kernel(y)};
  }
  return cauchy_transform(mu1_, HalfPlanePoint(r.omega1.real(), r.omega1.imag()));
}

double ConvolvedMeasure::cauchy_on_axis(double eta, double* hint) const {
  std::optional<double> h;
  if (hint && *hint > 0.0) h = *hint;
  const SubordinationResult r = solve_on_axis(mu1_, mu2_, eta, settings_, h);
  const double y = r.omega1.imag();
  if (hint) *hint = y;
  return -y * mu1_.axis_kernel(y);
}

double ConvolvedMeasure::axis_excess(double eta, double* hint) const {
  std::optional<double> h;
  if (hint && *hint > 0.0) h = *hint;
  const SubordinationResult r = solve_on_axis(mu1_, mu2_, eta, settings_, h);
  if (hint) *hint = r.omega1.imag();
  return dsring::axis_excess(mu1_, r.omega1.imag()) + dsring::axis_excess(mu2_, r.omega2.imag());
}

BoundaryValue extrapolate_boundary(const std::vector<double>& seq, const SolverSettings& s) {
  if (seq.size() < 6) throw DomainError("boundary ladder needs at least six points");
  const std::size_t n = seq.size();
  const double last = seq[n - 1];
  const double prev = seq[n - 2];
  constexpr double inf = std::numeric_limits<double>::infinity();

  // exponent p in |omega| ~ eta^p between consecutive ladder points
  std::vector<double> p;
  for (std::size_t i = n - 4; i < n; ++i) p.push_back(std::log2(seq[i - 1] / seq[i]));
  const auto [pmin, pmax] = std::minmax_element(p.begin(), p.end());
  const double pmean = (p[0] + p[1] + p[2] + p[3]) / 4.0;
  const bool power_law = (*pmax - *pmin) < 0.1;

  if (last > s.infinite_threshold) return {inf, BoundaryClass::infinite};
  bool growing = last > s.divergence_floor;
  for (std::size_t i = n - 3; i < n && growing; ++i) growing = seq[i] > s.divergence_ratio * seq[i - 1];
  if (growing) return {inf, BoundaryClass::infinite};
  if (power_law && pmean <= -0.5) return {inf, BoundaryClass::infinite};
  if (last < s.zero_threshold) return {last, BoundaryClass::zero};
  if (power_law && pmean >= 0.1) return {0.0, BoundaryClass::zero};

  // Oscillation: direction changes of relative size above 1e-6 near the end.
  int flips = 0;
  for (std::size_t i = n - 4; i + 1 < n; ++i) {
    const double d1 = seq[i] - seq[i - 1];
    const double d2 = seq[i + 1] - seq[i];
    if (d1 * d2 < 0.0 && std::min(std::abs(d1), std::abs(d2)) > 1e-6 * seq[i]) ++flips;
  }
  if (flips >= 2) throw NumericError("boundary value oscillates along the eta ladder", std::abs(last - prev));

  double value = 2.0 * last - prev;
  if (!(value > 0.0)) value = last;
  if (value < s.zero_threshold) return {value, BoundaryClass::zero};
  if (value > s.infinite_threshold) return {inf, BoundaryClass::infinite};
  return {value, BoundaryClass::finite_positive};
}

std::pair<BoundaryValue, BoundaryValue> ConvolvedMeasure::boundary_omegas() const {
  std::vector<double> w1, w2;
  std::optional<double> hint;
  for (int k = settings_.ladder_first; k <= settings_.ladder_last; ++k) {
    const double eta = std::ldexp(1.0, -k);
    const SubordinationResult r = solve_on_axis(mu1_, mu2_, eta, settings_, hint);
    hint = r.omega1.imag();
    w1.push_back(r.omega1.imag());
    w2.push_back(r.omega2.imag());
  }
  return {extrapolate_boundary(w1, settings_), extrapolate_boundary(w2, settings_)};
}

BoundaryValue ConvolvedMeasure::boundary_omega(int j) const {
  if (j != 1 && j != 2) throw DomainError("boundary_omega index must be 1 or 2");
  const auto both = boundary_omegas();
  return j == 1 ? both.first : both.second;
}

cplx ConvolvedMeasure::cauchy_near_axis(double x, double eta) const {
  return cauchy(HalfPlanePoint(x, eta));
}

double ConvolvedMeasure::density_at(double x) const {
  const double eta = std::ldexp(1.0, -settings_.ladder_last);
  if (x == 0.0) {
    double hint = 0.0;
    const double g2 = cauchy_on_axis(2.0 * eta, &hint);
    const double g1 = cauchy_on_axis(eta, &hint);
    return -(2.0 * g1 - g2) / M_PI;
  }
  const SubordinationResult r2 = subordination(HalfPlanePoint(x, 2.0 * eta));
  const SubordinationResult r1 = subordination(HalfPlanePoint(x, eta), r2.omega1);
  const cplx g2 = cauchy_transform(mu1_, HalfPlanePoint(r2.omega1.real(), r2.omega1.imag()));
  const cplx g1 = cauchy_transform(mu1_, HalfPlanePoint(r1.omega1.real(), r1.omega1.imag()));
  return -(2.0 * g1.imag() - g2.imag()) / M_PI;
}

double ConvolvedMeasure::atom_mass_at(double x) const {
  // eta * |Im G(x + i eta)| tends to the mass at x; for a density it decays like eta.
  std::array<double, 4> m{};
  std::optional<cplx> warm;
  double hint = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double eta = std::ldexp(1.0, -(settings_.ladder_last - 3 + i));
    double g = 0.0;
    if (x == 0.0) {
      g = cauchy_on_axis(eta, &hint);
    } else {
      const SubordinationResult r = subordination(HalfPlanePoint(x, eta), warm);
      warm = r.omega1;
      g = cauchy_transform(mu1_, HalfPlanePoint(r.omega1.real(), r.omega1.imag())).imag();
    }
    m[static_cast<std::size_t>(i)] = eta * std::abs(g);
  }
  // m[3] is the smallest eta. A genuine atom keeps the ratio near 1.
  const double ratio = m[3] / m[2];
  if (ratio > 0.9 && m[3] > 0.0) return m[3];
  return 0.0;
}

bool ConvolvedMeasure::bulk_test(double x, double delta_bulk) const {
  const double d = density_at(x);
  if (!(d > delta_bulk && d < 1.0 / delta_bulk)) return false;
  if (atom_mass_at(x) > delta_bulk) return false;
  // A density that keeps growing along the ladder is infinite at x.
  const double eta = std::ldexp(1.0, -(settings_.ladder_last - 4));
  const double coarse = -cauchy(HalfPlanePoint(x, eta)).imag() / M_PI;
  return d < 1.5 * coarse;
}

}  // namespace dsring
