#include "dsring/randmat.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "dsring/linalg.hpp"
#include "dsring/parallel.hpp"

namespace dsring::randmat {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Entry i of a length-N diagonal drawn from a shorter pattern: pattern[i * len / N].
VectorXd tile(const std::vector<double>& pattern, int n, const char* what) {
  const std::size_t len = pattern.size();
  if (len == 0) throw DomainError(std::string(what) + ": empty value list");
  if (len > static_cast<std::size_t>(n)) {
    throw DomainError(std::string(what) + ": value list longer than N");
  }
  VectorXd out(n);
  for (int i = 0; i < n; ++i) out(i) = pattern[static_cast<std::size_t>(i) * len / static_cast<std::size_t>(n)];
  return out;
}

double quantile(const AtomicMeasure& law, double q) {
  for (const Atom& a : law.atoms()) {
    if (law.cdf(a.location) >= q) return a.location;
  }
  return law.atoms().back().location;
}

}  // namespace

MatrixXcd load_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DomainError("cannot open matrix file " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("matrix file " + path + " is not valid JSON: " + e.what());
  }
  const auto re = j.at("re").get<std::vector<std::vector<double>>>();
  std::vector<std::vector<double>> im;
  if (j.contains("im")) im = j.at("im").get<std::vector<std::vector<double>>>();
  const std::size_t n = re.size();
  MatrixXcd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    if (re[r].size() != n || (!im.empty() && im.at(r).size() != n)) {
      throw DomainError("matrix file " + path + " must hold a square matrix");
    }
    for (std::size_t c = 0; c < n; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = {re[r][c], im.empty() ? 0.0 : im[r][c]};
    }
  }
  return m;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t trial, Role role) {
  std::uint64_t state = seed;
  std::uint64_t mixed = splitmix64(state);
  state = mixed ^ (trial + 0x632be59bd9b4e019ULL);
  mixed = splitmix64(state);
  state = mixed ^ (static_cast<std::uint64_t>(role) * 0x8cb92ba72f3d8dd7ULL);
  std::seed_seq seq{splitmix64(state), splitmix64(state), splitmix64(state), splitmix64(state)};
  return std::mt19937_64(seq);
}

MatrixXcd complex_gaussian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  MatrixXcd z(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      z(r, c) = {re, im};
    }
  }
  return z;
}

MatrixXcd haar_unitary(int n, std::mt19937_64& rng) {
  if (n < 1) throw DomainError("haar_unitary needs N >= 1");
  VectorXcd r_diag;
  MatrixXcd q = linalg::qr_q_factor(complex_gaussian(n, rng), r_diag);
  for (Eigen::Index c = 0; c < n; ++c) {
    const double mod = std::abs(r_diag(c));
    if (mod == 0.0) throw NumericError("haar_unitary: singular Gaussian draw", 0.0);
    q.col(c) *= r_diag(c) / mod;
  }
  return q;
}

const char* to_string(SigmaSpec::Kind k) {
  switch (k) {
    case SigmaSpec::Kind::explicit_list: return "explicit";
    case SigmaSpec::Kind::two_level: return "two_level";
    case SigmaSpec::Kind::law_quantiles: return "law_quantiles";
  }
  return "unknown";
}

const char* to_string(ASpec::Kind k) {
  switch (k) {
    case ASpec::Kind::zero: return "zero";
    case ASpec::Kind::hermitian_diag: return "hermitian_diag";
    case ASpec::Kind::unitary_perm: return "unitary_perm";
    case ASpec::Kind::jordan_block: return "jordan_block";
    case ASpec::Kind::file: return "file";
  }
  return "unknown";
}

VectorXd SigmaSpec::diagonal(int n) const {
  switch (kind) {
    case Kind::explicit_list:
      return tile(values, n, "sigma");
    case Kind::two_level: {
      const double low = v2_power ? std::pow(static_cast<double>(n), *v2_power) : v2;
      const auto high_count = static_cast<Eigen::Index>(std::llround(fraction * n));
      VectorXd d = VectorXd::Constant(n, low);
      d.head(high_count).setConstant(v1);
      return d;
    }
    case Kind::law_quantiles: {
      VectorXd d(n);
      for (int i = 0; i < n; ++i) d(i) = quantile(law, (i + 0.5) / n);
      return d;
    }
  }
  return {};
}

AtomicMeasure SigmaSpec::limit_law() const {
  switch (kind) {
    case Kind::explicit_list:
      return AtomicMeasure::empirical(values);
    case Kind::two_level: {
      const double low = v2_power ? (*v2_power < 0.0 ? 0.0 : (*v2_power == 0.0 ? 1.0 : -1.0)) : v2;
      if (low < 0.0) throw DomainError("two_level sigma with positive power is unbounded");
      std::vector<Atom> atoms;
      if (fraction > 0.0) atoms.push_back({v1, fraction});
      if (fraction < 1.0) atoms.push_back({low, 1.0 - fraction});
      std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.location < b.location; });
      return AtomicMeasure::normalized(std::move(atoms));
    }
    case Kind::law_quantiles:
      return law;
  }
  return {};
}

MatrixXcd ASpec::build(int n) const {
  switch (kind) {
    case Kind::zero:
      return MatrixXcd::Zero(n, n);
    case Kind::hermitian_diag: {
      const VectorXd d = tile(values, n, "hermitian_diag");
      return d.cast<cplx>().asDiagonal();
    }
    case Kind::unitary_perm:
      return cyclic_permutation(n);
    case Kind::jordan_block:
      return jordan_matrix(n);
    case Kind::file: {
      const MatrixXcd m = matrix.size() > 0 ? matrix : load_matrix(path);
      if (m.rows() != n) throw DomainError("matrix file size does not match N");
      return m;
    }
  }
  return {};
}

void EnsembleSpec::validate() const {
  if (N < 1) throw DomainError("ensemble: N must be positive");
  if (N > 4096) throw DomainError("ensemble: N above the 4096 cap");
  if (trials < 1) throw DomainError("ensemble: trials must be positive");
  if (!(norm_bound > 0.0)) throw DomainError("ensemble: norm bound M must be positive");
  if (sigma.kind == SigmaSpec::Kind::two_level && !(sigma.fraction >= 0.0 && sigma.fraction <= 1.0)) {
    throw DomainError("ensemble: two_level fraction must lie in [0, 1]");
  }
  const VectorXd s = sigma_diagonal();
  if (s.minCoeff() < 0.0 || !s.allFinite()) throw DomainError("ensemble: Sigma_ii must be finite and >= 0");
  if (s.maxCoeff() > norm_bound * (1.0 + 1e-12)) throw DomainError("ensemble: |Sigma_ii| exceeds the norm bound M");
  double a_norm = 0.0;
  switch (a.kind) {
    case ASpec::Kind::zero: break;
    case ASpec::Kind::hermitian_diag:
      for (double v : a.values) a_norm = std::max(a_norm, std::abs(v));
      break;
    case ASpec::Kind::unitary_perm: a_norm = 1.0; break;
    case ASpec::Kind::jordan_block: a_norm = N > 1 ? 1.0 : 0.0; break;
    case ASpec::Kind::file: a_norm = linalg::singular_values(a_matrix())(0); break;
  }
  if (a_norm > norm_bound * (1.0 + 1e-12)) throw DomainError("ensemble: operator norm of A exceeds the norm bound M");
  if (alpha && s.minCoeff() < std::pow(static_cast<double>(N), -*alpha) * (1.0 - 1e-12)) {
    throw DomainError("ensemble: min Sigma_ii is below N^-alpha");
  }
}

EnsembleSpec EnsembleSpec::with_n(int n) const {
  if (a.kind == ASpec::Kind::file && n != N) throw DomainError("file-backed A cannot change size");
  EnsembleSpec out = *this;
  out.N = n;
  return out;
}

void to_json(nlohmann::json& j, const SigmaSpec& s) {
  j = {{"kind", to_string(s.kind)}};
  switch (s.kind) {
    case SigmaSpec::Kind::explicit_list: j["values"] = s.values; break;
    case SigmaSpec::Kind::two_level:
      j["v1"] = s.v1;
      if (s.v2_power) {
        j["v2_power"] = *s.v2_power;
      } else {
        j["v2"] = s.v2;
      }
      j["fraction"] = s.fraction;
      break;
    case SigmaSpec::Kind::law_quantiles: j["law"] = s.law; break;
  }
}

void from_json(const nlohmann::json& j, SigmaSpec& s) {
  const std::string kind = j.at("kind").get<std::string>();
  s = SigmaSpec{};
  if (kind == "explicit") {
    s.kind = SigmaSpec::Kind::explicit_list;
    s.values = j.at("values").get<std::vector<double>>();
  } else if (kind == "two_level") {
    s.kind = SigmaSpec::Kind::two_level;
    s.v1 = j.at("v1").get<double>();
    if (j.contains("v2_power")) {
      s.v2_power = j.at("v2_power").get<double>();
    } else {
      s.v2 = j.at("v2").get<double>();
    }
    s.fraction = j.value("fraction", 0.5);
  } else if (kind == "law_quantiles") {
    s.kind = SigmaSpec::Kind::law_quantiles;
    s.law = j.at("law").get<AtomicMeasure>();
  } else {
    throw DomainError("unknown sigma kind '" + kind + "'");
  }
}

void to_json(nlohmann::json& j, const ASpec& s) {
  j = {{"kind", to_string(s.kind)}};
  if (s.kind == ASpec::Kind::hermitian_diag) j["values"] = s.values;
  if (s.kind == ASpec::Kind::file) j["path"] = s.path;
}

void from_json(const nlohmann::json& j, ASpec& s) {
  const std::string kind = j.at("kind").get<std::string>();
  s = ASpec{};
  if (kind == "zero") {
    s.kind = ASpec::Kind::zero;
  } else if (kind == "hermitian_diag") {
    s.kind = ASpec::Kind::hermitian_diag;
    s.values = j.at("values").get<std::vector<double>>();
  } else if (kind == "unitary_perm") {
    s.kind = ASpec::Kind::unitary_perm;
  } else if (kind == "jordan_block") {
    s.kind = ASpec::Kind::jordan_block;
  } else if (kind == "file") {
    s.kind = ASpec::Kind::file;
    s.path = j.at("path").get<std::string>();
    s.matrix = load_matrix(s.path);
  } else {
    throw DomainError("unknown A kind '" + kind + "'");
  }
}

void to_json(nlohmann::json& j, const EnsembleSpec& s) {
  j = {{"N", s.N}, {"trials", s.trials}, {"seed", s.seed}, {"norm_bound", s.norm_bound},
       {"sigma", s.sigma}, {"a", s.a}};
  if (s.alpha) j["alpha"] = *s.alpha;
}

void from_json(const nlohmann::json& j, EnsembleSpec& s) {
  s = EnsembleSpec{};
  s.N = j.at("N").get<int>();
  s.trials = j.value("trials", 1);
  s.seed = j.value("seed", std::uint64_t{1});
  s.norm_bound = j.value("norm_bound", 10.0);
  if (j.contains("alpha")) s.alpha = j.at("alpha").get<double>();
  s.sigma = j.at("sigma").get<SigmaSpec>();
  s.a = j.contains("a") ? j.at("a").get<ASpec>() : ASpec{};
}

Assembly assemble(const EnsembleSpec& spec, int trial) {
  return assemble(spec, trial, spec.sigma_diagonal(), spec.a_matrix());
}

Assembly assemble(const EnsembleSpec& spec, int trial, const VectorXd& sigma, const MatrixXcd& a) {
  Assembly out;
  auto rng_u = stream(spec.seed, static_cast<std::uint64_t>(trial), Role::U);
  auto rng_v = stream(spec.seed, static_cast<std::uint64_t>(trial), Role::V);
  out.U = haar_unitary(spec.N, rng_u);
  out.V = haar_unitary(spec.N, rng_v);
  out.sigma = sigma;
  out.A = a;
  out.Y = (out.U * sigma.cast<cplx>().asDiagonal()) * out.V.adjoint() + a;
  return out;
}

VectorXd hermitize_svals(const MatrixXcd& y, cplx lambda) {
  MatrixXcd shifted = y;
  shifted.diagonal().array() -= lambda;
  return linalg::singular_values(shifted);
}

VectorXd hermitization_route_svals(const MatrixXcd& y, cplx lambda) {
  const Eigen::Index n = y.rows();
  MatrixXcd shifted = y;
  shifted.diagonal().array() -= lambda;
  MatrixXcd h = MatrixXcd::Zero(2 * n, 2 * n);
  h.topRightCorner(n, n) = shifted;
  h.bottomLeftCorner(n, n) = shifted.adjoint();
  const VectorXd ev = linalg::hermitian_eigenvalues(h);  // increasing, +-s pairs
  VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) s(i) = std::max(0.0, ev(2 * n - 1 - i));
  return s;
}

cplx empirical_cauchy(const VectorXd& svals, double eta) {
  if (!(eta > 0.0)) throw DomainError("empirical_cauchy needs eta > 0");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < svals.size(); ++i) acc += 1.0 / (eta * eta + svals(i) * svals(i));
  return {0.0, -eta * acc / static_cast<double>(svals.size())};
}

SpectrumSample sample_spectrum(const EnsembleSpec& spec, int trial, const std::vector<cplx>& probes) {
  const Assembly a = assemble(spec, trial);
  SpectrumSample out;
  out.trial = trial;
  out.seed = spec.seed;
  out.eigenvalues = linalg::eigenvalues(a.Y);
  out.probes = probes;
  for (const cplx& p : probes) out.svals.push_back(hermitize_svals(a.Y, p));
  return out;
}

std::pair<double, double> girko_log_dets(const MatrixXcd& y, cplx lambda) {
  const VectorXd s = hermitize_svals(y, lambda);
  const double n = static_cast<double>(y.rows());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) acc += std::log(s(i));
  MatrixXcd shifted = y;
  shifted.diagonal().array() -= lambda;
  return {acc / n, linalg::log_abs_det(shifted) / n};
}

std::vector<double> geometric_thresholds(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi > lo) || count < 2) throw DomainError("geometric_thresholds needs 0 < lo < hi and count >= 2");
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) t[static_cast<std::size_t>(k)] = lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1));
  return t;
}

Eigen::MatrixXd smin_grid(const EnsembleSpec& spec, const std::vector<cplx>& lambdas, int threads) {
  const VectorXd sigma = spec.sigma_diagonal();
  const MatrixXcd a = spec.a_matrix();
  Eigen::MatrixXd out(spec.trials, static_cast<Eigen::Index>(lambdas.size()));
  parallel_for(spec.trials, threads, [&](int t) {
    const Assembly asm_t = assemble(spec, t, sigma, a);
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
      const VectorXd s = hermitize_svals(asm_t.Y, lambdas[j]);
      out(t, static_cast<Eigen::Index>(j)) = s(s.size() - 1);
    }
  });
  return out;
}

SminTail smin_tail(const EnsembleSpec& spec, cplx lambda, const std::vector<double>& thresholds) {
  if (!spec.alpha) throw DomainError("smin_tail needs a declared alpha");
  const double floor = std::pow(static_cast<double>(spec.N), -*spec.alpha);
  bool hypothesis = spec.sigma_diagonal().minCoeff() >= floor * (1.0 - 1e-12);
  if (!hypothesis) {
    MatrixXcd shifted = spec.a_matrix();
    shifted.diagonal().array() -= lambda;
    const VectorXd s = linalg::singular_values(shifted);
    hypothesis = s(s.size() - 1) >= floor;
  }
  if (!hypothesis) throw DomainError("smin_tail: neither Sigma nor A - lambda satisfies the N^-alpha bound");
  const Eigen::MatrixXd grid = smin_grid(spec, {lambda});
  SminTail out;
  out.lambda = lambda;
  out.thresholds = thresholds;
  out.trials = spec.trials;
  out.smin.assign(grid.data(), grid.data() + grid.size());
  for (double t : thresholds) {
    const auto below = std::count_if(out.smin.begin(), out.smin.end(), [t](double s) { return s < t; });
    out.exceedance.push_back(static_cast<double>(below) / spec.trials);
  }
  return out;
}

bool product_smin_property(const MatrixXcd& a1, const MatrixXcd& a2) {
  const VectorXd s1 = linalg::singular_values(a1);
  const VectorXd s2 = linalg::singular_values(a2);
  const VectorXd s12 = linalg::singular_values(a1 * a2);
  const double lhs = s12(s12.size() - 1);
  const double rhs = s1(s1.size() - 1) * s2(s2.size() - 1);
  return lhs >= rhs - 1e-12 * std::max(1.0, s1(0) * s2(0));
}

ApproxSubordination approx_subordination(const EnsembleSpec& spec, cplx lambda, double eta, int trials,
                                         int threads) {
  if (!(eta >= 1e-12)) throw DomainError("approx_subordination: eta below 1e-12 makes the resolvent singular");
  if (trials < 1) throw DomainError("approx_subordination needs at least one trial");
  const VectorXd sigma = spec.sigma_diagonal();
  const MatrixXcd a = spec.a_matrix();
  const double n = spec.N;
  // Per trial: tr R, -Re tr[R X Sigma~^*] / N and -Re tr[R X Xi^*] / N with
  // R = (eta^2 + X X^*)^{-1}, X = Y - lambda.
  std::vector<double> trace_r(static_cast<std::size_t>(trials));
  std::vector<double> num_b(static_cast<std::size_t>(trials));
  std::vector<double> num_a(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](int t) {
    const Assembly s = assemble(spec, t, sigma, a);
    MatrixXcd x = s.Y;
    x.diagonal().array() -= lambda;
    MatrixXcd xi = s.A;
    xi.diagonal().array() -= lambda;
    const MatrixXcd sigma_tilde = s.Y - s.A;
    MatrixXcd rhs(spec.N, 2 * spec.N);
    rhs << x, MatrixXcd::Identity(spec.N, spec.N);
    const MatrixXcd solved = linalg::regularized_gram_solve(x, eta, rhs);
    const auto rx = solved.leftCols(spec.N);
    const auto ti = static_cast<std::size_t>(t);
    trace_r[ti] = solved.rightCols(spec.N).trace().real();
    num_b[ti] = -rx.cwiseProduct(sigma_tilde.conjugate()).sum().real() / n;
    num_a[ti] = -rx.cwiseProduct(xi.conjugate()).sum().real() / n;
  });

  const cplx z(0.0, eta);
  ApproxSubordination out;
  double mean_trace = 0.0, mean_a = 0.0, mean_b = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    const cplx g(0.0, -eta * trace_r[ti] / n);
    out.omega_A_trials.push_back(z - num_b[ti] / g);
    out.omega_B_trials.push_back(z - num_a[ti] / g);
    mean_trace += trace_r[ti] / trials;
    mean_a += num_a[ti] / trials;
    mean_b += num_b[ti] / trials;
  }
  out.cauchy_H = cplx(0.0, -eta * mean_trace / n);
  // tr[R B] = (z - omega_A) G_H is what makes G_H = G_A(omega_A) hold.
  out.omega_A = z - mean_b / out.cauchy_H;
  out.omega_B = z - mean_a / out.cauchy_H;
  auto std_error = [trials](const std::vector<cplx>& v) {
    if (trials < 2) return std::numeric_limits<double>::infinity();
    cplx mean = 0.0;
    for (const cplx& w : v) mean += w / static_cast<double>(trials);
    double ss = 0.0;
    for (const cplx& w : v) ss += std::norm(w - mean);
    return std::sqrt(ss / (trials - 1) / trials);
  };
  out.omega_A_std_error = std_error(out.omega_A_trials);
  out.omega_B_std_error = std_error(out.omega_B_trials);
  return out;
}

MatrixXcd jordan_matrix(int n) {
  if (n < 1) throw DomainError("jordan_matrix needs N >= 1");
  MatrixXcd j = MatrixXcd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) j(i, i + 1) = 1.0;
  return j;
}

MatrixXcd cyclic_permutation(int n) {
  MatrixXcd p = jordan_matrix(n);
  p(n - 1, 0) += 1.0;
  return p;
}

VectorXd jordan_singular_values(int n, cplx lambda) {
  if (n < 1) throw DomainError("jordan_singular_values needs N >= 1");
  return linalg::bidiagonal_singular_values(VectorXd::Constant(n, std::abs(lambda)), VectorXd::Ones(n - 1));
}

bool jordan_sv_check(int n, cplx lambda) {
  if (n < 2) throw DomainError("jordan_sv_check needs N >= 2");
  constexpr double slack = 1e-10;
  const VectorXd s = jordan_singular_values(n, lambda);
  const double r = std::abs(lambda);
  if (r < 1.0) return s(n - 2) >= 1.0 - r - slack;
  if (r > 1.0) return s(n - 1) >= r - 1.0 - slack;
  return true;
}

const char* to_string(Interlacing r) {
  switch (r) {
    case Interlacing::holds: return "holds";
    case Interlacing::fails: return "fails";
    case Interlacing::indeterminate: return "indeterminate";
  }
  return "unknown";
}

InterlacingResult interlacing_check(const MatrixXcd& l, const MatrixXcd& u_ref, cplx lambda) {
  if (l.rows() != u_ref.rows() || l.cols() != u_ref.cols()) throw DomainError("interlacing_check: size mismatch");
  const Eigen::Index n = l.rows();
  const VectorXd d = linalg::singular_values(l - u_ref);
  const double norm = d.size() > 0 ? d(0) : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (norm == 0.0) break;
    if (d(i) >= 1e-12 * norm && d(i) <= 1e-8 * norm) return {Interlacing::indeterminate, -1};
    if (d(i) > 1e-10 * norm) ++rank;
  }
  MatrixXcd a = -l;
  a.diagonal().array() += lambda;
  MatrixXcd b = -u_ref;
  b.diagonal().array() += lambda;
  const VectorXd s = linalg::singular_values(a);
  const VectorXd t = linalg::singular_values(b);
  for (Eigen::Index i = 0; i + rank < n; ++i) {
    if (s(i) < t(i + rank) - 1e-10) return {Interlacing::fails, rank};
  }
  return {Interlacing::holds, rank};
}

}  // namespace dsring::randmat
