#include "dsring/brown.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <cmath>
#include <sstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>
#include <tuple>
#include <unordered_map>

#include <boost/container_hash/hash.hpp>

#include "dsring/io.hpp"
#include "dsring/linalg.hpp"

namespace dsring {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPotentialFloor = -1e3;

}  // namespace

OperatorModel::OperatorModel(Kind kind, AtomicMeasure sigma_law) : kind_(kind), sigma_law_(std::move(sigma_law)) {
  if (sigma_law_.size() == 0) throw DomainError("sigma law is empty");
  if (!sigma_law_.nonnegative()) throw DomainError("sigma law must live on [0, inf)");
  if (sigma_law_.is_point_mass() && sigma_law_.atoms()[0].location == 0.0) {
    throw DomainError("sigma law must not be the Dirac mass at 0");
  }
}

OperatorModel OperatorModel::scalar_zero(AtomicMeasure sigma_law) {
  return OperatorModel(Kind::scalar_zero, std::move(sigma_law));
}

OperatorModel OperatorModel::hermitian(AtomicMeasure sigma_law, AtomicMeasure spectrum) {
  OperatorModel m(Kind::hermitian, std::move(sigma_law));
  m.a_bound_ = spectrum.support_bound();
  m.spectrum_ = std::move(spectrum);
  return m;
}

OperatorModel OperatorModel::haar_unitary(AtomicMeasure sigma_law, int atom_count) {
  if (atom_count < 2) throw DomainError("haar_unitary needs at least two atoms");
  OperatorModel m(Kind::haar_unitary, std::move(sigma_law));
  m.atom_count_ = atom_count;
  m.a_bound_ = 1.0;
  return m;
}

OperatorModel OperatorModel::normal_from_matrix(AtomicMeasure sigma_law, const Eigen::MatrixXcd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw DomainError("normal_from_matrix: matrix must be square");
  const double scale = std::max(1.0, a.squaredNorm());
  if ((a * a.adjoint() - a.adjoint() * a).norm() > 1e-8 * scale) {
    throw DomainError("normal_from_matrix: matrix is not normal");
  }
  OperatorModel m(Kind::normal_from_matrix, std::move(sigma_law));
  const Eigen::VectorXcd ev = linalg::eigenvalues(a);
  m.eigenvalues_.assign(ev.data(), ev.data() + ev.size());
  for (const cplx& e : m.eigenvalues_) m.a_bound_ = std::max(m.a_bound_, std::abs(e));
  return m;
}

OperatorModel OperatorModel::general_from_matrix(AtomicMeasure sigma_law, const Eigen::MatrixXcd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw DomainError("general_from_matrix: matrix must be square");
  OperatorModel m(Kind::general_from_matrix, std::move(sigma_law));
  m.matrix_ = a;
  m.a_bound_ = linalg::singular_values(a)(0);
  return m;
}

AtomicMeasure OperatorModel::abs_law(cplx lambda) const {
  std::vector<Atom> atoms;
  switch (kind_) {
    case Kind::scalar_zero:
      return AtomicMeasure::dirac(std::abs(lambda));
    case Kind::hermitian:
      for (const Atom& a : spectrum_->atoms()) atoms.push_back({std::abs(cplx(a.location) - lambda), a.weight});
      break;
    case Kind::haar_unitary: {
      // Quantiles of theta; the law of |e^{i theta} - lambda| only depends on |lambda|.
      const double r = std::abs(lambda);
      const double w = 1.0 / atom_count_;
      atoms.reserve(static_cast<std::size_t>(atom_count_));
      for (int k = 0; k < atom_count_; ++k) {
        const double theta = 2.0 * std::numbers::pi * (k + 0.5) / atom_count_;
        atoms.push_back({std::abs(std::polar(1.0, theta) - r), w});
      }
      break;
    }
    case Kind::normal_from_matrix: {
      const double w = 1.0 / static_cast<double>(eigenvalues_.size());
      for (const cplx& e : eigenvalues_) atoms.push_back({std::abs(e - lambda), w});
      break;
    }
    case Kind::general_from_matrix: {
      Eigen::MatrixXcd shifted = matrix_;
      shifted.diagonal().array() -= lambda;
      return singular_value_law(shifted);
    }
  }
  return AtomicMeasure::normalized(std::move(atoms));
}

double OperatorModel::a_bound() const { return a_bound_; }

const char* to_string(OperatorModel::Kind k) {
  switch (k) {
    case OperatorModel::Kind::scalar_zero: return "scalar_zero";
    case OperatorModel::Kind::hermitian: return "hermitian";
    case OperatorModel::Kind::haar_unitary: return "haar_unitary";
    case OperatorModel::Kind::normal_from_matrix: return "normal_from_matrix";
    case OperatorModel::Kind::general_from_matrix: return "general_from_matrix";
  }
  return "unknown";
}

nlohmann::json OperatorModel::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind_);
  j["sigma"] = sigma_law_;
  j["a_bound"] = a_bound_;
  if (spectrum_) j["spectrum"] = *spectrum_;
  if (kind_ == Kind::haar_unitary) j["atom_count"] = atom_count_;
  if (kind_ == Kind::normal_from_matrix) j["matrix_size"] = eigenvalues_.size();
  if (kind_ == Kind::general_from_matrix) j["matrix_size"] = matrix_.rows();
  return j;
}

L2Data l2_data(const OperatorModel& m, cplx lambda) {
  L2Data d{};
  if (m.kind() == OperatorModel::Kind::haar_unitary) {
    const double r2 = std::norm(lambda);
    d.norm_a_minus_lambda = std::sqrt(1.0 + r2);
    d.inv_norm_a_minus_lambda = r2 == 1.0 ? kInf : std::sqrt(1.0 / std::abs(1.0 - r2));
  } else {
    const AtomicMeasure law = m.abs_law(lambda);
    d.norm_a_minus_lambda = std::sqrt(law.abs_moment(2.0));
    d.inv_norm_a_minus_lambda = std::sqrt(law.inverse_square_moment());
  }
  d.norm_T = std::sqrt(m.sigma_law().abs_moment(2.0));
  d.inv_norm_T = std::sqrt(m.sigma_law().inverse_square_moment());
  return d;
}

const char* to_string(Region r) {
  switch (r) {
    case Region::omega_interior: return "omega_interior";
    case Region::singular_S: return "singular_S";
    case Region::exterior: return "exterior";
  }
  return "unknown";
}

std::pair<SymmetricMeasure, SymmetricMeasure> convolution_pair(const OperatorModel& m, cplx lambda) {
  return {symmetrize(m.abs_law(lambda)), symmetrize(m.sigma_law())};
}

namespace {

// Products with a vanishing factor only arise when a - lambda = 0, a case the
// mass condition decides; 0 * inf is read as 0 here.
double product(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

Region moment_region_from(const L2Data& d, double mass_at_zero) {
  constexpr double slack = 1e-12;
  const bool in_omega = product(d.inv_norm_a_minus_lambda, d.norm_T) >= 1.0 - slack &&
                        product(d.norm_a_minus_lambda, d.inv_norm_T) >= 1.0 - slack;
  if (!in_omega) return Region::exterior;
  return mass_at_zero >= 1.0 - slack ? Region::singular_S : Region::omega_interior;
}

Region trichotomy(BoundaryClass c1, BoundaryClass c2, bool& decided) {
  using BC = BoundaryClass;
  decided = true;
  const bool inf1 = c1 == BC::infinite, inf2 = c2 == BC::infinite;
  if (inf1 != inf2) return Region::exterior;
  if (c1 == BC::zero && c2 == BC::zero) return Region::singular_S;
  if (c1 == BC::finite_positive && c2 == BC::finite_positive) return Region::omega_interior;
  decided = false;
  return Region::exterior;
}

// Everything computed per distinct law of |a - lambda|.
struct NodeData {
  double potential = 0.0;
  RegionLabel label;
};

RegionLabel classify_pair(const OperatorModel& m, cplx lambda, const SymmetricMeasure& mu1,
                          const SymmetricMeasure& mu2, const SolverSettings& settings) {
  RegionLabel out;
  out.moment_label = moment_region_from(l2_data(m, lambda), mu1.mass_at_zero() + mu2.mass_at_zero());
  if (mu1.is_point_mass()) {
    // a - lambda = 0: the convolution is mu2 itself, omega2 = z and omega1 = F_mu2(z).
    std::vector<double> w1, w2;
    for (int k = settings.ladder_first; k <= settings.ladder_last; ++k) {
      const double eta = std::ldexp(1.0, -k);
      w1.push_back(1.0 / (eta * mu2.axis_kernel(eta)));
      w2.push_back(eta);
    }
    out.omega1_0 = extrapolate_boundary(w1, settings);
    out.omega2_0 = extrapolate_boundary(w2, settings);
    out.label = out.moment_label;
    return out;
  }
  const ConvolvedMeasure conv(mu1, mu2, settings);
  std::tie(out.omega1_0, out.omega2_0) = conv.boundary_omegas();
  bool decided = false;
  const Region r = trichotomy(out.omega1_0.classified, out.omega2_0.classified, decided);
  out.label = decided ? r : out.moment_label;
  out.agrees = decided && r == out.moment_label;
  return out;
}

double potential_pair(const SymmetricMeasure& mu1, const SymmetricMeasure& mu2, const SolverSettings& settings) {
  double h = 0.0;
  if (mu1.is_point_mass()) {
    h = log_moment(mu2);
  } else {
    const ConvolvedMeasure conv(mu1, mu2, settings);
    double hint = 0.0;
    h = log_moment_from_excess([&](double eta) { return conv.axis_excess(eta, &hint); });
  }
  return h < kPotentialFloor ? -kInf : h;
}

struct LawKeyHash {
  std::size_t operator()(const std::vector<double>& v) const { return boost::hash_range(v.begin(), v.end()); }
};

std::vector<double> law_key(const AtomicMeasure& law) {
  std::vector<double> key;
  key.reserve(2 * law.size());
  for (const Atom& a : law.atoms()) {
    key.push_back(a.location);
    key.push_back(a.weight);
  }
  return key;
}

// Evaluates `work(first_point_of_group)` once per distinct law over `points`
// on `threads` workers. Results are stored by group, so the output does not
// depend on scheduling.
template <class Result, class Work>
std::vector<Result> evaluate_grouped(const OperatorModel& m, const std::vector<cplx>& points, int threads,
                                     Work work) {
  std::unordered_map<std::vector<double>, std::size_t, LawKeyHash> groups;
  std::vector<std::size_t> group_of(points.size());
  std::vector<std::size_t> representative;
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(law_key(m.abs_law(points[i])), representative.size());
    if (inserted) representative.push_back(i);
    group_of[i] = it->second;
  }

  std::vector<Result> per_group(representative.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t g = next++; g < representative.size(); g = next++) {
      try {
        per_group[g] = work(points[representative[g]]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = representative.size();
      }
    }
  };
  const int n = std::max(1, threads);
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<Result> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = per_group[group_of[i]];
  return out;
}

std::vector<cplx> grid_points(const GridSpec& grid) {
  std::vector<cplx> pts(grid.size());
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = grid.node(i);
  return pts;
}

}  // namespace

Region moment_region(const OperatorModel& m, cplx lambda) {
  const auto [mu1, mu2] = convolution_pair(m, lambda);
  return moment_region_from(l2_data(m, lambda), mu1.mass_at_zero() + mu2.mass_at_zero());
}

double moment_margin(const OperatorModel& m, cplx lambda) {
  const L2Data d = l2_data(m, lambda);
  return std::min(product(d.inv_norm_a_minus_lambda, d.norm_T), product(d.norm_a_minus_lambda, d.inv_norm_T)) - 1.0;
}

RegionLabel classify(const OperatorModel& m, cplx lambda, const SolverSettings& settings) {
  const auto [mu1, mu2] = convolution_pair(m, lambda);
  return classify_pair(m, lambda, mu1, mu2, settings);
}

double log_potential(const OperatorModel& m, cplx lambda, const SolverSettings& settings) {
  const auto [mu1, mu2] = convolution_pair(m, lambda);
  return potential_pair(mu1, mu2, settings);
}

GridSpec GridSpec::square(cplx center, double half_width, int nodes) {
  if (nodes < 3 || !(half_width > 0.0)) throw DomainError("grid needs at least 3 nodes and positive width");
  GridSpec g;
  g.center = center;
  g.nx = g.ny = nodes;
  g.spacing = 2.0 * half_width / (nodes - 1);
  return g;
}

GridSpec GridSpec::default_for(const OperatorModel& m, int nodes) {
  return square({0.0, 0.0}, (2.0 * (m.a_bound() + m.sigma_bound()) + 1.0) / 2.0, nodes);
}

cplx GridSpec::node(int i, int j) const {
  return center + cplx((i - 0.5 * (nx - 1)) * spacing, (j - 0.5 * (ny - 1)) * spacing);
}

void to_json(nlohmann::json& j, const GridSpec& g) {
  j = {{"center", {g.center.real(), g.center.imag()}}, {"spacing", g.spacing}, {"nx", g.nx}, {"ny", g.ny}};
}

void from_json(const nlohmann::json& j, GridSpec& g) {
  if (j.contains("half_width")) {
    const auto c = j.value("center", std::vector<double>{0.0, 0.0});
    g = GridSpec::square({c.at(0), c.at(1)}, j.at("half_width").get<double>(), j.value("nodes", 201));
    return;
  }
  const auto c = j.at("center").get<std::vector<double>>();
  g.center = {c.at(0), c.at(1)};
  g.spacing = j.at("spacing").get<double>();
  g.nx = j.at("nx").get<int>();
  g.ny = j.at("ny").get<int>();
  if (!(g.spacing > 0.0) || g.nx < 3 || g.ny < 3) throw DomainError("invalid grid spec");
}

double BrownField::total_mass() const {
  double atom_mass = 0.0;
  for (const BrownAtom& a : atoms) atom_mass += a.mass;
  return density_mass + atom_mass;
}

std::vector<double> BrownField::cell_masses() const {
  std::vector<double> out(density.size());
  const double area = grid.spacing * grid.spacing;
  for (std::size_t i = 0; i < density.size(); ++i) out[i] = density[i] * area;
  for (const BrownAtom& a : atoms) out[a.node] += a.mass;
  return out;
}

std::vector<double> potentials_at(const OperatorModel& m, const std::vector<cplx>& points,
                                  const FieldOptions& options) {
  return evaluate_grouped<double>(m, points, options.threads,
                                  [&](cplx lambda) { return log_potential(m, lambda, options.solver); });
}

std::vector<RegionLabel> classify_grid(const OperatorModel& m, const GridSpec& grid, const FieldOptions& options) {
  return evaluate_grouped<RegionLabel>(m, grid_points(grid), options.threads,
                                       [&](cplx lambda) { return classify(m, lambda, options.solver); });
}

BrownField brown_field(const OperatorModel& m, const GridSpec& grid, const FieldOptions& options) {
  BrownField f;
  f.grid = grid;
  const std::vector<NodeData> nodes =
      evaluate_grouped<NodeData>(m, grid_points(grid), options.threads, [&](cplx lambda) {
        const auto [mu1, mu2] = convolution_pair(m, lambda);
        NodeData d;
        d.potential = potential_pair(mu1, mu2, options.solver);
        if (options.labels) d.label = classify_pair(m, lambda, mu1, mu2, options.solver);
        return d;
      });

  f.potential.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) f.potential[i] = nodes[i].potential;
  if (options.labels) {
    f.labels.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) f.labels[i] = nodes[i].label;
  }

  const double h2 = grid.spacing * grid.spacing;
  f.density.assign(grid.size(), 0.0);
  for (int j = 1; j + 1 < grid.ny; ++j) {
    for (int i = 1; i + 1 < grid.nx; ++i) {
      const double c = f.potential[grid.index(i, j)];
      const double lap = f.potential[grid.index(i + 1, j)] + f.potential[grid.index(i - 1, j)] +
                         f.potential[grid.index(i, j + 1)] + f.potential[grid.index(i, j - 1)] - 4.0 * c;
      // A -inf in the stencil belongs to an atom; its mass is recovered below.
      f.density[grid.index(i, j)] = std::isfinite(lap) ? lap / (2.0 * std::numbers::pi * h2) : 0.0;
    }
  }
  for (double d : f.density) f.density_mass += d * h2;

  if (options.labels) {
    f.covers_support = true;
    for (int j = 0; j < grid.ny; ++j) {
      for (int i = 0; i < grid.nx; ++i) {
        if (grid.interior(i, j)) continue;
        if (f.labels[grid.index(i, j)].label != Region::exterior) f.covers_support = false;
      }
    }
    // Mass deficit goes to the S nodes, split by their excess mass at zero.
    std::vector<std::pair<std::size_t, double>> singular;
    double weight_total = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (f.labels[i].label != Region::singular_S) continue;
      const auto [mu1, mu2] = convolution_pair(m, grid.node(i));
      const double w = std::max(0.0, mu1.mass_at_zero() + mu2.mass_at_zero() - 1.0);
      singular.emplace_back(i, w);
      weight_total += w;
    }
    const double deficit = 1.0 - f.density_mass;
    if (!singular.empty() && deficit > 0.0) {
      for (const auto& [node, w] : singular) {
        const double share = weight_total > 0.0 ? w / weight_total : 1.0 / static_cast<double>(singular.size());
        f.atoms.push_back({node, deficit * share});
      }
    }
  }
  return f;
}

std::vector<bool> d_epsilon(const std::vector<RegionLabel>& labels, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("d_epsilon needs eps in (0, 1)");
  std::vector<bool> mask(labels.size());
  auto inside = [eps](const BoundaryValue& b) {
    return b.classified == BoundaryClass::finite_positive && b.value > eps && b.value < 1.0 / eps;
  };
  for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = inside(labels[i].omega1_0) && inside(labels[i].omega2_0);
  return mask;
}

std::vector<bool> d_epsilon(const OperatorModel& m, const GridSpec& grid, double eps, const FieldOptions& options) {
  return d_epsilon(classify_grid(m, grid, options), eps);
}

ExteriorBound exterior_cauchy_bound(const OperatorModel& m, const std::vector<cplx>& nodes,
                                    const SolverSettings& settings) {
  ExteriorBound out;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const auto [mu1, mu2] = convolution_pair(m, nodes[n]);
    std::vector<double> g;
    if (mu1.is_point_mass()) {
      for (int k = 0; k <= settings.ladder_last; ++k) {
        const double eta = std::ldexp(1.0, -k);
        g.push_back(eta * mu2.axis_kernel(eta));
      }
    } else {
      const ConvolvedMeasure conv(mu1, mu2, settings);
      double hint = 0.0;
      for (int k = 0; k <= settings.ladder_last; ++k) {
        g.push_back(std::abs(conv.cauchy_on_axis(std::ldexp(1.0, -k), &hint)));
      }
    }
    const double sup = *std::max_element(g.begin(), g.end());
    out.per_node.push_back(sup);
    out.bound = std::max(out.bound, sup);
    // Growth by more than 2x over the last four ladder steps means |G| is not bounded.
    const bool growing = g.back() > 2.0 * g[g.size() - 5];
    if (growing || classify_pair(m, nodes[n], mu1, mu2, settings).label != Region::exterior) {
      out.flagged.push_back(n);
    }
  }
  return out;
}

void write_field_csv(const BrownField& field, const std::string& path) {
  std::ostringstream os;
  os.precision(io::kCsvPrecision);
  os << "re,im,potential,density,label\n";
  for (std::size_t i = 0; i < field.potential.size(); ++i) {
    const cplx z = field.grid.node(i);
    os << z.real() << ',' << z.imag() << ',' << field.potential[i] << ',' << field.density[i] << ','
       << (field.labels.empty() ? "" : to_string(field.labels[i].label)) << '\n';
  }
  io::write_atomic(path, os.str());
}

nlohmann::json field_summary(const BrownField& field) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const BrownAtom& a : field.atoms) {
    const cplx z = field.grid.node(a.node);
    atoms.push_back({{"re", z.real()}, {"im", z.imag()}, {"mass", a.mass}});
  }
  std::size_t counts[3] = {0, 0, 0};
  std::size_t disagreements = 0;
  for (const RegionLabel& l : field.labels) {
    ++counts[static_cast<int>(l.label)];
    if (!l.agrees) ++disagreements;
  }
  return {{"grid", field.grid},
          {"density_mass", field.density_mass},
          {"atoms", atoms},
          {"total_mass", field.total_mass()},
          {"covers_support", field.covers_support},
          {"label_counts",
           {{"omega_interior", counts[0]}, {"singular_S", counts[1]}, {"exterior", counts[2]}}},
          {"label_disagreements", disagreements}};
}

}  // namespace dsring
