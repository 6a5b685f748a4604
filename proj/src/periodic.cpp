#include "metarenewal/periodic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "integrator.hpp"
#include "metarenewal/characteristics.hpp"
#include "metarenewal/errors.hpp"
#include "metarenewal/spectral.hpp"

namespace metarenewal {

periodic_profile::periodic_profile(double period, std::size_t patches, std::vector<double> samples)
    : period_(period), n_(patches), samples_(std::move(samples)) {
  if (!(period > 0.0)) throw precondition_error("period must be positive");
  if (n_ == 0 || samples_.empty() || samples_.size() % n_ != 0)
    throw precondition_error("profile samples must hold P whole N-vectors");
  for (double v : samples_)
    if (!(v >= 0.0)) throw precondition_error("profile samples must be nonnegative");
}

periodic_profile periodic_profile::constant(double period, std::size_t nodes, const Eigen::VectorXd& value) {
  std::vector<double> s;
  s.reserve(nodes * static_cast<std::size_t>(value.size()));
  for (std::size_t j = 0; j < nodes; ++j)
    for (Eigen::Index k = 0; k < value.size(); ++k) s.push_back(value[k]);
  return periodic_profile(period, static_cast<std::size_t>(value.size()), std::move(s));
}

Eigen::VectorXd periodic_profile::sample(std::size_t j) const {
  Eigen::VectorXd v(n_);
  for (std::size_t k = 0; k < n_; ++k) v[k] = value(j, k);
  return v;
}

namespace {

// wrap position of t on the phase grid: lower node, upper node, weight of the upper node
struct hat {
  std::size_t lo, hi;
  double w;
};

hat locate(double t, double period, std::size_t nodes) {
  double u = t / period;
  u -= std::floor(u);
  double x = u * static_cast<double>(nodes);
  double f = std::floor(x);
  auto lo = static_cast<std::size_t>(f) % nodes;
  return {lo, (lo + 1) % nodes, x - f};
}

}  // namespace

Eigen::VectorXd periodic_profile::operator()(double t) const {
  auto h = locate(t, period_, nodes());
  Eigen::VectorXd v(n_);
  for (std::size_t k = 0; k < n_; ++k) v[k] = (1.0 - h.w) * value(h.lo, k) + h.w * value(h.hi, k);
  return v;
}

double periodic_profile::sup_distance(const periodic_profile& other) const {
  if (other.samples_.size() != samples_.size()) throw precondition_error("profiles have different shapes");
  double d = 0.0;
  for (std::size_t i = 0; i < samples_.size(); ++i) d = std::max(d, std::abs(samples_[i] - other.samples_[i]));
  return d;
}

double model_period(const model_spec& model) {
  auto periods = model.modulation_periods();
  if (periods.empty()) return 1.0;
  double period = periods.back();
  for (double p : periods) {
    double r = period / p;
    if (std::abs(r - std::round(r)) > 1e-9 * r)
      throw precondition_error("time modulations have incommensurate periods");
  }
  return period;
}

namespace {

constexpr double gl_x[3] = {0.5 - 0.3872983346207417, 0.5, 0.5 + 0.3872983346207417};
constexpr double gl_w[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

// Gauss-Legendre nodes of the aligned age cells that meet the fertility window, with one
// characteristic per node and phase
class ktilde_engine {
 public:
  ktilde_engine(const model_spec& model, double period, std::size_t phases, double da, detail::flow fl)
      : model_(model), period_(period), phases_(phases), n_(model.patches()),
        step_(grid_step(model, da == 0.0 ? model.default_step() : da)), flow_(fl) {
    if (phases == 0) throw precondition_error("at least one phase node is needed");
    auto cells = detail::grid_cells(model.fertility_hi(), step_);
    for (std::size_t i = 0; i < cells; ++i) {
      double lo = static_cast<double>(i) * step_;
      double hi = std::min(model.fertility_hi(), lo + step_);
      if (hi <= model.fertility_lo() + 1e-12 * step_) continue;
      for (int q = 0; q < 3; ++q) nodes_.push_back({lo + gl_x[q] * (hi - lo), gl_w[q] * (hi - lo), i});
    }
    shared_ = !model.time_dependent();
    std::size_t steps = 0;
    for (auto& nd : nodes_) steps += nd.cell + 1;
    cache_ = shared_ || static_cast<double>(steps) * static_cast<double>(phases) * 3.0 *
                                static_cast<double>(3 * n_ + n_ * n_) < 2e7;
    if (shared_) {
      for (auto& nd : nodes_) plans_.push_back(plan(nd, 0.0));
    } else if (cache_) {
      for (std::size_t j = 0; j < phases; ++j)
        for (auto& nd : nodes_) plans_.push_back(plan(nd, phase(j) - nd.a));
    }
  }

  double phase(std::size_t j) const { return period_ * static_cast<double>(j) / static_cast<double>(phases_); }

  // Ktilde(rho) at time t, or at phase node j when t is taken from it
  Eigen::VectorXd apply(const periodic_profile& rho, double t, std::optional<std::size_t> j) const {
    detail::integrator integ(n_, flow_, false, false);
    std::vector<double> state(integ.state_size());
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_);
    for (std::size_t q = 0; q < nodes_.size(); ++q) {
      const auto& nd = nodes_[q];
      Eigen::VectorXd start = rho(t - nd.a);
      double scale = start.cwiseAbs().maxCoeff();
      if (scale == 0.0) continue;
      for (std::size_t k = 0; k < n_; ++k) state[k] = start[k];
      const detail::step_plan* p = nullptr;
      std::optional<detail::step_plan> local;
      if (shared_) p = &plans_[q];
      else if (cache_ && j) p = &plans_[*j * nodes_.size() + q];
      else p = &local.emplace(plan(nd, t - nd.a));
      double clamp = 0.0;
      for (std::size_t s = 0; s < p->steps(); ++s) clamp = std::max(clamp, integ.step(*p, s, state.data()));
      if (clamp > 1e-8 * scale) throw step_size_error("negative densities beyond round-off; refine the age step");
      for (std::size_t k = 0; k < n_; ++k) acc[k] += nd.w * model_.birth(k)(nd.a, t) * state[k];
    }
    return acc;
  }

  periodic_profile apply_all(const periodic_profile& rho) const {
    std::vector<double> out(phases_ * n_);
    for (std::size_t j = 0; j < phases_; ++j) {
      Eigen::VectorXd v = apply(rho, phase(j), j);
      for (std::size_t k = 0; k < n_; ++k) out[j * n_ + k] = std::max(0.0, v[k]);
    }
    return periodic_profile(period_, n_, std::move(out));
  }

  Eigen::MatrixXd linear_operator() const {
    const std::size_t dim = phases_ * n_;
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dim, dim);
    detail::integrator integ(n_, detail::flow::linear, false, false);
    std::vector<double> state(integ.state_size());
    Eigen::MatrixXd fundamental(n_, n_);
    for (std::size_t j = 0; j < phases_; ++j) {
      const double t = phase(j);
      for (std::size_t q = 0; q < nodes_.size(); ++q) {
        const auto& nd = nodes_[q];
        std::optional<detail::step_plan> local;
        const detail::step_plan& p =
            shared_ ? plans_[q] : cache_ ? plans_[j * nodes_.size() + q] : local.emplace(plan(nd, t - nd.a));
        for (std::size_t c = 0; c < n_; ++c) {
          std::fill(state.begin(), state.end(), 0.0);
          state[c] = 1.0;
          for (std::size_t s = 0; s < p.steps(); ++s) integ.step(p, s, state.data());
          for (std::size_t k = 0; k < n_; ++k) fundamental(k, c) = state[k];
        }
        auto h = locate(t - nd.a, period_, phases_);
        for (std::size_t k = 0; k < n_; ++k) {
          double mk = nd.w * model_.birth(k)(nd.a, t);
          if (mk == 0.0) continue;
          for (std::size_t c = 0; c < n_; ++c) {
            r(j * n_ + k, h.lo * n_ + c) += mk * (1.0 - h.w) * fundamental(k, c);
            r(j * n_ + k, h.hi * n_ + c) += mk * h.w * fundamental(k, c);
          }
        }
      }
    }
    return r;
  }

 private:
  struct node {
    double a, w;
    std::size_t cell;
  };

  detail::step_plan plan(const node& nd, double birth_time) const {
    std::vector<double> ages;
    for (std::size_t i = 0; i <= nd.cell; ++i) ages.push_back(static_cast<double>(i) * step_);
    ages.push_back(nd.a);
    return detail::step_plan(model_, detail::branch::phi, birth_time, std::move(ages));
  }

  const model_spec& model_;
  double period_;
  std::size_t phases_, n_;
  double step_;
  detail::flow flow_;
  std::vector<node> nodes_;
  bool shared_ = false, cache_ = false;
  std::vector<detail::step_plan> plans_;
};

void require_period(const model_spec& model, double period) {
  double own = model_period(model);
  if (model.time_dependent()) {
    double r = period / own;
    if (std::abs(r - std::round(r)) > 1e-9 * r || std::round(r) < 1.0)
      throw precondition_error("profile period is not a multiple of the model period");
  }
}

}  // namespace

Eigen::VectorXd apply_Ktilde(const model_spec& model, const periodic_profile& rho, double t, double da) {
  if (rho.patches() != model.patches()) throw precondition_error("profile has the wrong number of patches");
  require_period(model, rho.period());
  ktilde_engine engine(model, rho.period(), 1, da, detail::flow::nonlinear);
  return engine.apply(rho, t, std::nullopt);
}

periodic_profile apply_Ktilde_nodes(const model_spec& model, const periodic_profile& rho, double da) {
  if (rho.patches() != model.patches()) throw precondition_error("profile has the wrong number of patches");
  require_period(model, rho.period());
  return ktilde_engine(model, rho.period(), rho.nodes(), da, detail::flow::nonlinear).apply_all(rho);
}

periodic_solution periodic_maximal_solution(const model_spec& model, std::size_t nodes,
                                            const periodic_options& options) {
  const double period = model_period(model);
  ktilde_engine engine(model, period, nodes, options.da, detail::flow::nonlinear);
  double w2 = omega_constants(model).omega2;
  periodic_profile x = periodic_profile::constant(period, nodes, Eigen::VectorXd::Constant(model.patches(), w2));
  double diff = 0.0;
  for (int it = 0; it < options.max_iter; ++it) {
    periodic_profile y = engine.apply_all(x);
    for (std::size_t i = 0; i < x.samples().size(); ++i) {
      double xi = x.samples()[i];
      if (y.samples()[i] > xi + 1e-10 * (1.0 + std::abs(xi)))
        throw consistency_error("periodic maximal-solution iterates increased at a phase node");
    }
    diff = x.sup_distance(y);
    if (diff <= options.tol) return {x, it, diff, diff};
    x = std::move(y);
  }
  std::ostringstream os;
  os << "periodic maximal solution did not converge in " << options.max_iter << " sweeps (last step " << diff << ")";
  throw non_convergence(os.str(), options.max_iter, diff);
}

periodic_R0 assemble_periodic_R0(const model_spec& model, std::size_t nodes, double da) {
  periodic_R0 r;
  r.period = model_period(model);
  r.nodes = nodes;
  ktilde_engine engine(model, r.period, nodes, da, detail::flow::linear);
  r.matrix = engine.linear_operator();
  if (!is_irreducible(r.matrix))
    throw reducible_matrix("assembled periodic operator is reducible (accessibility condition violated)");
  auto p = spectral_radius(r.matrix);
  r.sigma = p.sigma;
  r.perron_vector = p.vector;
  return r;
}

std::vector<std::string> check_envelope(const envelope_pair& pair, const model_spec& model, double t_end,
                                        double sample_density) {
  const auto& lo = pair.lower_model;
  const auto& hi = pair.upper_model;
  if (lo.patches() != model.patches() || hi.patches() != model.patches())
    throw precondition_error("envelope models must have the same number of patches");
  std::vector<std::string> issues;
  std::vector<double> ages = age_samples(model, sample_density);
  for (const auto* m : {&lo, &hi}) {
    auto extra = age_samples(*m, sample_density);
    ages.insert(ages.end(), extra.begin(), extra.end());
  }
  std::sort(ages.begin(), ages.end());
  ages.erase(std::unique(ages.begin(), ages.end()), ages.end());

  std::vector<double> times;
  double span = std::max(0.0, t_end - pair.onset);
  auto count = std::min<std::size_t>(4096, static_cast<std::size_t>(std::ceil(span * sample_density)) + 1);
  for (std::size_t i = 0; i < count; ++i)
    times.push_back(pair.onset + (count > 1 ? span * static_cast<double>(i) / static_cast<double>(count - 1) : 0.0));

  const std::size_t n = model.patches();
  const double v_samples[] = {0.0, 0.25, 1.0, 4.0, 16.0};
  auto leq = [](double a, double b) { return a <= b + 1e-12 * std::max(1.0, std::abs(b)); };
  auto report = [&](const std::string& what, std::size_t k, double a, double t) {
    std::ostringstream os;
    os << what << " violated at patch " << k + 1 << ", age " << a << ", time " << t;
    issues.push_back(os.str());
  };
  bool birth_ok = true, mort_ok = true, disp_ok = true;
  for (double t : times)
    for (double a : ages)
      for (std::size_t k = 0; k < n; ++k) {
        if (birth_ok) {
          double m = model.birth(k)(a, t);
          if (!leq(lo.birth(k)(a, t), m) || !leq(m, hi.birth(k)(a, t))) {
            report("m- <= m <= m+", k, a, t);
            birth_ok = false;
          }
        }
        if (mort_ok)
          for (double v : v_samples) {
            double mm = model.mortality(k)(v, a, t);
            if (!leq(hi.mortality(k)(v, a, t), mm) || !leq(mm, lo.mortality(k)(v, a, t))) {
              report("M+ <= M <= M-", k, a, t);
              mort_ok = false;
              break;
            }
          }
        if (disp_ok)
          for (std::size_t j = 0; j < n; ++j) {
            double d = model.dispersal()(k, j)(a, t);
            if (!leq(lo.dispersal()(k, j)(a, t), d) || !leq(d, hi.dispersal()(k, j)(a, t))) {
              report("D- <= D <= D+", k, a, t);
              disp_ok = false;
              break;
            }
          }
      }
  return issues;
}

std::string to_string(envelope_case c) {
  switch (c) {
    case envelope_case::extinction:
      return "extinction";
    case envelope_case::sandwich:
      return "sandwich";
    case envelope_case::inconclusive:
      return "inconclusive";
  }
  return "?";
}

envelope_report envelope_bounds(const envelope_pair& pair, const model_spec& model, double t_end,
                                const envelope_options& options) {
  auto issues = check_envelope(pair, model, t_end);
  if (!issues.empty()) {
    std::string msg = "envelope inequalities fail:";
    for (auto& s : issues) msg += " " + s + ";";
    throw precondition_error(msg);
  }
  envelope_report r;
  r.check_from = options.check_from > 0.0 ? options.check_from : 20.0 * model.fertility_hi();
  r.check_eps = options.check_eps;
  renewal_options ro;
  ro.da = options.da;
  ro.tol = options.tol;

  r.sigma_upper = assemble_periodic_R0(pair.upper_model, options.nodes, options.da).sigma;
  if (r.sigma_upper <= 1.0) {
    r.kind = envelope_case::extinction;
    r.chi = solve_renewal(model, t_end, ro).rho;
    for (std::size_t j = 0; j < r.chi.size(); ++j)
      if (r.chi.time(j) >= t_end - model.fertility_hi() - 1e-12)
        for (std::size_t k = 0; k < model.patches(); ++k)
          r.final_window_max = std::max(r.final_window_max, std::abs(r.chi.value(j, k)));
    r.passed = r.final_window_max < options.decay_tol;
    r.note = "upper envelope is subcritical; newborns must vanish";
    return r;
  }

  r.sigma_lower = assemble_periodic_R0(pair.lower_model, options.nodes, options.da).sigma;
  bool seeded = false;
  const double probe = model.fertility_hi() / 64.0;
  for (double t = 0.0; t < model.fertility_hi() && !seeded; t += probe)
    seeded = apply_F(pair.lower_model, t, options.da).maxCoeff() > 0.0;
  if (r.sigma_lower <= 1.0 || !seeded) {
    r.kind = envelope_case::inconclusive;
    r.note = r.sigma_lower <= 1.0 ? "upper envelope supercritical but lower envelope not supercritical"
                                  : "lower envelope never sees the initial population";
    return r;
  }

  r.kind = envelope_case::sandwich;
  periodic_options po;
  po.da = options.da;
  po.tol = options.tol;
  r.rho_minus = periodic_maximal_solution(pair.lower_model, options.nodes, po).theta;
  r.rho_plus = periodic_maximal_solution(pair.upper_model, options.nodes, po).theta;
  r.chi = solve_renewal(model, t_end, ro).rho;

  const std::size_t n = model.patches();
  // largest amount by which the sandwich is missed at grid node j
  std::vector<double> miss(r.chi.size(), 0.0);
  for (std::size_t j = 0; j < r.chi.size(); ++j) {
    double t = r.chi.time(j);
    Eigen::VectorXd lo = (*r.rho_minus)(t), hi = (*r.rho_plus)(t);
    for (std::size_t k = 0; k < n; ++k) {
      double v = r.chi.value(j, k);
      double m = std::max(lo[k] - v, v - hi[k]);
      miss[j] = std::max(miss[j], m);
      if (t > r.check_from && m > r.check_eps) r.violations.push_back({t, k, v, lo[k], hi[k]});
    }
  }
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    double last_bad = -1.0;
    for (std::size_t j = 0; j < miss.size(); ++j)
      if (miss[j] > eps) last_bad = r.chi.time(j);
    double t2 = last_bad < 0.0 ? 0.0 : last_bad + r.chi.step();
    if (t2 <= t_end - model.fertility_hi()) {
      r.witness_T2 = t2;
      r.witness_eps = eps;
    }
  }
  bool checked = r.check_from < r.chi.end_time();
  r.passed = checked && r.violations.empty();
  r.note = checked ? "sandwich between the periodic maximal solutions of the envelopes"
                   : "simulation ends before the checked window";
  return r;
}

}  // namespace metarenewal
