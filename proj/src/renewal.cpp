#include "metarenewal/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "integrator.hpp"
#include "metarenewal/characteristics.hpp"
#include "metarenewal/errors.hpp"

namespace metarenewal {

newborn_path::newborn_path(double step, std::size_t patches, std::vector<double> values)
    : step_(step), n_(patches), values_(std::move(values)) {
  if (n_ == 0 || values_.empty() || values_.size() % n_ != 0) throw precondition_error("malformed newborn path");
}

Eigen::VectorXd newborn_path::at(std::size_t j) const {
  Eigen::VectorXd v(n_);
  for (std::size_t k = 0; k < n_; ++k) v[k] = value(j, k);
  return v;
}

Eigen::VectorXd newborn_path::interpolate(double t) const {
  double u = t / step_;
  if (u < -1e-9 || u > static_cast<double>(size() - 1) + 1e-9)
    throw precondition_error("newborn path is not defined at the requested time");
  u = std::clamp(u, 0.0, static_cast<double>(size() - 1));
  auto j = static_cast<std::size_t>(std::floor(u));
  if (j >= size() - 1) return at(size() - 1);
  double w = u - static_cast<double>(j);
  return (1.0 - w) * at(j) + w * at(j + 1);
}

density_field::density_field(double step, std::size_t patches, std::size_t age_nodes, std::size_t time_nodes,
                             std::vector<double> values)
    : step_(step), n_(patches), ages_(age_nodes), times_(time_nodes), values_(std::move(values)) {}

namespace {

double check_step(const model_spec& model, double da) {
  if (da == 0.0) da = model.default_step();
  return grid_step(model, da);
}

// Phi along every characteristic label t_l = l * step, with the birth weights of the
// trapezoid rule on the age grid.
class renewal_engine {
 public:
  renewal_engine(const model_spec& model, double step, std::size_t steps)
      : model_(model), step_(step), m_(steps), n_(model.patches()), integ_(n_, detail::flow::nonlinear, false, false) {
    ilo_ = static_cast<std::size_t>(std::floor(model.fertility_lo() / step + 1e-9));
    ihi_ = static_cast<std::size_t>(std::ceil(model.fertility_hi() / step - 1e-9));
    tdep_ = model.time_dependent();
    width_ = ihi_ + 1;
    std::size_t cells = ihi_ - ilo_;
    std::size_t rows = tdep_ ? m_ + 1 : 1;
    wl_.assign(rows * cells * n_, 0.0);
    wr_.assign(rows * cells * n_, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double t = static_cast<double>(r) * step_;
      for (std::size_t c = 0; c < cells; ++c) {
        double a0 = static_cast<double>(ilo_ + c) * step_, a1 = a0 + step_;
        for (std::size_t k = 0; k < n_; ++k) {
          wl_[(r * cells + c) * n_ + k] = 0.5 * step_ * model.birth(k)(a0, t, side::right);
          wr_[(r * cells + c) * n_ + k] = 0.5 * step_ * model.birth(k)(a1, t, side::left);
        }
      }
    }
    if (!tdep_) shared_ = detail::step_plan::uniform(model, detail::branch::phi, 0.0, step_, ihi_);
    phi_.assign((m_ + 1) * width_ * n_, 0.0);
    last_.assign((m_ + 1) * n_, -1.0);
  }

  std::size_t steps() const { return m_; }

  void update_labels(const std::vector<double>& rho) {
    std::vector<double> state(n_);
    for (std::size_t l = 0; l <= m_; ++l) {
      const double* r = rho.data() + l * n_;
      if (std::equal(r, r + n_, last_.data() + l * n_)) continue;
      std::copy(r, r + n_, last_.data() + l * n_);
      std::size_t steps = std::min(ihi_, m_ - l);
      double* out = phi_.data() + l * width_ * n_;
      std::copy(r, r + n_, out);
      double scale = *std::max_element(r, r + n_);
      if (scale == 0.0) {
        std::fill(out, out + (steps + 1) * n_, 0.0);
        continue;
      }
      std::copy(r, r + n_, state.begin());
      std::optional<detail::step_plan> own;
      if (tdep_) own = detail::step_plan::uniform(model_, detail::branch::phi, static_cast<double>(l) * step_, step_, steps);
      const detail::step_plan& plan = tdep_ ? *own : *shared_;
      double clamp = 0.0;
      for (std::size_t s = 0; s < steps; ++s) {
        clamp = std::max(clamp, integ_.step(plan, s, state.data()));
        std::copy(state.begin(), state.end(), out + (s + 1) * n_);
      }
      if (clamp > 1e-8 * scale) throw step_size_error("negative densities beyond round-off; refine the age step");
    }
  }

  double phi(std::size_t label, std::size_t age, std::size_t k) const {
    return phi_[(label * width_ + age) * n_ + k];
  }

  void apply_k(std::vector<double>& out) const {
    out.assign((m_ + 1) * n_, 0.0);
    std::size_t cells = ihi_ - ilo_;
    for (std::size_t j = ilo_ + 1; j <= m_; ++j) {
      std::size_t row = tdep_ ? j : 0;
      std::size_t top = std::min(j, ihi_);
      double* o = out.data() + j * n_;
      for (std::size_t i = ilo_; i < top; ++i) {
        const double* wl = wl_.data() + (row * cells + (i - ilo_)) * n_;
        const double* wr = wr_.data() + (row * cells + (i - ilo_)) * n_;
        for (std::size_t k = 0; k < n_; ++k) o[k] += wl[k] * phi(j - i, i, k) + wr[k] * phi(j - i - 1, i + 1, k);
      }
    }
  }

  std::vector<double> apply_f() const {
    std::vector<double> out((m_ + 1) * n_, 0.0);
    if (model_.initial_zero()) return out;
    std::size_t cells = ihi_ - ilo_;
    // psi[l][x] for labels l = 0..ihi and x nodes 0..min(m, ihi - l)
    std::vector<std::vector<double>> psi(ihi_ + 1);
    detail::integrator integ(n_, detail::flow::nonlinear, false, false);
    for (std::size_t l = 0; l <= ihi_; ++l) {
      std::size_t steps = std::min(m_, ihi_ - l);
      auto& p = psi[l];
      p.assign((steps + 1) * n_, 0.0);
      double y = static_cast<double>(l) * step_;
      double scale = 0.0;
      for (std::size_t k = 0; k < n_; ++k) {
        p[k] = model_.initial_density(k, y);
        scale = std::max(scale, p[k]);
      }
      if (scale == 0.0 || steps == 0) continue;
      auto plan = detail::step_plan::uniform(model_, detail::branch::psi, y, step_, steps);
      std::vector<double> state(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(n_));
      double clamp = 0.0;
      for (std::size_t s = 0; s < steps; ++s) {
        clamp = std::max(clamp, integ.step(plan, s, state.data()));
        std::copy(state.begin(), state.end(), p.begin() + static_cast<std::ptrdiff_t>((s + 1) * n_));
      }
      if (clamp > 1e-8 * scale) throw step_size_error("negative densities beyond round-off; refine the age step");
    }
    for (std::size_t j = 0; j <= m_ && j < ihi_; ++j) {
      std::size_t row = tdep_ ? j : 0;
      double* o = out.data() + j * n_;
      for (std::size_t i = std::max(j, ilo_); i < ihi_; ++i) {
        const double* wl = wl_.data() + (row * cells + (i - ilo_)) * n_;
        const double* wr = wr_.data() + (row * cells + (i - ilo_)) * n_;
        for (std::size_t k = 0; k < n_; ++k)
          o[k] += wl[k] * psi[i - j][j * n_ + k] + wr[k] * psi[i + 1 - j][j * n_ + k];
      }
    }
    return out;
  }

 private:
  const model_spec& model_;
  double step_;
  std::size_t m_, n_;
  std::size_t ilo_, ihi_, width_;
  bool tdep_;
  std::vector<double> wl_, wr_;
  std::optional<detail::step_plan> shared_;
  detail::integrator integ_;
  std::vector<double> phi_, last_;
};

// integrates one characteristic from x = 0 to x_end (grid steps plus a final partial step)
Eigen::VectorXd integrate_to(const model_spec& model, detail::branch br, double y, Eigen::VectorXd h, double x_end,
                             double step) {
  if (x_end <= 0.0 || h.isZero(0.0)) return h;
  std::vector<double> nodes;
  for (double x = 0.0; x < x_end - 1e-12 * std::max(1.0, x_end); x += step) nodes.push_back(x);
  nodes.push_back(x_end);
  detail::step_plan plan(model, br, y, nodes);
  detail::integrator integ(model.patches(), detail::flow::nonlinear, false, false);
  double scale = h.cwiseAbs().maxCoeff(), clamp = 0.0;
  for (std::size_t s = 0; s < plan.steps(); ++s) clamp = std::max(clamp, integ.step(plan, s, h.data()));
  if (clamp > 1e-8 * scale) throw step_size_error("negative densities beyond round-off; refine the age step");
  return h;
}

// quadrature nodes on [lo, hi]: grid multiples of step plus rate breakpoints
std::vector<double> quadrature_nodes(const model_spec& model, double lo, double hi, double step) {
  std::vector<double> a{lo, hi};
  for (double x = std::ceil(lo / step) * step; x < hi; x += step)
    if (x > lo) a.push_back(x);
  for (double x : model.age_breakpoints())
    if (x > lo && x < hi) a.push_back(x);
  std::sort(a.begin(), a.end());
  std::vector<double> out;
  for (double x : a)
    if (out.empty() || x - out.back() > 1e-12) out.push_back(x);
  return out;
}

}  // namespace

Eigen::VectorXd apply_K(const model_spec& model, const newborn_path& rho, double t) {
  const std::size_t n = model.patches();
  if (rho.patches() != n) throw precondition_error("newborn path has the wrong number of patches");
  if (t > rho.end_time() + 1e-9 * std::max(1.0, t) || t < 0.0)
    throw precondition_error("newborn path is not defined on [0, t]");
  double step = check_step(model, rho.step());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  double hi = std::min(t, model.fertility_hi());
  if (hi <= model.fertility_lo()) return out;
  auto ages = quadrature_nodes(model, model.fertility_lo(), hi, step);
  std::vector<Eigen::VectorXd> vals;
  for (double a : ages)
    vals.push_back(integrate_to(model, detail::branch::phi, t - a, rho.interpolate(std::max(t - a, 0.0)), a, step));
  for (std::size_t p = 0; p + 1 < ages.size(); ++p) {
    double h = ages[p + 1] - ages[p];
    for (std::size_t k = 0; k < n; ++k)
      out[k] += 0.5 * h *
                (model.birth(k)(ages[p], t, side::right) * vals[p][k] +
                 model.birth(k)(ages[p + 1], t, side::left) * vals[p + 1][k]);
  }
  return out;
}

Eigen::VectorXd apply_F(const model_spec& model, double t, double da) {
  const std::size_t n = model.patches();
  double step = check_step(model, da);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (t >= model.fertility_hi() || model.initial_zero()) return out;
  if (t < 0.0) throw precondition_error("time must be nonnegative");
  double lo = std::max(t, model.fertility_lo());
  auto ages = quadrature_nodes(model, lo, model.fertility_hi(), step);
  std::vector<Eigen::VectorXd> vals;
  for (double a : ages) {
    Eigen::VectorXd f(n);
    for (std::size_t k = 0; k < n; ++k) f[k] = model.initial_density(k, a - t);
    vals.push_back(integrate_to(model, detail::branch::psi, a - t, f, t, step));
  }
  for (std::size_t p = 0; p + 1 < ages.size(); ++p) {
    double h = ages[p + 1] - ages[p];
    for (std::size_t k = 0; k < n; ++k)
      out[k] += 0.5 * h *
                (model.birth(k)(ages[p], t, side::right) * vals[p][k] +
                 model.birth(k)(ages[p + 1], t, side::left) * vals[p + 1][k]);
  }
  return out;
}

int default_renewal_iterations(const model_spec& model, double t_end) {
  return std::max(200, 2 * static_cast<int>(std::ceil(t_end / model.fertility_lo())) + 20);
}

std::optional<long long> iteration_bound(const model_spec& model, double t_end, double tol) {
  double omega2;
  try {
    omega2 = omega_constants(model).omega2;
  } catch (const invalid_model&) {
    return std::nullopt;
  }
  double n = static_cast<double>(model.patches());
  double c = std::exp(n * model.lifespan() * model.dispersal_sup()) * model.birth_sup();
  double ct = c * t_end;
  if (ct == 0.0) return 2.0 * omega2 < tol ? 0LL : 1LL;
  double log_target = std::log(tol);
  auto log_bound = [&](double i) { return std::log(2.0 * omega2) + ct + i * std::log(ct) - std::lgamma(i + 1.0); };
  // the bound increases up to i = ct and decreases afterwards
  double lo = 0.0;
  if (log_bound(lo) < log_target) return 0;
  double peak = std::floor(ct);
  double hi = std::max(1.0, 2.0 * peak);
  while (log_bound(hi) >= log_target) {
    hi *= 2.0;
    if (hi > 1e15) return std::nullopt;
  }
  lo = peak;
  while (hi - lo > 1.0) {
    double mid = std::floor(0.5 * (lo + hi));
    if (log_bound(mid) < log_target) hi = mid;
    else lo = mid;
  }
  return static_cast<long long>(hi);
}

renewal_solution solve_renewal(const model_spec& model, double t_end, const renewal_options& options) {
  if (!(t_end >= model.fertility_hi())) throw precondition_error("T_end must be at least A_m");
  if (!(options.tol > 0.0)) throw precondition_error("tolerance must be positive");
  double step = check_step(model, options.da);
  const std::size_t n = model.patches();
  auto steps = static_cast<std::size_t>(std::ceil(t_end / step - 1e-9));
  int max_iter = options.max_iter > 0 ? options.max_iter : default_renewal_iterations(model, t_end);

  renewal_engine engine(model, step, steps);
  std::vector<double> f = engine.apply_f();
  std::vector<double> rho((steps + 1) * n, 0.0), next;
  double diff = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    engine.update_labels(rho);
    engine.apply_k(next);
    diff = 0.0;
    for (std::size_t q = 0; q < next.size(); ++q) {
      next[q] += f[q];
      if (next[q] < rho[q] - 1e-10 * (1.0 + std::abs(rho[q])))
        throw consistency_error("monotone renewal iteration decreased; refine the age step");
      diff = std::max(diff, std::abs(next[q] - rho[q]));
    }
    if (diff <= options.tol) {
      renewal_solution sol{newborn_path(step, n, std::move(rho)), it, diff, std::nullopt};
      sol.certificate = iteration_bound(model, static_cast<double>(steps) * step, options.tol);
      return sol;
    }
    rho.swap(next);
  }
  std::ostringstream os;
  os << "renewal iteration did not converge in " << max_iter << " sweeps (residual " << diff << ")";
  throw non_convergence(os.str(), max_iter, diff);
}

std::vector<double> apply_K_on_grid(const model_spec& model, const newborn_path& rho) {
  if (rho.patches() != model.patches()) throw precondition_error("newborn path has the wrong number of patches");
  double step = check_step(model, rho.step());
  if (std::abs(step - rho.step()) > 1e-12 * step)
    throw precondition_error("newborn path step must divide the lifespan");
  renewal_engine engine(model, step, rho.size() - 1);
  engine.update_labels(rho.values());
  std::vector<double> out;
  engine.apply_k(out);
  return out;
}

density_field reconstruct_density(const model_spec& model, const newborn_path& rho) {
  const std::size_t n = model.patches();
  double step = check_step(model, rho.step());
  if (std::abs(step - rho.step()) > 1e-12 * step)
    throw precondition_error("newborn path step must divide the lifespan");
  std::size_t ages = aligned_cells(model, step) + 1;
  std::size_t times = rho.size();
  std::vector<double> field(ages * times * n, 0.0);
  auto put = [&](std::size_t i, std::size_t j, const double* v) {
    std::copy(v, v + n, field.begin() + static_cast<std::ptrdiff_t>((j * ages + i) * n));
  };
  detail::integrator integ(n, detail::flow::nonlinear, false, false);
  std::optional<detail::step_plan> shared;
  if (!model.time_dependent())
    shared = detail::step_plan::uniform(model, detail::branch::phi, 0.0, step, ages - 1);
  for (std::size_t l = 1; l < times; ++l) {
    std::size_t steps = std::min(ages - 1, times - 1 - l);
    std::vector<double> state(rho.values().begin() + static_cast<std::ptrdiff_t>(l * n),
                              rho.values().begin() + static_cast<std::ptrdiff_t>((l + 1) * n));
    put(0, l, state.data());
    if (std::all_of(state.begin(), state.end(), [](double v) { return v == 0.0; })) continue;
    std::optional<detail::step_plan> own;
    if (!shared) own = detail::step_plan::uniform(model, detail::branch::phi, rho.time(l), step, steps);
    const auto& plan = shared ? *shared : *own;
    for (std::size_t s = 0; s < steps; ++s) {
      integ.step(plan, s, state.data());
      put(s + 1, l + s + 1, state.data());
    }
  }
  for (std::size_t l = 0; l < ages; ++l) {
    std::size_t steps = std::min(times - 1, ages - 1 - l);
    double y = static_cast<double>(l) * step;
    std::vector<double> state(n);
    for (std::size_t k = 0; k < n; ++k) state[k] = model.initial_density(k, y);
    put(l, 0, state.data());
    if (std::all_of(state.begin(), state.end(), [](double v) { return v == 0.0; })) continue;
    auto plan = detail::step_plan::uniform(model, detail::branch::psi, y, step, steps);
    for (std::size_t s = 0; s < steps; ++s) {
      integ.step(plan, s, state.data());
      put(l + s + 1, s + 1, state.data());
    }
  }
  return density_field(step, n, ages, times, std::move(field));
}

Eigen::VectorXd total_population(const density_field& field, double t) {
  double u = t / field.step();
  auto j = static_cast<std::size_t>(std::llround(u));
  if (std::abs(u - static_cast<double>(j)) > 1e-6 || j >= field.time_nodes())
    throw precondition_error("time is not a node of the density field");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(field.patches());
  for (std::size_t i = 0; i + 1 < field.age_nodes(); ++i)
    for (std::size_t k = 0; k < field.patches(); ++k)
      p[k] += 0.5 * field.step() * (field.value(i, j, k) + field.value(i + 1, j, k));
  return p;
}

positivity_witness convolution_positivity_witness(const model_spec& model, const newborn_path& rho, std::size_t k,
                                                  double s1, double s2) {
  if (k >= model.patches()) throw precondition_error("patch index out of range");
  if (!(s1 <= s2) || s1 < 0.0) throw precondition_error("need 0 <= s1 <= s2");
  positivity_witness w;
  auto kr = apply_K_on_grid(model, rho);
  const std::size_t n = model.patches();
  double lo = s1 + model.fertility_lo(), hi = s2 + model.fertility_hi();
  std::size_t best_len = 0, best_start = 0;
  std::size_t j = 0;
  while (j < rho.size()) {
    if (!(kr[j * n + k] > 0.0)) {
      ++j;
      continue;
    }
    std::size_t start = j;
    while (j < rho.size() && kr[j * n + k] > 0.0) ++j;
    double t0 = rho.time(start), t1 = rho.time(j - 1);
    if (t1 >= lo && t0 <= hi && j - start > best_len) {
      best_len = j - start;
      best_start = start;
    }
  }
  if (best_len == 0) {
    std::ostringstream os;
    os << "(K rho)_" << k + 1 << " vanishes at every grid point of [" << lo << ", " << hi << "]";
    w.diagnostic = os.str();
    return w;
  }
  w.interval = std::pair{rho.time(best_start), rho.time(best_start + best_len - 1)};
  std::ostringstream os;
  os << "(K rho)_" << k + 1 << " > 0 on " << best_len << " grid points";
  w.diagnostic = os.str();
  return w;
}

}  // namespace metarenewal
