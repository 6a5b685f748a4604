#include "metarenewal/characteristics.hpp"

#include <algorithm>
#include <cmath>

#include "integrator.hpp"
#include "metarenewal/errors.hpp"

namespace metarenewal {

trajectory::trajectory(double offset, double step, std::size_t patches, std::vector<double> values, double clamped)
    : offset_(offset), step_(step), n_(patches), values_(std::move(values)), clamped_(clamped) {}

cohort_state trajectory::state(std::size_t i) const {
  cohort_state s{age(i), Eigen::VectorXd(n_)};
  for (std::size_t k = 0; k < n_; ++k) s.densities[k] = value(i, k);
  return s;
}

double grid_step(const model_spec& model, double da) {
  if (!(da > 0.0)) throw precondition_error("age step must be positive");
  if (da > model.fertility_lo() / 8.0 * (1.0 + 1e-12))
    throw precondition_error("age step must not exceed a_m / 8");
  return model.lifespan() / static_cast<double>(aligned_cells(model, da));
}

std::size_t aligned_cells(const model_spec& model, double da) {
  const double b = model.lifespan();
  std::size_t n0 = detail::grid_cells(b, da);
  std::vector<double> marks{model.fertility_lo(), model.fertility_hi()};
  for (std::size_t k = 0; k < model.patches(); ++k) model.birth(k).age_breakpoints(marks);
  for (std::size_t n = n0; n <= 64 * n0; ++n) {
    bool ok = std::all_of(marks.begin(), marks.end(), [&](double x) {
      if (x <= 0.0 || x >= b) return true;
      double u = x * static_cast<double>(n) / b;
      return std::abs(u - std::round(u)) < 1e-9 * std::max(1.0, u);
    });
    if (ok) return n;
  }
  return n0;
}

namespace {

trajectory run(const model_spec& model, detail::branch br, detail::flow fl, const Eigen::VectorXd& h0, double y,
               double da) {
  const std::size_t n = model.patches();
  if (static_cast<std::size_t>(h0.size()) != n) throw precondition_error("initial vector has wrong length");
  double step = grid_step(model, da);
  std::size_t cells = aligned_cells(model, da);
  std::vector<double> values((cells + 1) * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) values[k] = h0[k];
  if (h0.isZero(0.0)) return trajectory(y, step, n, std::move(values));

  auto plan = detail::step_plan::uniform(model, br, y, step, cells);
  detail::integrator integ(n, fl, false, false);
  std::vector<double> state(h0.data(), h0.data() + n);
  double clamped = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    clamped = std::max(clamped, integ.step(plan, i, state.data()));
    std::copy(state.begin(), state.end(), values.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
  }
  double scale = h0.cwiseAbs().maxCoeff();
  if (clamped > 1e-8 * scale)
    throw step_size_error("negative densities beyond round-off; refine the age step");
  return trajectory(y, step, n, std::move(values), clamped);
}

}  // namespace

trajectory solve_phi(const model_spec& model, const Eigen::VectorXd& rho0, double y, double da) {
  if ((rho0.array() < 0.0).any()) throw precondition_error("initial newborn vector must be nonnegative");
  return run(model, detail::branch::phi, detail::flow::nonlinear, rho0, y, da);
}

trajectory solve_psi(const model_spec& model, double y, double da) {
  if (!(y >= 0.0)) throw precondition_error("offset must be nonnegative");
  Eigen::VectorXd f(model.patches());
  for (std::size_t k = 0; k < model.patches(); ++k) f[k] = model.initial_density(k, y);
  return run(model, detail::branch::psi, detail::flow::nonlinear, f, y, da);
}

trajectory solve_linearized(const model_spec& model, const Eigen::VectorXd& x0, double t_anchor, double da) {
  return run(model, detail::branch::phi, detail::flow::linear, x0, t_anchor, da);
}

bool check_comparison(const trajectory& u, const trajectory& v, double tol) {
  if (u.size() != v.size() || u.patches() != v.patches() || u.step() != v.step())
    throw precondition_error("trajectories live on different grids");
  for (std::size_t k = 0; k < u.patches(); ++k)
    if (u.value(0, k) < v.value(0, k)) return true;
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t k = 0; k < u.patches(); ++k)
      if (u.value(i, k) < v.value(i, k) - tol) return false;
  return true;
}

bool check_majorant(const trajectory& traj, double omega1, double gamma, double tol) {
  for (std::size_t i = 1; i < traj.size(); ++i) {
    double bound = omega1 * std::pow(traj.age(i), -1.0 / gamma) + tol;
    for (std::size_t k = 0; k < traj.patches(); ++k)
      if (traj.value(i, k) > bound) return false;
  }
  return true;
}

}  // namespace metarenewal
