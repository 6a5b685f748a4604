#include "metarenewal/steady.hpp"

#include <cmath>
#include <sstream>

#include "integrator.hpp"
#include "metarenewal/errors.hpp"
#include "metarenewal/spectral.hpp"

namespace metarenewal {

std::string to_string(dynamics d) {
  switch (d) {
    case dynamics::extinction:
      return "Extinction";
    case dynamics::permanency:
      return "Permanency";
    case dynamics::marginal:
      return "Marginal";
  }
  return "?";
}

namespace {

void require_time_independent(const model_spec& model) {
  if (model.time_dependent()) throw precondition_error("operation needs time-independent coefficients");
}

double step_for(const model_spec& model, double da) { return grid_step(model, da == 0.0 ? model.default_step() : da); }

class kbar_evaluator {
 public:
  kbar_evaluator(const model_spec& model, double da)
      : n_(model.patches()),
        steps_(static_cast<std::size_t>(std::ceil(model.fertility_hi() / step_for(model, da) - 1e-9))),
        plan_(detail::step_plan::uniform(model, detail::branch::phi, 0.0, step_for(model, da), steps_)),
        integ_(n_, detail::flow::nonlinear, true, false),
        state_(2 * n_) {
    require_time_independent(model);
  }

  Eigen::VectorXd operator()(const Eigen::VectorXd& rho) {
    if (static_cast<std::size_t>(rho.size()) != n_) throw precondition_error("vector has the wrong length");
    if ((rho.array() < 0.0).any()) throw precondition_error("newborn vector must be nonnegative");
    std::fill(state_.begin(), state_.end(), 0.0);
    for (std::size_t k = 0; k < n_; ++k) state_[k] = rho[k];
    double clamp = 0.0;
    for (std::size_t s = 0; s < steps_; ++s) clamp = std::max(clamp, integ_.step(plan_, s, state_.data()));
    if (clamp > 1e-8 * rho.maxCoeff()) throw step_size_error("negative densities beyond round-off; refine the age step");
    Eigen::VectorXd out(n_);
    for (std::size_t k = 0; k < n_; ++k) out[k] = state_[n_ + k];
    return out;
  }

 private:
  std::size_t n_, steps_;
  detail::step_plan plan_;
  detail::integrator integ_;
  std::vector<double> state_;
};

Eigen::VectorXd run_descent(const model_spec& model, const Eigen::VectorXd& start, const steady_options& options,
                            int* iterations, double* last_step, bool* converged) {
  kbar_evaluator kbar(model, options.da);
  Eigen::VectorXd x = start;
  double diff = 0.0;
  for (int it = 1; it <= options.max_iter; ++it) {
    Eigen::VectorXd y = kbar(x);
    for (Eigen::Index k = 0; k < x.size(); ++k)
      if (y[k] > x[k] + 1e-10 * (1.0 + std::abs(x[k])))
        throw consistency_error("maximal-solution iterates increased; start is not an upper solution");
    diff = (y - x).cwiseAbs().maxCoeff();
    x = y;
    if (diff < options.tol) {
      if (iterations) *iterations = it;
      if (last_step) *last_step = diff;
      if (converged) *converged = true;
      return x;
    }
  }
  if (iterations) *iterations = options.max_iter;
  if (last_step) *last_step = diff;
  if (converged) {
    *converged = false;
    return x;
  }
  std::ostringstream os;
  os << "maximal solution iteration did not converge in " << options.max_iter << " steps (last step " << diff << ")";
  throw non_convergence(os.str(), options.max_iter, diff);
}

}  // namespace

Eigen::VectorXd apply_Kbar(const model_spec& model, const Eigen::VectorXd& rho, double da) {
  return kbar_evaluator(model, da)(rho);
}

trajectory stationary_profile(const model_spec& model, const Eigen::VectorXd& rho, double da) {
  require_time_independent(model);
  return solve_phi(model, rho, 0.0, da == 0.0 ? model.default_step() : da);
}

Eigen::VectorXd profile_total(const model_spec& model, const Eigen::VectorXd& rho, double da) {
  require_time_independent(model);
  const std::size_t n = model.patches();
  double step = step_for(model, da);
  std::size_t steps = aligned_cells(model, step);
  auto plan = detail::step_plan::uniform(model, detail::branch::phi, 0.0, step, steps);
  detail::integrator integ(n, detail::flow::nonlinear, false, true);
  std::vector<double> state(2 * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) state[k] = rho[k];
  for (std::size_t s = 0; s < steps; ++s) integ.step(plan, s, state.data());
  Eigen::VectorXd out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = state[n + k];
  return out;
}

Eigen::VectorXd descend(const model_spec& model, const Eigen::VectorXd& start, const steady_options& options,
                        int* iterations, double* last_step) {
  return run_descent(model, start, options, iterations, last_step, nullptr);
}

maximal_solution_result maximal_solution(const model_spec& model, const steady_options& options) {
  require_time_independent(model);
  double w2 = omega_constants(model).omega2;
  Eigen::VectorXd start = Eigen::VectorXd::Constant(model.patches(), w2);
  maximal_solution_result r;
  r.theta = run_descent(model, start, options, &r.iterations, &r.last_step, nullptr);
  Eigen::VectorXd second = run_descent(model, 2.0 * start, options, nullptr, nullptr, nullptr);
  r.start_agreement = (second - r.theta).cwiseAbs().maxCoeff();
  if (r.start_agreement > 10.0 * options.tol)
    throw consistency_error("maximal solution depends on the start vector beyond tolerance");
  return r;
}

steady_state classify(const model_spec& model, const steady_options& options) {
  require_time_independent(model);
  auto r0 = assemble_R0(model, options.da);
  steady_state st{Eigen::VectorXd::Zero(model.patches()), dynamics::extinction,
                  trajectory(0.0, 1.0, 1, {0.0}), Eigen::VectorXd::Zero(model.patches()), r0.sigma, true};
  const double sigma = r0.sigma;
  if (sigma <= 1.0 - options.margin) {
    auto ms = maximal_solution(model, options);
    double allowed = std::max(10.0 * options.tol, 2.0 * options.tol / (1.0 - sigma));
    if (ms.theta.cwiseAbs().maxCoeff() > allowed)
      throw consistency_error("sigma < 1 but the maximal solution is not zero");
    st.classification = dynamics::extinction;
  } else if (sigma >= 1.0 + options.margin) {
    auto ms = maximal_solution(model, options);
    st.theta = ms.theta;
    st.classification = dynamics::permanency;
    bool positive = r0.irreducible ? ms.theta.minCoeff() > options.tol : ms.theta.maxCoeff() > options.tol;
    if (!positive) throw consistency_error("sigma > 1 but the maximal solution is not positive");
  } else {
    steady_options bounded = options;
    bounded.max_iter = std::min(options.max_iter, 2000);
    double w2 = omega_constants(model).omega2;
    bool converged = false;
    st.theta = run_descent(model, Eigen::VectorXd::Constant(model.patches(), w2), bounded, nullptr, nullptr, &converged);
    st.converged = converged;
    st.classification = dynamics::marginal;
  }
  st.profile = stationary_profile(model, st.theta, options.da);
  st.asymptotic_total = profile_total(model, st.theta, options.da);
  return st;
}

bool check_lower_solution(const model_spec& model, const Eigen::VectorXd& rho, double tol, double da) {
  Eigen::VectorXd k = apply_Kbar(model, rho, da);
  return ((rho - k).array() <= tol).all();
}

bool check_upper_solution(const model_spec& model, const Eigen::VectorXd& rho, double tol, double da) {
  Eigen::VectorXd k = apply_Kbar(model, rho, da);
  return ((k - rho).array() <= tol).all();
}

}  // namespace metarenewal
