#include "metarenewal/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "age_quadrature.hpp"
#include "integrator.hpp"
#include "metarenewal/characteristics.hpp"
#include "metarenewal/errors.hpp"
#include "metarenewal/steady.hpp"

namespace metarenewal {

namespace {

void require_time_independent(const model_spec& model) {
  if (model.time_dependent()) throw precondition_error("operation needs time-independent coefficients");
}

double step_for(const model_spec& model, double da) { return grid_step(model, da == 0.0 ? model.default_step() : da); }

std::optional<perron_result> power(const Eigen::MatrixXd& a, double shift, int max_iter) {
  const auto n = a.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd y = a * x + shift * x;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double r = y[i] / x[i];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    double norm = y.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) return std::nullopt;
    x = y / norm;
    if (hi - lo <= 1e-12 * hi) {
      perron_result r;
      r.sigma = 0.5 * (lo + hi) - shift;
      r.vector = x;
      r.iterations = it;
      return r;
    }
  }
  return std::nullopt;
}

}  // namespace

bool is_irreducible(const Eigen::MatrixXd& a) {
  const auto n = a.rows();
  if (n == 1) return true;
  auto reach = [&](bool transpose) {
    std::vector<char> seen(n, 0);
    std::vector<Eigen::Index> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      auto i = stack.back();
      stack.pop_back();
      for (Eigen::Index j = 0; j < n; ++j) {
        double v = transpose ? a(j, i) : a(i, j);
        if (!seen[j] && v > 0.0) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  return reach(false) && reach(true);
}

perron_result dense_spectral_radius(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) throw consistency_error("dense eigensolver failed");
  const auto& ev = es.eigenvalues();
  Eigen::Index best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i].imag()) > 1e-10 * scale) continue;
    if (ev[i].real() > best_val) {
      best_val = ev[i].real();
      best = i;
    }
  }
  perron_result r;
  r.sigma = std::max(0.0, best_val);
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  if (v.sum() < 0.0) v = -v;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] < 0.0 && v[i] > -1e-12 * v.cwiseAbs().maxCoeff()) v[i] = 0.0;
  r.vector = v / v.norm();
  r.method = "dense";
  return r;
}

perron_result spectral_radius(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw precondition_error("matrix must be square and nonempty");
  if (!a.allFinite() || (a.array() < 0.0).any()) throw precondition_error("matrix must be nonnegative");
  if (!is_irreducible(a))
    throw reducible_matrix("matrix is reducible; analyse each strongly connected component separately");
  if (a.rows() == 1) {
    perron_result r;
    r.sigma = a(0, 0);
    r.vector = Eigen::VectorXd::Ones(1);
    r.method = "power";
    return r;
  }
  if (auto r = power(a, 0.0, 2000)) {
    r->method = "power";
    return *r;
  }
  double shift = 0.5 * a.colwise().sum().maxCoeff();
  if (auto r = power(a, shift, 200000)) {
    r->method = "shifted-power";
    return *r;
  }
  return dense_spectral_radius(a);
}

repro_matrix assemble_R0(const model_spec& model, double da) {
  require_time_independent(model);
  const std::size_t n = model.patches();
  double step = step_for(model, da);
  auto steps = static_cast<std::size_t>(std::ceil(model.fertility_hi() / step - 1e-9));
  auto plan = detail::step_plan::uniform(model, detail::branch::phi, 0.0, step, steps);
  detail::integrator integ(n, detail::flow::linear, true, false);
  repro_matrix r;
  r.entries = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> state(2 * n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(state.begin(), state.end(), 0.0);
    state[j] = 1.0;
    for (std::size_t s = 0; s < steps; ++s) integ.step(plan, s, state.data());
    for (std::size_t k = 0; k < n; ++k) r.entries(k, j) = std::max(0.0, state[n + k]);
  }
  r.irreducible = is_irreducible(r.entries);
  perron_result p = r.irreducible ? spectral_radius(r.entries) : dense_spectral_radius(r.entries);
  r.sigma = p.sigma;
  r.perron_vector = p.vector;
  r.method = p.method;
  return r;
}

Eigen::VectorXd apply_R_lambda(const model_spec& model, double lambda, const Eigen::VectorXd& x, double da) {
  if (!(lambda > 0.0)) throw precondition_error("lambda must be positive");
  return apply_Kbar(model, lambda * x, da) / lambda;
}

namespace {

struct bound_profiles {
  std::vector<std::function<double(double, side)>> m, mu, p;
};

bound_profiles profiles(const model_spec& model) {
  bound_profiles b;
  for (std::size_t k = 0; k < model.patches(); ++k) {
    b.m.push_back([&model, k](double a, side s) { return model.birth(k)(a, 0.0, s); });
    b.mu.push_back([&model, k](double a, side s) { return model.mortality(k).base(a, 0.0, s); });
    b.p.push_back([&model, k](double a, side s) { return model.mortality(k).induced_p(a, 0.0, s); });
  }
  return b;
}

double pointwise(const std::vector<std::function<double(double, side)>>& f, double a, side s, bool take_max) {
  double r = f[0](a, s);
  for (std::size_t k = 1; k < f.size(); ++k) r = take_max ? std::max(r, f[k](a, s)) : std::min(r, f[k](a, s));
  return r;
}

// patch-k decay rate mu_k + |D_kk|
double own_decay(const model_spec& model, std::size_t k, double a, side s) {
  return model.mortality(k).base(a, 0.0, s) + std::abs(model.dispersal()(k, k)(a, 0.0, s));
}

void require_gamma(const model_spec& model) {
  auto g = model.common_gamma();
  if (!g) throw precondition_error("estimates need a common exponent gamma");
}

}  // namespace

sigma_bounds_result sigma_bounds(const model_spec& model, double da) {
  require_time_independent(model);
  if (!model.column_sums_nonpositive())
    throw precondition_error("sigma bounds need nonpositive column sums of D");
  const std::size_t n = model.patches();
  auto pr = profiles(model);
  auto nodes = detail::age_nodes(model, model.fertility_hi(), step_for(model, da), {pr.m, pr.mu});
  // state: E_k, L_k for every patch, then U, upper
  std::vector<double> y(2 * n + 2, 0.0);
  detail::integrate_nodes(nodes, y, [&](double a, side s, const double* v, double* out) {
    for (std::size_t k = 0; k < n; ++k) {
      out[k] = own_decay(model, k, a, s);
      out[n + k] = model.birth(k)(a, 0.0, s) * std::exp(-v[k]);
    }
    out[2 * n] = pointwise(pr.mu, a, s, false);
    out[2 * n + 1] = pointwise(pr.m, a, s, true) * std::exp(-v[2 * n]);
  });
  sigma_bounds_result r;
  r.lower = 0.0;
  for (std::size_t k = 0; k < n; ++k) r.lower = std::max(r.lower, y[n + k]);
  r.upper = y[2 * n + 1];
  r.sigma = assemble_R0(model, da).sigma;
  const double slack = 1e-9 * std::max(1.0, r.sigma);
  if (r.lower > r.sigma + slack || r.upper < r.sigma - slack)
    throw consistency_error("sigma bounds do not bracket the computed spectral radius");
  return r;
}

double theta_upper_integral(const model_spec& model, double t, double da) {
  require_time_independent(model);
  require_gamma(model);
  const double g = *model.common_gamma();
  const double n = static_cast<double>(model.patches());
  auto pr = profiles(model);
  auto nodes = detail::age_nodes(model, model.fertility_hi(), step_for(model, da), {pr.m, pr.mu, pr.p});
  const double tg = std::pow(t, g), pscale = g / std::pow(n, g);
  // state: U = int mu_min, P, I
  std::vector<double> y(3, 0.0);
  detail::integrate_nodes(nodes, y, [&](double a, side s, const double* v, double* out) {
    out[0] = pointwise(pr.mu, a, s, false);
    out[1] = pscale * pointwise(pr.p, a, s, false) * std::exp(-g * v[0]);
    out[2] = pointwise(pr.m, a, s, true) * std::exp(-v[0]) / std::pow(1.0 + tg * v[1], 1.0 / g);
  });
  return y[2];
}

double theta_lower_integral(const model_spec& model, std::size_t k, double t, const std::optional<rate_function>& q,
                            double da) {
  require_time_independent(model);
  if (k >= model.patches()) throw precondition_error("patch index out of range");
  const double g = model.mortality(k).gamma();
  auto pr = profiles(model);
  std::function<double(double, side)> qf = [&](double a, side s) {
    return q ? (*q)(a, 0.0, s) : model.mortality(k).induced_p(a, 0.0, s);
  };
  auto nodes = detail::age_nodes(model, model.fertility_hi(), step_for(model, da), {});
  const double tg = std::pow(t, g);
  // state: E = int (mu_k + |D_kk|), Q, J
  std::vector<double> y(3, 0.0);
  detail::integrate_nodes(nodes, y, [&](double a, side s, const double* v, double* out) {
    out[0] = own_decay(model, k, a, s);
    out[1] = g * qf(a, s) * std::exp(-g * v[0]);
    out[2] = model.birth(k)(a, 0.0, s) * std::exp(-v[0]) / std::pow(1.0 + tg * v[1], 1.0 / g);
  });
  return y[2];
}

namespace {

// root of a decreasing function I with I(0) > 1
double decreasing_root(const std::function<double(double)>& f) {
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (f(hi) >= 1.0) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200) throw consistency_error("could not bracket the bound equation");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    double mid = 0.5 * (lo + hi);
    if (f(mid) >= 1.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::optional<double> theta_upper_bound(const model_spec& model, double da) {
  require_time_independent(model);
  if (!model.column_sums_nonpositive())
    throw precondition_error("theta upper bound needs nonpositive column sums of D");
  require_gamma(model);
  if (assemble_R0(model, da).sigma <= 1.0) return std::nullopt;
  if (theta_upper_integral(model, 0.0, da) <= 1.0) return std::nullopt;
  return decreasing_root([&](double t) { return theta_upper_integral(model, t, da); });
}

std::optional<double> theta_lower_bound(const model_spec& model, std::size_t k, const std::optional<rate_function>& q,
                                        double da) {
  require_time_independent(model);
  if (k >= model.patches()) throw precondition_error("patch index out of range");
  const auto& law = model.mortality(k);
  if (q) {
    const double g = law.gamma();
    for (double a : age_samples(model, 64.0))
      for (double v : {1e-3, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0}) {
        double lhs = law(v, a) - law(0.0, a);
        double rhs = (*q)(a) * std::pow(v, g);
        if (lhs > rhs * (1.0 + 1e-12) + 1e-14)
          throw precondition_error("q does not dominate the density dependent mortality of the patch");
      }
  }
  if (theta_lower_integral(model, k, 0.0, q, da) <= 1.0) return std::nullopt;
  return decreasing_root([&](double t) { return theta_lower_integral(model, k, t, q, da); });
}

}  // namespace metarenewal
