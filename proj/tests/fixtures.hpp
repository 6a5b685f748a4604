#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "metarenewal/model.hpp"

namespace fixtures {

using namespace metarenewal;

inline model_spec single_patch(double mu, double birth, bool logistic, double capacity = 1.0, double b = 4.0,
                               double f = 1.0) {
  auto law = logistic ? mortality_law::logistic(rate_function::constant(mu), rate_function::constant(capacity))
                      : mortality_law::linear(rate_function::constant(mu));
  return model_spec(1, b, 1.0, 2.0, {rate_function::window(1.0, 2.0, birth)}, {law}, dispersal_matrix(1),
                    {rate_function::constant(f)});
}

// mu = 0.5, m = 3 on [1, 2], D = 0, b = 4
inline model_spec linear_fixture() { return single_patch(0.5, 3.0, false); }
inline model_spec supercritical() { return single_patch(0.5, 3.0, true); }
inline model_spec subcritical() { return single_patch(0.5, 1.0, true); }

inline model_spec symmetric_pair(double eps, bool logistic = true, double mu = 0.5, double birth = 3.0) {
  Eigen::MatrixXd d(2, 2);
  d << -eps, eps, eps, -eps;
  auto law = [&] {
    return logistic ? mortality_law::logistic(rate_function::constant(mu), rate_function::constant(1.0))
                    : mortality_law::linear(rate_function::constant(mu));
  };
  return model_spec(2, 4.0, 1.0, 2.0, {rate_function::window(1.0, 2.0, birth), rate_function::window(1.0, 2.0, birth)},
                    {law(), law()}, dispersal_matrix::constant(d),
                    {rate_function::constant(1.0), rate_function::constant(1.0)});
}

// hand-rolled generator of small multi-patch models
struct model_generator {
  std::mt19937_64 rng;
  explicit model_generator(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

  // piecewise linear profile on a grid of knots (multiples of 1/4 so they land on age grids)
  rate_function profile(double lo, double hi, double vmin, double vmax, int knots) {
    std::vector<std::pair<double, double>> k;
    for (int i = 0; i < knots; ++i) {
      double a = std::round((lo + (hi - lo) * i / (knots - 1)) * 4.0) / 4.0;
      if (!k.empty() && a <= k.back().first) continue;
      k.push_back({a, uniform(vmin, vmax)});
    }
    if (k.size() == 1) return rate_function::constant(k[0].second);
    return rate_function::piecewise_linear(k);
  }

  rate_function fertility(double a_m, double A_m, double scale) {
    if (integer(0, 1) == 0) return rate_function::window(a_m, A_m, scale * uniform(0.5, 1.5));
    double mid = std::round((a_m + A_m) * 2.0) / 4.0;
    if (!(mid > a_m && mid < A_m)) mid = 0.5 * (a_m + A_m);
    return rate_function::piecewise_linear({{a_m, 0.0}, {mid, scale * uniform(0.5, 2.0)}, {A_m, 0.0}});
  }

  // column sums of D nonpositive when conserving is true
  dispersal_matrix dispersal(std::size_t n, bool conserving, double strength) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j)
        if (k != j) d(k, j) = uniform(0.05, 1.0) * strength;
    for (std::size_t j = 0; j < n; ++j) {
      double col = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        if (k != j) col += d(k, j);
      d(j, j) = conserving ? -col - uniform(0.0, 0.3) * strength : -uniform(0.0, 0.5) * col;
    }
    return dispersal_matrix::constant(d);
  }

  model_spec model(std::size_t n, bool logistic = true, bool conserving = true, double fertility_scale = 3.0) {
    double a_m = std::round(uniform(0.75, 1.5) * 4.0) / 4.0;
    double A_m = a_m + std::round(uniform(0.5, 1.5) * 4.0) / 4.0;
    double b = A_m + std::round(uniform(1.0, 2.5) * 4.0) / 4.0;
    std::vector<rate_function> m, f;
    std::vector<mortality_law> mort;
    for (std::size_t k = 0; k < n; ++k) {
      m.push_back(fertility(a_m, A_m, fertility_scale));
      auto mu = profile(0.0, b, 0.2, 0.8, 3);
      if (logistic) {
        mort.push_back(mortality_law::logistic(mu, profile(0.0, b, 0.5, 2.0, 2)));
      } else {
        mort.push_back(mortality_law::power_law(mu, profile(0.0, b, 0.2, 1.0, 2), 1.0));
      }
      f.push_back(profile(0.0, b, 0.0, 2.0, 3));
    }
    return model_spec(n, b, a_m, A_m, m, mort, dispersal(n, conserving, uniform(0.1, 1.0)), f);
  }

  Eigen::VectorXd vector(std::size_t n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = uniform(lo, hi);
    return v;
  }
};

// independent reference integrator: classical RK4 with a tiny step directly on the model's rates,
// dense Eigen arithmetic, no plan or breakpoint machinery
inline Eigen::VectorXd reference_phi(const model_spec& model, Eigen::VectorXd h, double y, double age_end,
                                     double h_step = 1e-4) {
  std::size_t n = model.patches();
  auto rhs = [&](double x, const Eigen::VectorXd& v) {
    Eigen::VectorXd out(n);
    Eigen::MatrixXd d = model.dispersal().at(x, x + y);
    for (std::size_t k = 0; k < n; ++k) out[k] = -model.mortality(k)(std::max(v[k], 0.0), x, x + y) * v[k];
    return Eigen::VectorXd(out + d * v);
  };
  int steps = static_cast<int>(std::ceil(age_end / h_step));
  double s = age_end / steps;
  for (int i = 0; i < steps; ++i) {
    double x = i * s;
    Eigen::VectorXd k1 = rhs(x, h);
    Eigen::VectorXd k2 = rhs(x + s / 2, h + s / 2 * k1);
    Eigen::VectorXd k3 = rhs(x + s / 2, h + s / 2 * k2);
    Eigen::VectorXd k4 = rhs(x + s, h + s * k3);
    h += s / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return h;
}

// composite Simpson rule with many panels, used as a quadrature oracle
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int panels = 20000) {
  double h = (hi - lo) / panels;
  double s = f(lo) + f(hi);
  for (int i = 1; i < panels; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// logistic single-patch closed form with constant mu and L
inline double bernoulli(double rho, double mu, double capacity, double a) {
  double e = std::exp(-mu * a);
  return rho * capacity * e / (capacity + rho * (1.0 - e));
}


// irregular model whose birth and death rates jitter by +-amplitude around a periodic base,
// with the periodic lower and upper envelopes that bound it
struct envelope_fixture {
  model_spec model, lower, upper;
};

inline envelope_fixture jittered(std::uint64_t seed, double amplitude = 0.1, double birth = 3.0, double mu = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto wave = [](double t) {
    double x = t - std::floor(t);
    return x <= 0.5 ? 1.0 + x : 2.0 - x;
  };
  const double horizon = 128.0, spacing = 0.25;
  std::vector<std::pair<double, double>> fert, death;
  for (int i = 0; i * spacing < horizon; ++i) {
    double t = i * spacing;
    fert.push_back({t, wave(t) * (1.0 + amplitude * u(rng))});
    death.push_back({t, 1.0 + amplitude * u(rng)});
  }
  periodic_modulation triangle(1.0, {{0.0, 1.0}, {0.5, 1.5}});
  auto build = [&](rate_function m, rate_function mort) {
    return model_spec(1, 4.0, 1.0, 2.0, {m}, {mortality_law::logistic(mort, rate_function::constant(1.0))},
                      dispersal_matrix(1), {rate_function::constant(1.0)});
  };
  return {build(rate_function::separable(rate_function::window(1.0, 2.0, birth), periodic_modulation(horizon, fert)),
                rate_function::separable(rate_function::constant(mu), periodic_modulation(horizon, death))),
          build(rate_function::separable(rate_function::window(1.0, 2.0, birth * (1.0 - amplitude)), triangle),
                rate_function::constant(mu * (1.0 + amplitude))),
          build(rate_function::separable(rate_function::window(1.0, 2.0, birth * (1.0 + amplitude)), triangle),
                rate_function::constant(mu * (1.0 - amplitude)))};
}

}  // namespace fixtures
