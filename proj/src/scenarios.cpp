#include "metarenewal/scenarios.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "age_quadrature.hpp"
#include "metarenewal/characteristics.hpp"
#include "metarenewal/errors.hpp"
#include "metarenewal/spectral.hpp"

namespace metarenewal {

perturbation_result perturbed_sigma(const model_spec& model, const dispersal_matrix& b, const std::vector<double>& eps,
                                    double da) {
  if (model.time_dependent()) throw precondition_error("perturbation analysis needs time-independent coefficients");
  const std::size_t n = model.patches();
  if (b.size() != n) throw precondition_error("B has the wrong size");
  for (double a : age_samples(model, 64.0))
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j)
        if (k != j && b(k, j)(a) < 0.0) throw precondition_error("B must be Metzler (nonnegative off the diagonal)");

  perturbation_result r;
  auto isolated = model.with_dispersal(dispersal_matrix(n));
  r.sigma_isolated = assemble_R0(isolated, da).entries.diagonal();
  Eigen::Index top = 0;
  r.sigma_isolated.maxCoeff(&top);
  r.source = static_cast<std::size_t>(top);
  const double s1 = r.sigma_isolated[top];
  for (Eigen::Index k = 0; k < r.sigma_isolated.size(); ++k) {
    if (k == top) continue;
    if (std::abs(r.sigma_isolated[k] - s1) <= 1e-9 * std::max(1.0, s1))
      throw degenerate_eigenvalue("dominant isolated net reproductive rate is not simple");
  }

  const std::size_t k = r.source;
  auto nodes =
      detail::age_nodes(isolated, model.fertility_hi(), grid_step(model, da == 0.0 ? model.default_step() : da), {});
  // state: int mu_k, int B_kk, correction
  std::vector<double> y(3, 0.0);
  detail::integrate_nodes(nodes, y, [&](double a, side s, const double* v, double* out) {
    out[0] = model.mortality(k).base(a, 0.0, s);
    out[1] = b(k, k)(a, 0.0, s);
    out[2] = model.birth(k)(a, 0.0, s) * std::exp(-v[0]) * v[1];
  });
  r.correction = y[2];

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  bool loggable = true;
  for (double e : eps) {
    if (!(e > 0.0)) throw precondition_error("eps values must be positive");
    perturbation_point p;
    p.eps = e;
    p.sigma_exact = assemble_R0(model.with_dispersal(b.scaled(e)), da).sigma;
    p.sigma_predicted = r.predicted(e);
    p.remainder = std::abs(p.sigma_exact - p.sigma_predicted);
    p.ratio = p.remainder / (e * e);
    r.points.push_back(p);
    if (p.remainder <= 0.0) {
      loggable = false;
      continue;
    }
    double lx = std::log(e), ly = std::log(p.remainder);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double m = static_cast<double>(r.points.size());
  if (loggable && r.points.size() >= 2 && m * sxx - sx * sx > 0.0)
    r.remainder_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  else
    r.remainder_slope = std::numeric_limits<double>::quiet_NaN();
  return r;
}

double psi(double z) {
  if (std::abs(z) < 1e-4) return 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0;
  return (std::expm1(z) - z) / (z * z);
}

namespace {

// root of an increasing function on (0, inf)
double increasing_root(const std::function<double(double)>& f, double target) {
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (f(hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200) throw design_error("could not bracket a design equation");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// int_c^d g(a) da by 8-point Gauss-Legendre on 256 panels
double integrate(const std::function<double(double)>& g, double c, double d) {
  static const double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
  static const double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  const int panels = 256;
  double h = (d - c) / panels, s = 0.0;
  for (int p = 0; p < panels; ++p) {
    double mid = c + (p + 0.5) * h;
    for (int q = 0; q < 4; ++q) s += w[q] * (g(mid - 0.5 * h * x[q]) + g(mid + 0.5 * h * x[q]));
  }
  return 0.5 * h * s;
}

model_spec build(const two_sink_design& d, double eps) {
  Eigen::Matrix2d b;
  b << -1.0, 1.0, 1.0, -1.0;
  return model_spec(2, d.lifespan, std::min(d.c1, d.c2), std::max(d.d1, d.d2),
                    {rate_function::window(d.c1, d.d1, d.height1), rate_function::window(d.c2, d.d2, d.height2)},
                    {mortality_law::logistic(rate_function::constant(d.mu1), rate_function::constant(1.0)),
                     mortality_law::logistic(rate_function::constant(d.mu2), rate_function::constant(1.0))},
                    dispersal_matrix::constant(eps * b), {rate_function::constant(1.0), rate_function::constant(1.0)});
}

}  // namespace

model_spec two_sink_model(const two_sink_design& design, double eps) { return build(design, eps); }

two_sink_design design_two_sink(double mu1, double mu2, double rho2, const two_sink_options& options) {
  if (!(mu1 > mu2) || !(mu2 > 0.0)) throw precondition_error("two-sink design needs mu1 > mu2 > 0");
  if (!(rho2 > 0.0) || !(rho2 < 0.5)) throw precondition_error("two-sink design needs 0 < rho2 < 1/2");
  if (!(options.source_width > 0.0) || !(options.c2_fraction > 0.0) || !(options.c2_fraction < 1.0))
    throw precondition_error("invalid two-sink support options");

  two_sink_design d;
  d.mu1 = mu1;
  d.mu2 = mu2;
  d.rho = Eigen::Vector2d(1.0, rho2);
  d.da = options.da;
  const double delta = mu1 - mu2;
  auto up = [&](double c) { return c * delta * psi(delta * c); };
  auto down = [&](double c) { return c * delta * psi(-delta * c); };
  d.c_star = increasing_root(up, 1.0);
  d.c1 = increasing_root(up, 1.0 / rho2 - 1.0);
  d.d2 = increasing_root(down, 1.0 - rho2);
  d.d1 = d.c1 + options.source_width;
  d.c2 = options.c2_fraction * d.d2;
  d.lifespan = options.lifespan > 0.0 ? options.lifespan : 1.25 * std::max(d.d1, d.d2);
  if (d.d1 >= d.lifespan || d.d2 >= d.lifespan)
    throw design_error("fertility supports do not fit inside the lifespan");
  if (!(d.c_star < d.c1)) throw consistency_error("designed c1 does not exceed c*");
  d.d2_below_c_star = d.d2 < d.c_star;

  d.height1 = 1.0 / integrate([&](double a) { return std::exp(-mu1 * a); }, d.c1, d.d1);
  d.height2 = 1.0 / integrate([&](double a) { return std::exp(-mu2 * a); }, d.c2, d.d2);

  auto h1 = [&](double a) { return (d.rho[1] - d.rho[0]) * a + a * a * delta * psi(delta * a) * d.rho[1]; };
  auto h2 = [&](double a) { return (d.rho[0] - d.rho[1]) * a - a * a * delta * psi(-delta * a) * d.rho[0]; };
  for (int i = 1; i <= 256; ++i) {
    double a1 = d.c1 + (d.d1 - d.c1) * i / 256.0, a2 = d.c2 + (d.d2 - d.c2) * (i - 1) / 256.0;
    if (!(h1(a1) > 0.0)) throw consistency_error("h1 is not positive on the support of m1");
    if (!(h2(a2) > 0.0)) throw consistency_error("h2 is not positive on the support of m2");
  }
  d.P(0, 0) = -d.height1 * integrate([&](double a) { return a * std::exp(-mu1 * a); }, d.c1, d.d1);
  d.P(1, 1) = -d.height2 * integrate([&](double a) { return a * std::exp(-mu2 * a); }, d.c2, d.d2);
  d.P(0, 1) = d.height1 * integrate([&](double a) { return std::exp(-mu1 * a) * std::expm1(delta * a) / delta; }, d.c1, d.d1);
  d.P(1, 0) = d.height2 * integrate([&](double a) { return std::exp(-mu2 * a) * std::expm1(-delta * a) / -delta; }, d.c2, d.d2);
  d.P_rho = d.P * d.rho;
  if (!(d.P_rho.minCoeff() > 0.0)) throw consistency_error("P rho is not positive for the designed parameters");

  if (d.da == 0.0) d.da = std::min(build(d, 0.0).default_step(), 1.0 / 64.0);
  d.sigma_isolated = assemble_R0(build(d, 0.0), d.da).entries.diagonal();

  auto sigma = [&](double eps) { return assemble_R0(build(d, eps), d.da).sigma; };
  double good = 0.0, bad = 0.0;
  for (double e = 1e-3; e <= 64.0; e *= 2.0) {
    if (sigma(e) > 1.0) {
      good = e;
    } else {
      bad = e;
      break;
    }
  }
  if (good == 0.0) throw consistency_error("coupled design is not supercritical even for small eps");
  if (bad > 0.0) {
    while (bad - good > 1e-4 * good) {
      double mid = 0.5 * (good + bad);
      (sigma(mid) > 1.0 ? good : bad) = mid;
    }
  }
  d.eps_max = good;
  d.eps_capped = bad == 0.0;
  d.certified = true;
  for (int i = 0; i <= 10; ++i) {
    double e = good / std::pow(2.0, i);
    double s = sigma(e);
    d.certificate.push_back({e, s});
    if (!(s > 1.0)) d.certified = false;
  }
  return d;
}

}  // namespace metarenewal
