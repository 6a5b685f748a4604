#include "integrator.hpp"

#include <algorithm>
#include <cmath>

#include "metarenewal/errors.hpp"

namespace metarenewal::detail {

std::size_t grid_cells(double length, double step) {
  if (!(step > 0.0)) throw precondition_error("step must be positive");
  double r = length / step;
  auto n = static_cast<std::size_t>(std::ceil(r - 1e-9));
  return std::max<std::size_t>(n, 1);
}

step_plan step_plan::uniform(const model_spec& model, branch br, double y, double step, std::size_t steps) {
  std::vector<double> nodes(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) nodes[i] = static_cast<double>(i) * step;
  return step_plan(model, br, y, std::move(nodes));
}

step_plan::step_plan(const model_spec& model, branch br, double y, std::vector<double> nodes)
    : n_(model.patches()), br_(br), y_(y), nodes_(std::move(nodes)) {
  for (auto& law : model.mortality()) gamma_.push_back(law.gamma());
  if (nodes_.size() < 2) {
    first_.assign(1, 0);
    return;
  }
  const double x_lo = nodes_.front(), x_hi = nodes_.back();

  std::vector<double> breaks;
  double shift = br == branch::phi ? 0.0 : y;
  for (double a : model.age_breakpoints()) breaks.push_back(a - shift);
  std::vector<double> tb;
  if (model.time_dependent()) {
    double t_shift = br == branch::phi ? y : 0.0;
    model.time_breakpoints(x_lo + t_shift - 1.0, x_hi + t_shift + 1.0, tb);
    for (double t : tb) breaks.push_back(t - t_shift);
    std::sort(tb.begin(), tb.end());
  }
  snap_a_ = &model.age_breakpoints();
  snap_t_ = &tb;
  std::sort(breaks.begin(), breaks.end());
  const double eps = 1e-11 * std::max(1.0, std::abs(x_hi));
  auto is_break = [&](double x) {
    auto it = std::lower_bound(breaks.begin(), breaks.end(), x - eps);
    return it != breaks.end() && *it <= x + eps;
  };

  first_.reserve(nodes_.size());
  first_.push_back(0);
  std::size_t last_end = 0;
  bool have_last = false;
  auto bit = std::upper_bound(breaks.begin(), breaks.end(), x_lo + eps);
  for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
    double x0 = nodes_[i], x1 = nodes_[i + 1];
    std::vector<double> pts{x0};
    while (bit != breaks.end() && *bit < x1 - eps) {
      if (*bit > pts.back() + eps) pts.push_back(*bit);
      ++bit;
    }
    while (bit != breaks.end() && *bit <= x1 + eps) ++bit;
    pts.push_back(x1);
    for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
      double a0 = pts[s], a1 = pts[s + 1];
      std::size_t c0;
      if (have_last && !is_break(a0)) {
        c0 = last_end;
      } else {
        c0 = push(model, a0, side::right);
      }
      std::size_t cm = push(model, 0.5 * (a0 + a1), side::exact);
      std::size_t c1 = push(model, a1, side::left);
      subs_.push_back({a1 - a0, c0, cm, c1});
      last_end = c1;
      have_last = true;
    }
    first_.push_back(subs_.size());
  }
  snap_a_ = nullptr;
  snap_t_ = nullptr;
}

namespace {

// a point within round-off of a kink or jump is moved onto it, so one-sided limits are taken there
double snap(double x, const std::vector<double>* points) {
  if (!points || points->empty()) return x;
  const double eps = 1e-11 * std::max(1.0, std::abs(x));
  auto it = std::lower_bound(points->begin(), points->end(), x - eps);
  return it != points->end() && *it <= x + eps ? *it : x;
}

}  // namespace

std::size_t step_plan::push(const model_spec& model, double x, side s) {
  std::size_t off = table_.size();
  table_.resize(off + stride());
  double* c = table_.data() + off;
  double a = br_ == branch::phi ? x : x + y_;
  double t = br_ == branch::phi ? x + y_ : x;
  if (s != side::exact) {
    a = snap(a, snap_a_);
    t = snap(t, snap_t_);
  }
  for (std::size_t k = 0; k < n_; ++k) {
    const auto& law = model.mortality(k);
    c[mu_off() + k] = law.base(a, t, s);
    c[c_off() + k] = law.density_independent() ? 0.0 : law.induced_p(a, t, s);
    c[m_off() + k] = model.birth(k)(a, t, s);
    for (std::size_t j = 0; j < n_; ++j) c[d_off() + k * n_ + j] = model.dispersal()(k, j)(a, t, s);
  }
  return off;
}

integrator::integrator(std::size_t patches, flow fl, bool birth, bool mass)
    : n_(patches), flow_(fl), birth_(birth), mass_(mass) {
  size_ = n_ * (1 + (birth ? 1 : 0) + (mass ? 1 : 0));
  k1_.resize(size_);
  k2_.resize(size_);
  k3_.resize(size_);
  k4_.resize(size_);
  tmp_.resize(size_);
}

void integrator::rhs(const step_plan& plan, const double* c, const double* y, double* out) const {
  const double* mu = c + plan.mu_off();
  const double* cc = c + plan.c_off();
  const double* m = c + plan.m_off();
  const double* d = c + plan.d_off();
  const auto& g = plan.gamma();
  for (std::size_t k = 0; k < n_; ++k) {
    double h = y[k];
    double death = mu[k];
    if (flow_ == flow::nonlinear && cc[k] != 0.0) {
      double v = h > 0.0 ? h : 0.0;
      death += cc[k] * (g[k] == 1.0 ? v : std::pow(v, g[k]));
    }
    double s = -death * h;
    const double* row = d + k * n_;
    for (std::size_t j = 0; j < n_; ++j) s += row[j] * y[j];
    out[k] = s;
  }
  std::size_t off = n_;
  if (birth_) {
    for (std::size_t k = 0; k < n_; ++k) out[off + k] = m[k] * y[k];
    off += n_;
  }
  if (mass_) {
    for (std::size_t k = 0; k < n_; ++k) out[off + k] = y[k];
  }
}

void integrator::rk4(const step_plan& plan, double h, const double* c0, const double* cm, const double* c1,
                     double* state) {
  rhs(plan, c0, state, k1_.data());
  for (std::size_t q = 0; q < size_; ++q) tmp_[q] = state[q] + 0.5 * h * k1_[q];
  rhs(plan, cm, tmp_.data(), k2_.data());
  for (std::size_t q = 0; q < size_; ++q) tmp_[q] = state[q] + 0.5 * h * k2_[q];
  rhs(plan, cm, tmp_.data(), k3_.data());
  for (std::size_t q = 0; q < size_; ++q) tmp_[q] = state[q] + h * k3_[q];
  rhs(plan, c1, tmp_.data(), k4_.data());
  for (std::size_t q = 0; q < size_; ++q) state[q] += h / 6.0 * (k1_[q] + 2.0 * k2_[q] + 2.0 * k3_[q] + k4_[q]);
}

// h * (largest local decay rate), used to keep explicit steps stable when densities are large
double integrator::stiffness(const step_plan& plan, const double* c, const double* y, double h) const {
  const double* mu = c + plan.mu_off();
  const double* cc = c + plan.c_off();
  const double* d = c + plan.d_off();
  const auto& g = plan.gamma();
  double r = 0.0;
  for (std::size_t k = 0; k < n_; ++k) {
    double rate = std::abs(mu[k]) + std::abs(d[k * n_ + k]);
    if (flow_ == flow::nonlinear && cc[k] != 0.0 && y[k] > 0.0)
      rate += cc[k] * (1.0 + g[k]) * (g[k] == 1.0 ? y[k] : std::pow(y[k], g[k]));
    r = std::max(r, rate);
  }
  return r * h;
}

double integrator::step(const step_plan& plan, std::size_t i, double* state) {
  for (auto* s = plan.begin(i); s != plan.end(i); ++s) {
    const double h = s->h;
    const double* c0 = plan.coeffs(s->c0);
    const double* cm = plan.coeffs(s->cm);
    const double* c1 = plan.coeffs(s->c1);
    double stiff = stiffness(plan, c0, state, h);
    if (stiff <= 1.0) {
      rk4(plan, h, c0, cm, c1, state);
      continue;
    }
    // split the step; rates inside it are interpolated through the three sampled blocks
    auto parts = static_cast<std::size_t>(std::ceil(stiff / 0.5));
    std::size_t w = plan.stride();
    ia_.resize(w);
    ib_.resize(w);
    ic_.resize(w);
    auto interp = [&](double tau, std::vector<double>& out) {
      double l0 = 2.0 * (tau - 0.5) * (tau - 1.0), lm = -4.0 * tau * (tau - 1.0), l1 = 2.0 * tau * (tau - 0.5);
      for (std::size_t q = 0; q < w; ++q) out[q] = l0 * c0[q] + lm * cm[q] + l1 * c1[q];
    };
    double dt = 1.0 / static_cast<double>(parts);
    for (std::size_t p = 0; p < parts; ++p) {
      double t0 = static_cast<double>(p) * dt;
      const double* a = c0;
      if (p > 0) {
        interp(t0, ia_);
        a = ia_.data();
      }
      interp(t0 + 0.5 * dt, ib_);
      const double* e = c1;
      if (p + 1 < parts) {
        interp(t0 + dt, ic_);
        e = ic_.data();
      }
      rk4(plan, h * dt, a, ib_.data(), e, state);
    }
  }
  double clamp = 0.0;
  if (flow_ == flow::nonlinear) {
    for (std::size_t k = 0; k < n_; ++k) {
      if (state[k] < 0.0) {
        clamp = std::max(clamp, -state[k]);
        state[k] = 0.0;
      }
    }
  }
  return clamp;
}

}  // namespace metarenewal::detail
