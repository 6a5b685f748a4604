#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "metarenewal/model.hpp"

namespace metarenewal {

struct cohort_state {
  double age;
  Eigen::VectorXd densities;
};

// Solution along one characteristic on the uniform age grid 0, step, ..., b.
class trajectory {
 public:
  trajectory(double offset, double step, std::size_t patches, std::vector<double> values, double clamped = 0.0);

  double offset() const { return offset_; }
  double step() const { return step_; }
  std::size_t patches() const { return n_; }
  std::size_t size() const { return values_.size() / n_; }
  double age(std::size_t i) const { return static_cast<double>(i) * step_; }
  double value(std::size_t i, std::size_t k) const { return values_[i * n_ + k]; }
  double& value(std::size_t i, std::size_t k) { return values_[i * n_ + k]; }
  cohort_state state(std::size_t i) const;
  // largest negative round-off removed by clamping
  double clamped() const { return clamped_; }
  const std::vector<double>& values() const { return values_; }

 private:
  double offset_;
  double step_;
  std::size_t n_;
  std::vector<double> values_;
  double clamped_;
};

// h' = -M(h, x, x + y) h + D(x, x + y) h, h(0) = rho0
trajectory solve_phi(const model_spec& model, const Eigen::VectorXd& rho0, double y, double da);
// h' = -M(h, x + y, x) h + D(x + y, x) h, h(0) = f(y)
trajectory solve_psi(const model_spec& model, double y, double da);
// Y' = (D(a, a + t) - M(0, a, a + t)) Y, Y(0) = x0
trajectory solve_linearized(const model_spec& model, const Eigen::VectorXd& x0, double t_anchor, double da);

// false iff u(0) >= v(0) but u(a) < v(a) - tol somewhere
bool check_comparison(const trajectory& u, const trajectory& v, double tol);
// densities_k(a) <= omega1 a^(-1/gamma) + tol at every grid age a > 0
bool check_majorant(const trajectory& traj, double omega1, double gamma, double tol);

// age step actually used for a requested step: b / n with n >= b / da the smallest cell count
// that puts every birth-rate breakpoint on a grid node (falls back to ceil(b / da))
double grid_step(const model_spec& model, double da);
std::size_t aligned_cells(const model_spec& model, double da);

}  // namespace metarenewal
