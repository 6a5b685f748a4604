#pragma once

#include <cstddef>
#include <vector>

#include "metarenewal/model.hpp"

namespace metarenewal::detail {

// phi: age = x, time = x + y.  psi: age = x + y, time = x.
enum class branch { phi, psi };
enum class flow { nonlinear, linear };

// Rates sampled along one characteristic, ready for fixed-step RK4.
// Steps run between consecutive nodes and are split at every kink or jump of a rate.
class step_plan {
 public:
  step_plan(const model_spec& model, branch br, double y, std::vector<double> nodes);
  static step_plan uniform(const model_spec& model, branch br, double y, double step, std::size_t steps);

  std::size_t patches() const { return n_; }
  std::size_t steps() const { return first_.size() - 1; }
  const std::vector<double>& nodes() const { return nodes_; }

  struct substep {
    double h;
    std::size_t c0, cm, c1;
  };

  const double* coeffs(std::size_t offset) const { return table_.data() + offset; }
  const substep* begin(std::size_t i) const { return subs_.data() + first_[i]; }
  const substep* end(std::size_t i) const { return subs_.data() + first_[i + 1]; }
  const std::vector<double>& gamma() const { return gamma_; }

  // layout of one coefficient block
  std::size_t mu_off() const { return 0; }
  std::size_t c_off() const { return n_; }
  std::size_t m_off() const { return 2 * n_; }
  std::size_t d_off() const { return 3 * n_; }
  std::size_t stride() const { return 3 * n_ + n_ * n_; }

 private:
  std::size_t push(const model_spec& model, double x, side s);

  std::size_t n_;
  branch br_;
  double y_;
  std::vector<double> nodes_;
  std::vector<double> gamma_;
  std::vector<double> table_;
  std::vector<substep> subs_;
  std::vector<std::size_t> first_;
  const std::vector<double>* snap_a_ = nullptr;
  const std::vector<double>* snap_t_ = nullptr;
};

// State layout: h[N], then optionally q[N] with q' = m h, then optionally r[N] with r' = h.
class integrator {
 public:
  integrator(std::size_t patches, flow fl, bool birth, bool mass);

  std::size_t state_size() const { return size_; }
  // advances one plan step; returns the magnitude of negative round-off removed
  double step(const step_plan& plan, std::size_t i, double* state);

 private:
  void rhs(const step_plan& plan, const double* c, const double* y, double* out) const;
  void rk4(const step_plan& plan, double h, const double* c0, const double* cm, const double* c1, double* state);
  double stiffness(const step_plan& plan, const double* c, const double* y, double h) const;

  std::size_t n_;
  flow flow_;
  bool birth_, mass_;
  std::size_t size_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_, ia_, ib_, ic_;
};

std::size_t grid_cells(double length, double step);

}  // namespace metarenewal::detail
