#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "metarenewal/model.hpp"

namespace metarenewal {

// rho(t_j) on the uniform grid t_j = j * step
class newborn_path {
 public:
  newborn_path(double step, std::size_t patches, std::vector<double> values);

  double step() const { return step_; }
  std::size_t patches() const { return n_; }
  std::size_t size() const { return values_.size() / n_; }
  double time(std::size_t j) const { return static_cast<double>(j) * step_; }
  double end_time() const { return time(size() - 1); }
  double value(std::size_t j, std::size_t k) const { return values_[j * n_ + k]; }
  Eigen::VectorXd at(std::size_t j) const;
  // linear interpolation between nodes
  Eigen::VectorXd interpolate(double t) const;
  const std::vector<double>& values() const { return values_; }

 private:
  double step_;
  std::size_t n_;
  std::vector<double> values_;
};

// n(a_i, t_j) on [0, b] x [0, T_end], equal age and time steps
class density_field {
 public:
  density_field(double step, std::size_t patches, std::size_t age_nodes, std::size_t time_nodes,
                std::vector<double> values);

  double step() const { return step_; }
  std::size_t patches() const { return n_; }
  std::size_t age_nodes() const { return ages_; }
  std::size_t time_nodes() const { return times_; }
  double value(std::size_t i, std::size_t j, std::size_t k) const { return values_[(j * ages_ + i) * n_ + k]; }

 private:
  double step_;
  std::size_t n_, ages_, times_;
  std::vector<double> values_;
};

struct renewal_options {
  double da = 0.0;      // 0 selects the model default
  double tol = 1e-8;
  int max_iter = 0;     // 0 selects max(200, 2 ceil(T_end / a_m) + 20)
};

struct renewal_solution {
  newborn_path rho;
  int iterations = 0;   // index i of the returned iterate rho^(i)
  double residual = 0.0;
  std::optional<long long> certificate;  // first i where the factorial error bound drops below tol
};

Eigen::VectorXd apply_K(const model_spec& model, const newborn_path& rho, double t);
Eigen::VectorXd apply_F(const model_spec& model, double t, double da = 0.0);

renewal_solution solve_renewal(const model_spec& model, double t_end, const renewal_options& options = {});
int default_renewal_iterations(const model_spec& model, double t_end);
// first i with 2 omega2 e^(C T) (C T)^i / i! < tol, C = e^(N b |D|) |m|
std::optional<long long> iteration_bound(const model_spec& model, double t_end, double tol);

density_field reconstruct_density(const model_spec& model, const newborn_path& rho);
Eigen::VectorXd total_population(const density_field& field, double t);

struct positivity_witness {
  std::optional<std::pair<double, double>> interval;
  std::string diagnostic;
};

positivity_witness convolution_positivity_witness(const model_spec& model, const newborn_path& rho, std::size_t k,
                                                  double s1, double s2);

// (K rho)(t_j) at every node of the path
std::vector<double> apply_K_on_grid(const model_spec& model, const newborn_path& rho);

}  // namespace metarenewal
