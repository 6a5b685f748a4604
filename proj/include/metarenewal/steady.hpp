#pragma once

#include <Eigen/Dense>
#include <string>

#include "metarenewal/characteristics.hpp"
#include "metarenewal/model.hpp"

namespace metarenewal {

enum class dynamics { extinction, permanency, marginal };
std::string to_string(dynamics d);

struct steady_options {
  double da = 0.0;
  double tol = 1e-8;
  int max_iter = 10000;
  double margin = 1e-6;
};

struct maximal_solution_result {
  Eigen::VectorXd theta;
  int iterations = 0;
  double last_step = 0.0;
  // sup-distance to the run started from 2 omega2
  double start_agreement = 0.0;
};

struct steady_state {
  Eigen::VectorXd theta;
  dynamics classification = dynamics::extinction;
  trajectory profile;
  Eigen::VectorXd asymptotic_total;
  double sigma = 0.0;
  bool converged = true;
};

Eigen::VectorXd apply_Kbar(const model_spec& model, const Eigen::VectorXd& rho, double da = 0.0);
trajectory stationary_profile(const model_spec& model, const Eigen::VectorXd& rho, double da = 0.0);
// integral over [0, b] of phi(a; rho)
Eigen::VectorXd profile_total(const model_spec& model, const Eigen::VectorXd& rho, double da = 0.0);

// iterates K-bar from start (defaults to omega2 * 1), asserting monotone descent
maximal_solution_result maximal_solution(const model_spec& model, const steady_options& options = {});
Eigen::VectorXd descend(const model_spec& model, const Eigen::VectorXd& start, const steady_options& options,
                        int* iterations = nullptr, double* last_step = nullptr);

steady_state classify(const model_spec& model, const steady_options& options = {});

bool check_lower_solution(const model_spec& model, const Eigen::VectorXd& rho, double tol = 1e-8, double da = 0.0);
bool check_upper_solution(const model_spec& model, const Eigen::VectorXd& rho, double tol = 1e-8, double da = 0.0);

}  // namespace metarenewal
