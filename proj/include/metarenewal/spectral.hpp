#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>

#include "metarenewal/model.hpp"

namespace metarenewal {

struct perron_result {
  double sigma = 0.0;
  Eigen::VectorXd vector;  // unit 2-norm, nonnegative
  int iterations = 0;
  std::string method;      // "power", "shifted-power" or "dense"
};

struct repro_matrix {
  Eigen::MatrixXd entries;
  double sigma = 0.0;
  Eigen::VectorXd perron_vector;
  bool irreducible = true;
  std::string method;
};

struct sigma_bounds_result {
  double lower = 0.0;
  double upper = 0.0;
  double sigma = 0.0;
};

// nonnegative irreducible matrix; throws reducible_matrix otherwise
perron_result spectral_radius(const Eigen::MatrixXd& a);
// spectral radius and a nonnegative eigenvector of any nonnegative matrix (dense solve)
perron_result dense_spectral_radius(const Eigen::MatrixXd& a);
bool is_irreducible(const Eigen::MatrixXd& a);

repro_matrix assemble_R0(const model_spec& model, double da = 0.0);
Eigen::VectorXd apply_R_lambda(const model_spec& model, double lambda, const Eigen::VectorXd& x, double da = 0.0);
sigma_bounds_result sigma_bounds(const model_spec& model, double da = 0.0);

std::optional<double> theta_upper_bound(const model_spec& model, double da = 0.0);
// q defaults to the induced p_k of the patch's mortality law
std::optional<double> theta_lower_bound(const model_spec& model, std::size_t k,
                                        const std::optional<rate_function>& q = std::nullopt, double da = 0.0);

// integral of I(t) in the theta_+ equation, exposed for checks
double theta_upper_integral(const model_spec& model, double t, double da = 0.0);
double theta_lower_integral(const model_spec& model, std::size_t k, double t,
                            const std::optional<rate_function>& q = std::nullopt, double da = 0.0);

}  // namespace metarenewal
