#pragma once

#include <Eigen/Dense>
#include <vector>

#include "metarenewal/model.hpp"

namespace metarenewal {

struct perturbation_point {
  double eps = 0.0;
  double sigma_exact = 0.0;
  double sigma_predicted = 0.0;
  double remainder = 0.0;  // |exact - predicted|
  double ratio = 0.0;      // remainder / eps^2
};

struct perturbation_result {
  Eigen::VectorXd sigma_isolated;
  std::size_t source = 0;  // index of the dominant isolated patch
  double correction = 0.0;
  std::vector<perturbation_point> points;
  // least-squares slope of log remainder against log eps (NaN when a remainder vanishes)
  double remainder_slope = 0.0;

  double predicted(double eps) const { return sigma_isolated[static_cast<Eigen::Index>(source)] + eps * correction; }
};

// sigma(R0) of model with D = eps B against the first-order prediction; the model's own dispersal is ignored
perturbation_result perturbed_sigma(const model_spec& model, const dispersal_matrix& b, const std::vector<double>& eps,
                                    double da = 0.0);

// psi(z) = (e^z - 1 - z) / z^2, continuous at 0
double psi(double z);

struct two_sink_options {
  // m_1 lives on [c1, c1 + source_width]; m_2 on [c2_fraction * d2, d2]
  double source_width = 1.0;
  double c2_fraction = 0.5;
  // 0 selects 1.25 * max(d1, d2)
  double lifespan = 0.0;
  // 0 selects min(model default, 1/64), fine enough for sigma_k = 1 to 1e-8
  double da = 0.0;
};

struct two_sink_design {
  double mu1 = 0.0, mu2 = 0.0;
  Eigen::Vector2d rho;
  double c_star = 0.0;
  double c1 = 0.0, d1 = 0.0, c2 = 0.0, d2 = 0.0;
  double lifespan = 0.0;
  // window heights that make each isolated net reproductive rate 1
  double height1 = 0.0, height2 = 0.0;
  Eigen::Matrix2d P;
  Eigen::Vector2d P_rho;
  Eigen::Vector2d sigma_isolated;
  bool d2_below_c_star = false;
  // sigma(R0) > 1 for every certified eps in (0, eps_max]
  double eps_max = 0.0;
  // true when no eps up to the search cap loses supercriticality
  bool eps_capped = false;
  std::vector<std::pair<double, double>> certificate;  // (eps, sigma) samples
  bool certified = false;
  double da = 0.0;
};

two_sink_design design_two_sink(double mu1, double mu2, double rho2, const two_sink_options& options = {});
// the designed 2-patch model with D = eps [[-1, 1], [1, -1]]
model_spec two_sink_model(const two_sink_design& design, double eps);

}  // namespace metarenewal
