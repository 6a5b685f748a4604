#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "metarenewal/model.hpp"
#include "metarenewal/renewal.hpp"

namespace metarenewal {

// P equally spaced phase samples of a T-periodic N-vector function, linearly interpolated with wrap-around
class periodic_profile {
 public:
  periodic_profile(double period, std::size_t patches, std::vector<double> samples);
  static periodic_profile constant(double period, std::size_t nodes, const Eigen::VectorXd& value);

  double period() const { return period_; }
  std::size_t nodes() const { return samples_.size() / n_; }
  std::size_t patches() const { return n_; }
  double phase(std::size_t j) const { return period_ * static_cast<double>(j) / static_cast<double>(nodes()); }
  double value(std::size_t j, std::size_t k) const { return samples_[j * n_ + k]; }
  Eigen::VectorXd sample(std::size_t j) const;
  Eigen::VectorXd operator()(double t) const;
  const std::vector<double>& samples() const { return samples_; }
  double sup_distance(const periodic_profile& other) const;

 private:
  double period_;
  std::size_t n_;
  std::vector<double> samples_;
};

struct periodic_options {
  double da = 0.0;
  double tol = 1e-8;
  int max_iter = 10000;
};

// common period of all time modulations; 1 for a time-independent model
double model_period(const model_spec& model);

Eigen::VectorXd apply_Ktilde(const model_spec& model, const periodic_profile& rho, double t, double da = 0.0);
// Ktilde evaluated at every phase node of rho
periodic_profile apply_Ktilde_nodes(const model_spec& model, const periodic_profile& rho, double da = 0.0);

struct periodic_solution {
  periodic_profile theta;
  int iterations = 0;
  double last_step = 0.0;
  // sup distance between theta and Ktilde(theta)
  double residual = 0.0;
};

periodic_solution periodic_maximal_solution(const model_spec& model, std::size_t nodes = 64,
                                            const periodic_options& options = {});

struct periodic_R0 {
  // row/column index j * N + k: phase node j, patch k
  Eigen::MatrixXd matrix;
  double sigma = 0.0;
  Eigen::VectorXd perron_vector;
  double period = 0.0;
  std::size_t nodes = 0;
};

periodic_R0 assemble_periodic_R0(const model_spec& model, std::size_t nodes = 64, double da = 0.0);

struct envelope_pair {
  model_spec lower_model;
  model_spec upper_model;
  // time from which the envelope inequalities hold
  double onset = 0.0;
};

// sampled check of m- <= m <= m+, M+ <= M <= M-, D- <= D <= D+ for t >= onset; empty when all hold
std::vector<std::string> check_envelope(const envelope_pair& pair, const model_spec& model, double t_end,
                                        double sample_density = 16.0);

enum class envelope_case { extinction, sandwich, inconclusive };
std::string to_string(envelope_case c);

struct envelope_options {
  std::size_t nodes = 64;
  double da = 0.0;
  double tol = 1e-8;
  // sandwich checked for t > check_from with slack check_eps; check_from = 0 means 20 A_m
  double check_from = 0.0;
  double check_eps = 1e-2;
  // case (i) threshold for the final-window maximum
  double decay_tol = 1e-4;
};

struct envelope_violation {
  double t = 0.0;
  std::size_t patch = 0;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct envelope_report {
  envelope_case kind = envelope_case::inconclusive;
  std::string note;
  double sigma_lower = 0.0;
  double sigma_upper = 0.0;
  std::optional<periodic_profile> rho_minus, rho_plus;
  newborn_path chi{1.0, 1, {0.0}};
  // sandwich check at (check_from, check_eps)
  double check_from = 0.0;
  double check_eps = 0.0;
  std::vector<envelope_violation> violations;
  // earliest grid time after which the sandwich holds with the smallest eps of {1e-1, 1e-2, 1e-3}
  std::optional<double> witness_T2;
  std::optional<double> witness_eps;
  double final_window_max = 0.0;
  bool passed = false;
};

envelope_report envelope_bounds(const envelope_pair& pair, const model_spec& model, double t_end,
                                const envelope_options& options = {});

}  // namespace metarenewal
