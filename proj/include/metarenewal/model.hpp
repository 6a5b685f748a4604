#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "metarenewal/rate.hpp"

namespace metarenewal {

// M(v, a, t) = mu(a, t) * (1 + v / L(a, t))        (logistic, gamma = 1)
// M(v, a, t) = mu(a, t) + p(a, t) * v^gamma         (power law)
class mortality_law {
 public:
  enum class kind { logistic, power_law };

  static mortality_law logistic(rate_function mu, rate_function capacity);
  static mortality_law power_law(rate_function mu, rate_function p, double gamma);
  // density independent mortality: power law with p = 0
  static mortality_law linear(rate_function mu);

  kind law() const { return kind_; }
  const rate_function& mu() const { return mu_; }
  // carrying capacity L for logistic laws, p for power laws
  const rate_function& coefficient() const { return coef_; }
  double gamma() const { return gamma_; }
  bool density_independent() const { return kind_ == kind::power_law && coef_.is_zero(); }
  bool time_dependent() const { return mu_.time_dependent() || coef_.time_dependent(); }

  double operator()(double v, double a, double t = 0.0, side s = side::exact) const;
  double base(double a, double t = 0.0, side s = side::exact) const { return mu_(a, t, s); }
  // the p(a, t) with M(v) - M(0) = p * v^gamma
  double induced_p(double a, double t = 0.0, side s = side::exact) const;

 private:
  mortality_law(kind k, rate_function mu, rate_function coef, double gamma);
  kind kind_;
  rate_function mu_;
  rate_function coef_;
  double gamma_;
};

class dispersal_matrix {
 public:
  dispersal_matrix() = default;
  explicit dispersal_matrix(std::size_t n);
  dispersal_matrix(std::size_t n, std::vector<rate_function> row_major);
  static dispersal_matrix constant(const Eigen::MatrixXd& values);

  std::size_t size() const { return n_; }
  const rate_function& operator()(std::size_t k, std::size_t j) const { return entries_[k * n_ + j]; }
  void set(std::size_t k, std::size_t j, rate_function f) { entries_[k * n_ + j] = std::move(f); }

  Eigen::MatrixXd at(double a, double t = 0.0, side s = side::exact) const;
  bool time_dependent() const;
  bool is_zero() const;
  double sup_abs() const;
  dispersal_matrix scaled(double c) const;

 private:
  std::size_t n_ = 0;
  std::vector<rate_function> entries_;
};

class model_spec {
 public:
  model_spec(std::size_t patches, double lifespan, double fertility_lo, double fertility_hi,
             std::vector<rate_function> birth, std::vector<mortality_law> mortality, dispersal_matrix dispersal,
             std::vector<rate_function> initial);

  std::size_t patches() const { return n_; }
  double lifespan() const { return b_; }
  double fertility_lo() const { return a_m_; }
  double fertility_hi() const { return A_m_; }
  const rate_function& birth(std::size_t k) const { return birth_[k]; }
  const std::vector<rate_function>& birth() const { return birth_; }
  const mortality_law& mortality(std::size_t k) const { return mortality_[k]; }
  const std::vector<mortality_law>& mortality() const { return mortality_; }
  const dispersal_matrix& dispersal() const { return dispersal_; }
  const rate_function& initial(std::size_t k) const { return initial_[k]; }
  const std::vector<rate_function>& initial() const { return initial_; }

  // f_k(a), truncated to [0, b)
  double initial_density(std::size_t k, double a) const;

  bool time_dependent() const;
  bool initial_zero() const;
  // sorted distinct kinks and jumps of every age profile, inside (0, b)
  const std::vector<double>& age_breakpoints() const { return age_breaks_; }
  void time_breakpoints(double t0, double t1, std::vector<double>& out) const;
  std::vector<double> modulation_periods() const;

  double birth_sup() const;
  double dispersal_sup() const { return dispersal_.sup_abs(); }
  // common gamma of all mortality laws, nullopt when they differ
  std::optional<double> common_gamma() const;
  // sampled sum_k D_kj(a, t) <= 0 for all j
  bool column_sums_nonpositive() const { return column_sums_nonpositive_; }

  model_spec with_birth(std::vector<rate_function> birth) const;
  model_spec with_dispersal(dispersal_matrix d) const;
  model_spec with_mortality(std::vector<mortality_law> m) const;
  model_spec with_initial(std::vector<rate_function> f) const;

  // default age step min(a_m, b - A_m) / 32
  double default_step() const;

 private:
  void finish();

  std::size_t n_;
  double b_, a_m_, A_m_;
  std::vector<rate_function> birth_;
  std::vector<mortality_law> mortality_;
  dispersal_matrix dispersal_;
  std::vector<rate_function> initial_;
  std::vector<double> age_breaks_;
  bool column_sums_nonpositive_ = false;
};

struct condition_result {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct validation_report {
  std::vector<condition_result> conditions;
  // smallest sampled age at which patch k is accessible (H6), 0-based patch index
  std::vector<std::optional<double>> beta;
  bool column_sums_nonpositive = false;

  bool passed() const;
  const condition_result& condition(const std::string& name) const;
};

validation_report validate(const model_spec& model, double sample_density = 64.0);

// patches k (0-based) from which every other patch is reachable in the digraph with
// an arc i -> j whenever D_ij > 0
std::vector<std::size_t> accessibility(const Eigen::MatrixXd& d);
std::vector<std::size_t> accessibility(const dispersal_matrix& d, double age, double t = 0.0);

struct omega_constants_result {
  double omega1 = 0.0;
  double omega2 = 0.0;
  double gamma = 0.0;
  double mu_inf = 0.0;
  double dispersal_norm = 0.0;
};

omega_constants_result omega_constants(const model_spec& model, double sample_density = 64.0);

// sample points used by the sampled checks: a uniform grid plus every breakpoint
std::vector<double> age_samples(const model_spec& model, double sample_density);
std::vector<double> time_samples(const model_spec& model, double sample_density);

}  // namespace metarenewal
