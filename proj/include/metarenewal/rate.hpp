#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace metarenewal {

// Which one-sided limit to take when a rate jumps exactly at the evaluation point.
enum class side { left, exact, right };

class periodic_modulation {
 public:
  periodic_modulation(double period, std::vector<std::pair<double, double>> samples);

  double operator()(double t) const;
  double period() const { return period_; }
  const std::vector<std::pair<double, double>>& samples() const { return samples_; }
  double max_factor() const;
  double min_factor() const;
  // times in the open interval (t0, t1) where the modulation has a kink
  void breakpoints(double t0, double t1, std::vector<double>& out) const;

 private:
  double period_;
  std::vector<std::pair<double, double>> samples_;
};

class rate_function {
 public:
  struct constant_part {
    double value;
  };
  struct window_part {
    double lo, hi, value;
  };
  struct piecewise_part {
    std::vector<std::pair<double, double>> knots;
  };
  struct separable_part {
    std::shared_ptr<const rate_function> age;
    periodic_modulation time;
  };
  using variant_type = std::variant<constant_part, window_part, piecewise_part, separable_part>;

  rate_function() : v_(constant_part{0.0}) {}

  static rate_function constant(double value);
  static rate_function window(double lo, double hi, double value);
  static rate_function piecewise_linear(std::vector<std::pair<double, double>> knots);
  static rate_function separable(const rate_function& age_part, periodic_modulation time_part);

  double operator()(double a, double t = 0.0, side s = side::exact) const;

  bool time_dependent() const;
  bool is_zero() const;
  const periodic_modulation* modulation() const;
  const variant_type& parts() const { return v_; }

  void age_breakpoints(std::vector<double>& out) const;
  void time_breakpoints(double t0, double t1, std::vector<double>& out) const;

  double sup_abs() const;
  // infimum over all ages and times
  double inf() const;
  // closed hull of {a : f(a, .) != 0}, empty when f vanishes identically
  std::optional<std::pair<double, double>> support() const;

  rate_function scaled(double c) const;
  std::string describe() const;

 private:
  explicit rate_function(variant_type v) : v_(std::move(v)) {}
  variant_type v_;
};

}  // namespace metarenewal
