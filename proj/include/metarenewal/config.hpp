#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "metarenewal/errors.hpp"
#include "metarenewal/model.hpp"
#include "metarenewal/periodic.hpp"

namespace metarenewal {

// malformed or unreadable configuration; location is a JSON pointer or "line L, column C"
class config_error : public error {
 public:
  config_error(const std::string& location, const std::string& what)
      : error(location.empty() ? what : location + ": " + what), location_(location) {}
  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

struct run_settings {
  double da = 0.0;  // 0 selects the model default
  double tol = 1e-8;
  std::optional<double> t_end;  // unset selects 40 A_m
  std::size_t phase_nodes = 64;
  int max_iter = 0;
  double margin = 1e-6;
  double check_from = 0.0;
  double check_eps = 1e-2;
  double decay_tol = 1e-4;
  std::vector<double> eps_ladder;
};

struct run_config {
  int version = 1;
  model_spec model;
  run_settings settings;
  std::optional<envelope_pair> envelope;
  // direction B of a dispersal perturbation D = eps B, analysed over settings.eps_ladder
  std::optional<dispersal_matrix> perturbation;
  std::string output_dir;

  double t_end() const { return settings.t_end ? *settings.t_end : 40.0 * model.fertility_hi(); }
};

constexpr int config_version = 1;

run_config parse_config(const std::string& text);
run_config load_config(const std::string& path);

}  // namespace metarenewal
