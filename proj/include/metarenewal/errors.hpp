#pragma once

#include <stdexcept>
#include <string>

namespace metarenewal {

class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// malformed rate function or inconsistent model structure
class structural_error : public error {
 public:
  using error::error;
};

class invalid_model : public error {
 public:
  using error::error;
};

class precondition_error : public error {
 public:
  using error::error;
};

class step_size_error : public error {
 public:
  using error::error;
};

class non_convergence : public error {
 public:
  non_convergence(const std::string& what, int iterations, double residual)
      : error(what), iterations_(iterations), residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

class reducible_matrix : public error {
 public:
  using error::error;
};

class degenerate_eigenvalue : public error {
 public:
  using error::error;
};

class design_error : public error {
 public:
  using error::error;
};

class consistency_error : public error {
 public:
  using error::error;
};

}  // namespace metarenewal
