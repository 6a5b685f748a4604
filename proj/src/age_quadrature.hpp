#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "metarenewal/model.hpp"

namespace metarenewal::detail {

// Quadrature nodes on [0, hi]: uniform grid, every model breakpoint, and the points where
// two members of any given family of age profiles cross (kinks of their pointwise min/max).
std::vector<double> age_nodes(const model_spec& model, double hi, double step,
                              const std::vector<std::vector<std::function<double(double, side)>>>& families);

// classical RK4 over the node list; rhs(a, side, y, dydx)
template <class Rhs>
void integrate_nodes(const std::vector<double>& nodes, std::vector<double>& y, Rhs&& rhs) {
  const std::size_t d = y.size();
  std::vector<double> k1(d), k2(d), k3(d), k4(d), tmp(d);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    double a0 = nodes[i], a1 = nodes[i + 1], h = a1 - a0, am = 0.5 * (a0 + a1);
    rhs(a0, side::right, y.data(), k1.data());
    for (std::size_t q = 0; q < d; ++q) tmp[q] = y[q] + 0.5 * h * k1[q];
    rhs(am, side::exact, tmp.data(), k2.data());
    for (std::size_t q = 0; q < d; ++q) tmp[q] = y[q] + 0.5 * h * k2[q];
    rhs(am, side::exact, tmp.data(), k3.data());
    for (std::size_t q = 0; q < d; ++q) tmp[q] = y[q] + h * k3[q];
    rhs(a1, side::left, tmp.data(), k4.data());
    for (std::size_t q = 0; q < d; ++q) y[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
  }
}

}  // namespace metarenewal::detail
