#include "age_quadrature.hpp"

#include <cmath>

namespace metarenewal::detail {

std::vector<double> age_nodes(const model_spec& model, double hi, double step,
                              const std::vector<std::vector<std::function<double(double, side)>>>& families) {
  std::vector<double> x;
  auto cells = static_cast<std::size_t>(std::ceil(hi / step - 1e-9));
  for (std::size_t i = 0; i <= cells; ++i) x.push_back(std::min(hi, static_cast<double>(i) * step));
  for (double a : model.age_breakpoints())
    if (a > 0.0 && a < hi) x.push_back(a);
  std::sort(x.begin(), x.end());
  std::vector<double> base;
  for (double a : x)
    if (base.empty() || a - base.back() > 1e-12) base.push_back(a);

  std::vector<double> out = base;
  for (const auto& fam : families) {
    for (std::size_t i = 0; i + 1 < base.size(); ++i) {
      double a0 = base[i], a1 = base[i + 1];
      for (std::size_t k = 0; k < fam.size(); ++k)
        for (std::size_t l = k + 1; l < fam.size(); ++l) {
          double d0 = fam[k](a0, side::right) - fam[l](a0, side::right);
          double d1 = fam[k](a1, side::left) - fam[l](a1, side::left);
          if (d0 * d1 < 0.0) {
            double r = a0 + (a1 - a0) * d0 / (d0 - d1);
            if (r > a0 + 1e-12 && r < a1 - 1e-12) out.push_back(r);
          }
        }
    }
  }
  std::sort(out.begin(), out.end());
  std::vector<double> nodes;
  for (double a : out)
    if (nodes.empty() || a - nodes.back() > 1e-12) nodes.push_back(a);
  return nodes;
}

}  // namespace metarenewal::detail
