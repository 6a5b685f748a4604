#include "metarenewal/rate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "metarenewal/errors.hpp"

namespace metarenewal {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw structural_error(std::string(what) + " must be finite");
}

}  // namespace

periodic_modulation::periodic_modulation(double period, std::vector<std::pair<double, double>> samples)
    : period_(period), samples_(std::move(samples)) {
  if (!(period_ > 0.0) || !std::isfinite(period_)) throw structural_error("modulation period must be positive");
  if (samples_.empty()) throw structural_error("modulation needs at least one sample");
  for (size_t i = 0; i < samples_.size(); ++i) {
    auto [phase, factor] = samples_[i];
    require_finite(phase, "modulation phase");
    require_finite(factor, "modulation factor");
    if (phase < 0.0 || phase >= period_) throw structural_error("modulation phase outside [0, period)");
    if (factor < 0.0) throw structural_error("modulation factor must be nonnegative");
    if (i > 0 && !(phase > samples_[i - 1].first))
      throw structural_error("modulation phases must be strictly increasing");
  }
}

double periodic_modulation::operator()(double t) const {
  if (samples_.size() == 1) return samples_[0].second;
  double u = t - std::floor(t / period_) * period_;
  if (u >= period_) u -= period_;
  auto it = std::upper_bound(samples_.begin(), samples_.end(), u,
                             [](double x, const std::pair<double, double>& s) { return x < s.first; });
  double x0, f0, x1, f1;
  if (it == samples_.begin() || it == samples_.end()) {
    x0 = samples_.back().first;
    f0 = samples_.back().second;
    x1 = samples_.front().first + period_;
    f1 = samples_.front().second;
    if (it == samples_.begin()) u += period_;
  } else {
    x0 = std::prev(it)->first;
    f0 = std::prev(it)->second;
    x1 = it->first;
    f1 = it->second;
  }
  double w = (u - x0) / (x1 - x0);
  return f0 + w * (f1 - f0);
}

double periodic_modulation::max_factor() const {
  double r = 0.0;
  for (auto& s : samples_) r = std::max(r, s.second);
  return r;
}

double periodic_modulation::min_factor() const {
  double r = std::numeric_limits<double>::infinity();
  for (auto& s : samples_) r = std::min(r, s.second);
  return r;
}

void periodic_modulation::breakpoints(double t0, double t1, std::vector<double>& out) const {
  if (samples_.size() == 1 || !(t1 > t0)) return;
  for (double base = std::floor(t0 / period_) * period_; base < t1; base += period_) {
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t0 - base,
                               [](double x, const std::pair<double, double>& s) { return x < s.first; });
    for (; it != samples_.end() && base + it->first < t1; ++it)
      if (base + it->first > t0) out.push_back(base + it->first);
  }
}

rate_function rate_function::constant(double value) {
  require_finite(value, "constant rate");
  return rate_function(constant_part{value});
}

rate_function rate_function::window(double lo, double hi, double value) {
  require_finite(lo, "window lo");
  require_finite(hi, "window hi");
  require_finite(value, "window value");
  if (!(lo > 0.0)) throw structural_error("window requires lo > 0");
  if (!(lo < hi)) throw structural_error("window requires lo < hi");
  return rate_function(window_part{lo, hi, value});
}

rate_function rate_function::piecewise_linear(std::vector<std::pair<double, double>> knots) {
  if (knots.empty()) throw structural_error("piecewise linear rate needs at least one knot");
  for (size_t i = 0; i < knots.size(); ++i) {
    require_finite(knots[i].first, "knot age");
    require_finite(knots[i].second, "knot value");
    if (i > 0 && !(knots[i].first > knots[i - 1].first))
      throw structural_error("piecewise linear knots must be strictly increasing in age");
  }
  return rate_function(piecewise_part{std::move(knots)});
}

rate_function rate_function::separable(const rate_function& age_part, periodic_modulation time_part) {
  if (age_part.time_dependent()) throw structural_error("separable age part must not depend on time");
  return rate_function(separable_part{std::make_shared<const rate_function>(age_part), std::move(time_part)});
}

double rate_function::operator()(double a, double t, side s) const {
  return std::visit(
      overloaded{
          [](const constant_part& c) { return c.value; },
          [&](const window_part& w) {
            if (a < w.lo || a > w.hi) return 0.0;
            if (a == w.lo && s == side::left) return 0.0;
            if (a == w.hi && s == side::right) return 0.0;
            return w.value;
          },
          [&](const piecewise_part& p) {
            const auto& k = p.knots;
            if (a <= k.front().first) return k.front().second;
            if (a >= k.back().first) return k.back().second;
            auto it = std::upper_bound(k.begin(), k.end(), a,
                                       [](double x, const std::pair<double, double>& kn) { return x < kn.first; });
            auto lo = std::prev(it);
            double w = (a - lo->first) / (it->first - lo->first);
            return lo->second + w * (it->second - lo->second);
          },
          [&](const separable_part& sp) { return (*sp.age)(a, t, s) * sp.time(t); },
      },
      v_);
}

bool rate_function::time_dependent() const {
  if (auto* sp = std::get_if<separable_part>(&v_)) return sp->time.samples().size() > 1;
  return false;
}

bool rate_function::is_zero() const { return !support().has_value(); }

const periodic_modulation* rate_function::modulation() const {
  if (auto* sp = std::get_if<separable_part>(&v_)) return &sp->time;
  return nullptr;
}

void rate_function::age_breakpoints(std::vector<double>& out) const {
  std::visit(overloaded{
                 [](const constant_part&) {},
                 [&](const window_part& w) {
                   out.push_back(w.lo);
                   out.push_back(w.hi);
                 },
                 [&](const piecewise_part& p) {
                   if (p.knots.size() > 1)
                     for (auto& k : p.knots) out.push_back(k.first);
                 },
                 [&](const separable_part& sp) { sp.age->age_breakpoints(out); },
             },
             v_);
}

void rate_function::time_breakpoints(double t0, double t1, std::vector<double>& out) const {
  if (auto* sp = std::get_if<separable_part>(&v_)) sp->time.breakpoints(t0, t1, out);
}

double rate_function::sup_abs() const {
  return std::visit(overloaded{
                        [](const constant_part& c) { return std::abs(c.value); },
                        [](const window_part& w) { return std::abs(w.value); },
                        [](const piecewise_part& p) {
                          double r = 0.0;
                          for (auto& k : p.knots) r = std::max(r, std::abs(k.second));
                          return r;
                        },
                        [](const separable_part& sp) { return sp.age->sup_abs() * sp.time.max_factor(); },
                    },
                    v_);
}

double rate_function::inf() const {
  return std::visit(overloaded{
                        [](const constant_part& c) { return c.value; },
                        [](const window_part& w) { return std::min(0.0, w.value); },
                        [](const piecewise_part& p) {
                          double r = std::numeric_limits<double>::infinity();
                          for (auto& k : p.knots) r = std::min(r, k.second);
                          return r;
                        },
                        [](const separable_part& sp) {
                          double a = sp.age->inf();
                          return a >= 0.0 ? a * sp.time.min_factor() : a * sp.time.max_factor();
                        },
                    },
                    v_);
}

std::optional<std::pair<double, double>> rate_function::support() const {
  using result = std::optional<std::pair<double, double>>;
  const double inf = std::numeric_limits<double>::infinity();
  return std::visit(overloaded{
                        [&](const constant_part& c) -> result {
                          if (c.value == 0.0) return std::nullopt;
                          return std::pair{0.0, inf};
                        },
                        [](const window_part& w) -> result {
                          if (w.value == 0.0) return std::nullopt;
                          return std::pair{w.lo, w.hi};
                        },
                        [&](const piecewise_part& p) -> result {
                          const auto& k = p.knots;
                          size_t first = k.size(), last = 0;
                          for (size_t i = 0; i < k.size(); ++i) {
                            if (k[i].second != 0.0) {
                              if (first == k.size()) first = i;
                              last = i;
                            }
                          }
                          if (first == k.size()) return std::nullopt;
                          double lo = first == 0 ? 0.0 : std::max(0.0, k[first - 1].first);
                          double hi = last + 1 == k.size() ? inf : k[last + 1].first;
                          return std::pair{lo, hi};
                        },
                        [](const separable_part& sp) -> result {
                          if (sp.time.max_factor() == 0.0) return std::nullopt;
                          return sp.age->support();
                        },
                    },
                    v_);
}

rate_function rate_function::scaled(double c) const {
  return std::visit(overloaded{
                        [&](const constant_part& p) { return rate_function(constant_part{c * p.value}); },
                        [&](const window_part& w) { return rate_function(window_part{w.lo, w.hi, c * w.value}); },
                        [&](const piecewise_part& p) {
                          auto knots = p.knots;
                          for (auto& k : knots) k.second *= c;
                          return rate_function(piecewise_part{std::move(knots)});
                        },
                        [&](const separable_part& sp) {
                          return rate_function(separable_part{
                              std::make_shared<const rate_function>(sp.age->scaled(c)), sp.time});
                        },
                    },
                    v_);
}

std::string rate_function::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const constant_part& c) { os << "constant(" << c.value << ")"; },
                 [&](const window_part& w) { os << "window(" << w.lo << ", " << w.hi << ", " << w.value << ")"; },
                 [&](const piecewise_part& p) { os << "piecewise_linear(" << p.knots.size() << " knots)"; },
                 [&](const separable_part& sp) {
                   os << "separable(" << sp.age->describe() << ", period " << sp.time.period() << ")";
                 },
             },
             v_);
  return os.str();
}

}  // namespace metarenewal
