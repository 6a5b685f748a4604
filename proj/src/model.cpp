#include "metarenewal/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "metarenewal/errors.hpp"

namespace metarenewal {

mortality_law::mortality_law(kind k, rate_function mu, rate_function coef, double gamma)
    : kind_(k), mu_(std::move(mu)), coef_(std::move(coef)), gamma_(gamma) {}

mortality_law mortality_law::logistic(rate_function mu, rate_function capacity) {
  if (!(capacity.inf() > 0.0)) throw structural_error("carrying capacity must be positive");
  return mortality_law(kind::logistic, std::move(mu), std::move(capacity), 1.0);
}

mortality_law mortality_law::power_law(rate_function mu, rate_function p, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw structural_error("power law exponent gamma must be positive");
  return mortality_law(kind::power_law, std::move(mu), std::move(p), gamma);
}

mortality_law mortality_law::linear(rate_function mu) {
  return mortality_law(kind::power_law, std::move(mu), rate_function::constant(0.0), 1.0);
}

double mortality_law::operator()(double v, double a, double t, side s) const {
  v = std::max(v, 0.0);
  double mu = mu_(a, t, s);
  if (kind_ == kind::logistic) return mu * (1.0 + v / coef_(a, t, s));
  double p = coef_(a, t, s);
  return mu + p * (gamma_ == 1.0 ? v : std::pow(v, gamma_));
}

double mortality_law::induced_p(double a, double t, side s) const {
  if (kind_ == kind::logistic) return mu_(a, t, s) / coef_(a, t, s);
  return coef_(a, t, s);
}

dispersal_matrix::dispersal_matrix(std::size_t n) : n_(n), entries_(n * n, rate_function::constant(0.0)) {}

dispersal_matrix::dispersal_matrix(std::size_t n, std::vector<rate_function> row_major)
    : n_(n), entries_(std::move(row_major)) {
  if (entries_.size() != n * n) throw structural_error("dispersal matrix must have N*N entries");
}

dispersal_matrix dispersal_matrix::constant(const Eigen::MatrixXd& values) {
  if (values.rows() != values.cols()) throw structural_error("dispersal matrix must be square");
  std::size_t n = static_cast<std::size_t>(values.rows());
  dispersal_matrix d(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j) d.set(k, j, rate_function::constant(values(k, j)));
  return d;
}

Eigen::MatrixXd dispersal_matrix::at(double a, double t, side s) const {
  Eigen::MatrixXd m(n_, n_);
  for (std::size_t k = 0; k < n_; ++k)
    for (std::size_t j = 0; j < n_; ++j) m(k, j) = (*this)(k, j)(a, t, s);
  return m;
}

bool dispersal_matrix::time_dependent() const {
  return std::any_of(entries_.begin(), entries_.end(), [](const rate_function& f) { return f.time_dependent(); });
}

bool dispersal_matrix::is_zero() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const rate_function& f) { return f.is_zero(); });
}

double dispersal_matrix::sup_abs() const {
  double r = 0.0;
  for (auto& f : entries_) r = std::max(r, f.sup_abs());
  return r;
}

dispersal_matrix dispersal_matrix::scaled(double c) const {
  std::vector<rate_function> e;
  e.reserve(entries_.size());
  for (auto& f : entries_) e.push_back(f.scaled(c));
  return dispersal_matrix(n_, std::move(e));
}

model_spec::model_spec(std::size_t patches, double lifespan, double fertility_lo, double fertility_hi,
                       std::vector<rate_function> birth, std::vector<mortality_law> mortality,
                       dispersal_matrix dispersal, std::vector<rate_function> initial)
    : n_(patches),
      b_(lifespan),
      a_m_(fertility_lo),
      A_m_(fertility_hi),
      birth_(std::move(birth)),
      mortality_(std::move(mortality)),
      dispersal_(std::move(dispersal)),
      initial_(std::move(initial)) {
  finish();
}

void model_spec::finish() {
  if (n_ == 0) throw structural_error("model needs at least one patch");
  if (birth_.size() != n_) throw structural_error("expected one birth rate per patch");
  if (mortality_.size() != n_) throw structural_error("expected one mortality law per patch");
  if (initial_.size() != n_) throw structural_error("expected one initial density per patch");
  if (dispersal_.size() != n_) throw structural_error("dispersal matrix size does not match patch count");
  if (!std::isfinite(b_) || !(b_ > 0.0)) throw structural_error("lifespan must be positive and finite");
  if (!(a_m_ > 0.0 && a_m_ < A_m_ && A_m_ < b_))
    throw structural_error("fertility window must satisfy 0 < a_m < A_m < b");

  std::vector<double> bp;
  for (std::size_t k = 0; k < n_; ++k) {
    birth_[k].age_breakpoints(bp);
    mortality_[k].mu().age_breakpoints(bp);
    mortality_[k].coefficient().age_breakpoints(bp);
    for (std::size_t j = 0; j < n_; ++j) dispersal_(k, j).age_breakpoints(bp);
  }
  std::sort(bp.begin(), bp.end());
  age_breaks_.clear();
  for (double x : bp) {
    if (x <= 0.0 || x >= b_) continue;
    if (!age_breaks_.empty() && x - age_breaks_.back() < 1e-12) continue;
    age_breaks_.push_back(x);
  }

  column_sums_nonpositive_ = true;
  auto ages = age_samples(*this, 64.0);
  auto times = time_samples(*this, 64.0);
  for (double t : times) {
    for (double a : ages) {
      for (side s : {side::left, side::right}) {
        for (std::size_t j = 0; j < n_ && column_sums_nonpositive_; ++j) {
          double sum = 0.0;
          for (std::size_t k = 0; k < n_; ++k) sum += dispersal_(k, j)(a, t, s);
          if (sum > 1e-14) column_sums_nonpositive_ = false;
        }
      }
    }
  }
}

double model_spec::initial_density(std::size_t k, double a) const {
  if (a >= b_ || a < 0.0) return 0.0;
  return initial_[k](a, 0.0, side::exact);
}

bool model_spec::time_dependent() const {
  for (std::size_t k = 0; k < n_; ++k)
    if (birth_[k].time_dependent() || mortality_[k].time_dependent()) return true;
  return dispersal_.time_dependent();
}

bool model_spec::initial_zero() const {
  return std::all_of(initial_.begin(), initial_.end(), [&](const rate_function& f) {
    auto s = f.support();
    return !s || s->first >= b_;
  });
}

void model_spec::time_breakpoints(double t0, double t1, std::vector<double>& out) const {
  std::size_t start = out.size();
  for (std::size_t k = 0; k < n_; ++k) {
    birth_[k].time_breakpoints(t0, t1, out);
    mortality_[k].mu().time_breakpoints(t0, t1, out);
    mortality_[k].coefficient().time_breakpoints(t0, t1, out);
    for (std::size_t j = 0; j < n_; ++j) dispersal_(k, j).time_breakpoints(t0, t1, out);
  }
  std::sort(out.begin() + start, out.end());
  out.erase(std::unique(out.begin() + start, out.end()), out.end());
}

std::vector<double> model_spec::modulation_periods() const {
  std::set<double> p;
  auto add = [&](const rate_function& f) {
    if (f.time_dependent()) p.insert(f.modulation()->period());
  };
  for (std::size_t k = 0; k < n_; ++k) {
    add(birth_[k]);
    add(mortality_[k].mu());
    add(mortality_[k].coefficient());
    for (std::size_t j = 0; j < n_; ++j) add(dispersal_(k, j));
  }
  return {p.begin(), p.end()};
}

double model_spec::birth_sup() const {
  double r = 0.0;
  for (auto& m : birth_) r = std::max(r, m.sup_abs());
  return r;
}

std::optional<double> model_spec::common_gamma() const {
  double g = mortality_[0].gamma();
  for (auto& m : mortality_)
    if (m.gamma() != g) return std::nullopt;
  return g;
}

model_spec model_spec::with_birth(std::vector<rate_function> birth) const {
  return model_spec(n_, b_, a_m_, A_m_, std::move(birth), mortality_, dispersal_, initial_);
}

model_spec model_spec::with_dispersal(dispersal_matrix d) const {
  return model_spec(n_, b_, a_m_, A_m_, birth_, mortality_, std::move(d), initial_);
}

model_spec model_spec::with_mortality(std::vector<mortality_law> m) const {
  return model_spec(n_, b_, a_m_, A_m_, birth_, std::move(m), dispersal_, initial_);
}

model_spec model_spec::with_initial(std::vector<rate_function> f) const {
  return model_spec(n_, b_, a_m_, A_m_, birth_, mortality_, dispersal_, std::move(f));
}

double model_spec::default_step() const { return std::min(a_m_, b_ - A_m_) / 32.0; }

std::vector<double> age_samples(const model_spec& model, double sample_density) {
  if (!(sample_density >= 16.0)) throw precondition_error("sample density must be at least 16 points per unit");
  double b = model.lifespan();
  std::size_t n = static_cast<std::size_t>(std::ceil(b * sample_density));
  std::vector<double> a;
  a.reserve(n + 1 + model.age_breakpoints().size());
  for (std::size_t i = 0; i <= n; ++i) a.push_back(b * static_cast<double>(i) / static_cast<double>(n));
  for (double x : model.age_breakpoints()) a.push_back(x);
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

std::vector<double> time_samples(const model_spec& model, double sample_density) {
  auto periods = model.modulation_periods();
  if (periods.empty()) return {0.0};
  double horizon = *std::max_element(periods.begin(), periods.end());
  std::size_t n = std::min<std::size_t>(2048, static_cast<std::size_t>(std::ceil(horizon * sample_density)));
  n = std::max<std::size_t>(n, 16);
  std::vector<double> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(horizon * static_cast<double>(i) / static_cast<double>(n));
  std::vector<double> bp;
  model.time_breakpoints(-1e-300, horizon, bp);
  if (bp.size() <= 4096) t.insert(t.end(), bp.begin(), bp.end());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

bool validation_report::passed() const {
  return std::all_of(conditions.begin(), conditions.end(), [](const condition_result& c) { return c.passed; });
}

const condition_result& validation_report::condition(const std::string& name) const {
  for (auto& c : conditions)
    if (c.name == name) return c;
  throw precondition_error("no condition named " + name);
}

namespace {

std::string fmt_point(double a, double t) {
  std::ostringstream os;
  os << "a=" << a << ", t=" << t;
  return os.str();
}

bool reaches_all(const Eigen::MatrixXd& d, std::size_t k) {
  std::size_t n = static_cast<std::size_t>(d.rows());
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{k};
  seen[k] = 1;
  while (!stack.empty()) {
    std::size_t i = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && !seen[j] && d(i, j) > 0.0) {
        seen[j] = 1;
        stack.push_back(j);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

}  // namespace

std::vector<std::size_t> accessibility(const Eigen::MatrixXd& d) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < static_cast<std::size_t>(d.rows()); ++k)
    if (reaches_all(d, k)) out.push_back(k);
  return out;
}

std::vector<std::size_t> accessibility(const dispersal_matrix& d, double age, double t) {
  return accessibility(d.at(age, t));
}

validation_report validate(const model_spec& model, double sample_density) {
  validation_report rep;
  const std::size_t n = model.patches();
  const double b = model.lifespan();
  auto ages = age_samples(model, sample_density);
  auto times = time_samples(model, sample_density);
  const auto& breaks = model.age_breakpoints();
  auto is_break = [&](double a) { return std::binary_search(breaks.begin(), breaks.end(), a); };

  // visits every sampled (a, t, side); stops at the first false
  auto all_samples = [&](auto&& pred) {
    for (double t : times)
      for (double a : ages) {
        if (is_break(a)) {
          if (!pred(a, t, side::left) || !pred(a, t, side::right)) return false;
        } else if (!pred(a, t, side::exact)) {
          return false;
        }
      }
    return true;
  };

  rep.conditions.push_back({"H1", true, "constant maximal lifespan b = " + std::to_string(b)});

  {
    condition_result h2{"H2", true, ""};
    auto gamma = model.common_gamma();
    if (!gamma) {
      h2.passed = false;
      h2.detail = "mortality laws use different exponents gamma";
    }
    double mu_inf = std::numeric_limits<double>::infinity();
    const double ladder[] = {0.0, 1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0};
    for (std::size_t k = 0; k < n && h2.passed; ++k) {
      const auto& law = model.mortality(k);
      bool ok = all_samples([&](double a, double t, side s) {
        double mu = law.base(a, t, s);
        if (!(mu >= 0.0)) {
          h2.detail = "patch " + std::to_string(k + 1) + ": negative base mortality at " + fmt_point(a, t);
          return false;
        }
        double prev = law(0.0, a, t, s);
        for (double v : ladder) {
          double cur = law(v, a, t, s);
          if (cur < prev) {
            h2.detail = "patch " + std::to_string(k + 1) + ": M decreasing in v at " + fmt_point(a, t);
            return false;
          }
          prev = cur;
        }
        mu_inf = std::min(mu_inf, law.induced_p(a, t, s));
        return true;
      });
      if (!ok) h2.passed = false;
    }
    if (h2.passed && !(mu_inf > 0.0)) {
      h2.passed = false;
      h2.detail = "mu_inf = inf p(a) is not positive";
    }
    if (h2.passed) h2.detail = "gamma = " + std::to_string(*gamma) + ", mu_inf = " + std::to_string(mu_inf);
    rep.conditions.push_back(h2);
  }

  {
    condition_result h3{"H3", true, "D is Metzler at all samples"};
    for (std::size_t k = 0; k < n && h3.passed; ++k)
      for (std::size_t j = 0; j < n && h3.passed; ++j) {
        if (k == j) continue;
        const auto& f = model.dispersal()(k, j);
        all_samples([&](double a, double t, side s) {
          if (f(a, t, s) < 0.0) {
            h3.passed = false;
            h3.detail = "negative off-diagonal entry D_" + std::to_string(k + 1) + std::to_string(j + 1) +
                        " (k=" + std::to_string(k + 1) + ", j=" + std::to_string(j + 1) + ") at " + fmt_point(a, t);
            return false;
          }
          return true;
        });
      }
    rep.conditions.push_back(h3);
  }

  {
    condition_result h4{"H4", true, ""};
    for (std::size_t k = 0; k < n && h4.passed; ++k) {
      auto sup = model.birth(k).support();
      if (sup && (sup->first < model.fertility_lo() - 1e-12 || sup->second > model.fertility_hi() + 1e-12)) {
        h4.passed = false;
        h4.detail = "patch " + std::to_string(k + 1) + ": supp m not inside the fertility window";
        break;
      }
      all_samples([&](double a, double t, side s) {
        if (model.birth(k)(a, t, s) < 0.0) {
          h4.passed = false;
          h4.detail = "patch " + std::to_string(k + 1) + ": negative birth rate at " + fmt_point(a, t);
          return false;
        }
        return true;
      });
    }
    if (h4.passed) {
      std::ostringstream os;
      os << "supp m inside [" << model.fertility_lo() << ", " << model.fertility_hi() << "], b = " << b;
      h4.detail = os.str();
    }
    rep.conditions.push_back(h4);
  }

  {
    condition_result h5{"H5", true, "initial densities nonnegative on [0, b)"};
    for (std::size_t k = 0; k < n && h5.passed; ++k) {
      for (double a : ages) {
        if (a >= b) break;
        if (model.initial(k)(a, 0.0, side::exact) < 0.0) {
          h5.passed = false;
          h5.detail = "patch " + std::to_string(k + 1) + ": negative initial density at a=" + std::to_string(a);
          break;
        }
      }
    }
    rep.conditions.push_back(h5);
  }

  {
    condition_result h6{"H6", true, ""};
    rep.beta.assign(n, std::nullopt);
    std::ostringstream os;
    for (std::size_t k = 0; k < n; ++k) {
      auto sup = model.birth(k).support();
      double top = sup ? std::min(sup->second, b) : model.fertility_hi();
      for (double a : ages) {
        if (a <= 0.0) continue;
        if (a >= top) break;
        bool ok = true;
        for (double t : times) {
          if (!reaches_all(model.dispersal().at(a, t), k)) {
            ok = false;
            break;
          }
        }
        if (ok) {
          rep.beta[k] = a;
          break;
        }
      }
      if (k) os << "; ";
      if (rep.beta[k]) {
        os << "patch " << k + 1 << " accessible at beta=" << *rep.beta[k];
      } else {
        h6.passed = false;
        os << "patch " << k + 1 << " not accessible below " << top;
      }
    }
    h6.detail = os.str();
    rep.conditions.push_back(h6);
  }

  rep.column_sums_nonpositive = model.column_sums_nonpositive();
  return rep;
}

omega_constants_result omega_constants(const model_spec& model, double sample_density) {
  omega_constants_result r;
  auto gamma = model.common_gamma();
  if (!gamma || !(*gamma > 0.0)) throw invalid_model("omega constants need a common positive gamma");
  r.gamma = *gamma;
  auto ages = age_samples(model, sample_density);
  auto times = time_samples(model, sample_density);
  double mu_inf = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < model.patches(); ++k)
    for (double t : times)
      for (double a : ages)
        for (side s : {side::left, side::right}) mu_inf = std::min(mu_inf, model.mortality(k).induced_p(a, t, s));
  if (!(mu_inf > 0.0)) throw invalid_model("omega constants need mu_inf > 0");
  r.mu_inf = mu_inf;
  r.dispersal_norm = model.dispersal_sup();
  double n = static_cast<double>(model.patches());
  r.omega1 = std::pow((1.0 + n * r.dispersal_norm * model.lifespan()) / (r.gamma * mu_inf), 1.0 / r.gamma);
  double lo = model.fertility_lo(), hi = model.fertility_hi();
  double integral;
  if (r.gamma == 1.0) {
    integral = std::log(hi / lo);
  } else {
    double e = 1.0 - 1.0 / r.gamma;
    integral = (std::pow(hi, e) - std::pow(lo, e)) / e;
  }
  r.omega2 = r.omega1 * model.birth_sup() * integral;
  return r;
}

}  // namespace metarenewal
