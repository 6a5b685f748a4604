#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "metarenewal/errors.hpp"
#include "metarenewal/renewal.hpp"
#include "metarenewal/spectral.hpp"
#include "metarenewal/steady.hpp"

using namespace metarenewal;

namespace {

double scalar_theta(double mu, double capacity, double birth) {
  auto k = [&](double rho) {
    return fixtures::simpson([&](double a) { return birth * fixtures::bernoulli(rho, mu, capacity, a); }, 1.0, 2.0);
  };
  double lo = 1e-9, hi = 100.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (k(mid) > mid ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_SUITE("steady") {
  TEST_CASE("apply_Kbar examples") {
    auto model = fixtures::supercritical();
    CHECK(apply_Kbar(model, vec({0.0}))[0] == 0.0);
    double w2 = omega_constants(model).omega2;
    CHECK(apply_Kbar(model, vec({w2}))[0] <= w2);
    double oracle = fixtures::simpson(
        [](double a) { return 3.0 * std::exp(-0.5 * a) / (2.0 - std::exp(-0.5 * a)); }, 1.0, 2.0);
    CHECK(apply_Kbar(model, vec({1.0}))[0] == doctest::Approx(oracle).epsilon(1e-7));
    CHECK_THROWS_AS(apply_Kbar(model, vec({-1.0})), precondition_error);
  }

  TEST_CASE("apply_Kbar is monotone and bounded on random models") {
    fixtures::model_generator gen(51);
    for (int trial = 0; trial < 20; ++trial) {
      auto model = gen.model(static_cast<std::size_t>(gen.integer(1, 3)));
      double w2 = omega_constants(model).omega2;
      Eigen::VectorXd lo = gen.vector(model.patches(), 0.0, w2);
      Eigen::VectorXd hi = lo + gen.vector(model.patches(), 0.0, w2);
      Eigen::VectorXd klo = apply_Kbar(model, lo), khi = apply_Kbar(model, hi);
      CHECK(((khi - klo).array() >= -1e-12).all());
      CHECK((khi.array() <= w2 * (1 + 1e-12)).all());
      CHECK(check_upper_solution(model, Eigen::VectorXd::Constant(model.patches(), w2)));
      CHECK(check_lower_solution(model, Eigen::VectorXd::Zero(model.patches())));
    }
  }

  TEST_CASE("maximal solution matches the scalar oracle") {
    auto r = maximal_solution(fixtures::supercritical());
    CHECK(std::abs(r.theta[0] - scalar_theta(0.5, 1.0, 3.0)) < 1e-6);
    CHECK(r.start_agreement <= 1e-7);
    CHECK(r.last_step < 1e-8);
  }

  TEST_CASE("maximal solution vanishes when subcritical or sterile") {
    CHECK(maximal_solution(fixtures::subcritical()).theta.cwiseAbs().maxCoeff() < 1e-7);
    auto sterile = fixtures::supercritical().with_birth({rate_function::constant(0.0)});
    CHECK(maximal_solution(sterile).theta[0] == 0.0);
  }

  TEST_CASE("classification") {
    auto sub = classify(fixtures::subcritical());
    CHECK(sub.classification == dynamics::extinction);
    CHECK(sub.theta[0] == 0.0);
    CHECK(sub.asymptotic_total[0] == 0.0);

    auto model = fixtures::supercritical();
    auto sup = classify(model);
    CHECK(sup.classification == dynamics::permanency);
    CHECK(to_string(sup.classification) == "Permanency");
    double theta = sup.theta[0];
    double total = fixtures::simpson([&](double a) { return fixtures::bernoulli(theta, 0.5, 1.0, a); }, 0.0, 4.0);
    CHECK(sup.asymptotic_total[0] == doctest::Approx(total).epsilon(1e-7));
    CHECK(sup.profile.value(0, 0) == doctest::Approx(theta));

    double sigma = assemble_R0(model).sigma;
    auto marginal = model.with_birth({rate_function::window(1.0, 2.0, 3.0 / sigma)});
    steady_options opts;
    opts.max_iter = 200;
    auto m = classify(marginal, opts);
    CHECK(m.classification == dynamics::marginal);
  }

  TEST_CASE("fixed point checks and uniqueness probe") {
    fixtures::model_generator gen(61);
    int supercritical = 0;
    for (int trial = 0; trial < 10; ++trial) {
      auto model = gen.model(static_cast<std::size_t>(gen.integer(1, 3)), true, true, 5.0);
      auto st = classify(model);
      CHECK(check_lower_solution(model, st.theta, 1e-7));
      CHECK(check_upper_solution(model, st.theta, 1e-7));
      if (st.classification != dynamics::permanency) continue;
      ++supercritical;
      CHECK(st.theta.minCoeff() > 1e-8);
      double w2 = omega_constants(model).omega2;
      for (int s = 0; s < 16; ++s) {
        Eigen::VectorXd start = gen.vector(model.patches(), w2, 4.0 * w2);
        CHECK((descend(model, start, {}) - st.theta).cwiseAbs().maxCoeff() <= 1e-7);
      }
      for (double lambda : {0.1, 0.5, 0.9}) {
        Eigen::VectorXd scaled = lambda * st.theta;
        CHECK(((apply_Kbar(model, scaled) - scaled).array() >= -1e-10).all());
      }
      for (int s = 0; s < 20; ++s) {
        Eigen::VectorXd probe = gen.vector(model.patches(), 0.0, 1.5).cwiseProduct(st.theta);
        if (check_lower_solution(model, probe, 0.0)) CHECK(((probe - st.theta).array() <= 1e-8).all());
      }
    }
    CHECK(supercritical > 0);
  }

  TEST_CASE("long renewal run approaches the steady state") {
    auto model = fixtures::supercritical();
    double theta = maximal_solution(model).theta[0];
    double prev = 1e9;
    for (double t_end : {20.0, 40.0, 80.0}) {
      auto sol = solve_renewal(model, t_end);
      double worst = 0.0;
      for (double t = t_end - 2.0; t <= t_end + 1e-12; t += 0.25)
        worst = std::max(worst, std::abs(sol.rho.interpolate(t)[0] - theta));
      CHECK(worst <= prev);
      prev = worst;
    }
    CHECK(prev < 1e-3);
  }
}
