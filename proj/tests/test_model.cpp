#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "metarenewal/errors.hpp"
#include "metarenewal/model.hpp"

using namespace metarenewal;

TEST_SUITE("model") {
  TEST_CASE("rate functions evaluate their variants") {
    auto c = rate_function::constant(2.5);
    CHECK(c(10.0) == 2.5);

    auto w = rate_function::window(1.0, 2.0, 3.0);
    CHECK(w(0.5) == 0.0);
    CHECK(w(1.5) == 3.0);
    CHECK(w(1.0, 0.0, side::left) == 0.0);
    CHECK(w(1.0, 0.0, side::right) == 3.0);
    CHECK(w(2.0, 0.0, side::left) == 3.0);
    CHECK(w(2.0, 0.0, side::right) == 0.0);

    auto p = rate_function::piecewise_linear({{1.0, 2.0}, {3.0, 4.0}});
    CHECK(p(0.0) == 2.0);
    CHECK(p(5.0) == 4.0);
    CHECK(p(2.0) == doctest::Approx(3.0));
  }

  TEST_CASE("malformed rate functions are structural errors") {
    CHECK_THROWS_AS(rate_function::piecewise_linear({{1.0, 0.0}, {1.0, 1.0}}), structural_error);
    CHECK_THROWS_AS(rate_function::piecewise_linear({{2.0, 0.0}, {1.0, 1.0}}), structural_error);
    CHECK_THROWS_AS(rate_function::window(0.0, 1.0, 1.0), structural_error);
    CHECK_THROWS_AS(rate_function::window(2.0, 1.0, 1.0), structural_error);
    CHECK_THROWS_AS(periodic_modulation(1.0, {{0.5, 1.0}, {0.2, 1.0}}), structural_error);
    CHECK_THROWS_AS(periodic_modulation(1.0, {{0.0, -1.0}}), structural_error);
  }

  TEST_CASE("periodic modulation wraps linearly") {
    periodic_modulation m(2.0, {{0.0, 1.0}, {1.0, 3.0}});
    CHECK(m(0.5) == doctest::Approx(2.0));
    CHECK(m(1.5) == doctest::Approx(2.0));
    CHECK(m(2.5) == doctest::Approx(m(0.5)));
    CHECK(m(-1.5) == doctest::Approx(m(0.5)));
    periodic_modulation shifted(2.0, {{0.5, 1.0}, {1.5, 3.0}});
    CHECK(shifted(0.0) == doctest::Approx(2.0));
    CHECK(shifted(1.9) == doctest::Approx(3.0 - 2.0 * 0.4));
    periodic_modulation one(3.0, {{0.0, 1.0}});
    auto base = rate_function::window(1.0, 2.0, 3.0);
    auto sep = rate_function::separable(base, one);
    for (double a : {0.5, 1.0, 1.5, 2.0}) CHECK(sep(a, 0.7) == base(a));
    CHECK_FALSE(sep.time_dependent());
  }

  TEST_CASE("support of rate functions") {
    auto p = rate_function::piecewise_linear({{0.0, 0.0}, {1.0, 0.0}, {1.5, 2.0}, {2.0, 0.0}});
    auto s = p.support();
    REQUIRE(s);
    CHECK(s->first == 1.0);
    CHECK(s->second == 2.0);
    CHECK_FALSE(rate_function::constant(0.0).support());
  }

  TEST_CASE("validate: symmetric logistic pair passes everything") {
    auto rep = validate(fixtures::symmetric_pair(1.0));
    CHECK(rep.conditions.size() == 6);
    for (auto& c : rep.conditions) CHECK_MESSAGE(c.passed, c.name << ": " << c.detail);
    REQUIRE(rep.beta[0]);
    CHECK(*rep.beta[0] > 0.0);
    CHECK(*rep.beta[0] < 2.0);
    CHECK(rep.column_sums_nonpositive);
  }

  TEST_CASE("validate: negative off-diagonal dispersal fails H3 with witness") {
    Eigen::MatrixXd d(2, 2);
    d << -1.0, -0.5, 1.0, -1.0;
    auto model = fixtures::symmetric_pair(1.0).with_dispersal(dispersal_matrix::constant(d));
    auto rep = validate(model);
    CHECK_FALSE(rep.condition("H3").passed);
    CHECK(rep.condition("H3").detail.find("k=1, j=2") != std::string::npos);
    CHECK_FALSE(rep.passed());
  }

  TEST_CASE("validate: D = 0 fails H6 for every patch") {
    auto model = fixtures::symmetric_pair(0.0);
    auto rep = validate(model);
    CHECK_FALSE(rep.condition("H6").passed);
    CHECK_FALSE(rep.beta[0]);
    CHECK_FALSE(rep.beta[1]);
    CHECK(rep.condition("H3").passed);
  }

  TEST_CASE("validate rejects a too coarse sample density") {
    CHECK_THROWS_AS(validate(fixtures::supercritical(), 8.0), precondition_error);
  }

  TEST_CASE("accessibility examples") {
    Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(3, 3);
    chain(0, 1) = 1.0;
    chain(1, 2) = 1.0;
    CHECK(accessibility(chain) == std::vector<std::size_t>{0});
    Eigen::MatrixXd full = Eigen::MatrixXd::Ones(3, 3);
    CHECK(accessibility(full) == std::vector<std::size_t>{0, 1, 2});
    CHECK(accessibility(Eigen::MatrixXd::Zero(3, 3)).empty());
  }

  TEST_CASE("accessibility never shrinks when an arc is added") {
    fixtures::model_generator gen(11);
    for (int trial = 0; trial < 200; ++trial) {
      int n = gen.integer(2, 5);
      Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j && gen.integer(0, 2) == 0) d(i, j) = 1.0;
      auto before = accessibility(d);
      int i = gen.integer(0, n - 1), j = gen.integer(0, n - 1);
      if (i == j) continue;
      d(i, j) = 1.0;
      auto after = accessibility(d);
      for (auto k : before) CHECK(std::find(after.begin(), after.end(), k) != after.end());
    }
  }

  TEST_CASE("omega constants") {
    auto model = fixtures::supercritical();
    auto om = omega_constants(model);
    CHECK(om.omega1 == doctest::Approx(2.0));
    CHECK(om.omega2 == doctest::Approx(2.0 * 3.0 * std::log(2.0)).epsilon(1e-12));

    // N |D| b = 3 with gamma = 1, mu_inf = 1
    Eigen::MatrixXd d(1, 1);
    d << -0.75;
    auto m2 = fixtures::single_patch(1.0, 3.0, true).with_dispersal(dispersal_matrix::constant(d));
    CHECK(omega_constants(m2).omega1 == doctest::Approx(4.0));

    CHECK_THROWS_AS(omega_constants(fixtures::linear_fixture()), invalid_model);
  }

  TEST_CASE("omega2 is monotone in the birth rate") {
    fixtures::model_generator gen(5);
    for (int trial = 0; trial < 50; ++trial) {
      auto model = gen.model(static_cast<std::size_t>(gen.integer(1, 3)));
      std::vector<rate_function> m;
      for (auto& f : model.birth()) m.push_back(f.scaled(gen.uniform(1.0, 2.0)));
      CHECK(omega_constants(model.with_birth(m)).omega2 >= omega_constants(model).omega2);
    }
  }

  TEST_CASE("mortality laws: monotone in density and logistic induced p is exact") {
    fixtures::model_generator gen(3);
    for (int trial = 0; trial < 50; ++trial) {
      auto model = gen.model(2, trial % 2 == 0);
      for (auto& law : model.mortality()) {
        for (double a = 0.0; a <= model.lifespan(); a += 0.1) {
          double prev = law(0.0, a);
          for (double v = 0.1; v < 20.0; v *= 1.7) {
            double cur = law(v, a);
            CHECK(cur >= prev);
            prev = cur;
            if (law.law() == mortality_law::kind::logistic) {
              double lhs = law(v, a) - law(0.0, a);
              double rhs = law.mu()(a) * v / law.coefficient()(a);
              CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
              CHECK(lhs >= law.induced_p(a) * v * (1.0 - 1e-12));
            }
          }
        }
      }
    }
  }

  TEST_CASE("model structure errors") {
    CHECK_THROWS_AS(fixtures::single_patch(0.5, 3.0, true, 1.0, 1.5), structural_error);
    CHECK_THROWS_AS(mortality_law::logistic(rate_function::constant(1.0), rate_function::constant(0.0)),
                    structural_error);
    CHECK_THROWS_AS(mortality_law::power_law(rate_function::constant(1.0), rate_function::constant(1.0), 0.0),
                    structural_error);
  }
}
