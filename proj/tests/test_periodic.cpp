#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "metarenewal/errors.hpp"
#include "metarenewal/periodic.hpp"
#include "metarenewal/spectral.hpp"
#include "metarenewal/steady.hpp"

using namespace metarenewal;

namespace {

// triangle wave 1 -> 1.5 -> 1 with period 1
periodic_modulation triangle() { return periodic_modulation(1.0, {{0.0, 1.0}, {0.5, 1.5}}); }

model_spec modulated(double birth = 3.0) {
  return fixtures::supercritical().with_birth(
      {rate_function::separable(rate_function::window(1.0, 2.0, birth), triangle())});
}

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

}  // namespace

TEST_SUITE("periodic") {
  TEST_CASE("profile interpolation wraps around") {
    periodic_profile p(2.0, 1, {0.0, 1.0, 2.0, 3.0});
    CHECK(p.nodes() == 4);
    CHECK(p(0.25)[0] == doctest::Approx(0.5));
    CHECK(p(1.75)[0] == doctest::Approx(1.5));
    CHECK(p(2.25)[0] == doctest::Approx(p(0.25)[0]));
    CHECK(p(-0.25)[0] == doctest::Approx(1.5));
    CHECK(p(7.0)[0] == doctest::Approx(p(1.0)[0]));
    CHECK_THROWS_AS(periodic_profile(1.0, 1, {-1.0}), precondition_error);
    CHECK_THROWS_AS(periodic_profile(0.0, 1, {1.0}), precondition_error);
  }

  TEST_CASE("model period") {
    CHECK(model_period(fixtures::supercritical()) == 1.0);
    CHECK(model_period(modulated()) == 1.0);
    auto mixed = modulated().with_initial({rate_function::constant(1.0)}).with_mortality(
        {mortality_law::logistic(rate_function::separable(rate_function::constant(0.5),
                                                          periodic_modulation(0.7, {{0.0, 1.0}, {0.3, 1.2}})),
                                 rate_function::constant(1.0))});
    CHECK_THROWS_AS(model_period(mixed), precondition_error);
  }

  TEST_CASE("apply_Ktilde degenerate and modulated cases") {
    auto model = fixtures::supercritical();
    auto zero = periodic_profile::constant(1.0, 8, vec1(0.0));
    CHECK(apply_Ktilde(model, zero, 0.3)[0] == 0.0);
    for (double rho : {0.2, 1.0, 3.0}) {
      auto p = periodic_profile::constant(1.0, 8, vec1(rho));
      CHECK(apply_Ktilde(model, p, 0.3)[0] == doctest::Approx(apply_Kbar(model, vec1(rho))[0]).epsilon(1e-8));
    }
    auto m = modulated();
    for (double t : {0.0, 0.3, 0.5, 0.8}) {
      double g = t <= 0.5 ? 1.0 + t : 2.0 - t;
      double oracle = g * fixtures::simpson([](double a) { return 3.0 * fixtures::bernoulli(1.0, 0.5, 1.0, a); }, 1.0, 2.0);
      auto p = periodic_profile::constant(1.0, 16, vec1(1.0));
      CHECK(apply_Ktilde(m, p, t)[0] == doctest::Approx(oracle).epsilon(1e-8));
    }
  }

  TEST_CASE("apply_Ktilde matches the renewal operator on periodic data") {
    auto m = modulated();
    std::vector<double> s;
    for (int j = 0; j < 32; ++j) s.push_back(1.0 + 0.5 * std::sin(2.0 * M_PI * j / 32.0));
    periodic_profile p(1.0, 1, s);
    double step = 1.0 / 256;
    std::vector<double> path;
    for (int j = 0; j <= 6 * 256; ++j) path.push_back(p(j * step)[0]);
    newborn_path rho(step, 1, path);
    for (double t : {3.0, 4.25, 5.5}) CHECK(apply_K(m, rho, t)[0] == doctest::Approx(apply_Ktilde(m, p, t)[0]).epsilon(1e-4));
  }

  TEST_CASE("time independent model reproduces steady and spectral results") {
    auto model = fixtures::supercritical();
    double theta = maximal_solution(model).theta[0];
    auto s64 = periodic_maximal_solution(model, 64);
    auto s32 = periodic_maximal_solution(model, 32);
    for (std::size_t j = 0; j < 64; ++j) CHECK(std::abs(s64.theta.value(j, 0) - theta) < 1e-7);
    for (std::size_t j = 0; j < 32; ++j) CHECK(std::abs(s32.theta.value(j, 0) - s64.theta(s32.theta.phase(j))[0]) < 1e-7);
    CHECK(s64.residual <= 1e-8);
    double sigma = assemble_R0(model).sigma;
    for (std::size_t p : {1u, 4u, 16u}) CHECK(std::abs(assemble_periodic_R0(model, p).sigma - sigma) < 1e-6);
    auto pair = fixtures::symmetric_pair(0.3);
    CHECK(std::abs(assemble_periodic_R0(pair, 8).sigma - assemble_R0(pair).sigma) < 1e-6);
  }

  TEST_CASE("periodic maximal solution vanishes when subcritical or sterile") {
    auto sub = modulated(1.0);
    CHECK(assemble_periodic_R0(sub, 16).sigma < 1.0);
    auto s = periodic_maximal_solution(sub, 16);
    for (double v : s.theta.samples()) CHECK(v < 1e-7);
    auto sterile = fixtures::supercritical().with_birth({rate_function::constant(0.0)});
    auto none = periodic_maximal_solution(sterile, 8);
    for (double v : none.theta.samples()) CHECK(v == 0.0);
  }

  TEST_CASE("periodic R0 scales linearly and converges in P") {
    auto m = modulated();
    auto base = assemble_periodic_R0(m, 16);
    auto doubled = assemble_periodic_R0(modulated(6.0), 16);
    CHECK(doubled.sigma == doctest::Approx(2.0 * base.sigma).epsilon(1e-12));
    double s1 = assemble_periodic_R0(m, 1).sigma;
    double s8 = assemble_periodic_R0(m, 8).sigma;
    double s16 = base.sigma;
    double s64 = assemble_periodic_R0(m, 64).sigma;
    CHECK(std::abs(s16 - s64) <= std::abs(s8 - s64) + 1e-12);
    CHECK(std::abs(s16 - s64) < 1e-3);
    MESSAGE("P=1 vs P=64 sigma difference " << std::abs(s1 - s64));
  }

  TEST_CASE("periodic maximal solution of a modulated model") {
    auto m = modulated();
    auto sol = periodic_maximal_solution(m, 32);
    auto k = apply_Ktilde_nodes(m, sol.theta);
    CHECK(k.sup_distance(sol.theta) <= 1e-8);
    CHECK(sol.theta.samples()[0] > 0.0);
    auto coarse = periodic_maximal_solution(m, 16);
    double d = 0.0;
    for (std::size_t j = 0; j < 16; ++j) d = std::max(d, std::abs(coarse.theta.value(j, 0) - sol.theta(coarse.theta.phase(j))[0]));
    MESSAGE("P=16 vs P=32 theta difference " << d);
    CHECK(d < 1e-2);
    auto run = solve_renewal(m, 60.0);
    double worst = 0.0;
    for (double t = 58.0; t <= 60.0; t += 1.0 / 16) worst = std::max(worst, std::abs(run.rho.interpolate(t)[0] - sol.theta(t)[0]));
    CHECK(worst < 5e-3);
  }

  TEST_CASE("envelope checks") {
    auto m = modulated();
    envelope_pair same{m, m, 0.0};
    CHECK(check_envelope(same, m, 10.0).empty());
    envelope_pair wrong{modulated(4.0), modulated(2.0), 0.0};
    auto issues = check_envelope(wrong, m, 10.0);
    REQUIRE_FALSE(issues.empty());
    CHECK(issues[0].find("m- <= m <= m+") != std::string::npos);
    CHECK_THROWS_AS(envelope_bounds(wrong, m, 10.0), precondition_error);
  }

  TEST_CASE("degenerate envelope sandwiches the solution") {
    auto m = modulated();
    envelope_pair same{m, m, 0.0};
    envelope_options opts;
    opts.nodes = 32;
    auto r = envelope_bounds(same, m, 60.0, opts);
    CHECK(r.kind == envelope_case::sandwich);
    CHECK(r.violations.empty());
    CHECK(r.passed);
    REQUIRE(r.witness_eps);
    CHECK(*r.witness_eps <= 1e-2);
    CHECK(r.rho_minus->sup_distance(*r.rho_plus) == 0.0);
  }

  TEST_CASE("subcritical upper envelope forces decay") {
    auto m = modulated(1.0);
    envelope_pair pair{modulated(0.5), modulated(1.1), 0.0};
    envelope_options opts;
    opts.nodes = 16;
    auto r = envelope_bounds(pair, m, 60.0, opts);
    CHECK(r.kind == envelope_case::extinction);
    CHECK(r.sigma_upper <= 1.0);
    CHECK(r.final_window_max < 1e-4);
    CHECK(r.passed);
  }

  TEST_CASE("jittered rates stay between the periodic envelopes") {
    for (std::uint64_t seed : {1u, 2u}) {
      auto fx = fixtures::jittered(seed);
      envelope_pair pair{fx.lower, fx.upper, 0.0};
      CHECK(check_envelope(pair, fx.model, 60.0).empty());
      envelope_options opts;
      opts.nodes = 32;
      auto r = envelope_bounds(pair, fx.model, 60.0, opts);
      CHECK(r.kind == envelope_case::sandwich);
      CHECK(r.check_from == doctest::Approx(40.0));
      CHECK(r.violations.empty());
      CHECK(r.passed);
      REQUIRE(r.witness_T2);
      CHECK(*r.witness_T2 <= 40.0);
    }
  }

  TEST_CASE("widening the envelopes never shrinks the sandwich") {
    auto fx = fixtures::jittered(3);
    auto lo_wide = fx.lower.with_birth({rate_function::separable(rate_function::window(1.0, 2.0, 3.0 * 0.85),
                                                                 periodic_modulation(1.0, {{0.0, 1.0}, {0.5, 1.5}}))});
    auto hi_wide = fx.upper.with_birth({rate_function::separable(rate_function::window(1.0, 2.0, 3.0 * 1.15),
                                                                 periodic_modulation(1.0, {{0.0, 1.0}, {0.5, 1.5}}))});
    periodic_options po;
    auto narrow_lo = periodic_maximal_solution(fx.lower, 16, po).theta;
    auto narrow_hi = periodic_maximal_solution(fx.upper, 16, po).theta;
    auto wide_lo = periodic_maximal_solution(lo_wide, 16, po).theta;
    auto wide_hi = periodic_maximal_solution(hi_wide, 16, po).theta;
    for (std::size_t j = 0; j < 16; ++j) {
      CHECK(wide_lo.value(j, 0) <= narrow_lo.value(j, 0) + 1e-10);
      CHECK(wide_hi.value(j, 0) >= narrow_hi.value(j, 0) - 1e-10);
    }
  }

  TEST_CASE("inconclusive envelopes are labeled") {
    auto m = modulated(2.0);
    envelope_pair pair{modulated(0.5), modulated(3.0), 0.0};
    envelope_options opts;
    opts.nodes = 8;
    auto r = envelope_bounds(pair, m, 20.0, opts);
    CHECK(r.kind == envelope_case::inconclusive);
    CHECK_FALSE(r.passed);
  }
}
