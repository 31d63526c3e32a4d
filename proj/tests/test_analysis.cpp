#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "vflow/analysis.hpp"
#include "vflow/errors.hpp"
#include "vflow/random.hpp"

using namespace vflow;
using vflow::testing::dist;
using vflow::testing::vec;

namespace {

const ConvexSet kUnit = ConvexSet::ball(vec({0, 0}), 1.0);

Problem ball_problem(const ConvexSet& C = ConvexSet::whole(2)) {
  return Problem::make(C, Operator::projection(kUnit), Contraction::affine(0.5, Matrix::Identity(2, 2), vec({2, 0})));
}

// residual ~ theta: T = P onto ball((2,0), 1), f = 0, q* = (1, 0)
Problem rate_problem() {
  return Problem::make(ConvexSet::whole(2), Operator::projection(ConvexSet::ball(vec({2, 0}), 1.0)),
                       Contraction::constant(vec({0, 0})));
}

SolverConfig horizon(double t_end) {
  SolverConfig cfg;
  cfg.t_end = t_end;
  return cfg;
}

}  // namespace

TEST_CASE("solve_vp oracles") {
  for (const auto& T : {Operator::negation(2), Operator::rotation(2, 1.0)}) {
    const auto p = Problem::make(ConvexSet::whole(2), T, Contraction::affine(0.7, Matrix::Identity(2, 2), vec({3, -1})));
    CHECK(solve_vp(p, vec({5, 5})).q_star.norm() == 0.0);
  }
  const auto vp = solve_vp(ball_problem(), vec({0, 0}));
  CHECK(dist(vp.q_star, vec({1, 0})) <= 1e-12);
  CHECK(vp.gamma == 0.5);
  CHECK(vp.final_gap <= 1e-13);
  CHECK(vp.contraction_certified);
  CHECK(vp.max_gap_ratio <= 0.5 + 1e-12);

  const auto K = ConvexSet::box(vec({-1, -1}), vec({1, 1}));
  const auto c = Problem::make(ConvexSet::whole(2), Operator::projection(K), Contraction::constant(vec({3, 0.5})));
  CHECK(dist(solve_vp(c, vec({0, 0})).q_star, project(K, vec({3, 0.5}))) <= 1e-15);
}

TEST_CASE("solve_vp errors") {
  const auto mixed = Problem::make(ConvexSet::whole(2),
                                   Operator::composition({Operator::rotation(2, 1.0), Operator::projection(kUnit)}),
                                   Contraction::constant(vec({1, 0})));
  CHECK_THROWS_AS(solve_vp(mixed, vec({0, 0})), UnsupportedError);
  const auto slow = Problem::make(ConvexSet::whole(2), Operator::identity(2),
                                  Contraction::affine(0.99, Matrix::Identity(2, 2), vec({1, 0})));
  try {
    solve_vp(slow, vec({0, 0}), 1e-13, 5);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    CHECK(e.last_gap() > 0.0);
  }
}

TEST_CASE("vp residual") {
  const auto neg = Problem::make(ConvexSet::whole(2), Operator::negation(2), Contraction::constant(vec({1, 1})));
  const std::vector<Vector> origin{vec({0, 0})};
  const auto r0 = vp_residual(vec({0, 0}), neg, origin, 0.0);
  CHECK(r0.max_value == 0.0);
  CHECK(r0.pass);

  const auto p = ball_problem();
  Rng rng = make_rng(21, "probes");
  const auto probes = sample_fixed_points(p, rng, 100);
  CHECK(probes.size() == 100);
  CHECK(vp_residual(vec({1, 0}), p, probes, 1e-8).pass);
  CHECK_FALSE(vp_residual(vec({0, 1}), p, probes, 1e-8).pass);

  // moving q* into Fix(T) by 1e-2 must be caught, since f(q*) != q*
  const std::vector<Vector> at_qstar{vec({1, 0})};
  CHECK(vp_residual(vec({0.99, 0}), p, at_qstar, 1e-8).max_value > 1e-3);

  const std::vector<Vector> not_fixed{vec({3, 0})};
  CHECK_THROWS_AS(vp_residual(vec({1, 0}), p, not_fixed, 1e-8), InputError);
}

TEST_CASE("gronwall checker") {
  const int n = 10000;
  std::vector<double> t(n), u(n), v(n, 1.0), w(n, 0.0), du(n);
  for (int i = 0; i < n; ++i) {
    t[i] = 5.0 * i / (n - 1);
    u[i] = std::exp(-2 * t[i]);
    du[i] = -2 * u[i];
  }
  const auto exact = gronwall_check(t, u, v, w, {1e-12, 1e-8}, du);
  CHECK(exact.inequality_ok);
  REQUIRE(exact.bound_ok.has_value());
  CHECK(*exact.bound_ok);
  CHECK(exact.max_bound_violation <= 1e-8);

  // finite differences: second-order error at the grid ends
  const auto fd = gronwall_check(t, u, v, w, {1e-5, 1e-8});
  CHECK(fd.inequality_ok);
  CHECK(fd.bound_ok.value());

  std::vector<double> zero(n, 0.0);
  const auto z = gronwall_check(t, zero, v, w, {1e-12, 1e-12});
  CHECK(z.inequality_ok);
  CHECK(z.bound_ok.value());

  std::vector<double> grow(n);
  for (int i = 0; i < n; ++i) grow[i] = std::exp(t[i]);
  const auto bad = gronwall_check(t, grow, v, w, {1e-6, 1e-8});
  CHECK_FALSE(bad.inequality_ok);
  CHECK_FALSE(bad.bound_ok.has_value());

  std::vector<double> negative = u;
  negative[3] = -1.0;
  CHECK_THROWS_AS(gronwall_check(t, negative, v, w, {1e-6, 1e-8}), InputError);
}

TEST_CASE("gronwall triple along a flow") {
  const auto p = ball_problem(ConvexSet::ball(vec({0, 0}), 5.0));
  const auto traj = integrate(p, ThetaSchedule::power(2, 1), vec({-3, 3}), horizon(1e3));
  const auto vp = solve_vp(p, vec({0, 0}));
  const auto tri = cds_gronwall_triple(traj, vp.q_star);
  const auto g = gronwall_check(tri.grid, tri.u, tri.v, tri.w, {1e-6, 1e-8}, tri.du);
  CHECK(g.inequality_ok);
  CHECK(g.bound_ok.value_or(false));
}

TEST_CASE("rate fits") {
  const auto p = rate_problem();
  const auto one = fit_rate(integrate(p, ThetaSchedule::power(2, 1), vec({3, 1}), horizon(1e4)), 1.0);
  CHECK(one.fitted_slope == doctest::Approx(-1.0).epsilon(0.1));
  CHECK(one.verdict == Verdict::pass);
  CHECK(one.sup_second_half <= one.sup_first_half);
  CHECK(one.kappa.value() == doctest::Approx(2.0));
  CHECK(one.window_lo == 5e3);

  const auto half = fit_rate(integrate(p, ThetaSchedule::power(1, 0.5), vec({3, 1}), horizon(1e4)), 0.5);
  CHECK(half.fitted_slope == doctest::Approx(-0.5).epsilon(0.2));
  CHECK(half.verdict == Verdict::pass);

  // rotation with f = 0 decays like e^{-t}: nothing above the floor to fit
  const auto rot = Problem::make(ConvexSet::whole(2), Operator::rotation(2, std::numbers::pi / 2), Contraction::constant(vec({0, 0})));
  CHECK(fit_rate(integrate(rot, ThetaSchedule::power(2, 1), vec({1, 0}), horizon(1e4)), 1.0).verdict == Verdict::floor);

  // stationary start: f(q*) = q* = T(q*)
  const auto fixed = Problem::make(ConvexSet::whole(2), Operator::projection(ConvexSet::ball(vec({2, 0}), 1.0)),
                                   Contraction::constant(vec({1, 0})));
  CHECK(fit_rate(integrate(fixed, ThetaSchedule::power(2, 1), vec({1, 0}), horizon(1e4)), 1.0).verdict == Verdict::floor);

  SolverConfig sparse = horizon(100);
  sparse.record_count = 20;
  CHECK_THROWS_AS(fit_rate(integrate(p, ThetaSchedule::power(2, 1), vec({3, 1}), sparse), 1.0), InputError);
}

TEST_CASE("boundedness") {
  const auto neg = Problem::make(ConvexSet::whole(2), Operator::negation(2), Contraction::constant(vec({0, 0})));
  const auto traj = integrate(neg, ThetaSchedule::power(2, 1), vec({1, 0}), horizon(1e3));
  const auto b = boundedness_verdict(traj, solve_vp(neg, vec({1, 0})), neg);
  CHECK(b.bound == 1.0);
  CHECK(b.sup_distance <= 1.0 + 1e-8);
  CHECK(b.pass);

  const Vector u = vec({30, -40});
  const auto far = Problem::make(ConvexSet::whole(2), Operator::projection(kUnit), Contraction::constant(u));
  const auto vp = solve_vp(far, vec({0, 0}));
  const auto t2 = integrate(far, ThetaSchedule::power(2, 1), vp.q_star, horizon(1e3));
  const auto b2 = boundedness_verdict(t2, vp, far);
  CHECK(b2.bound == doctest::Approx((u - vp.q_star).norm()));
  CHECK(b2.pass);

  const auto still = Problem::make(ConvexSet::whole(2), Operator::projection(kUnit), Contraction::constant(vec({0.5, 0})));
  const auto vp3 = solve_vp(still, vec({0, 0}));
  const auto b3 = boundedness_verdict(integrate(still, ThetaSchedule::power(2, 1), vp3.q_star, horizon(100)), vp3, still);
  CHECK(b3.bound == 0.0);
  CHECK(b3.pass);
}

TEST_CASE("stability") {
  const auto p = ball_problem(ConvexSet::ball(vec({0, 0}), 5.0));
  const auto s = ThetaSchedule::power(2, 1);
  const Vector x0 = vec({-3, 3});
  const auto x = integrate(p, s, x0, horizon(1e3));

  const auto none = stability_verdict(x, integrate(p, s, x0, horizon(1e3), Perturbation::zero(2)));
  CHECK(none.sup_gap_tail <= 1e-8);

  const auto l1 = stability_verdict(
      x, integrate(p, s, x0, horizon(1e3), Perturbation::power_decay(1.0, 2.0, vec({0, 1}), PerturbationClass::l1)));
  CHECK(l1.l1);
  CHECK(l1.verdict == Verdict::pass);
  CHECK(l1.median_last_decade <= l1.median_first_decade / 10);

  // h = theta u with theta = 2/(1+t): neither integrable nor o(theta)
  const auto same = stability_verdict(
      x, integrate(p, s, x0, horizon(1e3), Perturbation::power_decay(2.0, 1.0, vec({0, 1}), PerturbationClass::neither)));
  CHECK(same.verdict == Verdict::not_applicable);

  const auto other = integrate(ball_problem(ConvexSet::ball(vec({0, 0}), 6.0)), s, x0, horizon(1e3), Perturbation::zero(2));
  CHECK_THROWS_AS(stability_verdict(x, other), InputError);
}
