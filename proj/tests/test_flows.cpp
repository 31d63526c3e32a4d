#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "vflow/discrete.hpp"
#include "vflow/errors.hpp"
#include "vflow/flows.hpp"

using namespace vflow;
using vflow::testing::dist;
using vflow::testing::vec;

namespace {

Problem ball_problem() {
  return Problem::make(ConvexSet::ball(vec({0, 0}), 5.0), Operator::projection(ConvexSet::ball(vec({0, 0}), 1.0)),
                       Contraction::affine(0.5, Matrix::Identity(2, 2), vec({2, 0})));
}

SolverConfig fixed(Method m, double h, double t_end) {
  SolverConfig cfg;
  cfg.method = m;
  cfg.step = h;
  cfg.t_end = t_end;
  cfg.record_stride = t_end;
  return cfg;
}

}  // namespace

TEST_CASE("right-hand sides") {
  const Vector u = vec({1, 2});
  const Vector x = vec({-3, 0.5});
  const auto id = Problem::make(ConvexSet::whole(2), Operator::identity(2), Contraction::constant(u));
  CHECK(dist(rhs_cds(id, ThetaSchedule::constant(0.5), 3.0, x), 0.5 * (u - x)) < 1e-15);

  const auto neg = Problem::make(ConvexSet::whole(2), Operator::negation(2), Contraction::constant(vec({0, 0})));
  // -(2 - theta) x; theta -> 0 gives -2x
  CHECK(dist(rhs_cds(neg, ThetaSchedule::constant(0.25), 0.0, x), -1.75 * x) < 1e-15);
  CHECK(rhs_cds(neg, ThetaSchedule::constant(0.5), 0.0, vec({0, 0})).norm() == 0.0);
  CHECK_THROWS_AS(rhs_cds(neg, ThetaSchedule::constant(0.5), 0.0, vec({1, 2, 3})), InputError);

  const auto p = ball_problem();
  const auto s = ThetaSchedule::power(2, 1);
  const Vector inside = vec({0.5, -2});
  CHECK(rhs_pcds(p, s, Perturbation::zero(2), 4.0, inside) == rhs_cds(p, s, 4.0, inside));

  // a large push leaves C; the projected field still lands in C
  const auto big = Perturbation::power_decay(100.0, 2.0, vec({0, 1}), PerturbationClass::l1);
  const Vector v = rhs_pcds(p, s, big, 0.0, inside);
  CHECK(distance(p.domain, inside + v) <= 1e-12);
  CHECK(dist(inside + v, project(p.domain, apply(p.map, inside) * 0.0 + theta(s, 0.0) * apply(p.viscosity, inside) +
                                                (1 - theta(s, 0.0)) * apply(p.map, inside) + big.at(0.0))) < 1e-15);
}

TEST_CASE("record grid") {
  SolverConfig cfg;
  cfg.t_end = 1e4;
  const auto g = record_grid(cfg);
  CHECK(g.size() == 512);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1e4);
  for (std::size_t k = 1; k < g.size(); ++k) CHECK(g[k] > g[k - 1]);
  cfg.record_stride = 2.5;
  cfg.t_end = 10;
  CHECK(record_grid(cfg) == std::vector<double>{0, 2.5, 5, 7.5, 10});
}

TEST_CASE("solver config validation") {
  SolverConfig cfg;
  cfg.t_end = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = SolverConfig{};
  cfg.abs_tol = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = SolverConfig{};
  cfg.method = Method::euler;
  cfg.step = -1;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("closed-form scalar flow") {
  // T = I, f = u: x' = theta (u - x), x(t) = u + (x0 - u) e^{-Theta(t)} = u + (x0 - u) / (1 + t)
  const Vector u = vec({1, -1});
  const Vector x0 = vec({4, 3});
  const auto p = Problem::make(ConvexSet::whole(2), Operator::identity(2), Contraction::constant(u));
  const auto s = ThetaSchedule::power(1, 1);
  SolverConfig cfg;
  cfg.t_end = 100;
  const auto traj = integrate(p, s, x0, cfg);
  double worst = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Vector exact = u + (x0 - u) * std::exp(-big_theta(s, traj.times[k]));
    worst = std::max(worst, dist(traj.states[k], exact));
  }
  CHECK(worst < 1e-7);
  CHECK(dist(traj.states.back(), u) < 1e-2 * dist(x0, u));
  CHECK(traj.accepted_steps > 0);
  CHECK(traj.times.size() == traj.states.size());
  CHECK(traj.residuals.size() == traj.states.size());
  CHECK(traj.derivative_norms.size() == traj.states.size());
}

TEST_CASE("negation flow goes to the origin") {
  const auto p = Problem::make(ConvexSet::whole(2), Operator::negation(2), Contraction::constant(vec({0, 0})));
  const auto traj = integrate(p, ThetaSchedule::power(2, 1), vec({1, 0}), SolverConfig{});
  CHECK(traj.states.back().norm() < 1e-8);
  for (const auto& x : traj.states) CHECK(x.norm() <= 1.0 + 1e-8);
}

TEST_CASE("equilibrium stays put") {
  const auto unit = ConvexSet::ball(vec({0, 0}), 1.0);
  const Vector q = vec({0.3, 0.1});
  const auto p = Problem::make(ConvexSet::whole(2), Operator::projection(unit), Contraction::constant(q));
  SolverConfig cfg;
  const auto traj = integrate(p, ThetaSchedule::power(2, 1), q, cfg);
  double sup = 0.0;
  for (const auto& x : traj.states) sup = std::max(sup, dist(x, q));
  CHECK(sup <= cfg.tolerance());
  for (double r : traj.residuals) CHECK(r <= cfg.tolerance());
}

TEST_CASE("start must lie in C") {
  CHECK_THROWS_AS(integrate(ball_problem(), ThetaSchedule::power(2, 1), vec({6, 0}), SolverConfig{}), InputError);
  // the boundary is accepted
  CHECK_NOTHROW(integrate(ball_problem(), ThetaSchedule::power(2, 1), vec({5, 0}), SolverConfig{}));
}

TEST_CASE("projected solves stay in C") {
  const auto p = ball_problem();
  for (const Vector& x0 : {vec({5, 0}), vec({0, -5}), vec({-3, 4})}) {
    const auto traj = integrate(p, ThetaSchedule::power(2, 1), x0, SolverConfig{});
    for (const auto& x : traj.states) CHECK(distance(p.domain, x) <= 1e-8);
    const auto pert = integrate(p, ThetaSchedule::power(2, 1), x0, SolverConfig{},
                                Perturbation::power_decay(3.0, 2.0, vec({0, 1}), PerturbationClass::l1));
    for (const auto& x : pert.states) CHECK(distance(p.domain, x) <= 1e-8);
  }
}

TEST_CASE("zero perturbation agrees with the plain flow") {
  const auto p = ball_problem();
  const auto s = ThetaSchedule::power(2, 1);
  const auto a = integrate(p, s, vec({-3, 2}), SolverConfig{});
  const auto b = integrate(p, s, vec({-3, 2}), SolverConfig{}, Perturbation::zero(2));
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(dist(a.states[k], b.states[k]) <= 1e-12);
}

TEST_CASE("fixed-step convergence orders") {
  const auto p = Problem::make(ConvexSet::whole(2), Operator::rotation(2, 0.5),
                               Contraction::affine(0.5, Matrix::Identity(2, 2), vec({1, 0})));
  const auto s = ThetaSchedule::power(1, 1);
  const Vector x0 = vec({2, 1});
  SolverConfig ref;
  ref.abs_tol = ref.rel_tol = 1e-13;
  ref.t_end = 2.0;
  const Vector exact = integrate(p, s, x0, ref).states.back();

  const auto err = [&](Method m, double h) { return dist(integrate(p, s, x0, fixed(m, h, 2.0)).states.back(), exact); };
  const double e1 = err(Method::euler, 0.02), e2 = err(Method::euler, 0.01);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.1));
  const double r1 = err(Method::rk4, 0.2), r2 = err(Method::rk4, 0.1);
  CHECK(r1 / r2 == doctest::Approx(16.0).epsilon(0.15));
}

TEST_CASE("solver failure reports the partial trajectory") {
  SolverConfig cfg;
  cfg.abs_tol = cfg.rel_tol = 1e-30;
  cfg.max_steps = 200;
  cfg.t_end = 10;
  try {
    integrate(ball_problem(), ThetaSchedule::power(2, 1), vec({3, 3}), cfg);
    FAIL("expected a solver failure");
  } catch (const SolverFailure& e) {
    CHECK(e.partial().size() >= 1);
    CHECK(e.partial().times.front() == 0.0);
  }
}

TEST_CASE("perturbation classes") {
  const auto s = ThetaSchedule::power(2, 1);
  const auto l1 = classify(Perturbation::power_decay(1, 2, vec({1, 0}), PerturbationClass::l1), s);
  CHECK(l1.l1);
  CHECK(l1.o_of_theta);
  CHECK(l1.claim_consistent);
  const auto edge = classify(Perturbation::power_decay(1, 1, vec({1, 0}), PerturbationClass::neither), s);
  CHECK_FALSE(edge.l1);
  CHECK_FALSE(edge.o_of_theta);
  CHECK(edge.claim_consistent);
  const auto slow = classify(Perturbation::power_decay(1, 0.8, vec({0, 1}), PerturbationClass::o_of_theta),
                             ThetaSchedule::power(1, 0.5));
  CHECK_FALSE(slow.l1);
  CHECK(slow.o_of_theta);
  CHECK_FALSE(classify(Perturbation::power_decay(1, 0.8, vec({0, 1}), PerturbationClass::l1), s).claim_consistent);
  CHECK(Perturbation::power_decay(2, 2, vec({3, 4}), PerturbationClass::l1).at(1.0) ==
        vec({0.5 * 0.6, 0.5 * 0.8}));
}

TEST_CASE("euler bridge") {
  const auto neg = Problem::make(ConvexSet::whole(2), Operator::negation(2), Contraction::constant(vec({0, 0})));
  CHECK(euler_dds_equivalence(neg, ThetaSchedule::power(1, 1), vec({1, 0}), 1).max_gap == 0.0);
  CHECK(euler_dds_equivalence(neg, ThetaSchedule::power(1, 1), vec({1, 0}), 100).max_gap <= 1e-13);
  CHECK(euler_dds_equivalence(ball_problem(), ThetaSchedule::constant(0.3), vec({-2, 2}), 50).max_gap <= 1e-13);
  const auto r = euler_dds_equivalence(ball_problem(), ThetaSchedule::power(2, 1), vec({-2, 2}), 1000);
  CHECK(r.max_gap <= 1e-13);
  CHECK(r.steps == 1000);
}
