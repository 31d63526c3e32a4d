#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "support.hpp"
#include "vflow/errors.hpp"
#include "vflow/random.hpp"
#include "vflow/space.hpp"

using namespace vflow;
using vflow::testing::dist;
using vflow::testing::vec;

namespace {

std::vector<ConvexSet> zoo_sets(int d) {
  Vector c = Vector::Zero(d);
  c[0] = 1.0;
  Matrix basis = Matrix::Zero(d, 2);
  basis(0, 0) = 1.0;
  basis(1, 0) = 1.0;
  basis(d - 1, 1) = 2.0;
  Vector lo = Vector::Constant(d, -1.0);
  Vector hi = Vector::Constant(d, 2.0);
  hi[0] = std::numeric_limits<double>::infinity();
  return {ConvexSet::ball(c, 2.0),
          ConvexSet::halfspace(Vector::Ones(d), 1.0),
          ConvexSet::affine(basis, c),
          ConvexSet::box(lo, hi),
          ConvexSet::whole(d),
          ConvexSet::point(c),
          ConvexSet::intersection({ConvexSet::ball(Vector::Zero(d), 2.0), ConvexSet::halfspace(Vector::Ones(d), 1.0)})};
}

}  // namespace

TEST_CASE("inner products") {
  CHECK(inner(vec({1, 0}), vec({0, 1})) == 0.0);
  CHECK(inner(vec({1, 2}), vec({3, 4})) == 11.0);
  CHECK_THROWS_AS(inner(vec({1, 2}), vec({1, 2, 3})), InputError);

  Rng rng = make_rng(7, "inner");
  std::normal_distribution<double> g;
  for (int k = 0; k < 100; ++k) {
    Vector x(5);
    for (int i = 0; i < 5; ++i) x[i] = g(rng);
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) sum += x[i] * x[i];
    CHECK(inner(x, x) == doctest::Approx(sum).epsilon(1e-15));
    CHECK(norm(x) == doctest::Approx(std::sqrt(sum)).epsilon(1e-15));
  }
}

TEST_CASE("points must be finite") {
  CHECK_THROWS_AS(require_point(vec({1, std::nan("")}), 2, "x"), InputError);
  CHECK_THROWS_AS(require_point(vec({1, 2}), 3, "x"), InputError);
  CHECK_NOTHROW(require_point(vec({1, 2}), 2, "x"));
}

TEST_CASE("set constructors validate") {
  CHECK_THROWS_AS(ConvexSet::ball(vec({0, 0}), 0.0), InputError);
  CHECK_THROWS_AS(ConvexSet::halfspace(vec({0, 0}), 1.0), InputError);
  CHECK_THROWS_AS(ConvexSet::box(vec({0, 1}), vec({1, 0})), InputError);
  Matrix dependent(2, 2);
  dependent << 1, 2, 1, 2;
  CHECK_THROWS_AS(ConvexSet::affine(dependent, vec({0, 0})), InputError);
}

TEST_CASE("closed-form projections") {
  const auto h = ConvexSet::halfspace(vec({1, 0}), 0.0);
  CHECK(dist(project(h, vec({2, 3})), vec({0, 3})) < 1e-15);

  const auto unit = ConvexSet::ball(vec({0, 0}), 1.0);
  CHECK(dist(project(unit, vec({3, 4})), vec({0.6, 0.8})) < 1e-15);

  const Vector inside = vec({0.1, -0.2});
  CHECK(project(unit, inside) == inside);
  CHECK(project(h, vec({-1, 5})) == vec({-1, 5}));

  Matrix line(2, 1);
  line << 1, 1;
  const auto diag = ConvexSet::affine(line, vec({0, 0}));
  CHECK(dist(project(diag, vec({2, 0})), vec({1, 1})) < 1e-15);

  const auto box = ConvexSet::box(vec({0, 0}), vec({1, 1}));
  CHECK(project(box, vec({2, -3})) == vec({1, 0}));

  CHECK(project(ConvexSet::point(vec({4, 5})), vec({0, 0})) == vec({4, 5}));
  CHECK(project(ConvexSet::whole(2), vec({7, 8})) == vec({7, 8}));
}

TEST_CASE("intersection projection matches the closed-form corner") {
  // unit ball cut by x_0 <= 0.5: from (2, 0) the nearest point is (0.5, 0)
  const auto cut = ConvexSet::intersection({ConvexSet::ball(vec({0, 0}), 1.0), ConvexSet::halfspace(vec({1, 0}), 0.5)});
  CHECK(dist(project(cut, vec({2, 0})), vec({0.5, 0})) < 1e-9);
  // from (2, 2) the answer is the kink (0.5, sqrt(0.75))
  CHECK(dist(project(cut, vec({2, 2})), vec({0.5, std::sqrt(0.75)})) < 1e-8);
}

TEST_CASE("characterization check") {
  const auto h = ConvexSet::halfspace(vec({1, 0}), 0.0);
  const std::vector<Vector> probes{vec({0, 0}), vec({0, 5}), vec({-1, 3})};
  const auto r = check_projection_characterization(h, vec({2, 3}), probes, 1e-12);
  CHECK(r.pass);
  // <(0,3)-(2,3), (0,3)-y> = -2 (0 - y_0) = 2 y_0 -> max at y = (0, .) is 0
  CHECK(r.max_violation == 0.0);

  const auto on = check_projection_characterization(h, vec({-1, 1}), probes, 0.0);
  CHECK(on.max_violation == 0.0);

  const auto unit = ConvexSet::ball(vec({0, 0}), 1.0);
  Rng rng = make_rng(1, "char");
  std::vector<Vector> ball_probes;
  for (int i = 0; i < 50; ++i) ball_probes.push_back(sample_point(unit, rng));
  CHECK(check_projection_characterization(unit, vec({3, 4}), ball_probes, 1e-12).pass);

  const std::vector<Vector> outside{vec({5, 5})};
  CHECK_THROWS_AS(check_projection_characterization(unit, vec({3, 4}), outside, 1e-12), InputError);
}

TEST_CASE("sampled points lie in their set") {
  for (int d : {2, 3, 5}) {
    for (const auto& set : zoo_sets(d)) {
      Rng rng = make_rng(11, set.kind_name());
      for (int k = 0; k < 200; ++k) {
        const Vector z = sample_point(set, rng);
        INFO(set.kind_name());
        CHECK(contains(set, z));
      }
    }
  }
}

TEST_CASE("projection properties on random inputs") {
  for (int d : {2, 4}) {
    for (const auto& set : zoo_sets(d)) {
      INFO(set.kind_name(), " d=", d);
      Rng rng = make_rng(3, set.kind_name());
      // intersections are projected iteratively; allow the stop tolerance
      const bool iterative = set.kind_name() == "intersection";
      const double eps = iterative ? 1e-8 : 1e-12;
      double worst_ne = 0.0, worst_idem = 0.0, worst_opt = 0.0, worst_char = -1.0;
      for (int k = 0; k < 300; ++k) {
        const Vector x = sample_ball(rng, Vector::Zero(d), 20.0);
        const Vector y = sample_ball(rng, Vector::Zero(d), 20.0);
        const Vector px = project(set, x);
        const Vector py = project(set, y);
        CHECK(contains(set, px, 1e-9));
        worst_ne = std::max(worst_ne, (px - py).norm() - (x - y).norm());
        worst_idem = std::max(worst_idem, (project(set, px) - px).norm());
        const Vector z = sample_point(set, rng);
        worst_opt = std::max(worst_opt, (x - px).norm() - (x - z).norm());
        const std::vector<Vector> probes{z, py};
        const double scale = 1.0 + x.squaredNorm();
        worst_char = std::max(worst_char, check_projection_characterization(set, x, probes, eps * scale).max_violation / scale);
      }
      CHECK(worst_ne <= eps);
      CHECK(worst_idem <= eps);
      CHECK(worst_opt <= eps);
      CHECK(worst_char <= eps);
    }
  }
}

TEST_CASE("known subsets") {
  const auto unit = ConvexSet::ball(vec({0, 0}), 1.0);
  CHECK(known_subset(unit, ConvexSet::whole(2)));
  CHECK(known_subset(unit, ConvexSet::ball(vec({0.5, 0}), 2.0)));
  CHECK_FALSE(known_subset(ConvexSet::ball(vec({0, 0}), 3.0), unit));
  CHECK(known_subset(unit, ConvexSet::halfspace(vec({1, 0}), 1.0)));
  CHECK_FALSE(known_subset(unit, ConvexSet::halfspace(vec({1, 0}), 0.5)));
  CHECK(known_subset(ConvexSet::point(vec({0.2, 0.2})), unit));
}
