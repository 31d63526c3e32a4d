#pragma once

// Finite-dimensional Hilbert-space primitives: points in R^d, closed convex
// sets with exact metric projections, and the variational check that
// characterizes a projection.

#include <memory>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "vflow/random.hpp"

namespace vflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Points closer than this to a set count as members.
inline constexpr double kMembershipTol = 1e-9;
/// Fixed-point stop for the intersection projection (Dykstra sweeps).
inline constexpr double kIntersectionStop = 1e-10;

double inner(const Vector& x, const Vector& y);
double norm(const Vector& x);

/// Throws InputError unless `x` has dimension `dim` and finite coordinates.
void require_point(const Vector& x, int dim, std::string_view what);

class ConvexSet;

struct Ball {
  Vector center;
  double radius;
};

/// {x : <normal, x> <= offset}
struct Halfspace {
  Vector normal;
  double offset;
};

/// anchor + span(basis columns). An empty basis is the single point `anchor`.
struct AffineSubspace {
  Matrix basis;
  Vector anchor;
  Matrix orthonormal;  // orthonormal columns spanning `basis`
};

/// Componentwise [lo, hi]; infinite bounds are allowed.
struct Box {
  Vector lo;
  Vector hi;
};

struct WholeSpace {};

struct Intersection {
  std::shared_ptr<const std::vector<ConvexSet>> parts;
};

using SetShape = std::variant<Ball, Halfspace, AffineSubspace, Box, WholeSpace, Intersection>;

/// A nonempty closed convex subset of R^d with an exact (or, for
/// intersections, iterative) projection rule. Immutable once built.
class ConvexSet {
 public:
  static ConvexSet ball(Vector center, double radius);
  static ConvexSet halfspace(Vector normal, double offset);
  /// Columns of `basis` must be linearly independent.
  static ConvexSet affine(Matrix basis, Vector anchor);
  static ConvexSet point(Vector p);
  static ConvexSet box(Vector lo, Vector hi);
  static ConvexSet whole(int dim);
  /// Nonemptiness of the intersection is the caller's responsibility.
  static ConvexSet intersection(std::vector<ConvexSet> parts);

  int dim() const { return dim_; }
  const SetShape& shape() const { return shape_; }
  std::string_view kind_name() const;

  bool is_whole_space() const { return std::holds_alternative<WholeSpace>(shape_); }
  /// True when the set is a single point.
  bool is_singleton() const;

 private:
  ConvexSet(int dim, SetShape shape) : dim_(dim), shape_(std::move(shape)) {}

  int dim_;
  SetShape shape_;
};

/// Metric projection P_K(x).
Vector project(const ConvexSet& set, const Vector& x);

/// Euclidean distance from x to the set.
double distance(const ConvexSet& set, const Vector& x);

bool contains(const ConvexSet& set, const Vector& x, double tol = kMembershipTol);

/// Seeded sample of a point of `set`, drawn uniformly from the set intersected
/// with a ball of `radius` around the point of the set nearest the origin.
/// Lower-dimensional sets are sampled through their parametrization.
Vector sample_point(const ConvexSet& set, Rng& rng, double radius = 10.0);

/// Conservative containment test for simple shape pairs; false when unknown.
bool known_subset(const ConvexSet& inner_set, const ConvexSet& outer_set);

struct ProjectionCheck {
  double max_violation = 0.0;
  bool pass = true;
};

/// max over probes y of <P_K(x) - x, P_K(x) - y>; pass iff it is <= tol.
ProjectionCheck check_projection_characterization(const ConvexSet& set, const Vector& x,
                                                  std::span<const Vector> probes, double tol);

}  // namespace vflow
