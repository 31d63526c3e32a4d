#pragma once

// Catalog of nonexpansive maps T with exactly known fixed-point sets, strict
// contractions f, and the problem triple (C, T, f) the flows act on.

#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "vflow/space.hpp"

namespace vflow {

class Operator;

/// Givens rotation by `angle` in the coordinate plane (i, j).
struct Rotation {
  double angle;
  int i;
  int j;
};
struct Negation {};
struct Projection {
  ConvexSet set;
};
/// 2 P_K - I
struct Reflection {
  ConvexSet set;
};
/// (1 - lambda) I + lambda T
struct Averaged {
  double lambda;
  std::shared_ptr<const Operator> inner;
};
/// parts[0] is applied first.
struct Composition {
  std::shared_ptr<const std::vector<Operator>> parts;
};

using OperatorShape = std::variant<Rotation, Negation, Projection, Reflection, Averaged, Composition>;

/// A nonexpansive map on R^d. `fix_set()` is set only when Fix(T) is known
/// exactly; it is never approximated.
class Operator {
 public:
  static Operator rotation(int dim, double angle, int i = 0, int j = 1);
  static Operator negation(int dim);
  static Operator projection(ConvexSet set);
  static Operator reflection(ConvexSet set);
  /// Projection onto the whole space.
  static Operator identity(int dim);
  /// lambda in (0, 1].
  static Operator averaged(double lambda, Operator inner);
  static Operator composition(std::vector<Operator> parts);

  int dim() const { return dim_; }
  const OperatorShape& shape() const { return shape_; }
  const std::optional<ConvexSet>& fix_set() const { return fix_set_; }
  std::string_view kind_name() const;

  /// Matrix of the map when it is linear (rotations, negation and their
  /// averages/compositions).
  std::optional<Matrix> linear_matrix() const;

 private:
  Operator(int dim, OperatorShape shape);

  int dim_;
  OperatorShape shape_;
  std::optional<ConvexSet> fix_set_;
};

Vector apply(const Operator& op, const Vector& x);

/// P_Fix(T)(x). Throws UnsupportedError when Fix(T) is not known.
Vector project_fix(const Operator& op, const Vector& x);

struct ConstantMap {
  Vector value;
};
/// x -> alpha * L x + b with ||L|| <= 1.
struct AffineMap {
  double alpha;
  Matrix linear;
  Vector offset;
};

using ContractionShape = std::variant<ConstantMap, AffineMap>;

/// A strict contraction with coefficient alpha in [0, 1).
class Contraction {
 public:
  static Contraction constant(Vector value);
  static Contraction affine(double alpha, Matrix linear, Vector offset);

  int dim() const { return dim_; }
  double alpha() const { return alpha_; }
  const ContractionShape& shape() const { return shape_; }
  std::string_view kind_name() const;

 private:
  Contraction(int dim, double alpha, ContractionShape shape)
      : dim_(dim), alpha_(alpha), shape_(std::move(shape)) {}

  int dim_;
  double alpha_;
  ContractionShape shape_;
};

Vector apply(const Contraction& f, const Vector& x);

/// The triple (C, T, f) with T, f : C -> C.
struct Problem {
  ConvexSet domain;
  Operator map;
  Contraction viscosity;

  /// Checks dimensions agree.
  static Problem make(ConvexSet domain, Operator map, Contraction viscosity);

  int dim() const { return domain.dim(); }
  double gamma() const { return 1.0 - viscosity.alpha(); }

  /// Fix(T) restricted to C, when Fix(T) is known. Throws InputError when the
  /// restriction is detectably empty.
  std::optional<ConvexSet> fixed_set() const;
};

using Sampler = std::function<Vector(Rng&)>;

/// Uniform on the set intersected with a ball of `radius` (rejection, seeded
/// through the passed generator).
Sampler domain_sampler(ConvexSet set, double radius = 10.0);

struct LipschitzReport {
  double max_ratio = 0.0;
  int pairs_used = 0;
  bool pass = true;
};

/// Largest ||T x - T y|| / ||x - y|| over sampled pairs; pass iff <= 1 + tol.
LipschitzReport verify_nonexpansive(const Operator& op, const Sampler& sampler, Rng& rng, int pairs,
                                    double tol);

/// Same for f; pass iff the ratio is <= alpha + tol.
LipschitzReport verify_contraction(const Contraction& f, const Sampler& sampler, Rng& rng, int pairs,
                                   double tol);

struct ProblemCertificate {
  bool map_confined = true;        // T(C) in C on every sample
  bool viscosity_confined = true;  // f(C) in C on every sample
  double worst_excursion = 0.0;    // largest distance of an image from C
};

/// Samples points of C and checks the standing assumption T, f : C -> C.
ProblemCertificate certify_problem(const Problem& problem, Rng& rng, int samples = 100,
                                   double radius = 10.0);

}  // namespace vflow
