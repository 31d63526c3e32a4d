#include "vflow/space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vflow/errors.hpp"

namespace vflow {

namespace {

constexpr int kMaxRejections = 20000;
constexpr int kMaxDykstraSweeps = 200000;

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void require_same_dim(const ConvexSet& set, const Vector& x) {
  require_point(x, set.dim(), "point");
}

Vector project_intersection(const std::vector<ConvexSet>& parts, const Vector& x) {
  bool inside = true;
  for (const auto& p : parts) inside = inside && contains(p, x, 0.0);
  if (inside) return x;

  // Dykstra's cyclic projections: the plain alternating scheme finds some
  // point of the intersection, the correction terms make it the nearest one.
  Vector y = x;
  std::vector<Vector> corrections(parts.size(), Vector::Zero(x.size()));
  for (int sweep = 0; sweep < kMaxDykstraSweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Vector z = y + corrections[i];
      const Vector next = project(parts[i], z);
      const Vector corr = z - next;
      change += (next - y).squaredNorm() + (corr - corrections[i]).squaredNorm();
      corrections[i] = corr;
      y = next;
    }
    if (std::sqrt(change) <= kIntersectionStop * (1.0 + y.norm())) break;
  }
  return y;
}

Vector nearest_to_origin(const ConvexSet& set) { return project(set, Vector::Zero(set.dim())); }

}  // namespace

double inner(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) {
    throw InputError("inner: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()) + ")");
  }
  return x.dot(y);
}

double norm(const Vector& x) { return std::sqrt(x.dot(x)); }

void require_point(const Vector& x, int dim, std::string_view what) {
  if (x.size() != dim) {
    throw InputError(std::string(what) + ": expected dimension " + std::to_string(dim) + ", got " +
                     std::to_string(x.size()));
  }
  if (!x.allFinite()) throw InputError(std::string(what) + ": non-finite coordinate");
}

ConvexSet ConvexSet::ball(Vector center, double radius) {
  if (center.size() == 0) throw InputError("ball: empty center");
  require_point(center, static_cast<int>(center.size()), "ball center");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InputError("ball: radius must be > 0");
  const int d = static_cast<int>(center.size());
  return ConvexSet(d, Ball{std::move(center), radius});
}

ConvexSet ConvexSet::halfspace(Vector normal, double offset) {
  if (normal.size() == 0) throw InputError("halfspace: empty normal");
  require_point(normal, static_cast<int>(normal.size()), "halfspace normal");
  if (normal.norm() == 0.0) throw InputError("halfspace: normal must be nonzero");
  if (!std::isfinite(offset)) throw InputError("halfspace: offset must be finite");
  const int d = static_cast<int>(normal.size());
  return ConvexSet(d, Halfspace{std::move(normal), offset});
}

ConvexSet ConvexSet::affine(Matrix basis, Vector anchor) {
  const int d = static_cast<int>(anchor.size());
  if (d == 0) throw InputError("affine: empty anchor");
  require_point(anchor, d, "affine anchor");
  if (basis.cols() > 0 && basis.rows() != d) throw InputError("affine: basis rows must equal dim");
  if (basis.cols() > d) throw InputError("affine: more basis vectors than dimensions");
  if (!basis.allFinite()) throw InputError("affine: non-finite basis");
  Matrix q(d, basis.cols());
  if (basis.cols() > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(basis);
    qr.setThreshold(1e-10);
    if (qr.rank() != basis.cols()) throw InputError("affine: basis vectors are linearly dependent");
    q = qr.householderQ() * Matrix::Identity(d, basis.cols());
  } else {
    basis.resize(d, 0);
  }
  return ConvexSet(d, AffineSubspace{std::move(basis), std::move(anchor), std::move(q)});
}

ConvexSet ConvexSet::point(Vector p) {
  const auto d = p.size();
  return affine(Matrix(d, 0), std::move(p));
}

ConvexSet ConvexSet::box(Vector lo, Vector hi) {
  if (lo.size() == 0 || lo.size() != hi.size()) throw InputError("box: bounds must have equal nonzero size");
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (std::isnan(lo[i]) || std::isnan(hi[i])) throw InputError("box: NaN bound");
    if (lo[i] > hi[i]) throw InputError("box: lo must be <= hi componentwise");
    if (lo[i] == std::numeric_limits<double>::infinity() || hi[i] == -std::numeric_limits<double>::infinity())
      throw InputError("box: empty side");
  }
  const int d = static_cast<int>(lo.size());
  return ConvexSet(d, Box{std::move(lo), std::move(hi)});
}

ConvexSet ConvexSet::whole(int dim) {
  if (dim <= 0) throw InputError("whole_space: dim must be positive");
  return ConvexSet(dim, WholeSpace{});
}

ConvexSet ConvexSet::intersection(std::vector<ConvexSet> parts) {
  if (parts.empty()) throw InputError("intersection: no parts");
  const int d = parts.front().dim();
  for (const auto& p : parts) {
    if (p.dim() != d) throw InputError("intersection: parts have different dimensions");
  }
  if (parts.size() == 1) return parts.front();
  return ConvexSet(d, Intersection{std::make_shared<const std::vector<ConvexSet>>(std::move(parts))});
}

std::string_view ConvexSet::kind_name() const {
  return std::visit(Overloaded{[](const Ball&) { return std::string_view("ball"); },
                               [](const Halfspace&) { return std::string_view("halfspace"); },
                               [](const AffineSubspace&) { return std::string_view("affine"); },
                               [](const Box&) { return std::string_view("box"); },
                               [](const WholeSpace&) { return std::string_view("whole"); },
                               [](const Intersection&) { return std::string_view("intersection"); }},
                    shape_);
}

bool ConvexSet::is_singleton() const {
  if (const auto* a = std::get_if<AffineSubspace>(&shape_)) return a->basis.cols() == 0;
  if (const auto* b = std::get_if<Box>(&shape_)) return (b->lo.array() == b->hi.array()).all();
  return false;
}

Vector project(const ConvexSet& set, const Vector& x) {
  require_same_dim(set, x);
  return std::visit(
      Overloaded{
          [&](const Ball& b) -> Vector {
            const Vector diff = x - b.center;
            const double n = diff.norm();
            if (n <= b.radius) return x;
            return b.center + (b.radius / n) * diff;
          },
          [&](const Halfspace& h) -> Vector {
            const double excess = h.normal.dot(x) - h.offset;
            if (excess <= 0.0) return x;
            return x - (excess / h.normal.squaredNorm()) * h.normal;
          },
          [&](const AffineSubspace& a) -> Vector {
            if (a.orthonormal.cols() == 0) return a.anchor;
            return a.anchor + a.orthonormal * (a.orthonormal.transpose() * (x - a.anchor));
          },
          [&](const Box& b) -> Vector { return x.cwiseMax(b.lo).cwiseMin(b.hi); },
          [&](const WholeSpace&) -> Vector { return x; },
          [&](const Intersection& in) -> Vector { return project_intersection(*in.parts, x); }},
      set.shape());
}

double distance(const ConvexSet& set, const Vector& x) {
  require_same_dim(set, x);
  return std::visit(
      Overloaded{[&](const Ball& b) { return std::max(0.0, (x - b.center).norm() - b.radius); },
                 [&](const Halfspace& h) {
                   return std::max(0.0, (h.normal.dot(x) - h.offset) / h.normal.norm());
                 },
                 [&](const Intersection& in) {
                   double worst = 0.0;
                   for (const auto& p : *in.parts) worst = std::max(worst, distance(p, x));
                   // exact for a single violated part, a lower bound otherwise
                   if (worst == 0.0) return 0.0;
                   return std::max(worst, (x - project(set, x)).norm());
                 },
                 [&](const auto&) { return (x - project(set, x)).norm(); }},
      set.shape());
}

bool contains(const ConvexSet& set, const Vector& x, double tol) {
  if (const auto* in = std::get_if<Intersection>(&set.shape())) {
    for (const auto& p : *in->parts) {
      if (!contains(p, x, tol)) return false;
    }
    return true;
  }
  return distance(set, x) <= tol;
}

bool known_subset(const ConvexSet& inner_set, const ConvexSet& outer_set) {
  if (inner_set.dim() != outer_set.dim()) return false;
  if (outer_set.is_whole_space()) return true;
  if (inner_set.is_singleton()) return contains(outer_set, project(inner_set, Vector::Zero(inner_set.dim())));
  if (const auto* in = std::get_if<Intersection>(&outer_set.shape())) {
    for (const auto& p : *in->parts) {
      if (!known_subset(inner_set, p)) return false;
    }
    return true;
  }
  if (const auto* b = std::get_if<Ball>(&inner_set.shape())) {
    if (const auto* ob = std::get_if<Ball>(&outer_set.shape()))
      return (b->center - ob->center).norm() + b->radius <= ob->radius;
    if (const auto* oh = std::get_if<Halfspace>(&outer_set.shape()))
      return oh->normal.dot(b->center) + b->radius * oh->normal.norm() <= oh->offset;
    if (const auto* obox = std::get_if<Box>(&outer_set.shape()))
      return ((b->center.array() - b->radius) >= obox->lo.array()).all() &&
             ((b->center.array() + b->radius) <= obox->hi.array()).all();
    return false;
  }
  if (const auto* bx = std::get_if<Box>(&inner_set.shape())) {
    if (!bx->lo.allFinite() || !bx->hi.allFinite() || bx->lo.size() > 16) return false;
    const int d = static_cast<int>(bx->lo.size());
    Vector corner(d);
    for (unsigned long mask = 0; mask < (1UL << d); ++mask) {
      for (int i = 0; i < d; ++i) corner[i] = (mask >> i) & 1UL ? bx->hi[i] : bx->lo[i];
      if (!contains(outer_set, corner, 0.0)) return false;
    }
    return true;
  }
  return false;
}

Vector sample_point(const ConvexSet& set, Rng& rng, double radius) {
  const Vector hint = nearest_to_origin(set);
  auto within = [&](const Vector& z) { return (z - hint).norm() <= radius; };
  return std::visit(
      Overloaded{
          [&](const Ball& b) -> Vector {
            Vector z = sample_ball(rng, b.center, b.radius);
            for (int i = 0; i < kMaxRejections && !within(z); ++i) z = sample_ball(rng, b.center, b.radius);
            return z;
          },
          [&](const AffineSubspace& a) -> Vector {
            const auto k = a.orthonormal.cols();
            if (k == 0) return a.anchor;
            const Vector coeff = sample_ball(rng, Vector::Zero(k), radius);
            return hint + a.orthonormal * coeff;
          },
          [&](const Box& b) -> Vector {
            const Vector lo = b.lo.array().max(hint.array() - radius).matrix();
            const Vector hi = b.hi.array().min(hint.array() + radius).matrix();
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            Vector z(set.dim());
            for (int tries = 0; tries < kMaxRejections; ++tries) {
              for (int i = 0; i < set.dim(); ++i) z[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
              if (within(z)) break;
            }
            return z;
          },
          [&](const Intersection& in) -> Vector {
            for (int tries = 0; tries < kMaxRejections; ++tries) {
              Vector z = sample_ball(rng, hint, radius);
              if (contains(set, z, 0.0)) return z;
            }
            return project(set, sample_point(in.parts->front(), rng, radius));
          },
          [&](const auto&) -> Vector {
            // whole space, halfspace: rejection from the ball around the hint
            Vector z = sample_ball(rng, hint, radius);
            for (int i = 0; i < kMaxRejections && !contains(set, z, 0.0); ++i) z = sample_ball(rng, hint, radius);
            return z;
          }},
      set.shape());
}

ProjectionCheck check_projection_characterization(const ConvexSet& set, const Vector& x,
                                                  std::span<const Vector> probes, double tol) {
  const Vector p = project(set, x);
  ProjectionCheck report;
  report.max_violation = probes.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
  for (const auto& y : probes) {
    require_same_dim(set, y);
    if (!contains(set, y)) throw InputError("check_projection_characterization: probe outside the set");
    report.max_violation = std::max(report.max_violation, inner(p - x, p - y));
  }
  report.pass = report.max_violation <= tol;
  return report;
}

}  // namespace vflow
