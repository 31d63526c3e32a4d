#include "vflow/operators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vflow/errors.hpp"

namespace vflow {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

ConvexSet kernel_of_shift(const Matrix& m) {
  // Fix of a linear map M is ker(M - I).
  const auto d = m.rows();
  Eigen::JacobiSVD<Matrix> svd(m - Matrix::Identity(d, d), Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  std::vector<Eigen::Index> null_cols;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv[k] <= 1e-10) null_cols.push_back(k);
  }
  Matrix basis(d, static_cast<Eigen::Index>(null_cols.size()));
  for (std::size_t c = 0; c < null_cols.size(); ++c) basis.col(static_cast<Eigen::Index>(c)) = svd.matrixV().col(null_cols[c]);
  if (basis.cols() == d) return ConvexSet::whole(static_cast<int>(d));
  return ConvexSet::affine(basis, Vector::Zero(d));
}

// Operators whose compositions satisfy Fix(T1 ... Tk) = intersection of the
// Fix(Ti) whenever that intersection is nonempty.
bool is_averaged(const Operator& op) {
  return std::visit(Overloaded{[](const Projection&) { return true; },
                               [](const Averaged& a) { return a.lambda < 1.0 || is_averaged(*a.inner); },
                               [](const Composition& c) {
                                 return std::all_of(c.parts->begin(), c.parts->end(),
                                                    [](const Operator& p) { return is_averaged(p); });
                               },
                               [](const auto&) { return false; }},
                    op.shape());
}

std::optional<ConvexSet> common_fixed_set(const std::vector<Operator>& parts) {
  std::vector<ConvexSet> sets;
  for (const auto& p : parts) {
    if (!p.fix_set()) return std::nullopt;
    sets.push_back(*p.fix_set());
  }
  for (const auto& candidate : sets) {
    if (std::all_of(sets.begin(), sets.end(), [&](const ConvexSet& s) { return known_subset(candidate, s); }))
      return candidate;
  }
  ConvexSet meet = ConvexSet::intersection(sets);
  const Vector probe = project(meet, Vector::Zero(meet.dim()));
  for (const auto& s : sets) {
    if (!contains(s, probe, 1e-8)) return std::nullopt;
  }
  return meet;
}

}  // namespace

Operator::Operator(int dim, OperatorShape shape) : dim_(dim), shape_(std::move(shape)) {
  fix_set_ = std::visit(
      Overloaded{
          [&](const Rotation& r) -> std::optional<ConvexSet> {
            const double c = std::cos(r.angle);
            const double s = std::sin(r.angle);
            if (c == 1.0 && s == 0.0) return ConvexSet::whole(dim_);
            Matrix basis(dim_, dim_ - 2);
            basis.setZero();
            int col = 0;
            for (int k = 0; k < dim_; ++k) {
              if (k != r.i && k != r.j) basis(k, col++) = 1.0;
            }
            return ConvexSet::affine(basis, Vector::Zero(dim_));
          },
          [&](const Negation&) -> std::optional<ConvexSet> { return ConvexSet::point(Vector::Zero(dim_)); },
          [&](const Projection& p) -> std::optional<ConvexSet> { return p.set; },
          [&](const Reflection& p) -> std::optional<ConvexSet> { return p.set; },
          [&](const Averaged& a) -> std::optional<ConvexSet> { return a.inner->fix_set(); },
          [&](const Composition& c) -> std::optional<ConvexSet> {
            if (c.parts->size() == 1) return c.parts->front().fix_set();
            if (auto m = linear_matrix()) return kernel_of_shift(*m);
            if (is_averaged(*this)) return common_fixed_set(*c.parts);
            return std::nullopt;
          }},
      shape_);
}

Operator Operator::rotation(int dim, double angle, int i, int j) {
  if (dim < 2) throw InputError("rotation: needs dim >= 2");
  if (i < 0 || j < 0 || i >= dim || j >= dim || i == j) throw InputError("rotation: invalid plane indices");
  if (!std::isfinite(angle)) throw InputError("rotation: angle must be finite");
  return Operator(dim, Rotation{angle, i, j});
}

Operator Operator::negation(int dim) {
  if (dim <= 0) throw InputError("negation: dim must be positive");
  return Operator(dim, Negation{});
}

Operator Operator::projection(ConvexSet set) {
  const int d = set.dim();
  return Operator(d, Projection{std::move(set)});
}

Operator Operator::reflection(ConvexSet set) {
  const int d = set.dim();
  return Operator(d, Reflection{std::move(set)});
}

Operator Operator::identity(int dim) { return projection(ConvexSet::whole(dim)); }

Operator Operator::averaged(double lambda, Operator inner) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw InputError("averaged: lambda must lie in (0, 1]");
  const int d = inner.dim();
  return Operator(d, Averaged{lambda, std::make_shared<const Operator>(std::move(inner))});
}

Operator Operator::composition(std::vector<Operator> parts) {
  if (parts.empty()) throw InputError("composition: no parts");
  const int d = parts.front().dim();
  for (const auto& p : parts) {
    if (p.dim() != d) throw InputError("composition: parts have different dimensions");
  }
  return Operator(d, Composition{std::make_shared<const std::vector<Operator>>(std::move(parts))});
}

std::string_view Operator::kind_name() const {
  return std::visit(Overloaded{[](const Rotation&) { return std::string_view("rotation"); },
                               [](const Negation&) { return std::string_view("negation"); },
                               [](const Projection&) { return std::string_view("projection"); },
                               [](const Reflection&) { return std::string_view("reflection"); },
                               [](const Averaged&) { return std::string_view("averaged"); },
                               [](const Composition&) { return std::string_view("composition"); }},
                    shape_);
}

std::optional<Matrix> Operator::linear_matrix() const {
  return std::visit(
      Overloaded{[&](const Rotation& r) -> std::optional<Matrix> {
                   Matrix m = Matrix::Identity(dim_, dim_);
                   const double c = std::cos(r.angle);
                   const double s = std::sin(r.angle);
                   m(r.i, r.i) = c;
                   m(r.i, r.j) = -s;
                   m(r.j, r.i) = s;
                   m(r.j, r.j) = c;
                   return m;
                 },
                 [&](const Negation&) -> std::optional<Matrix> { return -Matrix::Identity(dim_, dim_); },
                 [&](const Averaged& a) -> std::optional<Matrix> {
                   auto inner = a.inner->linear_matrix();
                   if (!inner) return std::nullopt;
                   return Matrix((1.0 - a.lambda) * Matrix::Identity(dim_, dim_) + a.lambda * *inner);
                 },
                 [&](const Composition& c) -> std::optional<Matrix> {
                   Matrix m = Matrix::Identity(dim_, dim_);
                   for (const auto& p : *c.parts) {
                     auto pm = p.linear_matrix();
                     if (!pm) return std::nullopt;
                     m = *pm * m;
                   }
                   return m;
                 },
                 [&](const Projection& p) -> std::optional<Matrix> {
                   if (p.set.is_whole_space()) return Matrix::Identity(dim_, dim_);
                   return std::nullopt;
                 },
                 [&](const Reflection&) -> std::optional<Matrix> { return std::nullopt; }},
      shape_);
}

Vector apply(const Operator& op, const Vector& x) {
  require_point(x, op.dim(), "operator argument");
  return std::visit(Overloaded{[&](const Rotation& r) -> Vector {
                                 Vector y = x;
                                 const double c = std::cos(r.angle);
                                 const double s = std::sin(r.angle);
                                 y[r.i] = c * x[r.i] - s * x[r.j];
                                 y[r.j] = s * x[r.i] + c * x[r.j];
                                 return y;
                               },
                               [&](const Negation&) -> Vector { return -x; },
                               [&](const Projection& p) -> Vector { return project(p.set, x); },
                               [&](const Reflection& p) -> Vector { return 2.0 * project(p.set, x) - x; },
                               [&](const Averaged& a) -> Vector {
                                 return (1.0 - a.lambda) * x + a.lambda * apply(*a.inner, x);
                               },
                               [&](const Composition& c) -> Vector {
                                 Vector y = x;
                                 for (const auto& p : *c.parts) y = apply(p, y);
                                 return y;
                               }},
                    op.shape());
}

Vector project_fix(const Operator& op, const Vector& x) {
  if (!op.fix_set()) throw UnsupportedError("project_fix: fixed-point set of this operator is not known");
  return project(*op.fix_set(), x);
}

Contraction Contraction::constant(Vector value) {
  const int d = static_cast<int>(value.size());
  if (d == 0) throw InputError("constant contraction: empty value");
  require_point(value, d, "constant contraction value");
  return Contraction(d, 0.0, ConstantMap{std::move(value)});
}

Contraction Contraction::affine(double alpha, Matrix linear, Vector offset) {
  const int d = static_cast<int>(offset.size());
  if (d == 0) throw InputError("affine contraction: empty offset");
  require_point(offset, d, "affine contraction offset");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InputError("affine contraction: alpha must lie in [0, 1)");
  if (linear.rows() != d || linear.cols() != d) throw InputError("affine contraction: linear part must be d x d");
  if (!linear.allFinite()) throw InputError("affine contraction: non-finite linear part");
  Eigen::JacobiSVD<Matrix> svd(linear);
  if (svd.singularValues()[0] > 1.0 + 1e-12)
    throw InputError("affine contraction: linear part must have operator norm <= 1");
  return Contraction(d, alpha, AffineMap{alpha, std::move(linear), std::move(offset)});
}

std::string_view Contraction::kind_name() const {
  return std::holds_alternative<ConstantMap>(shape_) ? "constant" : "affine";
}

Vector apply(const Contraction& f, const Vector& x) {
  require_point(x, f.dim(), "contraction argument");
  return std::visit(Overloaded{[&](const ConstantMap& c) -> Vector { return c.value; },
                               [&](const AffineMap& a) -> Vector {
                                 return a.alpha * (a.linear * x) + a.offset;
                               }},
                    f.shape());
}

Problem Problem::make(ConvexSet domain, Operator map, Contraction viscosity) {
  if (map.dim() != domain.dim() || viscosity.dim() != domain.dim())
    throw InputError("problem: C, T and f must share one dimension");
  return Problem{std::move(domain), std::move(map), std::move(viscosity)};
}

std::optional<ConvexSet> Problem::fixed_set() const {
  const auto& fix = map.fix_set();
  if (!fix) return std::nullopt;
  if (known_subset(*fix, domain)) return fix;
  ConvexSet meet = ConvexSet::intersection({*fix, domain});
  const Vector probe = project(meet, Vector::Zero(dim()));
  if (!contains(*fix, probe, 1e-8) || !contains(domain, probe, 1e-8))
    throw InputError("problem: Fix(T) does not meet C");
  return meet;
}

Sampler domain_sampler(ConvexSet set, double radius) {
  return [set = std::move(set), radius](Rng& rng) { return sample_point(set, rng, radius); };
}

LipschitzReport verify_nonexpansive(const Operator& op, const Sampler& sampler, Rng& rng, int pairs,
                                    double tol) {
  if (pairs < 1) throw InputError("verify_nonexpansive: pairs must be >= 1");
  LipschitzReport report;
  for (int k = 0; k < pairs; ++k) {
    const Vector x = sampler(rng);
    const Vector y = sampler(rng);
    const double dxy = (x - y).norm();
    if (dxy < 1e-12) continue;
    report.max_ratio = std::max(report.max_ratio, (apply(op, x) - apply(op, y)).norm() / dxy);
    ++report.pairs_used;
  }
  report.pass = report.max_ratio <= 1.0 + tol;
  return report;
}

LipschitzReport verify_contraction(const Contraction& f, const Sampler& sampler, Rng& rng, int pairs,
                                   double tol) {
  if (pairs < 1) throw InputError("verify_contraction: pairs must be >= 1");
  LipschitzReport report;
  for (int k = 0; k < pairs; ++k) {
    const Vector x = sampler(rng);
    const Vector y = sampler(rng);
    const double dxy = (x - y).norm();
    if (dxy < 1e-12) continue;
    report.max_ratio = std::max(report.max_ratio, (apply(f, x) - apply(f, y)).norm() / dxy);
    ++report.pairs_used;
  }
  report.pass = report.max_ratio <= f.alpha() + tol;
  return report;
}

ProblemCertificate certify_problem(const Problem& problem, Rng& rng, int samples, double radius) {
  ProblemCertificate cert;
  for (int k = 0; k < samples; ++k) {
    const Vector x = sample_point(problem.domain, rng, radius);
    const double dt = distance(problem.domain, apply(problem.map, x));
    const double df = distance(problem.domain, apply(problem.viscosity, x));
    cert.worst_excursion = std::max({cert.worst_excursion, dt, df});
    cert.map_confined = cert.map_confined && dt <= kMembershipTol;
    cert.viscosity_confined = cert.viscosity_confined && df <= kMembershipTol;
  }
  return cert;
}

}  // namespace vflow
