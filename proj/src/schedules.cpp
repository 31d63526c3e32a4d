#include "vflow/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "vflow/errors.hpp"

namespace vflow {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

// Numeric-evidence thresholds for schedules without an analytic verdict.
constexpr double kVanishing = 1e-2;
constexpr double kTailShare = 1e-2;

std::size_t segment_of(const TableSchedule& tab, double t) {
  auto it = std::upper_bound(tab.times.begin(), tab.times.end(), t);
  auto k = static_cast<std::size_t>(std::distance(tab.times.begin(), it));
  return k == 0 ? 0 : k - 1;
}

double spline_value(const TableSchedule& tab, double t) {
  if (t >= tab.times.back()) return tab.values.back();
  const auto k = segment_of(tab, t);
  const double s = t - tab.times[k];
  return tab.values[k] + s * (tab.b[k] + s * (tab.c[k] + s * tab.d[k]));
}

double spline_slope(const TableSchedule& tab, double t) {
  if (t >= tab.times.back()) return 0.0;
  const auto k = segment_of(tab, t);
  const double s = t - tab.times[k];
  return tab.b[k] + s * (2.0 * tab.c[k] + 3.0 * s * tab.d[k]);
}

void fit_natural_spline(TableSchedule& tab) {
  const std::size_t n = tab.times.size();
  std::vector<double> h(n - 1), alpha(n, 0.0), l(n, 1.0), mu(n, 0.0), z(n, 0.0), c(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) h[i] = tab.times[i + 1] - tab.times[i];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    alpha[i] = 3.0 / h[i] * (tab.values[i + 1] - tab.values[i]) - 3.0 / h[i - 1] * (tab.values[i] - tab.values[i - 1]);
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    l[i] = 2.0 * (tab.times[i + 1] - tab.times[i - 1]) - h[i - 1] * mu[i - 1];
    mu[i] = h[i] / l[i];
    z[i] = (alpha[i] - h[i - 1] * z[i - 1]) / l[i];
  }
  tab.b.assign(n - 1, 0.0);
  tab.c.assign(n - 1, 0.0);
  tab.d.assign(n - 1, 0.0);
  for (std::size_t j = n - 1; j-- > 0;) {
    c[j] = z[j] - mu[j] * c[j + 1];
    tab.b[j] = (tab.values[j + 1] - tab.values[j]) / h[j] - h[j] * (c[j + 1] + 2.0 * c[j]) / 3.0;
    tab.d[j] = (c[j + 1] - c[j]) / (3.0 * h[j]);
    tab.c[j] = c[j];
  }
}

double raw_value(const ThetaSchedule& s, double t) {
  return std::visit(Overloaded{[&](const PowerSchedule& p) { return p.K / std::pow(1.0 + t, p.nu); },
                               [&](const ConstantSchedule& c) { return c.c; },
                               [&](const TableSchedule& tab) { return spline_value(tab, t); }},
                    s.shape());
}

double raw_slope(const ThetaSchedule& s, double t) {
  return std::visit(
      Overloaded{[&](const PowerSchedule& p) { return -p.K * p.nu * std::pow(1.0 + t, -p.nu - 1.0); },
                 [&](const ConstantSchedule&) { return 0.0; },
                 [&](const TableSchedule& tab) { return spline_slope(tab, t); }},
      s.shape());
}

// Integral of the unclamped power law over [a, b].
double power_integral(const PowerSchedule& p, double a, double b) {
  if (p.nu == 1.0) return p.K * (std::log1p(b) - std::log1p(a));
  const double e = 1.0 - p.nu;
  return p.K * (std::pow(1.0 + b, e) - std::pow(1.0 + a, e)) / e;
}

double quadrature(const std::function<double(double)>& g, double a, double b) {
  if (b <= a) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, a, b, 15, 1e-10, &err);
}

void require_time(double t, const char* what) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InputError(std::string(what) + ": t must be finite and >= 0");
}

ConditionFlag analytic(std::string name, bool holds, std::string note = {}) {
  ConditionFlag f;
  f.name = std::move(name);
  f.holds = holds;
  f.method = Evidence::analytic;
  f.note = std::move(note);
  return f;
}

ConditionFlag numeric(std::string name, bool holds, double estimate, double horizon) {
  ConditionFlag f;
  f.name = std::move(name);
  f.holds = holds;
  f.method = Evidence::numeric;
  f.estimate = estimate;
  f.horizon = horizon;
  return f;
}

}  // namespace

ThetaSchedule ThetaSchedule::power(double K, double nu, bool clamp) {
  if (!(K > 0.0) || !std::isfinite(K)) throw InputError("power schedule: K must be > 0");
  if (!(nu > 0.0 && nu <= 1.0)) throw InputError("power schedule: nu must lie in (0, 1]");
  return ThetaSchedule(PowerSchedule{K, nu}, clamp);
}

ThetaSchedule ThetaSchedule::constant(double c) {
  if (!(c > 0.0 && c <= 1.0)) throw InputError("constant schedule: c must lie in (0, 1]");
  return ThetaSchedule(ConstantSchedule{c}, true);
}

ThetaSchedule ThetaSchedule::table(std::vector<double> times, std::vector<double> values, bool clamp) {
  if (times.size() < 2 || times.size() != values.size())
    throw InputError("table schedule: need at least two knots with matching values");
  if (times.front() != 0.0) throw InputError("table schedule: first knot must be at t = 0");
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    if (!(times[i + 1] > times[i])) throw InputError("table schedule: knot times must increase strictly");
  }
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError("table schedule: values must be finite and > 0");
  }
  TableSchedule tab{std::move(times), std::move(values), {}, {}, {}};
  fit_natural_spline(tab);
  for (std::size_t k = 0; k + 1 < tab.times.size(); ++k) {
    for (int j = 0; j <= 64; ++j) {
      const double t = tab.times[k] + (tab.times[k + 1] - tab.times[k]) * j / 64.0;
      if (!(spline_value(tab, t) > 0.0)) throw InputError("table schedule: spline dips to <= 0 between knots");
    }
  }
  return ThetaSchedule(std::move(tab), clamp);
}

std::string_view ThetaSchedule::kind_name() const {
  return std::visit(Overloaded{[](const PowerSchedule&) { return std::string_view("power"); },
                               [](const ConstantSchedule&) { return std::string_view("constant"); },
                               [](const TableSchedule&) { return std::string_view("table"); }},
                    shape_);
}

std::optional<double> ThetaSchedule::clamp_end() const {
  if (!clamp_) return std::nullopt;
  if (const auto* p = std::get_if<PowerSchedule>(&shape_)) {
    if (p->K > 1.0) return std::pow(p->K, 1.0 / p->nu) - 1.0;
  }
  return std::nullopt;
}

double theta(const ThetaSchedule& s, double t) {
  require_time(t, "theta");
  const double v = raw_value(s, t);
  return s.clamp() ? std::min(v, 1.0) : v;
}

Slope theta_prime(const ThetaSchedule& s, double t) {
  require_time(t, "theta_prime");
  if (const auto tc = s.clamp_end()) {
    if (std::abs(t - *tc) <= 1e-12 * (1.0 + *tc)) return {raw_slope(s, t), true};
    if (t < *tc) return {0.0, false};
  }
  if (s.clamp() && std::holds_alternative<TableSchedule>(s.shape())) {
    const double v = raw_value(s, t);
    if (v > 1.0) return {0.0, false};
    if (v == 1.0) return {raw_slope(s, t), true};
  }
  return {raw_slope(s, t), false};
}

double big_theta(const ThetaSchedule& s, double t) {
  require_time(t, "big_theta");
  return std::visit(Overloaded{[&](const PowerSchedule& p) {
                                 if (const auto tc = s.clamp_end()) {
                                   if (t <= *tc) return t;
                                   return *tc + power_integral(p, *tc, t);
                                 }
                                 return power_integral(p, 0.0, t);
                               },
                               [&](const ConstantSchedule& c) { return c.c * t; },
                               [&](const TableSchedule& tab) {
                                 auto g = [&](double u) { return theta(s, u); };
                                 double total = 0.0;
                                 for (std::size_t k = 0; k + 1 < tab.times.size(); ++k) {
                                   const double a = tab.times[k];
                                   const double b = std::min(tab.times[k + 1], t);
                                   if (b <= a) break;
                                   total += quadrature(g, a, b);
                                 }
                                 if (t > tab.times.back()) total += theta(s, tab.times.back()) * (t - tab.times.back());
                                 return total;
                               }},
                    s.shape());
}

double theta_n(const ThetaSchedule& s, long n, double shift) {
  const double t = static_cast<double>(n) + shift;
  if (t < 0.0) {
    // the power law is defined for 1 + t > 0; allow negative shifts there
    const auto* p = std::get_if<PowerSchedule>(&s.shape());
    if (p == nullptr || t <= -1.0) throw InputError("theta_n: n + shift out of range");
    const double v = p->K / std::pow(1.0 + t, p->nu);
    return s.clamp() ? std::min(v, 1.0) : v;
  }
  return theta(s, t);
}

const ConditionFlag& ConditionReport::flag(std::string_view name) const {
  for (const auto& f : flags) {
    if (f.name == name) return f;
  }
  throw InputError("condition report: no flag named " + std::string(name));
}

ConditionReport check_continuous_conditions(const ThetaSchedule& s, double horizon) {
  if (!(horizon > 0.0)) throw InputError("check_continuous_conditions: horizon must be > 0");
  ConditionReport report;
  if (const auto* p = std::get_if<PowerSchedule>(&s.shape())) {
    report.flags.push_back(analytic("C'1", p->nu > 0.0, "K/(1+t)^nu -> 0 for nu > 0"));
    report.flags.push_back(analytic("C'2", p->nu <= 1.0, "integral of (1+t)^-nu diverges for nu <= 1"));
    report.flags.push_back(analytic("C'5", true, "|theta'| integrable and theta'/theta = -nu/(1+t) -> 0"));
    return report;
  }
  if (std::holds_alternative<ConstantSchedule>(s.shape())) {
    report.flags.push_back(analytic("C'1", false, "constant schedule does not vanish"));
    report.flags.push_back(analytic("C'2", true, "c * t diverges"));
    report.flags.push_back(analytic("C'5", true, "theta' = 0"));
    return report;
  }

  const double h = horizon;
  bool tail_monotone = true;
  double prev = theta(s, h / 2.0);
  for (int k = 1; k <= 64; ++k) {
    const double v = theta(s, h / 2.0 + h / 2.0 * k / 64.0);
    tail_monotone = tail_monotone && v <= prev;
    prev = v;
  }
  const double th = theta(s, h);
  report.flags.push_back(numeric("C'1", tail_monotone && th <= kVanishing, th, h));

  const double first = big_theta(s, h / 2.0);
  const double tail = big_theta(s, h) - first;
  report.flags.push_back(numeric("C'2", tail >= kTailShare * first, big_theta(s, h), h));

  const double ratio = std::abs(theta_prime(s, h).value) / th;
  report.flags.push_back(numeric("C'5", ratio <= kVanishing, ratio, h));
  return report;
}

ConditionReport check_discrete_conditions(const ThetaSchedule& s, long N, double shift) {
  if (N < 10) throw InputError("check_discrete_conditions: N must be >= 10");
  std::vector<double> th(static_cast<std::size_t>(N) + 1);
  for (long n = 1; n <= N; ++n) th[static_cast<std::size_t>(n)] = theta_n(s, n, shift);
  for (long n = 1; n <= N; ++n) {
    const double v = th[static_cast<std::size_t>(n)];
    if (!(v > 0.0 && v <= 1.0)) throw InputError("check_discrete_conditions: theta_n must lie in (0, 1]");
  }

  // Last-window estimates of the limits in C3, C4, C5 (taken at n = N - 1).
  const double a = th[static_cast<std::size_t>(N - 1)];
  const double b = th[static_cast<std::size_t>(N)];
  const double diff = std::abs(b - a);
  const double est_c3 = diff / (a * a);
  const double est_c4 = diff / (a * b);
  const double est_c5 = diff / a;

  const auto half = static_cast<std::size_t>(N / 2);
  double s0_first = 0.0, s0_tail = 0.0, s2_first = 0.0, s2_tail = 0.0, variation = 0.0;
  for (std::size_t n = 1; n <= static_cast<std::size_t>(N); ++n) {
    const double v = th[n];
    ((n <= half) ? s0_first : s0_tail) += (1.0 - v) * v;
    ((n <= half) ? s2_first : s2_tail) += v;
    if (n + 1 <= static_cast<std::size_t>(N)) variation += std::abs(th[n + 1] - v);
  }
  const double horizon = static_cast<double>(N);

  ConditionReport report;
  auto with_estimate = [&](ConditionFlag f, double est) {
    f.estimate = est;
    f.horizon = horizon;
    return f;
  };

  if (const auto* p = std::get_if<PowerSchedule>(&s.shape())) {
    const bool strict = p->nu < 1.0;
    const std::string limit = strict ? "ratio ~ (nu/K) n^(nu-1) -> 0" : "ratio -> 1/K, nonzero for nu = 1";
    report.flags.push_back(with_estimate(analytic("C0", true, "(1-theta_n) theta_n ~ theta_n, not summable"), s0_first + s0_tail));
    report.flags.push_back(with_estimate(analytic("C1", true), b));
    report.flags.push_back(with_estimate(analytic("C2", true, "sum of K/(1+n)^nu diverges for nu <= 1"), s2_first + s2_tail));
    report.flags.push_back(with_estimate(analytic("C3", strict, limit), est_c3));
    report.flags.push_back(with_estimate(analytic("C4", strict, limit), est_c4));
    report.flags.push_back(with_estimate(analytic("C5", true, "|dtheta|/theta ~ nu/n -> 0, variation summable"), est_c5));
    return report;
  }
  if (const auto* c = std::get_if<ConstantSchedule>(&s.shape())) {
    report.flags.push_back(with_estimate(analytic("C0", c->c < 1.0, "(1-c) c summed diverges iff c < 1"), s0_first + s0_tail));
    report.flags.push_back(with_estimate(analytic("C1", false, "constant schedule does not vanish"), b));
    report.flags.push_back(with_estimate(analytic("C2", true), s2_first + s2_tail));
    report.flags.push_back(with_estimate(analytic("C3", true, "increments vanish"), est_c3));
    report.flags.push_back(with_estimate(analytic("C4", true, "increments vanish"), est_c4));
    report.flags.push_back(with_estimate(analytic("C5", true, "increments vanish"), est_c5));
    return report;
  }

  report.flags.push_back(numeric("C0", s0_tail >= kTailShare * s0_first, s0_first + s0_tail, horizon));
  report.flags.push_back(numeric("C1", b <= kVanishing, b, horizon));
  report.flags.push_back(numeric("C2", s2_tail >= kTailShare * s2_first, s2_first + s2_tail, horizon));
  report.flags.push_back(numeric("C3", est_c3 <= kVanishing, est_c3, horizon));
  report.flags.push_back(numeric("C4", est_c4 <= kVanishing, est_c4, horizon));
  auto c5 = numeric("C5", est_c5 <= kVanishing, est_c5, horizon);
  c5.note = "total variation over the horizon: " + std::to_string(variation);
  report.flags.push_back(std::move(c5));
  return report;
}

}  // namespace vflow
