#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>

#include "blp/branching_measure.hpp"
#include "blp/numeric.hpp"

namespace blp {

/// Characteristic triplet (sigma^2, a, Lambda) of a branching Levy process.
struct BranchingTriplet {
  double sigma2 = 0.0;
  double a = 0.0;
  BranchingMeasure measure;

  void validate() const {
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw Error("triplet: sigma2 must be >= 0");
    if (!std::isfinite(a)) throw Error("triplet: drift must be finite");
  }
};

namespace detail {
inline double small_jump(double x) { return std::abs(x) < 1.0 ? x : 0.0; }
}  // namespace detail

/// Cumulant kappa(theta) = sigma^2 theta^2/2 - a theta
///   + sum_i w_i (sum_j e^{-theta x_j} - 1 + theta x_1 1{|x_1|<1}).
/// Returns nullopt when the atom sum overflows (outside the finiteness domain).
inline std::optional<double> try_kappa(const BranchingTriplet& t, double theta) {
  double s = 0.5 * t.sigma2 * theta * theta - t.a * theta;
  t.measure.for_each_atom([&](const AtomView& at) {
    const double e = at.sum([theta](double x) { return std::exp(-theta * x); });
    s += at.weight() * (e - 1.0 + theta * detail::small_jump(at.first()));
  });
  if (!std::isfinite(s)) return std::nullopt;
  return s;
}

inline double kappa(const BranchingTriplet& t, double theta) {
  if (!(theta > 0.0)) throw Error("kappa: theta must be positive");
  auto k = try_kappa(t, theta);
  if (!k) throw Error("kappa: divergent at theta = " + std::to_string(theta));
  return *k;
}

/// kappa at a complex argument, evaluated straight from the defining sum.
inline std::complex<double> kappa_complex(const BranchingTriplet& t, std::complex<double> z) {
  std::complex<double> s = 0.5 * t.sigma2 * z * z - t.a * z;
  t.measure.for_each_atom([&](const AtomView& at) {
    std::complex<double> e = 0.0;
    for (std::size_t j = 0; j < at.size(); ++j) e += std::exp(-z * at.at(j));
    s += at.weight() * (e - 1.0 + z * detail::small_jump(at.first()));
  });
  return s;
}

struct KappaDerivatives {
  double first;
  double second;
};

inline KappaDerivatives kappa_derivatives(const BranchingTriplet& t, double theta) {
  if (!(theta > 0.0)) throw Error("kappa_derivatives: theta must be positive");
  double d1 = t.sigma2 * theta - t.a;
  double d2 = t.sigma2;
  t.measure.for_each_atom([&](const AtomView& at) {
    d1 += at.weight() * (-at.sum([theta](double x) { return x * std::exp(-theta * x); }) +
                         detail::small_jump(at.first()));
    d2 += at.weight() * at.sum([theta](double x) { return x * x * std::exp(-theta * x); });
  });
  if (!std::isfinite(d1) || !std::isfinite(d2)) throw Error("kappa_derivatives: divergent");
  return {d1, d2};
}

struct BoundaryReport {
  bool yes = false;
  double kappa1 = 0.0;
  double dkappa1 = 0.0;
  double d2kappa1 = 0.0;
  /// sigma^2/2 - int (sum (1+x_j) e^{-x_j} - 1) dLambda
  double residual_sigma = 0.0;
  /// a - sigma^2/2 - int (sum e^{-x_j} - 1 + x_1 1{|x_1|<1}) dLambda
  double residual_drift = 0.0;
};

inline BoundaryReport is_boundary_case(const BranchingTriplet& t, double tol = 1e-8) {
  BoundaryReport r;
  r.kappa1 = kappa(t, 1.0);
  const auto d = kappa_derivatives(t, 1.0);
  r.dkappa1 = d.first;
  r.d2kappa1 = d.second;
  double i_sigma = 0.0, i_drift = 0.0;
  t.measure.for_each_atom([&](const AtomView& at) {
    i_sigma += at.weight() * (at.sum([](double x) { return (1.0 + x) * std::exp(-x); }) - 1.0);
    i_drift += at.weight() * (at.Y() - 1.0 + detail::small_jump(at.first()));
  });
  r.residual_sigma = 0.5 * t.sigma2 - i_sigma;
  r.residual_drift = t.a - 0.5 * t.sigma2 - i_drift;
  r.yes = std::abs(r.kappa1) <= tol && std::abs(r.dkappa1) <= tol && r.d2kappa1 > 0.0 &&
          std::isfinite(r.d2kappa1);
  return r;
}

/// Solves theta kappa'(theta) = kappa(theta) on the increasing function
/// g(theta) = theta kappa'(theta) - kappa(theta) (g' = theta kappa'' >= 0):
/// geometric bracket expansion, then bisection to 1e-12 width.
inline double solve_theta_star(const BranchingTriplet& t) {
  auto g = [&](double th) -> std::optional<double> {
    auto k = try_kappa(t, th);
    if (!k) return std::nullopt;
    double d1;
    try {
      d1 = kappa_derivatives(t, th).first;
    } catch (const Error&) {
      return std::nullopt;
    }
    const double v = th * d1 - *k;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  };
  constexpr double kLow = 1e-9;
  constexpr double kHighLimit = 1e8;
  auto glo = g(kLow);
  if (!glo) throw Error("no critical parameter: kappa not finite near 0");
  if (*glo >= 0.0) throw Error("no critical parameter: theta kappa' - kappa is non-negative at 0+");
  double lo = kLow;
  double hi = 1.0;
  for (;;) {
    auto ghi = g(hi);
    if (!ghi) throw Error("no critical parameter within the admissible domain");
    if (*ghi >= 0.0) break;
    lo = hi;
    hi *= 2.0;
    if (hi > kHighLimit) throw Error("no critical parameter: no sign change of theta kappa' - kappa");
  }
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (*g(mid) < 0.0) lo = mid; else hi = mid;
  }
  double th = 0.5 * (lo + hi);
  // Newton polish; g' = theta kappa''.
  for (int i = 0; i < 3; ++i) {
    const double gv = *g(th);
    const double gp = th * kappa_derivatives(t, th).second;
    if (!(gp > 0.0)) break;
    const double next = th - gv / gp;
    if (!(next > lo - 1e-9) || !(next < hi + 1e-9)) break;
    th = next;
  }
  return th;
}

/// Triplet of X' = theta* X + t kappa(theta*), which is in the boundary case.
/// The drift absorbs the change of small-jump indicator from |x_1| < 1 to
/// |theta* x_1| < 1 atom by atom.
inline BranchingTriplet to_boundary_case(const BranchingTriplet& t) {
  const double th = solve_theta_star(t);
  const double kth = kappa(t, th);
  const double d2 = kappa_derivatives(t, th).second;
  if (!(d2 > 0.0) || !std::isfinite(d2)) throw Error("to_boundary_case: kappa''(theta*) not in (0, inf)");
  double correction = 0.0;
  t.measure.for_each_atom([&](const AtomView& at) {
    const double x1 = at.first();
    const double in_old = std::abs(x1) < 1.0 ? 1.0 : 0.0;
    const double in_new = std::abs(th * x1) < 1.0 ? 1.0 : 0.0;
    correction += at.weight() * th * x1 * (in_old - in_new);
  });
  BranchingTriplet out;
  out.sigma2 = th * th * t.sigma2;
  out.a = t.a * th + kth - correction;
  out.measure = t.measure.scale_pushforward(th);
  return out;
}

// ---------------------------------------------------------------------------
// Reference triplets.

namespace presets {

/// Binary branching Brownian motion at rate 1, unit variance, no drift.
inline BranchingTriplet bbm() {
  return {1.0, 0.0, BranchingMeasure({{1.0, PointSequence::canonicalize({0.0, 0.0})}})};
}

/// Boundary-case branching Brownian motion: kappa(theta) = (theta - 1)^2 / 2.
inline BranchingTriplet boundary_bbm() {
  return {1.0, 1.0, BranchingMeasure({{0.5, PointSequence::canonicalize({0.0, 0.0})}})};
}

/// sigma^2 = 0, each particle drifts at speed e and gives birth at rate 1 to
/// one child displaced by -1. Boundary case; the spine is e t - N_t with N
/// a Poisson process of rate e.
inline BranchingTriplet compound_poisson_walk() {
  return {0.0, std::exp(1.0), BranchingMeasure({{1.0, PointSequence::canonicalize({0.0, -1.0})}})};
}

/// Zero-cluster offspring with weights c / (n^2 (ln n)^q), n >= 3, made
/// boundary by sigma^2 = a = 2 sum_n p_n (n - 1) over the simulated members.
inline BranchingTriplet heavy_offspring(double log_power, double c = 0.5, std::size_t cutoff = 10000,
                                        std::size_t sum_cutoff = 100000) {
  ClusterFamily f;
  f.c = c;
  f.log_power = log_power;
  f.cutoff = cutoff;
  f.sum_cutoff = std::max(sum_cutoff, cutoff);
  BranchingMeasure m({}, f);
  double growth = 0.0;
  m.for_each_atom([&](const AtomView& at) {
    growth += at.weight() * (static_cast<double>(at.size()) - 1.0);
  });
  return {2.0 * growth, 2.0 * growth, std::move(m)};
}

}  // namespace presets

}  // namespace blp
