#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <regex>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "blp/numeric.hpp"
#include "blp/renewal.hpp"
#include "blp/replicas.hpp"
#include "blp/spine_levy.hpp"

namespace blp {

struct PerpetualConfig {
  double quad_upper = 1e6;       // quadrature window [0, quad_upper], split by decades
  double quad_tol = 1e-13;
  std::size_t tail_fit_points = 41;
  // Monte Carlo diagnostic.
  std::size_t paths = 1000;
  double first_horizon = 1.0;
  double last_horizon = 64.0;
  double dt = 0.01;
  std::uint64_t seed = 17;
  // Per-path zero-one classification: a path's integral counts as growing
  // when its increment over the last window is at least this fraction of
  // its increment over the reference window [ref_T, 2 ref_T].
  double reference_horizon = 8.0;
  double growing_fraction = 0.3;
  // Mean-increment criteria.
  double shrink_factor = 2.0;      // finite case: prev/next >= 2 at every doubling
  double no_shrink_ratio = 1.1;    // infinite case: prev/next <= 1.1 at every doubling
  double one_sided = 0.95;
};

struct TailIncrement {
  double T = 0.0;
  double mean = 0.0;  // mean of int_T^{2T} f(xi_s) ds under P^up_x
  double se = 0.0;
};

struct PerpetualVerdict {
  enum class Kind { finite, infinite, inconclusive };
  ExtendedValue criterion_value;
  double tail_exponent = 0.0;
  double tail_contribution = 0.0;
  std::vector<TailIncrement> mc_diagnostic;
  Kind classification = Kind::inconclusive;
  bool mc_trend_agrees = false;
  double fraction_growing = 0.0;
  bool zero_one_one_sided = false;
  bool exact_sampler = false;
  double ess = 0.0;
};

inline const char* to_string(PerpetualVerdict::Kind k) {
  switch (k) {
    case PerpetualVerdict::Kind::finite: return "finite";
    case PerpetualVerdict::Kind::infinite: return "infinite";
    default: return "inconclusive";
  }
}

/// Named test functions: "zero", "exp" (e^{-y}) and "(1+y)^-p".
struct PerpetualFunction {
  std::string name;
  std::function<double(double)> f;
};

inline PerpetualFunction parse_perpetual_function(const std::string& spec) {
  if (spec == "zero") return {spec, [](double) { return 0.0; }};
  if (spec == "exp") return {spec, [](double y) { return std::exp(-std::max(y, 0.0)); }};
  static const std::regex power(R"(\s*\(\s*1\s*\+\s*y\s*\)\s*\^\s*-\s*([0-9]*\.?[0-9]+)\s*)");
  std::smatch m;
  if (std::regex_match(spec, m, power)) {
    const double p = std::stod(m[1].str());
    return {spec, [p](double y) { return std::pow(1.0 + std::max(y, 0.0), -p); }};
  }
  throw Error("unknown test function '" + spec + "' (expected zero, exp or (1+y)^-p)");
}

namespace detail {

/// int_0^upper y f(y) dy by Gauss-Kronrod on [0, 1] and decade intervals.
inline double decade_quadrature(const std::function<double(double)>& f, double upper, double tol) {
  using boost::math::quadrature::gauss_kronrod;
  auto g = [&](double y) { return y * f(y); };
  double s = gauss_kronrod<double, 61>::integrate(g, 0.0, std::min(1.0, upper), 15, tol);
  for (double lo = 1.0; lo < upper; lo *= 10.0) {
    const double hi = std::min(lo * 10.0, upper);
    s += gauss_kronrod<double, 61>::integrate(g, lo, hi, 15, tol);
  }
  return s;
}

}  // namespace detail

/// Criterion integral int_0^inf y f(y) dy: quadrature on the window plus a
/// power-law tail C y^{-p} fitted to log f on the window's last decade.
/// Exponent -p >= -2 means divergence.
inline void perpetual_criterion(const std::function<double(double)>& f, const PerpetualConfig& cfg,
                                PerpetualVerdict& v) {
  const double Y = cfg.quad_upper;
  const std::size_t k = cfg.tail_fit_points;
  std::vector<double> lx, ly;
  bool vanishes = true;
  for (std::size_t i = 0; i < k; ++i) {
    const double y = Y / 10.0 * std::pow(10.0, static_cast<double>(i) / static_cast<double>(k - 1));
    const double fy = f(y);
    if (fy < 0.0 || !std::isfinite(fy)) throw Error("perpetual: f must be non-negative and finite");
    if (fy > 0.0) vanishes = false;
    lx.push_back(std::log(y));
    ly.push_back(fy > 0.0 ? std::log(fy) : -kInf);
  }
  for (int i = 0; i <= 200; ++i) {
    const double y = Y * static_cast<double>(i) / 200.0;
    if (f(y) < 0.0) throw Error("perpetual: f negative at y = " + std::to_string(y));
  }
  const double body = detail::decade_quadrature(f, Y, cfg.quad_tol);
  if (vanishes) {
    v.tail_exponent = -kInf;
    v.tail_contribution = 0.0;
    v.criterion_value = ExtendedValue::finite(body);
    v.classification = PerpetualVerdict::Kind::finite;
    return;
  }
  if (std::any_of(ly.begin(), ly.end(), [](double z) { return !std::isfinite(z); })) {
    v.criterion_value = ExtendedValue::finite(body);
    v.classification = PerpetualVerdict::Kind::inconclusive;
    return;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(k);
  for (std::size_t i = 0; i < k; ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double logc = (sy - slope * sx) / n;
  v.tail_exponent = slope;
  if (slope >= -2.0) {
    v.criterion_value = ExtendedValue::divergent(body, slope);
    v.classification = PerpetualVerdict::Kind::infinite;
    return;
  }
  const double p = -slope;
  v.tail_contribution = std::exp(logc) * std::pow(Y, 2.0 - p) / (p - 2.0);
  v.criterion_value = ExtendedValue::finite(body + v.tail_contribution, std::abs(v.tail_contribution));
  v.classification = PerpetualVerdict::Kind::finite;
}

/// Classifies int_0^inf f(xi_s) ds under P^up_x by the criterion integral,
/// with a Monte Carlo diagnostic of window increments int_T^{2T} f and a
/// per-path split between bounded and growing integrals.
inline PerpetualVerdict perpetual_classify(const SpineLevyLaw& law, const RenewalModel& Rm,
                                           const std::function<double(double)>& f, double x,
                                           const PerpetualConfig& cfg = {}) {
  PerpetualVerdict v;
  perpetual_criterion(f, cfg, v);
  if (cfg.paths == 0) return v;

  const auto grid = uniform_grid(cfg.last_horizon, cfg.dt);
  std::vector<double> horizons;
  for (double T = cfg.first_horizon; 2.0 * T <= cfg.last_horizon * (1 + 1e-12); T *= 2.0) horizons.push_back(T);
  const std::size_t nw = horizons.size();
  const bool exact = law.is_brownian() && Rm.kind == RenewalModel::Kind::exact_brownian;
  v.exact_sampler = exact;

  struct PathResult {
    double w = 0.0;
    std::vector<double> inc;
  };
  auto window_increments = [&](const LevyPath& p) {
    // Trapezoid rule on the grid; window k is [horizons[k], 2 horizons[k]].
    std::vector<double> cum(p.values.size(), 0.0);
    for (std::size_t i = 1; i < p.values.size(); ++i) {
      cum[i] = cum[i - 1] + 0.5 * (f(p.values[i - 1]) + f(p.values[i])) * (p.times[i] - p.times[i - 1]);
    }
    auto at = [&](double t) {
      const auto i = static_cast<std::size_t>(std::llround(t / cfg.dt));
      return cum[std::min(i, cum.size() - 1)];
    };
    std::vector<double> inc(nw);
    for (std::size_t k = 0; k < nw; ++k) inc[k] = at(2.0 * horizons[k]) - at(horizons[k]);
    return inc;
  };
  const double rx = Rm(x);
  auto results = run_replicas<PathResult>(cfg.paths, cfg.seed, [&](std::size_t, Rng& rng) {
    PathResult r;
    if (exact) {
      auto p = simulate_bessel3(law.sigma2, x, std::span<const double>(grid), rng);
      r.w = 1.0;
      r.inc = window_increments(p);
    } else {
      PathOptions opt = monitoring_options(Rm);
      auto p = simulate_path(law, x, std::span<const double>(grid), rng, opt);
      r.w = p.running_min < 0.0 ? 0.0 : Rm(p.values.back()) / rx;
      r.inc = window_increments(p);
    }
    return r;
  });

  std::vector<double> w(cfg.paths);
  for (std::size_t i = 0; i < cfg.paths; ++i) w[i] = results[i].w;
  v.ess = effective_sample_size(w);
  for (std::size_t k = 0; k < nw; ++k) {
    std::vector<double> wi(cfg.paths);
    for (std::size_t i = 0; i < cfg.paths; ++i) wi[i] = results[i].w * results[i].inc[k];
    const auto s = summarize(wi);
    v.mc_diagnostic.push_back({horizons[k], s.estimate, s.se});
  }

  bool shrinks = true, flat = true;
  for (std::size_t k = 1; k < nw; ++k) {
    const double prev = v.mc_diagnostic[k - 1].mean;
    const double next = v.mc_diagnostic[k].mean;
    if (!(prev >= cfg.shrink_factor * next)) shrinks = false;
    if (!(prev <= cfg.no_shrink_ratio * next)) flat = false;
  }
  if (v.classification == PerpetualVerdict::Kind::finite) v.mc_trend_agrees = shrinks;
  else if (v.classification == PerpetualVerdict::Kind::infinite) v.mc_trend_agrees = flat;

  std::size_t ref = 0;
  while (ref + 1 < nw && horizons[ref] < cfg.reference_horizon) ++ref;
  double wsum = 0.0, wgrow = 0.0;
  for (const auto& r : results) {
    if (r.w <= 0.0) continue;
    const bool growing = r.inc.back() >= cfg.growing_fraction * r.inc[ref] && r.inc[ref] > 0.0;
    wsum += r.w;
    if (growing) wgrow += r.w;
  }
  v.fraction_growing = wsum > 0.0 ? wgrow / wsum : 0.0;
  const double side = v.classification == PerpetualVerdict::Kind::infinite ? v.fraction_growing
                                                                            : 1.0 - v.fraction_growing;
  v.zero_one_one_sided = side >= cfg.one_sided;
  return v;
}

}  // namespace blp
