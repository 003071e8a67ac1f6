#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blp/numeric.hpp"
#include "blp/replicas.hpp"
#include "blp/spine_levy.hpp"
#include "blp/stats.hpp"

namespace blp {

/// Renewal function R of the descending ladder height process, extended by
/// R(x) = 0 for x < 0. Harmonic for the process killed on entering (-inf, 0).
struct RenewalModel {
  enum class Kind { exact_brownian, empirical };

  Kind kind = Kind::exact_brownian;
  double r0 = 0.0;
  double c1 = 1.0;
  double c2 = 1.0;
  double c_star = 1.0;
  /// Empirical table on [0, x_max] with uniform spacing.
  double x_max = 0.0;
  double spacing = 0.0;
  std::vector<double> table;
  /// When true, killing below 0 is checked along the continuous path (bridge
  /// minima); otherwise only at skeleton points (grid and jump instants),
  /// which is how the empirical table was built.
  bool continuous_monitoring = true;
  double skeleton_step = 0.0;
  std::size_t ladder_samples = 0;
  double truncated_fraction = 0.0;

  double operator()(double x) const {
    if (x < 0.0) return 0.0;
    if (kind == Kind::exact_brownian) return x;
    if (x >= x_max) return table.back() + c_star * (x - x_max);
    const double pos = x / spacing;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= table.size()) return table.back();
    const double f = pos - static_cast<double>(i);
    return table[i] * (1.0 - f) + table[i + 1] * f;
  }

  static RenewalModel brownian() { return RenewalModel{}; }
};

struct RenewalConfig {
  double step = 0.01;               // skeleton step h
  std::size_t min_ladder_events = 10000;
  double max_passage_time = 1e4;    // per ladder sample
  double x_max = 20.0;
  double spacing = 0.01;
  std::size_t renewal_sequences = 20000;
  std::uint64_t seed = 7;
  bool force_empirical = false;
};

namespace detail {

/// One strict descending ladder height from 0: run until the skeleton
/// position is negative, return its depth. nullopt when the time cap hits.
template <class R>
std::optional<double> ladder_increment(LevyStepper& st, bool gaussian, double step, double cap, R& rng) {
  double y = 0.0;
  double m = 0.0;
  double t = 0.0;
  // Without a Gaussian part the path between jumps is linear, so monitoring
  // at jump instants and chunk ends is exact for any chunk length.
  const double chunk = gaussian ? step : std::max(step, 1.0);
  bool crossed = false;
  double depth = 0.0;
  while (t < cap) {
    st.advance(y, m, chunk, false, rng, [&](double, double) {
      if (!crossed && y < 0.0) {
        crossed = true;
        depth = -y;
      }
    });
    t += chunk;
    if (crossed) return depth;
    if (y < 0.0) return -y;
  }
  return std::nullopt;
}

}  // namespace detail

/// Exact model R(x) = x for a pure Brownian spine (0 regular, R(0) = 0).
/// Otherwise an empirical table: ladder height increments are sampled on the
/// skeleton, then R(x) = E #{k >= 0 : H_k <= x} is estimated by resampled
/// renewal sequences, so R(0) = 1.
inline RenewalModel renewal_model(const SpineLevyLaw& law, const RenewalConfig& cfg = {}) {
  if (law.is_brownian() && !cfg.force_empirical) {
    if (!(law.sigma2 > 0.0)) throw Error("renewal_model: degenerate law");
    return RenewalModel::brownian();
  }
  if (std::abs(law.mean()) > 1e-8) throw Error("renewal_model: law must be centred");
  LevyStepper stepper(law);
  Rng rng = make_stream(cfg.seed, 0, 0x52454e);
  std::vector<double> incs;
  incs.reserve(cfg.min_ladder_events);
  std::size_t truncated = 0;
  const std::size_t max_attempts = cfg.min_ladder_events * 4;
  for (std::size_t a = 0; a < max_attempts && incs.size() < cfg.min_ladder_events; ++a) {
    auto h = detail::ladder_increment(stepper, law.sigma2 > 0.0, cfg.step, cfg.max_passage_time, rng);
    if (h) incs.push_back(*h); else ++truncated;
  }
  if (incs.size() < cfg.min_ladder_events) {
    throw Error("renewal_model: only " + std::to_string(incs.size()) +
                " ladder events collected; increase max_passage_time");
  }
  const auto bins = static_cast<std::size_t>(std::llround(cfg.x_max / cfg.spacing)) + 1;
  std::vector<double> counts(bins, 0.0);
  std::uniform_int_distribution<std::size_t> pick(0, incs.size() - 1);
  for (std::size_t s = 0; s < cfg.renewal_sequences; ++s) {
    double H = 0.0;
    while (H <= cfg.x_max) {
      const auto i = static_cast<std::size_t>(std::ceil(H / cfg.spacing - 1e-12));
      if (i < bins) counts[i] += 1.0;
      H += incs[pick(rng)];
    }
  }
  RenewalModel m;
  m.kind = RenewalModel::Kind::empirical;
  m.x_max = static_cast<double>(bins - 1) * cfg.spacing;
  m.spacing = cfg.spacing;
  m.table.resize(bins);
  double acc = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    acc += counts[i];
    m.table[i] = acc / static_cast<double>(cfg.renewal_sequences);
  }
  m.r0 = m.table[0];
  // Least-squares slope over the right half of the table.
  const std::size_t lo = bins / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(bins - lo);
  for (std::size_t i = lo; i < bins; ++i) {
    const double x = static_cast<double>(i) * cfg.spacing;
    sx += x;
    sy += m.table[i];
    sxx += x * x;
    sxy += x * m.table[i];
  }
  m.c_star = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  m.c1 = kInf;
  m.c2 = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    const double x = static_cast<double>(i) * cfg.spacing;
    if (x > 0.0) m.c1 = std::min(m.c1, m.table[i] / x);
    m.c2 = std::max(m.c2, m.table[i] / (x + 1.0));
  }
  m.c1 = std::min(m.c1, m.c_star);
  m.c2 = std::max(m.c2, m.c_star);
  m.continuous_monitoring = false;
  m.skeleton_step = cfg.step;
  m.ladder_samples = incs.size();
  m.truncated_fraction = static_cast<double>(truncated) / static_cast<double>(incs.size() + truncated);
  return m;
}

/// Path options matching how R treats killing below zero.
inline PathOptions monitoring_options(const RenewalModel& R) {
  PathOptions o;
  o.bridge_minimum = R.continuous_monitoring;
  o.record_jumps = false;
  return o;
}

inline double default_monitoring_step(const RenewalModel& R, double fallback) {
  return R.continuous_monitoring ? fallback : R.skeleton_step;
}

/// Monte Carlo estimate of E_x[R(xi_t) 1{tau > t}] against R(x).
inline StatReport harmonicity_check(const SpineLevyLaw& law, const RenewalModel& R, double x, double t,
                                    std::size_t n, std::uint64_t seed, double dt = 0.01) {
  if (t <= 0.0) {
    StatReport r;
    r.estimate = R(x);
    r.reference = R(x);
    r.z = 0.0;
    r.replicas = n;
    return r;
  }
  const double step = default_monitoring_step(R, dt);
  const auto grid = uniform_grid(t, step);
  PathOptions opt = monitoring_options(R);
  opt.stop_below = 0.0;
  auto vals = run_replicas<double>(n, seed, [&](std::size_t, Rng& rng) {
    auto p = simulate_path(law, x, std::span<const double>(grid), rng, opt);
    if (p.running_min < 0.0) return 0.0;
    return R(p.values.back());
  });
  return summarize(vals, R(x));
}

/// Ensemble of P_x paths weighted by R(xi_T) 1{tau > T} / R(x); the weighted
/// mean of any functional of the path up to T is its P^up_x expectation.
struct WeightedEnsemble {
  std::vector<LevyPath> paths;
  std::vector<double> weights;
  double ess = 0.0;
  double mean_weight = 0.0;
};

template <class R>
WeightedEnsemble sample_conditioned(const SpineLevyLaw& law, const RenewalModel& Rm, double x,
                                    std::span<const double> grid, std::size_t n, R& rng) {
  if (!(x > 0.0)) throw Error("sample_conditioned: x must be positive");
  const double rx = Rm(x);
  if (!(rx > 0.0)) throw Error("sample_conditioned: R(x) = 0");
  WeightedEnsemble e;
  e.paths.reserve(n);
  e.weights.reserve(n);
  const PathOptions opt = monitoring_options(Rm);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = simulate_path(law, x, grid, rng, opt);
    const double w = p.running_min < 0.0 ? 0.0 : Rm(p.values.back()) / rx;
    e.paths.push_back(std::move(p));
    e.weights.push_back(w);
  }
  e.ess = effective_sample_size(e.weights);
  double s = 0.0;
  for (double w : e.weights) s += w;
  e.mean_weight = n ? s / static_cast<double>(n) : 0.0;
  return e;
}

/// Streaming weighted estimate of E^up_x[g(path)] over replicas; killed
/// paths stop early. Returns the unnormalized estimator (1/n) sum w g, and
/// the ESS of the weights.
struct ConditionedEstimate {
  StatReport report;
  double ess = 0.0;
  double mean_weight = 0.0;
};

template <class G>
ConditionedEstimate estimate_conditioned(const SpineLevyLaw& law, const RenewalModel& Rm, double x,
                                         std::span<const double> grid, std::size_t n, std::uint64_t seed,
                                         G&& g, std::optional<double> reference = std::nullopt) {
  if (!(x > 0.0)) throw Error("estimate_conditioned: x must be positive");
  const double rx = Rm(x);
  if (!(rx > 0.0)) throw Error("estimate_conditioned: R(x) = 0");
  PathOptions opt = monitoring_options(Rm);
  opt.stop_below = 0.0;
  struct Item {
    double w = 0.0;
    double wg = 0.0;
  };
  auto items = run_replicas<Item>(n, seed, [&](std::size_t, Rng& rng) {
    auto p = simulate_path(law, x, grid, rng, opt);
    if (p.running_min < 0.0) return Item{};
    const double w = Rm(p.values.back()) / rx;
    return Item{w, w * g(p)};
  });
  std::vector<double> w(n), wg(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = items[i].w;
    wg[i] = items[i].wg;
  }
  ConditionedEstimate out;
  out.report = summarize(wg, reference);
  out.ess = effective_sample_size(w);
  double s = 0.0;
  for (double v : w) s += v;
  out.mean_weight = s / static_cast<double>(n);
  return out;
}

struct MinLawConfig {
  double initial_horizon = 16.0;
  double max_horizon = 1e6;
  double tail_prob = 1e-3;
  double min_ess = 100.0;
  std::size_t paths = 200000;
  std::uint64_t seed = 11;
  /// Points per unit of log-time on the geometric grid (pure diffusion
  /// segments are simulated exactly, so a coarse grid is fine).
  double grid_density = 8.0;
  double max_step = 0.0;  // 0 = unlimited; empirical R uses its skeleton step
};

struct MinLawReport {
  double x = 0.0;
  double y = 0.0;
  StatReport estimate;  // weighted P^up_x(min over [0, T] >= y)
  double exact = 0.0;   // R(x - y) / R(x)
  double horizon = 0.0;
  double tail_bound = 0.0;
  double ess = 0.0;
  bool ess_ok = false;
  bool converged = false;
};

/// Geometric time grid from 0 to T with the first step t0.
inline std::vector<double> geometric_grid(double T, double t0, double density, double max_step) {
  std::vector<double> g{0.0};
  double t = std::min(t0, T);
  const double ratio = std::exp(1.0 / density);
  while (t < T) {
    g.push_back(t);
    double nt = t * ratio;
    if (max_step > 0.0) nt = std::min(nt, t + max_step);
    t = nt;
  }
  g.push_back(T);
  return g;
}

/// Checks P^up_x(inf xi >= y) = R(x - y) / R(x). The infinite-horizon
/// minimum is replaced by the minimum over [0, T], with T doubled until the
/// weighted probability that the path, currently above y, later undercuts y
/// (estimated by 1 - R(xi_T - y)/R(xi_T)) falls below tail_prob.
inline MinLawReport min_law_check(const SpineLevyLaw& law, const RenewalModel& Rm, double x, double y,
                                  const MinLawConfig& cfg = {}) {
  MinLawReport rep;
  rep.x = x;
  rep.y = y;
  if (y > x) {
    rep.exact = 0.0;
    rep.estimate.estimate = 0.0;
    rep.estimate.reference = 0.0;
    rep.estimate.z = 0.0;
    rep.converged = true;
    return rep;
  }
  if (!(y >= 0.0)) throw Error("min_law_check: y must be in [0, x]");
  rep.exact = Rm(x - y) / Rm(x);
  const double max_step = Rm.continuous_monitoring ? cfg.max_step : Rm.skeleton_step;
  double T = cfg.initial_horizon;
  for (;;) {
    const auto grid = max_step > 0.0 && !Rm.continuous_monitoring
                          ? uniform_grid(T, max_step)
                          : geometric_grid(T, 0.01, cfg.grid_density, max_step);
    struct Item {
      double w = 0.0;
      double hit = 0.0;
      double tail = 0.0;
    };
    const double rx = Rm(x);
    PathOptions opt = monitoring_options(Rm);
    opt.stop_below = 0.0;
    auto items = run_replicas<Item>(cfg.paths, cfg.seed, [&](std::size_t, Rng& rng) {
      auto p = simulate_path(law, x, std::span<const double>(grid), rng, opt);
      if (p.running_min < 0.0) return Item{};
      const double end = p.values.back();
      const double w = Rm(end) / rx;
      if (p.running_min < y) return Item{w, 0.0, 0.0};
      return Item{w, w, w * (1.0 - Rm(end - y) / Rm(end))};
    });
    std::vector<double> w, hit;
    w.reserve(items.size());
    hit.reserve(items.size());
    double tail = 0.0;
    for (const auto& it : items) {
      w.push_back(it.w);
      hit.push_back(it.hit);
      tail += it.tail;
    }
    rep.tail_bound = tail / static_cast<double>(items.size());
    rep.estimate = summarize(hit, rep.exact);
    rep.ess = effective_sample_size(w);
    rep.horizon = T;
    if (rep.tail_bound <= cfg.tail_prob) {
      rep.converged = true;
      break;
    }
    if (T * 2.0 > cfg.max_horizon) break;
    T *= 2.0;
  }
  rep.ess_ok = rep.ess >= cfg.min_ess;
  return rep;
}

}  // namespace blp
