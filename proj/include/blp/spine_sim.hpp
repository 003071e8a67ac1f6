#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "blp/branching_sim.hpp"
#include "blp/cumulant.hpp"
#include "blp/renewal.hpp"
#include "blp/replicas.hpp"
#include "blp/spine_levy.hpp"
#include "blp/stats.hpp"

namespace blp {

/// Atom of the size-biased measure: mass w e^{-x_k} on (atom, k).
struct HatAtom {
  double mass = 0.0;
  std::size_t atom = 0;  // index into BranchingMeasure::atom
  std::size_t k = 0;     // 1-based spine child
};

/// Lambda-hat(dx, dk) = sum_j e^{-x_j} Lambda(dx) delta_j(dk), expanded over
/// explicit atoms. Cluster family members are expanded too, so keep their
/// cutoff moderate when calling this.
inline std::vector<HatAtom> hat_measure(const BranchingMeasure& m) {
  std::vector<HatAtom> out;
  for (std::size_t i = 0; i < m.atom_count(); ++i) {
    const AtomView a = m.atom(i);
    for (std::size_t j = 0; j < a.size(); ++j) out.push_back({a.weight() * std::exp(-a.at(j)), i, j + 1});
  }
  return out;
}

inline double hat_mass(const BranchingMeasure& m) {
  double s = 0.0;
  m.for_each_atom([&](const AtomView& a) { s += a.weight() * a.Y(); });
  return s;
}

/// Spine view of a P-hat run.
struct SpineRecord {
  LevyPath spine_path;  // on the simulation grid, minima are ancestral minima of the spine line
  std::vector<BranchEvent> spine_events;
  std::vector<std::pair<double, std::size_t>> spine_label_at;  // (snapshot time, particle id)
};

inline SpineRecord spine_record(const PopulationTrajectory& tr) {
  SpineRecord r;
  r.spine_path.times = tr.grid;
  r.spine_path.values = tr.spine_positions;
  double m = tr.x0;
  for (double v : tr.spine_positions) {
    m = std::min(m, v);
    r.spine_path.minima.push_back(m);
  }
  r.spine_path.running_min = tr.spine_min;
  for (const auto& e : tr.events) {
    if (e.spine_child != 0) r.spine_events.push_back(e);
  }
  for (const auto& s : tr.snapshots) r.spine_label_at.emplace_back(s.t, s.spine);
  return r;
}

/// Population under P-hat: the spine branches at rate |Lambda-hat|, choosing
/// (x, k) from Lambda-hat; it jumps by x_k and its siblings (j != k, the
/// parent slot j = 1 included) start ordinary populations at pre-jump + x_j.
/// Between events the spine moves with the spine law's drift.
template <class R>
PopulationTrajectory simulate_P_hat(const BranchingTriplet& t, const SimOptions& opt, R& rng) {
  detail::PopulationEngine eng(t, true);
  return eng.run(opt, rng);
}

/// Importance weight of a P-hat run under Q-hat^b at the final time.
inline double q_hat_weight(const PopulationTrajectory& tr, const RenewalModel& R, double b) {
  if (tr.spine_min + b <= 0.0) return 0.0;
  return R(tr.spine_positions.back() + b) / R(b);
}

// ---------------------------------------------------------------------------
// Spine selection.

struct SpineSelectionReport {
  std::size_t runs = 0;
  double leftmost_observed = 0.0;
  double leftmost_expected = 0.0;
  double z_leftmost = 0.0;
  /// Randomized PIT of the spine's rank under e^{-X(u)}/W; uniform under the law.
  double pit_mean = 0.0;
  double z_pit = 0.0;
  bool within(double k = 3.0) const { return std::abs(z_leftmost) <= k && std::abs(z_pit) <= k; }
};

/// Compares the spine's identity at the last snapshot of each run with the
/// conditional law P-hat(w_t = u | F_t) = e^{-X_t(u)} / W_t.
template <class R>
SpineSelectionReport spine_selection_check(const std::vector<PopulationTrajectory>& runs, R& rng) {
  SpineSelectionReport rep;
  double var = 0.0, pit = 0.0;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (const auto& tr : runs) {
    if (tr.partial || tr.snapshots.empty()) continue;
    const Snapshot& s = tr.snapshots.back();
    std::vector<std::size_t> order(s.x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
    double W = 0.0;
    for (double x : s.x) W += std::exp(-x);
    double before = 0.0, p_spine = 0.0;
    for (std::size_t idx : order) {
      const double p = std::exp(-s.x[idx]) / W;
      if (s.id[idx] == s.spine) {
        p_spine = p;
        break;
      }
      before += p;
    }
    const double p_left = std::exp(-s.x[order.front()]) / W;
    rep.leftmost_expected += p_left;
    rep.leftmost_observed += s.id[order.front()] == s.spine ? 1.0 : 0.0;
    var += p_left * (1.0 - p_left);
    pit += before + u01(rng) * p_spine;
    ++rep.runs;
  }
  if (rep.runs == 0) return rep;
  rep.z_leftmost = var > 0.0 ? (rep.leftmost_observed - rep.leftmost_expected) / std::sqrt(var) : 0.0;
  const double n = static_cast<double>(rep.runs);
  rep.pit_mean = pit / n;
  rep.z_pit = (rep.pit_mean - 0.5) / std::sqrt(1.0 / (12.0 * n));
  rep.leftmost_observed /= n;
  rep.leftmost_expected /= n;
  return rep;
}

// ---------------------------------------------------------------------------
// Compensator identity under Q-hat^b.

/// Test function W(t, atom, k) of the spine point process.
using SpineTestFunction = std::function<double(double t, const AtomView& atom, std::size_t k)>;

struct CompensatorReport {
  StatReport lhs;         // int W dN-hat, weighted
  StatReport rhs;         // compensator, weighted
  StatReport difference;  // paired lhs - rhs, reference 0
  double ess = 0.0;
  std::size_t replicas = 0;
};

/// Both sides of E[int W dN-hat] = E[int W 1{b + xi + x_k > 0} R(b + xi + x_k)
/// / R(b + xi) dt Lambda-hat] under Q-hat^b, estimated on weighted P-hat
/// runs. The dt-integral is a left-point sum on the simulation grid.
inline CompensatorReport compensator_check(const BranchingTriplet& t, const RenewalModel& R, double b,
                                           const SpineTestFunction& W, double T, std::size_t n,
                                           std::uint64_t seed, double dt = 1e-3,
                                           std::optional<double> reference = std::nullopt) {
  const auto hat = hat_measure(t.measure);
  SimOptions opt;
  opt.T = T;
  opt.dt = dt;
  opt.record_events = true;
  opt.bridge_minimum = R.continuous_monitoring;
  struct Item {
    double w = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
  };
  auto items = run_replicas<Item>(n, seed, [&](std::size_t, Rng& rng) {
    auto tr = simulate_P_hat(t, opt, rng);
    Item it;
    if (tr.partial) return it;
    it.w = q_hat_weight(tr, R, b);
    if (it.w == 0.0) return it;
    double l = 0.0;
    for (const auto& e : tr.events) {
      if (e.spine_child != 0) l += W(e.time, t.measure.atom(e.atom), e.spine_child);
    }
    double r = 0.0;
    for (std::size_t g = 0; g + 1 < tr.grid.size(); ++g) {
      const double s = tr.grid[g];
      const double h = tr.grid[g + 1] - s;
      const double base = b + tr.spine_positions[g];
      const double rb = R(base);
      if (!(rb > 0.0)) continue;
      double acc = 0.0;
      for (const auto& ha : hat) {
        const AtomView at = t.measure.atom(ha.atom);
        const double y = base + at.at(ha.k - 1);
        if (y > 0.0) acc += ha.mass * W(s, at, ha.k) * R(y) / rb;
      }
      r += acc * h;
    }
    it.lhs = it.w * l;
    it.rhs = it.w * r;
    return it;
  }, 0x434f4d);
  std::vector<double> w, l, r, d;
  for (const auto& it : items) {
    w.push_back(it.w);
    l.push_back(it.lhs);
    r.push_back(it.rhs);
    d.push_back(it.lhs - it.rhs);
  }
  CompensatorReport rep;
  rep.lhs = summarize(l, reference);
  rep.rhs = summarize(r, reference);
  rep.difference = summarize(d, 0.0);
  rep.ess = effective_sample_size(w);
  rep.replicas = n;
  return rep;
}

// ---------------------------------------------------------------------------
// Change-of-measure checks.

struct NamedComparison {
  std::string name;
  TwoSampleReport report;
};

struct CappedFunctionals {
  double count_cap = 50.0;
  double w_cap = 4.0;
  double min_level = 1.0;  // indicator M_t > -min_level
};

/// E_P[F W_T] against E-hat[F] for capped population size, capped W_T and
/// the indicator of M_T > -K. The P side, whose weight W_T is heavy tailed,
/// gets p_factor * n replicas; the P-hat side gets n.
inline std::vector<NamedComparison> size_biased_checks(const BranchingTriplet& t, double T, std::size_t n,
                                                       std::uint64_t seed, double dt = 1e-3,
                                                       const CappedFunctionals& F = {},
                                                       std::size_t p_factor = 4) {
  SimOptions opt;
  opt.T = T;
  opt.dt = dt;
  opt.record_events = false;
  auto functionals = [&](const Snapshot& s) {
    double W = 0.0, M = kInf;
    for (double x : s.x) {
      W += std::exp(-x);
      M = std::min(M, x);
    }
    return std::array<double, 4>{std::min(static_cast<double>(s.x.size()), F.count_cap), std::min(W, F.w_cap),
                                 M > -F.min_level ? 1.0 : 0.0, W};
  };
  using Row = std::array<double, 4>;
  auto p = run_replicas<std::optional<Row>>(n * p_factor, seed, [&](std::size_t, Rng& rng) -> std::optional<Row> {
    auto tr = simulate_population(t, opt, rng);
    if (tr.partial) return std::nullopt;
    return functionals(tr.snapshots.back());
  }, 0x50);
  auto h = run_replicas<std::optional<Row>>(n, seed, [&](std::size_t, Rng& rng) -> std::optional<Row> {
    auto tr = simulate_P_hat(t, opt, rng);
    if (tr.partial) return std::nullopt;
    return functionals(tr.snapshots.back());
  }, 0x50484154);
  const char* names[3] = {"capped_count", "capped_W", "min_above"};
  std::vector<NamedComparison> out;
  for (int k = 0; k < 3; ++k) {
    std::vector<double> l, r;
    for (const auto& row : p) if (row) l.push_back((*row)[k] * (*row)[3]);
    for (const auto& row : h) if (row) r.push_back((*row)[k]);
    out.push_back({names[k], compare(summarize(l), summarize(r))});
  }
  return out;
}

struct QHatReport {
  StatReport weight_mean;  // reference 1
  double ess = 0.0;
  NamedComparison capped_count;  // E-hat^b[F] vs E_P[F Z^b_T] / R(b)
  NamedComparison spine_min;     // Q-hat^b(b + inf xi-hat >= y) vs P^up_b(inf xi >= y)
  NamedComparison spine_end;     // E[b + xi-hat_T] vs E^up_b[xi_T]
  double min_level = 0.0;
  double exact_min_law = 0.0;    // R(b - y) / R(b), infinite-horizon value
};

/// Q-hat^b realized by reweighting P-hat runs with R(b + xi-hat_T)/R(b)
/// 1{inf xi-hat > -b}; checked against P weighted by Z^b_T and against the
/// spine law conditioned to stay positive from b.
inline QHatReport q_hat_checks(const BranchingTriplet& t, const RenewalModel& R, double b, double T,
                               std::size_t n, std::uint64_t seed, double dt = 1e-3, double count_cap = 50.0) {
  if (!(b > 0.0)) throw Error("q_hat_checks: b must be positive");
  SimOptions opt;
  opt.T = T;
  opt.dt = dt;
  opt.record_events = false;
  opt.bridge_minimum = R.continuous_monitoring;
  const double y = 0.5 * b;
  struct Hat {
    double w = 0.0;
    double count = 0.0;
    double above = 0.0;
    double end = 0.0;
  };
  auto hat = run_replicas<Hat>(n, seed, [&](std::size_t, Rng& rng) {
    auto tr = simulate_P_hat(t, opt, rng);
    Hat h;
    if (tr.partial) return h;
    h.w = q_hat_weight(tr, R, b);
    h.count = h.w * std::min(static_cast<double>(tr.snapshots.back().x.size()), count_cap);
    h.above = h.w * (b + tr.spine_min >= y ? 1.0 : 0.0);
    h.end = h.w * (b + tr.spine_positions.back());
    return h;
  }, 0x51484154);
  auto plain = run_replicas<double>(n, seed, [&](std::size_t, Rng& rng) {
    auto tr = simulate_population(t, opt, rng);
    if (tr.partial) return 0.0;
    const double zb = truncated_martingale(tr, R, b).back();
    return std::min(static_cast<double>(tr.snapshots.back().x.size()), count_cap) * zb / R(b);
  }, 0x51);
  const SpineLevyLaw law = derive_spine_law(t);
  const auto grid = uniform_grid(T, dt);
  auto cond_min = estimate_conditioned(law, R, b, std::span<const double>(grid), n, seed ^ 0x9e37,
                                       [&](const LevyPath& p) { return p.running_min >= y ? 1.0 : 0.0; });
  auto cond_end = estimate_conditioned(law, R, b, std::span<const double>(grid), n, seed ^ 0x7f4a,
                                       [](const LevyPath& p) { return p.values.back(); });
  std::vector<double> w, c, a, e;
  for (const auto& h : hat) {
    w.push_back(h.w);
    c.push_back(h.count);
    a.push_back(h.above);
    e.push_back(h.end);
  }
  QHatReport rep;
  rep.weight_mean = summarize(w, 1.0);
  rep.ess = effective_sample_size(w);
  rep.capped_count = {"capped_count", compare(summarize(c), summarize(plain))};
  rep.spine_min = {"spine_min", compare(summarize(a), cond_min.report)};
  rep.spine_end = {"spine_end", compare(summarize(e), cond_end.report)};
  rep.min_level = y;
  rep.exact_min_law = R(b - y) / R(b);
  return rep;
}

}  // namespace blp
