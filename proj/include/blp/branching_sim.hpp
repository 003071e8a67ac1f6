#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "blp/cumulant.hpp"
#include "blp/numeric.hpp"
#include "blp/renewal.hpp"
#include "blp/replicas.hpp"
#include "blp/spine_levy.hpp"
#include "blp/stats.hpp"

namespace blp {

inline constexpr std::size_t kNoParticle = std::numeric_limits<std::size_t>::max();

struct SimCaps {
  std::size_t max_particles = 1000000;
  std::size_t max_events = 10000000;
};

struct SimOptions {
  double T = 1.0;
  double dt = 1e-3;
  /// Snapshot times; each is inserted into the grid. Empty means {T}.
  std::vector<double> observe;
  double x0 = 0.0;
  /// Exact Brownian-bridge minimum between grid and event times.
  bool bridge_minimum = true;
  bool record_events = true;
  SimCaps caps;
};

/// Generalized Ulam-Harris label: one (event index, child rank) pair per
/// birth along the ancestral line. The root is the empty label; a parent
/// keeps its label across its own events (rank 1 is the parent itself).
using ParticleLabel = std::vector<std::pair<std::size_t, std::size_t>>;

struct ParticleRecord {
  std::size_t parent = kNoParticle;
  std::size_t birth_event = kNoParticle;
  std::size_t rank = 0;  // j >= 2 for children
  double birth_time = 0.0;
};

struct BranchEvent {
  double time = 0.0;
  std::size_t particle = 0;   // the parent
  std::size_t atom = 0;       // index into BranchingMeasure::atom
  double pre_position = 0.0;  // parent position just before the event
  std::size_t spine_child = 0;  // k (1-based) for spine events, 0 otherwise
};

struct Snapshot {
  double t = 0.0;
  std::vector<std::size_t> id;
  std::vector<double> x;
  std::vector<double> ancestral_min;  // inf over [0, t] of the ancestral line
  std::size_t spine = kNoParticle;    // particle id of the spine, if any
};

struct PopulationTrajectory {
  double x0 = 0.0;
  std::vector<ParticleRecord> particles;
  std::vector<BranchEvent> events;
  std::size_t event_count = 0;
  std::vector<Snapshot> snapshots;
  bool partial = false;
  /// Spine diagnostics (P-hat runs only).
  std::size_t spine_events = 0;
  double spine_min = 0.0;
  std::vector<double> spine_positions;  // spine position at each grid time
  std::vector<double> grid;

  ParticleLabel label(std::size_t id) const {
    ParticleLabel l;
    while (id != kNoParticle && particles[id].parent != kNoParticle) {
      l.emplace_back(particles[id].birth_event, particles[id].rank);
      id = particles[id].parent;
    }
    std::reverse(l.begin(), l.end());
    return l;
  }

  /// Ancestor of `id` alive at time s (the particle itself if born by s).
  std::size_t ancestor_at(std::size_t id, double s) const {
    while (particles[id].parent != kNoParticle && particles[id].birth_time > s) id = particles[id].parent;
    return id;
  }

  /// X_s(u) for a snapshot time s <= t, via the genealogy.
  std::optional<double> position_at(std::size_t id, double s) const {
    const std::size_t a = ancestor_at(id, s);
    for (const auto& snap : snapshots) {
      if (std::abs(snap.t - s) > 1e-12) continue;
      auto it = std::find(snap.id.begin(), snap.id.end(), a);
      if (it != snap.id.end()) return snap.x[static_cast<std::size_t>(it - snap.id.begin())];
    }
    return std::nullopt;
  }
};

namespace detail {

inline std::vector<double> merged_grid(double T, double dt, const std::vector<double>& observe) {
  auto g = uniform_grid(T, dt);
  for (double t : observe) {
    if (!(t >= 0.0) || t > T + 1e-12) throw Error("simulate: observation time outside [0, T]");
    g.push_back(std::min(t, T));
  }
  std::sort(g.begin(), g.end());
  std::vector<double> out;
  for (double t : g) {
    if (out.empty() || t - out.back() > 1e-12) out.push_back(t);
    else out.back() = std::max(out.back(), t);
  }
  return out;
}

struct Walker {
  double x = 0.0;
  double min = 0.0;
  double clock = 0.0;
  bool spine = false;
};

/// Branching dynamics shared by the plain and the spine-biased simulations.
class PopulationEngine {
public:
  PopulationEngine(const BranchingTriplet& t, bool with_spine) : t_(&t), with_spine_(with_spine) {
    t.validate();
    std::vector<double> w;
    w.reserve(t.measure.atom_count());
    drift_ = t.a;
    t.measure.for_each_atom([&](const AtomView& at) {
      w.push_back(at.weight());
      drift_ -= at.weight() * small_jump(at.first());
    });
    atoms_ = CumulativeSampler(w);
    rate_ = atoms_.total();
    sd_ = std::sqrt(t.sigma2);
    if (with_spine) {
      std::vector<double> wy;
      wy.reserve(w.size());
      t.measure.for_each_atom([&](const AtomView& at) { wy.push_back(at.weight() * at.Y()); });
      spine_atoms_ = CumulativeSampler(wy);
      spine_rate_ = spine_atoms_.total();
      spine_drift_ = derive_spine_law(t).effective_drift();
    }
  }

  double rate() const { return rate_; }
  double spine_rate() const { return spine_rate_; }

  template <class R>
  PopulationTrajectory run(const SimOptions& opt, R& rng) const {
    if (!(opt.dt > 0.0)) throw Error("simulate: dt must be positive");
    PopulationTrajectory tr;
    tr.x0 = opt.x0;
    tr.grid = merged_grid(opt.T, opt.dt, opt.observe.empty() ? std::vector<double>{opt.T} : opt.observe);
    std::vector<double> obs = opt.observe.empty() ? std::vector<double>{opt.T} : opt.observe;
    std::sort(obs.begin(), obs.end());
    std::vector<Walker> walkers{{opt.x0, opt.x0, 0.0, with_spine_}};
    tr.particles.push_back({});
    std::size_t spine = with_spine_ ? 0 : kNoParticle;
    tr.spine_min = opt.x0;
    auto snap_if_due = [&](double t) {
      while (tr.snapshots.size() < obs.size() && std::abs(obs[tr.snapshots.size()] - t) <= 1e-9) {
        Snapshot s;
        s.t = obs[tr.snapshots.size()];
        s.id.resize(walkers.size());
        s.x.resize(walkers.size());
        s.ancestral_min.resize(walkers.size());
        for (std::size_t i = 0; i < walkers.size(); ++i) {
          s.id[i] = i;
          s.x[i] = walkers[i].x;
          s.ancestral_min[i] = walkers[i].min;
        }
        s.spine = spine;
        tr.snapshots.push_back(std::move(s));
      }
    };
    snap_if_due(0.0);
    if (with_spine_) tr.spine_positions.push_back(opt.x0);
    std::exponential_distribution<double> unit_exp(1.0);
    for (std::size_t k = 1; k < tr.grid.size(); ++k) {
      const double t_next = tr.grid[k];
      for (std::size_t i = 0; i < walkers.size(); ++i) {
        for (;;) {
          const bool is_spine = walkers[i].spine;
          const double r = is_spine ? spine_rate_ : rate_;
          const double remaining = t_next - walkers[i].clock;
          const double wait = r > 0.0 ? unit_exp(rng) / r : kInf;
          if (wait >= remaining) {
            move(walkers[i], remaining, opt.bridge_minimum, rng);
            walkers[i].clock = t_next;
            break;
          }
          move(walkers[i], wait, opt.bridge_minimum, rng);
          walkers[i].clock += wait;
          if (tr.event_count >= opt.caps.max_events) {
            tr.partial = true;
            return tr;
          }
          branch(tr, walkers, i, spine, opt.record_events, rng);
          if (walkers.size() > opt.caps.max_particles) {
            tr.partial = true;
            return tr;
          }
        }
      }
      if (with_spine_) {
        tr.spine_positions.push_back(walkers[spine].x);
        tr.spine_min = walkers[spine].min;
      }
      snap_if_due(t_next);
    }
    return tr;
  }

private:
  template <class R>
  void move(Walker& w, double h, bool bridge, R& rng) const {
    if (h <= 0.0) return;
    const double y0 = w.x;
    w.x += (w.spine ? spine_drift_ : drift_) * h;
    if (sd_ > 0.0) {
      std::normal_distribution<double> g(0.0, sd_ * std::sqrt(h));
      w.x += g(rng);
    }
    const double m = bridge ? bridge_minimum(y0, w.x, t_->sigma2, h, rng) : std::min(y0, w.x);
    w.min = std::min(w.min, m);
  }

  template <class R>
  void branch(PopulationTrajectory& tr, std::vector<Walker>& walkers, std::size_t i, std::size_t& spine,
              bool record, R& rng) const {
    const bool is_spine = walkers[i].spine;
    const std::size_t a = is_spine ? spine_atoms_(rng) : atoms_(rng);
    const AtomView at = t_->measure.atom(a);
    std::size_t k = 0;
    if (is_spine) k = pick_spine_child(at, rng);
    const double pre = walkers[i].x;
    const double t = walkers[i].clock;
    const std::size_t ev = tr.event_count++;
    if (record) tr.events.push_back({t, i, a, pre, k});
    if (is_spine) ++tr.spine_events;
    const double line_min = walkers[i].min;
    const std::size_t n = at.size();
    for (std::size_t j = 1; j < n; ++j) {
      const double pos = pre + at.at(j);
      walkers.push_back({pos, std::min(line_min, pos), t, is_spine && k == j + 1});
      tr.particles.push_back({i, ev, j + 1, t});
      if (is_spine && k == j + 1) spine = walkers.size() - 1;
    }
    walkers[i].x = pre + at.first();
    walkers[i].min = std::min(walkers[i].min, walkers[i].x);
    if (is_spine && k != 1) walkers[i].spine = false;
  }

  /// k with probability proportional to e^{-x_k} within the atom (1-based).
  template <class R>
  static std::size_t pick_spine_child(const AtomView& at, R& rng) {
    const std::size_t n = at.size();
    if (at.at(0) == at.at(n - 1)) {
      std::uniform_int_distribution<std::size_t> u(1, n);
      return u(rng);
    }
    std::uniform_real_distribution<double> u(0.0, at.Y());
    double v = u(rng);
    for (std::size_t j = 0; j < n; ++j) {
      v -= std::exp(-at.at(j));
      if (v <= 0.0) return j + 1;
    }
    return n;
  }

  const BranchingTriplet* t_;
  bool with_spine_;
  CumulativeSampler atoms_;
  CumulativeSampler spine_atoms_;
  double rate_ = 0.0;
  double spine_rate_ = 0.0;
  double drift_ = 0.0;
  double spine_drift_ = 0.0;
  double sd_ = 0.0;
};

}  // namespace detail

/// Forward simulation of the branching Levy process. Every particle moves
/// with diffusion sigma and drift a - int x_1 1{|x_1|<1} dLambda, and at
/// rate |Lambda| an atom x is drawn: the particle jumps by x_1 and children
/// appear at the pre-jump position plus x_j, j >= 2.
template <class R>
PopulationTrajectory simulate_population(const BranchingTriplet& t, const SimOptions& opt, R& rng) {
  detail::PopulationEngine eng(t, false);
  return eng.run(opt, rng);
}

// ---------------------------------------------------------------------------
// Martingale functionals, one value per snapshot.

inline std::vector<double> additive_martingale(const PopulationTrajectory& tr, double theta, double kappa_theta) {
  std::vector<double> out;
  for (const auto& s : tr.snapshots) {
    double w = 0.0;
    for (double x : s.x) w += std::exp(-theta * x - s.t * kappa_theta);
    out.push_back(w);
  }
  return out;
}

inline std::vector<double> derivative_martingale(const PopulationTrajectory& tr) {
  std::vector<double> out;
  for (const auto& s : tr.snapshots) {
    double z = 0.0;
    for (double x : s.x) z += x * std::exp(-x);
    out.push_back(z);
  }
  return out;
}

inline std::vector<double> truncated_martingale(const PopulationTrajectory& tr, const RenewalModel& R, double b) {
  if (!(b > 0.0)) throw Error("truncated martingale: b must be positive");
  std::vector<double> out;
  for (const auto& s : tr.snapshots) {
    double z = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (s.ancestral_min[i] >= -b) z += R(s.x[i] + b) * std::exp(-s.x[i]);
    }
    out.push_back(z);
  }
  return out;
}

inline std::vector<double> minimum_position(const PopulationTrajectory& tr) {
  std::vector<double> out;
  for (const auto& s : tr.snapshots) out.push_back(*std::min_element(s.x.begin(), s.x.end()));
  return out;
}

inline std::vector<double> population_size(const PopulationTrajectory& tr) {
  std::vector<double> out;
  for (const auto& s : tr.snapshots) out.push_back(static_cast<double>(s.x.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Many-to-one check.

/// Functional of a particle's path through (end position, running minimum).
using EndMinFunctional = std::function<double(double end, double min)>;

struct ManyToOneReport {
  TwoSampleReport comparison;
  double partial_fraction = 0.0;
};

/// E sum_u f(X_s(u), s <= T) from the population against E[e^{xi_T} f(xi)]
/// from the spine law, both with n replicas.
inline ManyToOneReport many_to_one_check(const BranchingTriplet& t, const EndMinFunctional& f, double T,
                                         std::size_t n, std::uint64_t seed, double dt = 1e-3,
                                         std::optional<double> reference = std::nullopt,
                                         const SimCaps& caps = {}) {
  SimOptions opt;
  opt.T = T;
  opt.dt = dt;
  opt.record_events = false;
  opt.caps = caps;
  struct Item {
    double v = 0.0;
    bool partial = false;
  };
  auto lhs = run_replicas<Item>(n, seed, [&](std::size_t, Rng& rng) {
    auto tr = simulate_population(t, opt, rng);
    if (tr.partial) return Item{0.0, true};
    double s = 0.0;
    const auto& snap = tr.snapshots.back();
    for (std::size_t i = 0; i < snap.x.size(); ++i) s += f(snap.x[i], snap.ancestral_min[i]);
    return Item{s, false};
  }, 0x4d3231);
  std::vector<double> left;
  std::size_t partial = 0;
  for (const auto& it : lhs) {
    if (it.partial) ++partial; else left.push_back(it.v);
  }
  const SpineLevyLaw law = derive_spine_law(t);
  const auto grid = uniform_grid(T, dt);
  PathOptions popt;
  popt.record_jumps = false;
  auto right = run_replicas<double>(n, seed, [&](std::size_t, Rng& rng) {
    auto p = simulate_path(law, 0.0, std::span<const double>(grid), rng, popt);
    return std::exp(p.values.back()) * f(p.values.back(), p.running_min);
  }, 0x4d3232);
  ManyToOneReport r;
  r.comparison = compare(summarize(left, reference), summarize(right, reference));
  r.partial_fraction = static_cast<double>(partial) / static_cast<double>(n);
  return r;
}

}  // namespace blp
