#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "blp/cumulant.hpp"
#include "blp/numeric.hpp"
#include "blp/replicas.hpp"

namespace blp {

struct JumpAtom {
  double rate;
  double size;
};

/// Law of the spine xi: Gaussian part sigma^2, drift a_hat and finite jump
/// measure pi. Jumps with |size| < 1 are compensated, larger ones are not.
struct SpineLevyLaw {
  double sigma2 = 0.0;
  double a_hat = 0.0;
  std::vector<JumpAtom> jumps;

  double total_rate() const {
    double s = 0.0;
    for (const auto& j : jumps) s += j.rate;
    return s;
  }
  /// Drift of the simulated motion between jumps.
  double effective_drift() const {
    double d = a_hat;
    for (const auto& j : jumps) {
      if (std::abs(j.size) < 1.0) d -= j.rate * j.size;
    }
    return d;
  }
  double mean() const {
    double m = effective_drift();
    for (const auto& j : jumps) m += j.rate * j.size;
    return m;
  }
  double variance() const {
    double v = sigma2;
    for (const auto& j : jumps) v += j.rate * j.size * j.size;
    return v;
  }
  bool is_brownian() const { return jumps.empty(); }
};

/// Many-to-one law: a_hat = a - sigma^2 + int (sum_j x_j e^{-x_j} 1{|x_j|<1}
/// - x_1 1{|x_1|<1}) dLambda and pi = sum_j e^{-x_j} delta_{x_j} under Lambda.
/// Equal sizes are merged and zero-size jumps dropped.
inline SpineLevyLaw derive_spine_law(const BranchingTriplet& t) {
  if (!check_admissibility(t.measure, 1.0).ok) throw Error("derive_spine_law: not admissible at 1");
  SpineLevyLaw law;
  law.sigma2 = t.sigma2;
  double a_hat = t.a - t.sigma2;
  std::map<double, double> rates;
  t.measure.for_each_atom([&](const AtomView& at) {
    a_hat += at.weight() * (at.sum([](double x) { return detail::small_jump(x) * std::exp(-x); }) -
                            detail::small_jump(at.first()));
    if (at.size() > 0 && at.at(0) == at.at(at.size() - 1)) {
      const double x = at.first();
      rates[x] += at.weight() * static_cast<double>(at.size()) * std::exp(-x);
    } else {
      for (std::size_t j = 0; j < at.size(); ++j) rates[at.at(j)] += at.weight() * std::exp(-at.at(j));
    }
  });
  law.a_hat = a_hat;
  for (const auto& [size, rate] : rates) {
    if (size != 0.0) law.jumps.push_back({rate, size});
  }
  return law;
}

/// Psi(r) = kappa(1 + i r) written with the spine law:
///   -sigma^2 r^2/2 - i a_hat r + sum rate (e^{-i r x} - 1 + i r x 1{|x|<1}),
/// i.e. Psi(r) = log E[e^{-i r xi_1}].
inline std::complex<double> psi(const SpineLevyLaw& law, double r) {
  using namespace std::complex_literals;
  std::complex<double> s = -0.5 * law.sigma2 * r * r - 1i * law.a_hat * r;
  for (const auto& j : law.jumps) {
    s += j.rate * (std::exp(-1i * r * j.size) - 1.0 + 1i * r * detail::small_jump(j.size));
  }
  return s;
}

/// Discrete sampler over non-negative weights by inverse CDF.
class CumulativeSampler {
public:
  CumulativeSampler() = default;
  explicit CumulativeSampler(std::span<const double> weights) {
    cum_.reserve(weights.size());
    double s = 0.0;
    for (double w : weights) {
      s += w;
      cum_.push_back(s);
    }
  }
  double total() const { return cum_.empty() ? 0.0 : cum_.back(); }
  std::size_t size() const { return cum_.size(); }
  template <class R>
  std::size_t operator()(R& rng) const {
    std::uniform_real_distribution<double> u(0.0, total());
    const double v = u(rng);
    auto it = std::upper_bound(cum_.begin(), cum_.end(), v);
    if (it == cum_.end()) --it;
    return static_cast<std::size_t>(it - cum_.begin());
  }

private:
  std::vector<double> cum_;
};

/// Minimum of a Brownian bridge from y0 to y1 over a span of length h with
/// variance sigma2 per unit time, drawn exactly by inversion.
template <class R>
double bridge_minimum(double y0, double y1, double sigma2, double h, R& rng) {
  if (!(sigma2 > 0.0) || !(h > 0.0)) return std::min(y0, y1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double u = 1.0 - u01(rng);  // (0, 1]
  const double d = y1 - y0;
  return 0.5 * (y0 + y1 - std::sqrt(d * d - 2.0 * sigma2 * h * std::log(u)));
}

struct LevyPath {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> minima;  // running minimum up to each grid time
  std::vector<std::pair<double, double>> jumps;
  double running_min = 0.0;
  bool stopped = false;  // simulation halted early after crossing stop level
};

struct PathOptions {
  /// Exact bridge minimum between monitoring points (only matters when sigma2 > 0).
  bool bridge_minimum = true;
  bool record_jumps = true;
  /// Halt once the running minimum drops below this level.
  std::optional<double> stop_below;
};

/// Lightweight stepper used by every simulator in the library: Gaussian
/// part over sub-intervals split at exact exponential jump times.
class LevyStepper {
public:
  explicit LevyStepper(const SpineLevyLaw& law) : law_(&law), drift_(law.effective_drift()) {
    std::vector<double> rates;
    for (const auto& j : law.jumps) rates.push_back(j.rate);
    sampler_ = CumulativeSampler(rates);
    rate_ = sampler_.total();
    sd_ = std::sqrt(law.sigma2);
  }

  const SpineLevyLaw& law() const { return *law_; }

  /// Advances (y, running_min) over a span of length h; on_jump(offset, size)
  /// fires after each jump.
  template <class R, class OnJump>
  void advance(double& y, double& running_min, double h, bool bridge, R& rng, OnJump&& on_jump) {
    if (rate_ <= 0.0) {
      move(y, running_min, h, bridge, rng);
      return;
    }
    std::exponential_distribution<double> expo(rate_);
    double elapsed = 0.0;
    for (;;) {
      const double wait = expo(rng);
      if (wait >= h - elapsed) {
        move(y, running_min, h - elapsed, bridge, rng);
        return;
      }
      move(y, running_min, wait, bridge, rng);
      elapsed += wait;
      const double size = law_->jumps[sampler_(rng)].size;
      y += size;
      running_min = std::min(running_min, y);
      on_jump(elapsed, size);
    }
  }

  template <class R>
  void move(double& y, double& running_min, double seg, bool bridge, R& rng) {
    if (seg <= 0.0) return;
    const double y0 = y;
    y += drift_ * seg;
    if (sd_ > 0.0) {
      std::normal_distribution<double> g(0.0, sd_ * std::sqrt(seg));
      y += g(rng);
    }
    const double m = bridge ? bridge_minimum(y0, y, law_->sigma2, seg, rng) : std::min(y0, y);
    running_min = std::min(running_min, m);
  }

private:
  const SpineLevyLaw* law_;
  CumulativeSampler sampler_;
  double rate_ = 0.0;
  double drift_ = 0.0;
  double sd_ = 0.0;
};

inline std::vector<double> uniform_grid(double T, double dt) {
  if (!(dt > 0.0)) throw Error("grid: dt must be positive");
  if (!(T >= 0.0)) throw Error("grid: T must be non-negative");
  const auto k = static_cast<std::size_t>(std::llround(std::ceil(T / dt - 1e-9)));
  std::vector<double> g(k + 1);
  for (std::size_t i = 0; i <= k; ++i) g[i] = std::min(T, static_cast<double>(i) * dt);
  return g;
}

/// Simulates x0 + xi on the given grid (first point is time 0).
template <class R>
LevyPath simulate_path(const SpineLevyLaw& law, double x0, std::span<const double> grid, R& rng,
                       const PathOptions& opt = {}) {
  LevyStepper stepper(law);
  LevyPath p;
  double y = x0;
  double m = x0;
  p.times.reserve(grid.size());
  p.values.reserve(grid.size());
  p.minima.reserve(grid.size());
  p.times.push_back(grid.empty() ? 0.0 : grid[0]);
  p.values.push_back(y);
  p.minima.push_back(m);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double t0 = grid[k - 1];
    const double h = grid[k] - t0;
    stepper.advance(y, m, h, opt.bridge_minimum, rng, [&](double off, double size) {
      if (opt.record_jumps) p.jumps.emplace_back(t0 + off, size);
    });
    p.times.push_back(grid[k]);
    p.values.push_back(y);
    p.minima.push_back(m);
    if (opt.stop_below && m < *opt.stop_below) {
      p.stopped = true;
      break;
    }
  }
  p.running_min = m;
  return p;
}

template <class R>
LevyPath simulate_path(const SpineLevyLaw& law, double x0, double T, double dt, R& rng,
                       const PathOptions& opt = {}) {
  const auto grid = uniform_grid(T, dt);
  return simulate_path(law, x0, std::span<const double>(grid), rng, opt);
}

/// Exact Bessel(3) sampler on a grid: norm of a 3-d Brownian motion with
/// per-coordinate variance sigma2 started at (x0, 0, 0). This is Brownian
/// motion conditioned to stay positive. Minima are taken over grid points.
template <class R>
LevyPath simulate_bessel3(double sigma2, double x0, std::span<const double> grid, R& rng) {
  LevyPath p;
  double c[3] = {x0, 0.0, 0.0};
  std::normal_distribution<double> g(0.0, 1.0);
  const double sd = std::sqrt(sigma2);
  double m = x0;
  p.times.push_back(grid.empty() ? 0.0 : grid[0]);
  p.values.push_back(x0);
  p.minima.push_back(m);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double s = sd * std::sqrt(grid[k] - grid[k - 1]);
    for (double& ci : c) ci += s * g(rng);
    const double r = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
    m = std::min(m, r);
    p.times.push_back(grid[k]);
    p.values.push_back(r);
    p.minima.push_back(m);
  }
  p.running_min = m;
  return p;
}

}  // namespace blp
