#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace blp {

/// Welford accumulator.
class RunningStats {
public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double se() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct StatReport {
  double estimate = 0.0;
  double se = 0.0;
  std::optional<double> reference;
  std::optional<double> z;
  std::size_t replicas = 0;
  double partial_fraction = 0.0;

  bool within(double k_se = 3.0) const { return z && std::abs(*z) <= k_se; }
};

inline StatReport summarize(std::span<const double> xs, std::optional<double> reference = std::nullopt) {
  RunningStats s;
  for (double x : xs) s.add(x);
  StatReport r;
  r.estimate = s.mean();
  r.se = s.se();
  r.replicas = s.count();
  r.reference = reference;
  if (reference) {
    const double diff = r.estimate - *reference;
    r.z = r.se > 0.0 ? diff / r.se : (diff == 0.0 ? 0.0 : INFINITY);
  }
  return r;
}

/// Two independent estimators of the same quantity.
struct TwoSampleReport {
  StatReport left;
  StatReport right;
  double combined_se = 0.0;
  double z = 0.0;
  bool within(double k_se = 3.0) const { return std::abs(z) <= k_se; }
};

inline TwoSampleReport compare(const StatReport& left, const StatReport& right) {
  TwoSampleReport r{left, right, std::hypot(left.se, right.se), 0.0};
  const double diff = left.estimate - right.estimate;
  r.z = r.combined_se > 0.0 ? diff / r.combined_se : (diff == 0.0 ? 0.0 : INFINITY);
  return r;
}

/// Effective sample size (sum w)^2 / sum w^2.
inline double effective_sample_size(std::span<const double> w) {
  double s = 0.0, s2 = 0.0;
  for (double x : w) {
    s += x;
    s2 += x * x;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

inline double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) return NAN;
  std::sort(xs.begin(), xs.end());
  const double pos = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

}  // namespace blp
