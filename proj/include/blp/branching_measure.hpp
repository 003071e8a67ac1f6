#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blp/numeric.hpp"
#include "blp/point_sequence.hpp"

namespace blp {

/// Parametric infinite family of cluster atoms: for n >= n_min the atom
/// x^n = (value, ..., value) (n copies) carries weight c / (n^2 (ln n)^q).
/// Simulation uses members n <= cutoff; integral tests sum to sum_cutoff
/// and then add the registered tail (or extrapolate when closed_form is off).
struct ClusterFamily {
  double c = 1.0;
  double log_power = 2.0;
  double value = 0.0;
  std::size_t n_min = 3;
  std::size_t cutoff = 10000;
  std::size_t sum_cutoff = 100000;
  bool closed_form = true;

  double weight(std::size_t n) const {
    const double ln = std::log(static_cast<double>(n));
    return c / (static_cast<double>(n) * static_cast<double>(n) * std::pow(ln, log_power));
  }

  void validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw Error("cluster family: c must be positive");
    if (!std::isfinite(log_power)) throw Error("cluster family: log_power must be finite");
    if (!std::isfinite(value)) throw Error("cluster family: value must be finite");
    if (n_min < 2) throw Error("cluster family: n_min must be >= 2");
    if (cutoff < n_min) throw Error("cluster family: cutoff below n_min");
    if (sum_cutoff < cutoff) throw Error("cluster family: sum_cutoff below cutoff");
  }
};

/// Read-only view of one atom of Lambda: either an explicit sequence or a
/// cluster of `cluster_size` copies of `cluster_value`. Sums over the
/// components never materialize a cluster.
class AtomView {
public:
  AtomView(double weight, const PointSequence& seq) : weight_(weight), seq_(&seq) {}
  AtomView(double weight, double value, std::size_t count)
      : weight_(weight), cluster_value_(value), cluster_size_(count) {}

  double weight() const { return weight_; }
  std::size_t size() const { return seq_ ? seq_->size() : cluster_size_; }
  double first() const { return seq_ ? seq_->first() : cluster_value_; }
  double at(std::size_t j) const { return seq_ ? (*seq_)[j] : cluster_value_; }

  template <class F>
  double sum(F&& g) const {
    if (!seq_) return static_cast<double>(cluster_size_) * g(cluster_value_);
    double s = 0.0;
    for (double v : seq_->atoms()) s += g(v);
    return s;
  }

  /// Sum over components j >= 2.
  template <class F>
  double sum_tail(F&& g) const {
    if (!seq_) return static_cast<double>(cluster_size_ - 1) * g(cluster_value_);
    double s = 0.0;
    auto a = seq_->atoms();
    for (std::size_t j = 1; j < a.size(); ++j) s += g(a[j]);
    return s;
  }

  PointSequence materialize() const {
    if (seq_) return *seq_;
    std::vector<double> v(cluster_size_, cluster_value_);
    return PointSequence::canonicalize(v);
  }

  double Y() const {
    return sum([](double x) { return std::exp(-x); });
  }
  double Ytilde() const {
    return sum([](double x) { return x >= 0.0 ? x * std::exp(-x) : 0.0; });
  }
  double Ybar() const { return Y() + Ytilde(); }
  double Ybar2() const {
    return sum_tail([](double x) { return (1.0 + (x >= 0.0 ? x : 0.0)) * std::exp(-x); });
  }

private:
  double weight_;
  const PointSequence* seq_ = nullptr;
  double cluster_value_ = 0.0;
  std::size_t cluster_size_ = 0;
};

struct WeightedAtom {
  double weight;
  PointSequence seq;
};

/// Finite branching measure Lambda on ranked sequences: explicit weighted
/// atoms plus an optional cluster family truncated at its cutoff.
class BranchingMeasure {
public:
  BranchingMeasure() = default;

  explicit BranchingMeasure(std::vector<WeightedAtom> atoms,
                            std::optional<ClusterFamily> family = std::nullopt)
      : family_(std::move(family)) {
    for (auto& a : atoms) {
      if (!(a.weight > 0.0) || !std::isfinite(a.weight)) {
        throw Error("branching measure: atom weights must be positive and finite");
      }
      if (a.seq.empty()) {
        throw Error("branching measure: atom sequence must contain the parent jump x1");
      }
      // (0) alone is a zero jump with no children: a no-op event.
      if (a.seq.size() == 1 && a.seq.first() == 0.0) continue;
      atoms_.push_back(std::move(a));
    }
    if (family_) family_->validate();
  }

  const std::vector<WeightedAtom>& atoms() const { return atoms_; }
  const std::optional<ClusterFamily>& family() const { return family_; }
  bool empty() const { return atoms_.empty() && !family_; }

  /// Atoms usable by the simulator: explicit ones, then family members up to cutoff.
  std::size_t atom_count() const {
    return atoms_.size() + (family_ ? family_->cutoff - family_->n_min + 1 : 0);
  }

  AtomView atom(std::size_t i) const {
    if (i < atoms_.size()) return AtomView(atoms_[i].weight, atoms_[i].seq);
    const std::size_t n = family_->n_min + (i - atoms_.size());
    return AtomView(family_->weight(n), family_->value, n);
  }

  template <class F>
  void for_each_atom(F&& fn) const {
    const std::size_t n = atom_count();
    for (std::size_t i = 0; i < n; ++i) fn(atom(i));
  }

  double total_mass() const {
    double s = 0.0;
    for_each_atom([&](const AtomView& a) { s += a.weight(); });
    return s;
  }

  /// Pushforward under x -> theta x (weights unchanged).
  BranchingMeasure scale_pushforward(double theta) const {
    if (!(theta > 0.0)) throw Error("scale_pushforward: theta must be positive");
    std::vector<WeightedAtom> out;
    out.reserve(atoms_.size());
    for (const auto& a : atoms_) out.push_back({a.weight, a.seq.scale(theta)});
    std::optional<ClusterFamily> fam = family_;
    if (fam) fam->value *= theta;
    return BranchingMeasure(std::move(out), fam);
  }

private:
  std::vector<WeightedAtom> atoms_;
  std::optional<ClusterFamily> family_;
};

struct AdmissibilityReport {
  bool ok = true;
  double value = 0.0;
  bool overflow = false;
};

/// Exponential integrability at theta:
/// sum_i w_i (e^{-theta x_1} 1{x_1 < -1} + sum_{j>=2} e^{-theta x_j}).
inline AdmissibilityReport check_admissibility(const BranchingMeasure& m, double theta,
                                               double overflow_limit = 1e300) {
  if (!(theta > 0.0)) throw Error("check_admissibility: theta must be positive");
  double s = 0.0;
  m.for_each_atom([&](const AtomView& a) {
    const double x1 = a.first();
    double term = x1 < -1.0 ? std::exp(-theta * x1) : 0.0;
    term += a.sum_tail([theta](double x) { return std::exp(-theta * x); });
    s += a.weight() * term;
  });
  AdmissibilityReport r;
  r.value = s;
  r.overflow = !std::isfinite(s) || s > overflow_limit;
  r.ok = !r.overflow;
  return r;
}

/// Exact integral sum_i w_i g(x^i) for a functional of the materialized
/// sequence. Non-finite g values surface as an infinity flag; NaN throws.
template <class G>
ExtendedValue integrate(const BranchingMeasure& m, G&& g) {
  double s = 0.0;
  int inf_sign = 0;
  m.for_each_atom([&](const AtomView& a) {
    const double v = g(a.materialize());
    if (std::isnan(v)) throw Error("integrate: functional returned NaN");
    if (std::isinf(v)) {
      const int sg = v > 0 ? 1 : -1;
      if (inf_sign != 0 && inf_sign != sg) throw Error("integrate: +inf and -inf on different atoms");
      inf_sign = sg;
      return;
    }
    s += a.weight() * v;
  });
  if (inf_sign != 0) {
    ExtendedValue e = ExtendedValue::divergent(s, 0.0);
    e.negative = inf_sign < 0;
    return e;
  }
  return ExtendedValue::finite(s);
}

// ---------------------------------------------------------------------------
// Condition (H) and its equivalent integral tests.

/// Per-atom integrands of the three forms.
struct HIntegrands {
  double h_Y = 0.0;       // Y log+(Y-1)^2
  double h_Ytilde = 0.0;  // Ytilde log+(Ytilde-1)
  double ybar_form = 0.0; // Y log+(Ybar-1)^2
  double pr_form = 0.0;   // (9/2) Y log+(Ybar-1)^2 + 3 Ytilde log+(Ybar-1)
};

inline HIntegrands h_integrands(double Y, double Yt) {
  const double Yb = Y + Yt;
  const double lY = log_plus(Y - 1.0);
  const double lYt = log_plus(Yt - 1.0);
  const double lYb = log_plus(Yb - 1.0);
  HIntegrands h;
  h.h_Y = Y * lY * lY;
  h.h_Ytilde = Yt * lYt;
  h.ybar_form = Y * lYb * lYb;
  h.pr_form = 4.5 * Y * lYb * lYb + 3.0 * Yt * lYb;
  return h;
}

inline HIntegrands h_integrands(const AtomView& a) { return h_integrands(a.Y(), a.Ytilde()); }

struct PartialSum {
  std::size_t n;
  double value;
};

struct ConditionHReport {
  ExtendedValue value_H;
  ExtendedValue value_H_Y_part;
  ExtendedValue value_H_Ytilde_part;
  ExtendedValue value_Ybar_form;
  ExtendedValue value_Pr_form;
  bool holds = true;
  /// Lambda(Ybar >= 2) and the integral of Ybar_2 that dominates it.
  double mass_Ybar_ge_2 = 0.0;
  ExtendedValue integral_Ybar2;
  /// Decade checkpoints of the family partial sums of the H integrand.
  std::vector<PartialSum> partial_sums;
  std::string tail_method;  // "none", "closed_form" or "extrapolated"
};

namespace detail {

/// Sum over n > N of c (ln(n-1))^power / (n (ln n)^q), bracketed by the
/// integral test.
/// Returns {estimate, half-width} or nullopt when the tail diverges.
inline std::optional<std::pair<double, double>> cluster_log_tail(double c, double q, double power,
                                                                 double N) {
  const double e = power - q;  // integrand (ln x)^e / x
  if (e >= -1.0) return std::nullopt;
  const double k = -(e + 1.0);  // > 0
  const double upper = c * std::pow(std::log(N), -k) / k;
  const double shrink = std::pow(1.0 - 1.0 / (N * std::log(N)), power);
  const double lower = shrink * c * std::pow(std::log(N + 1.0), -k) / k;
  return std::make_pair(0.5 * (upper + lower), 0.5 * (upper - lower));
}

/// Geometric extrapolation of a partial-sum series from decade increments.
inline ExtendedValue extrapolate(const std::vector<PartialSum>& ps) {
  const std::size_t m = ps.size();
  if (m < 3) return ExtendedValue::finite(ps.empty() ? 0.0 : ps.back().value);
  const double d1 = ps[m - 2].value - ps[m - 3].value;
  const double d2 = ps[m - 1].value - ps[m - 2].value;
  const double last = ps.back().value;
  if (d2 <= 0.0) return ExtendedValue::finite(last);
  const double ratio = d1 > 0.0 ? d2 / d1 : 1.0;
  if (ratio >= 0.9) return ExtendedValue::divergent(last, d2 / std::log(10.0));
  const double tail = d2 * ratio / (1.0 - ratio);
  return ExtendedValue::finite(last + tail, tail);
}

}  // namespace detail

/// Evaluates (H) together with its Ybar form and the double-integral form.
/// Requires Lambda admissible at theta = 1.
inline ConditionHReport condition_H(const BranchingMeasure& m) {
  if (!check_admissibility(m, 1.0).ok) throw Error("condition_H: measure not admissible at theta = 1");

  double hY = 0.0, hYt = 0.0, yb = 0.0, pr = 0.0, yb2 = 0.0, massB = 0.0;
  auto add = [&](double w, double Y, double Yt, double Ybar2) {
    const HIntegrands h = h_integrands(Y, Yt);
    hY += w * h.h_Y;
    hYt += w * h.h_Ytilde;
    yb += w * h.ybar_form;
    pr += w * h.pr_form;
    yb2 += w * Ybar2;
    if (Y + Yt >= 2.0) massB += w;
  };
  for (const auto& a : m.atoms()) {
    AtomView v(a.weight, a.seq);
    add(a.weight, v.Y(), v.Ytilde(), v.Ybar2());
  }

  ConditionHReport r;
  r.tail_method = "none";
  if (!m.family()) {
    r.value_H = ExtendedValue::finite(hY + hYt);
    r.value_H_Y_part = ExtendedValue::finite(hY);
    r.value_H_Ytilde_part = ExtendedValue::finite(hYt);
    r.value_Ybar_form = ExtendedValue::finite(yb);
    r.value_Pr_form = ExtendedValue::finite(pr);
    r.integral_Ybar2 = ExtendedValue::finite(yb2);
    r.mass_Ybar_ge_2 = massB;
    r.holds = true;
    return r;
  }

  const ClusterFamily& f = *m.family();
  const double ev = std::exp(-f.value);
  const double tv = f.value >= 0.0 ? f.value * ev : 0.0;
  std::vector<PartialSum> psY, psYt, psYb, psPr, psYb2;
  std::size_t next_checkpoint = 1000;
  while (next_checkpoint < f.n_min) next_checkpoint *= 10;
  for (std::size_t n = f.n_min; n <= f.sum_cutoff; ++n) {
    const double nn = static_cast<double>(n);
    add(f.weight(n), nn * ev, nn * tv, (nn - 1.0) * (ev + tv));
    if (n == next_checkpoint || n == f.sum_cutoff) {
      psY.push_back({n, hY});
      psYt.push_back({n, hYt});
      psYb.push_back({n, yb});
      psPr.push_back({n, pr});
      psYb2.push_back({n, yb2});
      if (n == next_checkpoint) next_checkpoint *= 10;
    }
  }
  r.mass_Ybar_ge_2 = massB;
  for (std::size_t k = 0; k < psY.size(); ++k) {
    r.partial_sums.push_back({psY[k].n, psY[k].value + psYt[k].value});
  }

  const double N = static_cast<double>(f.sum_cutoff);
  if (f.closed_form && f.value == 0.0) {
    // Zero clusters: Y = Ybar = n, Ytilde = 0, so the H and Ybar integrands
    // are c ln(n-1)^2 / (n (ln n)^q) and the double-integral form is 9/2 of it.
    r.tail_method = "closed_form";
    auto t = detail::cluster_log_tail(f.c, f.log_power, 2.0, N);
    if (t) {
      r.value_H_Y_part = ExtendedValue::finite(hY + t->first, t->second);
      r.value_Ybar_form = ExtendedValue::finite(yb + t->first, t->second);
      r.value_Pr_form = ExtendedValue::finite(pr + 4.5 * t->first, 4.5 * t->second);
    } else {
      r.value_H_Y_part = ExtendedValue::divergent(hY, f.c);
      r.value_Ybar_form = ExtendedValue::divergent(yb, f.c);
      r.value_Pr_form = ExtendedValue::divergent(pr, 4.5 * f.c);
    }
    r.value_H_Ytilde_part = ExtendedValue::finite(hYt);
    // Ybar_2 = n - 1: tail below c (ln N)^{1-q} / (q-1).
    if (f.log_power > 1.0) {
      const double tail = f.c * std::pow(std::log(N), 1.0 - f.log_power) / (f.log_power - 1.0);
      r.integral_Ybar2 = ExtendedValue::finite(yb2 + tail, tail);
    } else {
      r.integral_Ybar2 = ExtendedValue::divergent(yb2, f.c);
    }
  } else {
    r.tail_method = "extrapolated";
    r.value_H_Y_part = detail::extrapolate(psY);
    r.value_H_Ytilde_part = detail::extrapolate(psYt);
    r.value_Ybar_form = detail::extrapolate(psYb);
    r.value_Pr_form = detail::extrapolate(psPr);
    r.integral_Ybar2 = detail::extrapolate(psYb2);
  }
  const ExtendedValue& a = r.value_H_Y_part;
  const ExtendedValue& b = r.value_H_Ytilde_part;
  if (a.infinite || b.infinite) {
    r.value_H = ExtendedValue::divergent(hY + hYt, a.growth_rate + b.growth_rate);
  } else {
    r.value_H = ExtendedValue::finite(a.value + b.value, a.error_bound + b.error_bound);
  }
  r.holds = r.value_H.is_finite();
  return r;
}

}  // namespace blp
