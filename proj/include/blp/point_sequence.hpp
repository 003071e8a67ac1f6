#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <span>
#include <vector>

#include "blp/numeric.hpp"

namespace blp {

/// A ranked displacement sequence x = (x_1 <= x_2 <= ...). Positions beyond
/// the stored atoms are the cemetery state and carry no mass, so the empty
/// sequence is the pure-cemetery point. Duplicates are multiplicities.
class PointSequence {
public:
  PointSequence() = default;

  /// Sorts `values` into ranked form. Throws on non-finite input.
  static PointSequence canonicalize(std::span<const double> values) {
    PointSequence x;
    x.atoms_.assign(values.begin(), values.end());
    for (double v : x.atoms_) {
      if (!std::isfinite(v)) throw Error("point sequence: non-finite displacement");
    }
    std::sort(x.atoms_.begin(), x.atoms_.end());
    return x;
  }
  static PointSequence canonicalize(std::initializer_list<double> values) {
    return canonicalize(std::span<const double>(values.begin(), values.size()));
  }

  PointSequence translate(double y) const {
    PointSequence out = *this;
    for (double& v : out.atoms_) v += y;
    return out;
  }

  /// Component-wise multiplication by theta > 0 (keeps the ordering).
  PointSequence scale(double theta) const {
    PointSequence out = *this;
    for (double& v : out.atoms_) v *= theta;
    return out;
  }

  std::span<const double> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double operator[](std::size_t i) const { return atoms_[i]; }
  /// Parent jump x_1. Precondition: non-empty.
  double first() const { return atoms_.front(); }

  friend bool operator==(const PointSequence&, const PointSequence&) = default;

private:
  std::vector<double> atoms_;
};

/// Y(x) = sum_i e^{-x_i}.
inline double functional_Y(const PointSequence& x) {
  double s = 0.0;
  for (double v : x.atoms()) s += std::exp(-v);
  return s;
}

/// Ytilde(x) = sum_i 1{x_i >= 0} x_i e^{-x_i}.
inline double functional_Ytilde(const PointSequence& x) {
  double s = 0.0;
  for (double v : x.atoms()) {
    if (v >= 0.0) s += v * std::exp(-v);
  }
  return s;
}

/// Ybar(x) = sum_i (1 + x_i 1{x_i >= 0}) e^{-x_i} = Y(x) + Ytilde(x).
inline double functional_Ybar(const PointSequence& x) {
  return functional_Y(x) + functional_Ytilde(x);
}

/// Ybar_2(x) = sum_{k >= 2} (1 + x_k 1{x_k >= 0}) e^{-x_k}.
inline double functional_Ybar2(const PointSequence& x) {
  double s = 0.0;
  auto a = x.atoms();
  for (std::size_t k = 1; k < a.size(); ++k) {
    s += (1.0 + (a[k] >= 0.0 ? a[k] : 0.0)) * std::exp(-a[k]);
  }
  return s;
}

}  // namespace blp
