#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace blp {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// max(0, ln x), with log_plus(0) = 0.
inline double log_plus(double x) {
  if (!(x > 1.0)) return 0.0;
  return std::log(x);
}

/// A non-negative quantity that may be +infinity. Infinity is carried as an
/// explicit flag together with partial-sum diagnostics; `value` then holds
/// the last partial sum rather than an overflowed float.
struct ExtendedValue {
  double value = 0.0;
  bool infinite = false;
  bool negative = false;  // only meaningful when infinite
  double last_partial_sum = 0.0;
  double growth_rate = 0.0;  // per unit of ln(N) when a partial-sum series was used
  double error_bound = 0.0;  // bound on |value - true value| when finite and extrapolated

  static ExtendedValue finite(double v, double err = 0.0) {
    ExtendedValue e;
    e.value = v;
    e.last_partial_sum = v;
    e.error_bound = err;
    return e;
  }
  static ExtendedValue divergent(double partial, double growth) {
    ExtendedValue e;
    e.value = partial;
    e.infinite = true;
    e.last_partial_sum = partial;
    e.growth_rate = growth;
    return e;
  }
  bool is_finite() const { return !infinite; }
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace blp
