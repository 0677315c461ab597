#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>

namespace covert {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureResult {
  double value;
  double error;  // sum of |K15 - G7| over the final partition
  std::size_t intervals;
};

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-12;
  std::size_t max_intervals = 4000;
};

/// Globally adaptive Gauss-Kronrod (7/15) over (0, inf) after mapping
/// x = u/(1-u) onto (0, 1): the interval with the largest error estimate is
/// bisected until the total estimate drops below
/// max(abs_tol, rel_tol * |value|). Throws QuadratureError if the interval
/// budget runs out or the integrand produces non-finite values.
QuadratureResult integrate_half_line(const std::function<double(double)>& f,
                                     const QuadratureOptions& options = {});

}  // namespace covert
