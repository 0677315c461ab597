#include "covert_lab/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <queue>
#include <sstream>
#include <vector>

namespace covert {

namespace {

struct Panel {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

}  // namespace

QuadratureResult integrate_half_line(const std::function<double(double)>& f,
                                     const QuadratureOptions& options) {
  bool bad_value = false;
  auto mapped = [&](double u) -> double {
    const double one_minus = 1.0 - u;
    const double y = f(u / one_minus) / (one_minus * one_minus);
    if (!std::isfinite(y)) {
      bad_value = true;
      return 0.0;
    }
    return y;
  };
  auto panel = [&](double a, double b) {
    double err = 0.0;
    // max_depth = 0: a single 15-point Kronrod evaluation with its embedded
    // 7-point Gauss error estimate. The reported estimate is for the rule on
    // [-1, 1] and must be scaled by the half-width.
    const double v =
        boost::math::quadrature::gauss_kronrod<double, 15>::integrate(mapped, a, b, 0, 0.0, &err);
    return Panel{a, b, v, err * 0.5 * (b - a)};
  };

  std::priority_queue<Panel> heap;
  double value = 0.0;
  double error = 0.0;
  // Start from a few panels so that mass near x = 0 and x -> inf is seen.
  constexpr double kEdges[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int i = 0; i < 4; ++i) {
    Panel p = panel(kEdges[i], kEdges[i + 1]);
    value += p.value;
    error += p.error;
    heap.push(p);
  }

  while (!bad_value && error > std::max(options.abs_tol, options.rel_tol * std::abs(value))) {
    if (heap.size() >= options.max_intervals) {
      std::ostringstream os;
      os << "quadrature did not converge: error estimate " << error << " after "
         << heap.size() << " intervals";
      throw QuadratureError(os.str());
    }
    const Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Panel left = panel(worst.a, mid);
    const Panel right = panel(mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  if (bad_value) throw QuadratureError("quadrature: integrand is not finite on (0, inf)");

  // Re-sum to shed drift from the incremental updates.
  value = 0.0;
  error = 0.0;
  const std::size_t n = heap.size();
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  return {value, error, n};
}

}  // namespace covert
