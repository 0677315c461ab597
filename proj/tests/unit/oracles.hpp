#pragma once

// Test-only reference computations. Nothing here calls into the library's
// quadrature or closed forms.

#include <cmath>
#include <cstddef>
#include <functional>

namespace oracle {

/// Composite Simpson on [a, b] with `panels` (even) subintervals.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      std::size_t panels) {
  if (panels % 2 == 1) ++panels;
  const double h = (b - a) / static_cast<double>(panels);
  double odd = 0.0, even = 0.0;
  for (std::size_t i = 1; i < panels; ++i) {
    const double v = f(a + h * static_cast<double>(i));
    (i % 2 == 1 ? odd : even) += v;
  }
  return h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

/// Log density and its x-derivative for Gamma(shape k, scale 1).
struct GammaUnit {
  double k;
  double log_pdf(double x) const { return (k - 1.0) * std::log(x) - x - std::lgamma(k); }
  double dlog(double x) const { return (k - 1.0) / x - 1.0; }
};

/// Weibull(shape k, scale 1).
struct WeibullUnit {
  double k;
  double log_pdf(double x) const {
    return std::log(k) + (k - 1.0) * std::log(x) - std::pow(x, k);
  }
  double dlog(double x) const { return (k - 1.0) / x - k * std::pow(x, k - 1.0); }
};

/// -1 + E[(X dlog p(X))^2] by Simpson on (0, upper]; the left endpoint is
/// nudged off zero where the integrand is only defined as a limit.
template <typename Law>
double fisher_c(const Law& law, double upper, std::size_t panels) {
  auto f = [&](double x) {
    if (x <= 0.0) x = 1e-300;
    const double xs = x * law.dlog(x);
    return xs * xs * std::exp(law.log_pdf(x));
  };
  return simpson(f, 0.0, upper, panels) - 1.0;
}

/// D(p || p-) with p-(x) = (1 - rho) p((1 - rho) x).
template <typename Law>
double kl_scaled(const Law& law, double rho, double upper, std::size_t panels) {
  auto f = [&](double x) {
    if (x <= 0.0) x = 1e-300;
    const double lp = law.log_pdf(x);
    const double lq = std::log1p(-rho) + law.log_pdf((1.0 - rho) * x);
    return std::exp(lp) * (lp - lq);
  };
  return simpson(f, 0.0, upper, panels);
}

}  // namespace oracle
