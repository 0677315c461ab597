#include "covert_lab/covert_stats.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "covert_lab/quadrature.hpp"

namespace covert {

namespace {

constexpr double kClampTolerance = 1e-12;

// x - ln(1 + x) without cancellation for small x.
double x_minus_log1p(double x) {
  if (std::abs(x) < 1e-2) {
    double term = x * x;
    double sum = 0.0;
    for (int k = 2; k < 40; ++k) {
      const double add = (k % 2 == 0 ? 1.0 : -1.0) * term / k;
      sum += add;
      if (std::abs(add) < 1e-18 * std::abs(sum)) break;
      term *= x;
    }
    return sum;
  }
  return x - std::log1p(x);
}

double clamp_kl(double value, const char* where) {
  if (value < 0.0) {
    if (value < -kClampTolerance) {
      std::ostringstream os;
      os << where << ": negative relative entropy " << value << " (quadrature failure)";
      throw QuadratureError(os.str());
    }
    return 0.0;
  }
  return value;
}

void require_rho(double rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("rho must lie in (0, 1)");
  }
}

}  // namespace

std::string_view kl_method_name(KlMethod m) noexcept {
  return m == KlMethod::kClosedForm ? "closed-form" : "quadrature";
}

std::string_view verdict_name(Verdict v) noexcept {
  switch (v) {
    case Verdict::kAnalyticPass: return "analytic-pass";
    case Verdict::kNumericPass: return "numeric-pass";
    case Verdict::kFail: return "fail";
    case Verdict::kUnchecked: return "unchecked";
  }
  return "unchecked";
}

PoissonKl kl_poisson_counts(double lambda, double delta, double horizon) {
  if (!(lambda > 0.0) || !(delta >= 0.0) || !(horizon > 0.0) || !std::isfinite(lambda) ||
      !std::isfinite(delta) || !std::isfinite(horizon)) {
    throw std::invalid_argument("kl_poisson_counts: need lambda > 0, delta >= 0, T > 0");
  }
  // delta T - lambda T ln(1 + delta/lambda) = lambda T (x - ln(1 + x))
  const double x = delta / lambda;
  const double value = lambda * horizon * x_minus_log1p(x);
  return {{std::max(0.0, value), KlMethod::kClosedForm, 0.0},
          delta * delta * horizon / (2.0 * lambda)};
}

double fisher_constant_c_analytic(const IpdDistribution& dist) {
  // With Y = (X/a)^p ~ Gamma(d/p, 1): X p'(X)/p(X) = (d - 1) - p Y, whose
  // second moment is 1 + p d.
  return dist.gg().p * dist.gg().d;
}

double fisher_constant_c_quadrature(const IpdDistribution& dist) {
  const auto result = integrate_half_line([&](double x) {
    const double px = dist.density(x);
    if (px == 0.0) return 0.0;
    const double xs = dist.x_score(x);
    return px * xs * xs;
  });
  return result.value - 1.0;
}

double fisher_constant_c(const IpdDistribution& dist) {
  const double analytic = fisher_constant_c_analytic(dist);
  const double numeric = fisher_constant_c_quadrature(dist);
  if (std::abs(analytic - numeric) > 1e-6) {
    std::ostringstream os;
    os.precision(12);
    os << "fisher_constant_c: analytic " << analytic << " and quadrature " << numeric
       << " disagree for " << dist.describe();
    throw std::runtime_error(os.str());
  }
  return analytic;
}

KlResult kl_scaled_renewal(const IpdDistribution& dist, double rho) {
  require_rho(rho);
  const double log_shrink = std::log1p(-rho);
  const double shrink = 1.0 - rho;
  // The divergence is O(rho^2); an absolute target near 1e-10 would swamp
  // it for small rho.
  const QuadratureOptions options{1e-15, 1e-10, 8000};
  const auto result = integrate_half_line([&](double x) {
    const double lp = dist.log_density(x);
    const double px = std::exp(lp);
    if (px == 0.0) return 0.0;
    return px * (lp - log_shrink - dist.log_density(shrink * x));
  }, options);
  return {clamp_kl(result.value, "kl_scaled_renewal"), KlMethod::kQuadrature, result.error};
}

KlResult kl_scaled_renewal_closed_form(const IpdDistribution& dist, double rho) {
  require_rho(rho);
  const auto& g = dist.gg();
  const double log_shrink = std::log1p(-rho);
  // E[(X/a)^p] = d/p and (1 - rho)^p - 1 = expm1(p ln(1 - rho)).
  const double value = -g.d * log_shrink + (g.d / g.p) * std::expm1(g.p * log_shrink);
  return {clamp_kl(value, "kl_scaled_renewal_closed_form"), KlMethod::kClosedForm, 0.0};
}

double covertness_lower_bound(double kl) {
  if (!(kl >= 0.0)) throw std::invalid_argument("covertness_lower_bound: kl must be >= 0");
  return std::max(0.0, 1.0 - std::sqrt(kl / 2.0));
}

RegularityReport check_regularity(const IpdDistribution& dist) {
  RegularityReport report;
  report.c1 = Verdict::kAnalyticPass;
  report.c2 = Verdict::kAnalyticPass;

  // d/drho p-(x, rho) at 0 = -p - x p'
  // d2/drho2 p-(x, rho) at 0 = 2 x p' + x^2 p''
  const auto first = integrate_half_line([&](double x) {
    const double px = dist.density(x);
    if (px == 0.0) return 0.0;
    return -px * (1.0 + dist.x_score(x));
  });
  const auto second = integrate_half_line([&](double x) {
    const double px = dist.density(x);
    if (px == 0.0) return 0.0;
    const double xs = dist.x_score(x);
    return px * (2.0 * xs + xs * xs + dist.x2_score_derivative(x));
  });
  report.first_derivative_integral = first.value;
  report.second_derivative_integral = second.value;
  report.residual = std::max(std::abs(first.value), std::abs(second.value));
  report.c3 = report.residual < kRegularityTolerance ? Verdict::kNumericPass : Verdict::kFail;
  return report;
}

RegularityReport check_regularity(const std::function<double(double)>& density, double step) {
  if (!(step > 0.0 && step < 0.1)) throw std::invalid_argument("check_regularity: bad step");
  RegularityReport report;

  auto scaled = [&](double x, double rho) { return (1.0 - rho) * density((1.0 - rho) * x); };

  // Returns {first, second} rho-derivative at rho = 0.
  auto derivatives = [&](double x) -> std::pair<double, double> {
    const double q0 = density(x);
    if (q0 == 0.0) return {0.0, 0.0};
    const double h = step;
    const double qp = scaled(x, h);
    const double qm = scaled(x, -h);
    if (qp > 0.0 && qm > 0.0) {
      return {(qp - qm) / (2.0 * h), (qp - 2.0 * q0 + qm) / (h * h)};
    }
    if (qp > 0.0) {
      const double qpp = scaled(x, 2.0 * h);
      return {(qp - q0) / h, qpp > 0.0 ? (q0 - 2.0 * qp + qpp) / (h * h) : 0.0};
    }
    if (qm > 0.0) {
      const double qmm = scaled(x, -2.0 * h);
      return {(q0 - qm) / h, qmm > 0.0 ? (q0 - 2.0 * qm + qmm) / (h * h) : 0.0};
    }
    return {0.0, 0.0};
  };

  // Difference quotients carry O(eps / h^2) rounding noise, so the
  // quadrature target is correspondingly looser than the analytic route.
  const QuadratureOptions loose{1e-7, 1e-7, 8000};
  try {
    const auto first = integrate_half_line([&](double x) { return derivatives(x).first; }, loose);
    const auto second =
        integrate_half_line([&](double x) { return derivatives(x).second; }, loose);
    report.first_derivative_integral = first.value;
    report.second_derivative_integral = second.value;
    report.residual = std::max(std::abs(first.value), std::abs(second.value));
    report.c3 = report.residual < kRegularityTolerance ? Verdict::kNumericPass : Verdict::kFail;
  } catch (const QuadratureError&) {
    report.c3 = Verdict::kFail;
    report.residual = std::numeric_limits<double>::infinity();
  }
  return report;
}

}  // namespace covert
