#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include "covert_lab/ipd_distribution.hpp"

namespace covert {

enum class KlMethod { kClosedForm, kQuadrature };
std::string_view kl_method_name(KlMethod m) noexcept;

/// Relative entropy in nats. Values within 1e-12 of zero from below are
/// clamped to zero.
struct KlResult {
  double value;
  KlMethod method;
  double error;
};

/// D(Poisson(lambda T) || Poisson((lambda + delta) T)) together with the
/// second-order upper bound delta^2 T / (2 lambda).
struct PoissonKl {
  KlResult kl;
  double upper_bound;
};

PoissonKl kl_poisson_counts(double lambda, double delta, double horizon);

/// c = -1 + E[(X d/dx log p(X))^2], the Fisher information of the family
/// under the time-scaling perturbation.
double fisher_constant_c_analytic(const IpdDistribution& dist);
double fisher_constant_c_quadrature(const IpdDistribution& dist);
/// Analytic value, cross-checked against quadrature; throws
/// std::runtime_error if the two disagree by more than 1e-6.
double fisher_constant_c(const IpdDistribution& dist);

/// D(p || p-) with p-(x) = (1 - rho) p((1 - rho) x), by quadrature.
KlResult kl_scaled_renewal(const IpdDistribution& dist, double rho);
/// Exact value for the generalized gamma class:
/// -d ln(1 - rho) - (d / p) (1 - (1 - rho)^p).
KlResult kl_scaled_renewal_closed_form(const IpdDistribution& dist, double rho);

/// max(0, 1 - sqrt(kl / 2)): lower bound on P_FA + P_MD for any test.
double covertness_lower_bound(double kl);

enum class Verdict { kAnalyticPass, kNumericPass, kFail, kUnchecked };
std::string_view verdict_name(Verdict v) noexcept;

struct RegularityReport {
  Verdict c1 = Verdict::kUnchecked;
  Verdict c2 = Verdict::kUnchecked;
  Verdict c3 = Verdict::kUnchecked;
  /// Integrals of the first and second rho-derivatives of p- at rho = 0.
  double first_derivative_integral = 0.0;
  double second_derivative_integral = 0.0;
  double residual = 0.0;
};

inline constexpr double kRegularityTolerance = 1e-6;

/// Families in scope are all members of the generalized gamma class, so
/// the differentiability and domination conditions are certified
/// analytically; the zero-mean condition on the derivatives is checked by
/// quadrature using the analytic derivatives.
RegularityReport check_regularity(const IpdDistribution& dist);

/// Numeric-only check for an arbitrary density on (0, inf). rho-derivatives
/// come from central differences with step `step`; stencils that leave the
/// support fall back to one-sided differences.
RegularityReport check_regularity(const std::function<double(double)>& density,
                                  double step = 1e-4);

}  // namespace covert
