#pragma once

#include <random>
#include <string>
#include <string_view>
#include <variant>

#include "covert_lab/rng.hpp"

namespace covert {

enum class Family {
  kExponential,
  kGamma,
  kWeibull,
  kRayleigh,
  kErlang,
  kChiSquared,
  kGeneralizedGamma,
};

std::string_view family_name(Family family) noexcept;
Family parse_family(std::string_view name);

/// Every supported family is a member of the generalized gamma class with
/// density proportional to x^(d-1) exp(-(x/a)^p). Density, score and moment
/// formulas are evaluated through this shared parameterization.
struct GeneralizedGammaParams {
  double scale;  // a
  double d;
  double p;
  friend bool operator==(const GeneralizedGammaParams&, const GeneralizedGammaParams&) = default;
};

/// A parametric inter-packet-delay law on (0, inf).
///
/// Instances are immutable and validated on construction; invalid
/// parameters throw std::invalid_argument.
class IpdDistribution {
 public:
  static IpdDistribution exponential(double rate);
  static IpdDistribution gamma(double shape, double scale);
  static IpdDistribution weibull(double shape, double scale);
  static IpdDistribution rayleigh(double sigma);
  static IpdDistribution erlang(int shape, double rate);
  static IpdDistribution chi_squared(double dof);
  static IpdDistribution generalized_gamma(double scale, double d, double p);

  Family family() const noexcept { return family_; }
  std::string_view name() const noexcept { return family_name(family_); }

  /// Family-native parameters, e.g. {shape, scale} for Gamma. Unused
  /// slots are zero.
  double param(int i) const noexcept { return params_[i]; }
  int param_count() const noexcept;
  std::string describe() const;

  const GeneralizedGammaParams& gg() const noexcept { return gg_; }

  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return variance_; }
  double rate() const noexcept { return 1.0 / mean_; }

  double density(double x) const noexcept;
  double log_density(double x) const noexcept;
  double cdf(double x) const;
  /// d log p(x) / dx
  double score(double x) const noexcept;
  /// d^2 log p(x) / dx^2
  double score_derivative(double x) const noexcept;
  /// x * score(x) and x^2 * score_derivative(x), evaluated without the
  /// 1/x blow-up near zero.
  double x_score(double x) const noexcept;
  double x2_score_derivative(double x) const noexcept;

  friend bool operator==(const IpdDistribution&, const IpdDistribution&) = default;

 private:
  IpdDistribution(Family family, double p0, double p1, GeneralizedGammaParams gg);

  Family family_;
  double params_[2];
  GeneralizedGammaParams gg_;
  double log_norm_;
  double mean_;
  double variance_;
};

/// Stateful sampler bound to one distribution. Draws are a deterministic
/// function of the Rng state and the sequence of prior draws, so sampling
/// n then m values yields the same prefix as sampling n + m at once.
class IpdSampler {
 public:
  explicit IpdSampler(const IpdDistribution& dist);
  double operator()(Rng& rng);

 private:
  struct ErlangSum {
    int shape;
    std::exponential_distribution<double> unit;
  };
  struct GenGamma {
    double scale;
    double inv_p;
    std::gamma_distribution<double> base;
  };
  using Impl = std::variant<std::exponential_distribution<double>,
                            std::gamma_distribution<double>,
                            std::weibull_distribution<double>,
                            std::chi_squared_distribution<double>,
                            ErlangSum, GenGamma>;
  Impl impl_;
};

}  // namespace covert
