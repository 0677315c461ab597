#include "covert_lab/ipd_distribution.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace covert {

namespace {

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string("IpdDistribution: ") + what +
                                " must be positive and finite");
  }
}

double gamma_ratio(double num, double den) {
  return std::exp(std::lgamma(num) - std::lgamma(den));
}

}  // namespace

std::string_view family_name(Family family) noexcept {
  switch (family) {
    case Family::kExponential: return "exponential";
    case Family::kGamma: return "gamma";
    case Family::kWeibull: return "weibull";
    case Family::kRayleigh: return "rayleigh";
    case Family::kErlang: return "erlang";
    case Family::kChiSquared: return "chi_squared";
    case Family::kGeneralizedGamma: return "generalized_gamma";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::kExponential, Family::kGamma, Family::kWeibull, Family::kRayleigh,
                   Family::kErlang, Family::kChiSquared, Family::kGeneralizedGamma}) {
    if (family_name(f) == name) return f;
  }
  throw std::invalid_argument("unknown distribution family '" + std::string(name) + "'");
}

IpdDistribution::IpdDistribution(Family family, double p0, double p1, GeneralizedGammaParams gg)
    : family_(family), params_{p0, p1}, gg_(gg) {
  const double shape = gg_.d / gg_.p;
  log_norm_ = std::log(gg_.p) - gg_.d * std::log(gg_.scale) - std::lgamma(shape);

  switch (family_) {
    case Family::kExponential:
      mean_ = 1.0 / p0;
      variance_ = mean_ * mean_;
      break;
    case Family::kGamma:
      mean_ = p0 * p1;
      variance_ = p0 * p1 * p1;
      break;
    case Family::kErlang:
      mean_ = p0 / p1;
      variance_ = p0 / (p1 * p1);
      break;
    case Family::kChiSquared:
      mean_ = p0;
      variance_ = 2.0 * p0;
      break;
    case Family::kRayleigh:
      mean_ = p0 * std::sqrt(std::numbers::pi / 2.0);
      variance_ = (4.0 - std::numbers::pi) / 2.0 * p0 * p0;
      break;
    case Family::kWeibull:
    case Family::kGeneralizedGamma: {
      const double m1 = gg_.scale * gamma_ratio((gg_.d + 1.0) / gg_.p, shape);
      const double m2 = gg_.scale * gg_.scale * gamma_ratio((gg_.d + 2.0) / gg_.p, shape);
      mean_ = m1;
      variance_ = m2 - m1 * m1;
      break;
    }
  }
  if (!(variance_ > 0.0) || !std::isfinite(variance_) || !std::isfinite(mean_)) {
    throw std::invalid_argument("IpdDistribution: moments are not finite and positive");
  }
}

IpdDistribution IpdDistribution::exponential(double rate) {
  require_positive(rate, "rate");
  return {Family::kExponential, rate, 0.0, {1.0 / rate, 1.0, 1.0}};
}

IpdDistribution IpdDistribution::gamma(double shape, double scale) {
  require_positive(shape, "shape");
  require_positive(scale, "scale");
  return {Family::kGamma, shape, scale, {scale, shape, 1.0}};
}

IpdDistribution IpdDistribution::weibull(double shape, double scale) {
  require_positive(shape, "shape");
  require_positive(scale, "scale");
  return {Family::kWeibull, shape, scale, {scale, shape, shape}};
}

IpdDistribution IpdDistribution::rayleigh(double sigma) {
  require_positive(sigma, "sigma");
  return {Family::kRayleigh, sigma, 0.0, {sigma * std::numbers::sqrt2, 2.0, 2.0}};
}

IpdDistribution IpdDistribution::erlang(int shape, double rate) {
  if (shape < 1) throw std::invalid_argument("IpdDistribution: erlang shape must be >= 1");
  require_positive(rate, "rate");
  return {Family::kErlang, static_cast<double>(shape), rate,
          {1.0 / rate, static_cast<double>(shape), 1.0}};
}

IpdDistribution IpdDistribution::chi_squared(double dof) {
  require_positive(dof, "degrees of freedom");
  return {Family::kChiSquared, dof, 0.0, {2.0, dof / 2.0, 1.0}};
}

IpdDistribution IpdDistribution::generalized_gamma(double scale, double d, double p) {
  require_positive(scale, "scale");
  require_positive(d, "d");
  require_positive(p, "p");
  return {Family::kGeneralizedGamma, scale, d, {scale, d, p}};
}

int IpdDistribution::param_count() const noexcept {
  switch (family_) {
    case Family::kExponential:
    case Family::kRayleigh:
    case Family::kChiSquared:
      return 1;
    case Family::kGeneralizedGamma:
      return 3;
    default:
      return 2;
  }
}

std::string IpdDistribution::describe() const {
  std::ostringstream os;
  os.precision(12);
  os << name() << '(';
  switch (family_) {
    case Family::kExponential: os << "rate=" << params_[0]; break;
    case Family::kGamma:
    case Family::kWeibull: os << "shape=" << params_[0] << ",scale=" << params_[1]; break;
    case Family::kRayleigh: os << "sigma=" << params_[0]; break;
    case Family::kErlang: os << "shape=" << params_[0] << ",rate=" << params_[1]; break;
    case Family::kChiSquared: os << "dof=" << params_[0]; break;
    case Family::kGeneralizedGamma:
      os << "scale=" << gg_.scale << ",d=" << gg_.d << ",p=" << gg_.p;
      break;
  }
  os << ')';
  return os.str();
}

double IpdDistribution::log_density(double x) const noexcept {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  const double y = x / gg_.scale;
  const double power = gg_.p == 1.0 ? y : std::pow(y, gg_.p);
  const double log_x_term = gg_.d == 1.0 ? 0.0 : (gg_.d - 1.0) * std::log(x);
  return log_norm_ + log_x_term - power;
}

double IpdDistribution::density(double x) const noexcept {
  if (!(x > 0.0)) return 0.0;
  return std::exp(log_density(x));
}

double IpdDistribution::cdf(double x) const {
  if (!(x > 0.0)) return 0.0;
  const double y = x / gg_.scale;
  const double power = gg_.p == 1.0 ? y : std::pow(y, gg_.p);
  if (!std::isfinite(power)) return 1.0;
  return boost::math::gamma_p(gg_.d / gg_.p, power);
}

double IpdDistribution::score(double x) const noexcept {
  const double y = x / gg_.scale;
  const double tail = gg_.p == 1.0 ? 1.0 / gg_.scale
                                   : gg_.p / gg_.scale * std::pow(y, gg_.p - 1.0);
  return (gg_.d - 1.0) / x - tail;
}

double IpdDistribution::score_derivative(double x) const noexcept {
  double tail = 0.0;
  if (gg_.p != 1.0) {
    const double y = x / gg_.scale;
    tail = gg_.p * (gg_.p - 1.0) / (gg_.scale * gg_.scale) * std::pow(y, gg_.p - 2.0);
  }
  return -(gg_.d - 1.0) / (x * x) - tail;
}

double IpdDistribution::x_score(double x) const noexcept {
  const double y = x / gg_.scale;
  const double power = gg_.p == 1.0 ? y : std::pow(y, gg_.p);
  return (gg_.d - 1.0) - gg_.p * power;
}

double IpdDistribution::x2_score_derivative(double x) const noexcept {
  const double y = x / gg_.scale;
  const double power = gg_.p == 1.0 ? y : std::pow(y, gg_.p);
  return -(gg_.d - 1.0) - gg_.p * (gg_.p - 1.0) * power;
}

IpdSampler::IpdSampler(const IpdDistribution& dist) : impl_(std::exponential_distribution<double>(1.0)) {
  switch (dist.family()) {
    case Family::kExponential:
      impl_ = std::exponential_distribution<double>(dist.param(0));
      break;
    case Family::kGamma:
      impl_ = std::gamma_distribution<double>(dist.param(0), dist.param(1));
      break;
    case Family::kWeibull:
      impl_ = std::weibull_distribution<double>(dist.param(0), dist.param(1));
      break;
    case Family::kRayleigh:
      impl_ = std::weibull_distribution<double>(2.0, dist.gg().scale);
      break;
    case Family::kErlang:
      impl_ = ErlangSum{static_cast<int>(dist.param(0)),
                        std::exponential_distribution<double>(dist.param(1))};
      break;
    case Family::kChiSquared:
      impl_ = std::chi_squared_distribution<double>(dist.param(0));
      break;
    case Family::kGeneralizedGamma:
      impl_ = GenGamma{dist.gg().scale, 1.0 / dist.gg().p,
                       std::gamma_distribution<double>(dist.gg().d / dist.gg().p, 1.0)};
      break;
  }
}

double IpdSampler::operator()(Rng& rng) {
  // std distributions can return exactly 0 through rounding; IPDs must stay
  // strictly positive, so redraw in that measure-zero case.
  for (;;) {
    const double x = std::visit(
        [&rng](auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ErlangSum>) {
            double sum = 0.0;
            for (int i = 0; i < d.shape; ++i) sum += d.unit(rng);
            return sum;
          } else if constexpr (std::is_same_v<T, GenGamma>) {
            return d.scale * std::pow(d.base(rng), d.inv_p);
          } else {
            return d(rng);
          }
        },
        impl_);
    if (x > 0.0 && std::isfinite(x)) return x;
  }
}

}  // namespace covert
