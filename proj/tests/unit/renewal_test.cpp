#include <doctest.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "covert_lab/ipd_distribution.hpp"
#include "covert_lab/packet_stream.hpp"
#include "covert_lab/renewal.hpp"
#include "covert_lab/rng.hpp"

using namespace covert;

namespace {

PacketStream jack_times(std::vector<double> t) { return PacketStream::from_times(t); }

std::vector<IpdDistribution> assorted_laws() {
  return {IpdDistribution::exponential(1.0),     IpdDistribution::gamma(2.0, 0.5),
          IpdDistribution::weibull(1.5, 2.0),    IpdDistribution::rayleigh(0.7),
          IpdDistribution::erlang(3, 4.0),       IpdDistribution::chi_squared(3.0),
          IpdDistribution::generalized_gamma(1.3, 2.5, 0.8)};
}

}  // namespace

TEST_SUITE("renewal") {

TEST_CASE("rng: derive_seed is a pure function of its path") {
  CHECK(derive_seed(42, {1, 2}) == derive_seed(42, {1, 2}));
  CHECK(derive_seed(42, {1, 2}) != derive_seed(42, {2, 1}));
  CHECK(derive_seed(42, {1}) != derive_seed(43, {1}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, {i}));
  CHECK(seen.size() == 1000);

  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) REQUIRE(a() == b());
  Rng r(9);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform_open();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("distribution: invalid parameters are rejected") {
  CHECK_THROWS_AS(IpdDistribution::exponential(0.0), std::invalid_argument);
  CHECK_THROWS_AS(IpdDistribution::exponential(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(IpdDistribution::gamma(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(IpdDistribution::weibull(2.0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(IpdDistribution::erlang(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(IpdDistribution::chi_squared(std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(parse_family("pareto"), std::invalid_argument);
}

TEST_CASE("distribution: moments of the named families") {
  const auto g = IpdDistribution::gamma(2.0, 0.5);
  CHECK(g.mean() == doctest::Approx(1.0));
  CHECK(g.variance() == doctest::Approx(0.5));
  const auto e = IpdDistribution::exponential(2.0);
  CHECK(e.mean() == doctest::Approx(0.5));
  CHECK(e.variance() == doctest::Approx(0.25));
  CHECK(e.rate() == doctest::Approx(2.0));
  const auto w = IpdDistribution::weibull(2.0, 1.0);
  CHECK(w.mean() == doctest::Approx(std::sqrt(M_PI) / 2.0));
  const auto c = IpdDistribution::chi_squared(4.0);
  CHECK(c.mean() == doctest::Approx(4.0));
  CHECK(c.variance() == doctest::Approx(8.0));
  const auto er = IpdDistribution::erlang(3, 2.0);
  CHECK(er.mean() == doctest::Approx(1.5));
  CHECK(er.variance() == doctest::Approx(0.75));
}

TEST_CASE("distribution: density is positive, integrates to one and matches the cdf") {
  for (const auto& d : assorted_laws()) {
    CAPTURE(d.describe());
    // Trapezoid on a fine log-spaced grid; cdf(b) - cdf(a) should match.
    double mass = 0.0;
    const double lo = d.mean() * 1e-6, hi = d.mean() * 60.0;
    const int n = 200000;
    const double ratio = std::pow(hi / lo, 1.0 / n);
    double x = lo;
    for (int i = 0; i < n; ++i) {
      const double x2 = x * ratio;
      // Light tails underflow far out; the log density must not.
      REQUIRE(std::isfinite(d.log_density(x)));
      mass += 0.5 * (d.density(x) + d.density(x2)) * (x2 - x);
      x = x2;
    }
    CHECK(mass == doctest::Approx(d.cdf(hi) - d.cdf(lo)).epsilon(1e-8));
    CHECK(d.cdf(hi) - d.cdf(lo) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(d.log_density(d.mean()) == doctest::Approx(std::log(d.density(d.mean()))));
  }
}

TEST_CASE("distribution: score matches a finite difference of the log density") {
  for (const auto& d : assorted_laws()) {
    CAPTURE(d.describe());
    for (double x : {0.3, 1.0, 2.7}) {
      const double h = 1e-6 * x;
      const double fd = (d.log_density(x + h) - d.log_density(x - h)) / (2 * h);
      CHECK(d.score(x) == doctest::Approx(fd).epsilon(1e-6));
      CHECK(d.x_score(x) == doctest::Approx(x * d.score(x)).epsilon(1e-12));
      const double fd2 = (d.score(x + h) - d.score(x - h)) / (2 * h);
      CHECK(d.score_derivative(x) == doctest::Approx(fd2).epsilon(1e-5));
    }
  }
}

TEST_CASE("sample_stream: zero count gives an empty stream") {
  const auto s = sample_stream(IpdDistribution::exponential(1.0), Count{0}, 123);
  CHECK(s.empty());
}

TEST_CASE("sample_stream: non-positive horizon is rejected") {
  const auto d = IpdDistribution::exponential(1.0);
  CHECK_THROWS_AS(sample_stream(d, Horizon{0.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_stream(d, Horizon{-3.0}, 1), std::invalid_argument);
}

TEST_CASE("sample_stream: horizon mode stops before the first arrival past T") {
  const auto d = IpdDistribution::exponential(1.0);
  const auto s = sample_stream(d, Horizon{50.0}, 99);
  REQUIRE(s.horizon().has_value());
  CHECK(*s.horizon() == 50.0);
  CHECK(s.back().time <= 50.0);
  const auto longer = sample_stream(d, Count{s.size() + 1}, 99);
  CHECK(longer.back().time > 50.0);
  for (std::size_t i = 0; i < s.size(); ++i) REQUIRE(longer[i] == s[i]);
}

TEST_CASE("sample_stream: count-mode prefixes agree across lengths") {
  for (const auto& d : assorted_laws()) {
    const auto a = sample_stream(d, Count{100}, 17);
    const auto b = sample_stream(d, Count{250}, 17);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
  }
}

TEST_CASE("sample_stream: Exponential horizon mean IPD within 3 standard errors") {
  const auto s = sample_stream(IpdDistribution::exponential(1.0), Horizon{1e4}, 2024);
  const auto ipds = extract_ipds(s);
  const double mean = std::accumulate(ipds.begin(), ipds.end(), 0.0) / ipds.size();
  CHECK(std::abs(mean - 1.0) < 3.0 / std::sqrt(static_cast<double>(ipds.size())));
}

TEST_CASE("sample_stream: Gamma(2, 0.5) mean within 3 standard errors") {
  const auto d = IpdDistribution::gamma(2.0, 0.5);
  const std::size_t n = 100000;
  const auto s = sample_stream(d, Count{n}, 31337);
  const double mean = s.back().time / n;
  CHECK(std::abs(mean - 1.0) < 3.0 * std::sqrt(0.5 / n));
}

TEST_CASE("sample_stream: every family reproduces its mean") {
  for (const auto& d : assorted_laws()) {
    CAPTURE(d.describe());
    const std::size_t n = 50000;
    const auto s = sample_stream(d, Count{n}, 8);
    const double se = std::sqrt(d.variance() / n);
    CHECK(std::abs(s.back().time / n - d.mean()) < 4.0 * se);
  }
}

TEST_CASE("sample_stream: Exponential IPDs pass chi-square at the 0.1% level") {
  const std::size_t n = 100000;
  const int bins = 50;
  const auto ipds = extract_ipds(sample_stream(IpdDistribution::exponential(1.0), Count{n}, 77));
  std::vector<double> observed(bins, 0.0);
  for (double x : ipds) {
    // Equiprobable bins of Exp(1): bin = floor(bins * (1 - e^-x)).
    const int b = std::min(bins - 1, static_cast<int>(bins * -std::expm1(-x)));
    observed[b] += 1.0;
  }
  const double expected = static_cast<double>(n) / bins;
  double stat = 0.0;
  for (double o : observed) stat += (o - expected) * (o - expected) / expected;
  const boost::math::chi_squared law(bins - 1);
  CHECK(stat < boost::math::quantile(law, 0.999));
}

TEST_CASE("count_arrivals: enumeration examples") {
  const auto s = jack_times({1, 2, 3});
  CHECK(count_arrivals(s, 0.0) == 0);
  CHECK(count_arrivals(s, 2.0) == 2);
  CHECK(count_arrivals(s, 2.999) == 2);
  CHECK(count_arrivals(s, 3.0) == 3);
  CHECK(count_arrivals(s, 1e9) == 3);
  CHECK_THROWS_AS(count_arrivals(s, -0.1), std::invalid_argument);
}

TEST_CASE("count_arrivals: duality with arrival times on random streams") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = sample_stream(IpdDistribution::gamma(0.7, 1.0), Count{200},
                                 derive_seed(4, {static_cast<std::uint64_t>(trial)}));
    for (int k = 0; k < 200; ++k) {
      const double t = rng.uniform_open() * s.back().time * 1.1;
      const std::size_t x = count_arrivals(s, t);
      for (std::size_t i : {x, x + 1, std::size_t{1}, s.size()}) {
        if (i == 0 || i > s.size()) continue;
        REQUIRE((x >= i) == (s[i - 1].time <= t));
      }
    }
  }
}

TEST_CASE("extract_ipds: differencing examples and round trip") {
  const auto ipds = extract_ipds(jack_times({1.0, 2.5, 4.0}));
  CHECK(ipds == std::vector<double>{1.0, 1.5, 1.5});
  CHECK(extract_ipds(jack_times({3.2})) == std::vector<double>{3.2});
  CHECK_THROWS_AS(extract_ipds(PacketStream{}), std::invalid_argument);

  const auto s = sample_stream(IpdDistribution::weibull(0.8, 1.0), Count{1000}, 5);
  const auto rebuilt = stream_from_ipds(extract_ipds(s));
  REQUIRE(rebuilt.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) REQUIRE(rebuilt[i].time == s[i].time);
}

TEST_CASE("packet stream: ordering invariant is enforced") {
  CHECK_THROWS_AS(jack_times({1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(jack_times({2.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(jack_times({0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(PacketStream::from_times(std::vector<double>{1.0, 5.0}, Source::kJack, 4.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_source("bob"), std::invalid_argument);
  CHECK(parse_source(source_name(Source::kAlice)) == Source::kAlice);
}

TEST_CASE("scale_stream: examples and tags") {
  const auto s = jack_times({1, 2, 3});
  CHECK(scale_stream(s, 1.0) == s);
  CHECK(scale_stream(s, 2.0).times() == std::vector<double>{2, 4, 6});
  CHECK_THROWS_AS(scale_stream(s, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(scale_stream(s, -2.0), std::invalid_argument);

  const auto mixed = merge_streams(s, PacketStream::from_times(std::vector<double>{1.5}, Source::kAlice));
  const auto scaled = scale_stream(mixed, 3.0);
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    CHECK(scaled[i].source == mixed[i].source);
    CHECK(scaled[i].seq == mixed[i].seq);
  }
}

TEST_CASE("scale_stream: round trip within 1e-12 relative") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const double f = 0.01 + 100.0 * rng.uniform_open();
    const auto s = sample_stream(IpdDistribution::exponential(3.0), Count{500},
                                 derive_seed(12, {static_cast<std::uint64_t>(trial)}));
    const auto back = scale_stream(scale_stream(s, f), 1.0 / f);
    for (std::size_t i = 0; i < s.size(); ++i) {
      REQUIRE(std::abs(back[i].time - s[i].time) <= 1e-12 * s[i].time);
    }
  }
}

TEST_CASE("scale_stream: scaled IPDs follow the slowed-down law") {
  // Gamma(2, 1) IPDs scaled by 1/(1 - rho) have cdf F((1 - rho) x).
  const double rho = 0.2;
  const std::size_t n = 100000;
  const auto s = sample_stream(IpdDistribution::gamma(2.0, 1.0), Count{n}, 606);
  auto ipds = extract_ipds(scale_stream(s, 1.0 / (1.0 - rho)));
  std::sort(ipds.begin(), ipds.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = boost::math::gamma_p(2.0, (1.0 - rho) * ipds[i]);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n),
                   std::abs(f - static_cast<double>(i + 1) / n)});
  }
  CHECK(ks < 0.01);
}

TEST_CASE("merge_streams: examples") {
  const auto a = jack_times({1, 3});
  const auto b = PacketStream::from_times(std::vector<double>{2}, Source::kAlice);
  const auto m = merge_streams(a, b);
  REQUIRE(m.size() == 3);
  CHECK(m.times() == std::vector<double>{1, 2, 3});
  CHECK(m[0].source == Source::kJack);
  CHECK(m[1].source == Source::kAlice);
  CHECK(m[2].source == Source::kJack);
  CHECK(merge_streams(a, PacketStream{}) == a);
  CHECK(merge_streams(PacketStream{}, a) == a);
}

TEST_CASE("merge_streams: exact ties put Jack first and stay strictly increasing") {
  const auto j = jack_times({1, 2});
  const auto al = PacketStream::from_times(std::vector<double>{2}, Source::kAlice);
  for (const auto& m : {merge_streams(j, al), merge_streams(al, j)}) {
    REQUIRE(m.size() == 3);
    CHECK(m[1].source == Source::kJack);
    CHECK(m[1].time == 2.0);
    CHECK(m[2].source == Source::kAlice);
    CHECK(m[2].time == std::nextafter(2.0, 3.0));
  }
}

TEST_CASE("merge_streams: size, commutativity and associativity on random inputs") {
  const auto d = IpdDistribution::exponential(1.0);
  for (std::uint64_t t = 0; t < 20; ++t) {
    const auto a = sample_stream(d, Count{300}, derive_seed(1, {t}));
    const auto b = sample_stream(d, Count{120}, derive_seed(2, {t}), Source::kAlice);
    const auto c = sample_stream(d, Count{80}, derive_seed(3, {t}), Source::kAlice);
    const auto ab = merge_streams(a, b);
    CHECK(ab.size() == a.size() + b.size());
    CHECK(ab == merge_streams(b, a));
    CHECK(merge_streams(ab, c).times() == merge_streams(a, merge_streams(b, c)).times());
    CHECK(ab.only(Source::kJack).times() == a.times());
    for (std::size_t i = 1; i < ab.size(); ++i) REQUIRE(ab[i].time > ab[i - 1].time);
  }
}

TEST_CASE("merge_streams: Poisson superposition count") {
  const double horizon = 1e4;
  const auto j = sample_stream(IpdDistribution::exponential(1.0), Horizon{horizon}, 50);
  const auto a = sample_stream(IpdDistribution::exponential(0.5), Horizon{horizon}, 51, Source::kAlice);
  const auto m = merge_streams(j, a);
  CHECK(std::abs(static_cast<double>(m.size()) - 1.5e4) < 3.0 * std::sqrt(1.5e4));
  REQUIRE(m.horizon().has_value());
  CHECK(*m.horizon() == horizon);
}

}  // TEST_SUITE
