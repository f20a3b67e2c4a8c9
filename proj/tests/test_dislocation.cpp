#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fragmc/accumulators.hpp"
#include "fragmc/dislocation.hpp"
#include "fragmc/errors.hpp"
#include "fragmc/stats.hpp"
#include "reference_values.hpp"

using namespace fragmc;

namespace {

const MeasureSpec kRef = MeasureSpec::binary_uniform(0.3);

// Independent oracle: composite Simpson, no shared code with the library
// quadrature.
template <class F>
double simpson(F f, double lo, double hi, int n_cells) {
  double acc = 0.0;
  const double h = (hi - lo) / n_cells;
  for (int i = 0; i < n_cells; ++i) {
    const double x0 = lo + i * h, x1 = x0 + h;
    acc += (f(x0) + 4.0 * f(0.5 * (x0 + x1)) + f(x1)) * h / 6.0;
  }
  return acc;
}

}  // namespace

TEST_CASE("binary uniform splits: two proportions in [c,1-c], conservative, sorted") {
  RngStream rng(1001);
  SplitOutcome split;
  for (int i = 0; i < 100000; ++i) {
    sample_split_into(kRef, rng, split);
    REQUIRE(split.proportions.size() == 2);
    REQUIRE(split.proportions[0] >= split.proportions[1]);
    REQUIRE(split.proportions[1] >= 0.3);
    REQUIRE(split.proportions[0] <= 0.7);
    CompensatedSum sum;
    for (double p : split.proportions) {
      REQUIRE(p > 0.0);
      REQUIRE(p < 1.0);
      sum.add(p);
    }
    REQUIRE(std::abs(sum.value() - 1.0) <= 1e-12);
  }
}

TEST_CASE("degenerate or invalid parameters are configuration errors") {
  RngStream rng(1);
  CHECK_THROWS_AS(sample_split(MeasureSpec::binary_uniform(0.5), rng), ConfigError);
  CHECK_THROWS_AS(sample_split(MeasureSpec::binary_uniform(0.0), rng), ConfigError);
  CHECK_THROWS_AS(sample_split(MeasureSpec::binary_uniform(0.62), rng), ConfigError);
  CHECK_THROWS_AS(WaitingLaw(MeasureSpec::binary_truncated_beta(-1, 2, 0.25)),
                  ConfigError);
}

TEST_CASE("mean of the larger proportion matches the closed form 0.6") {
  // E max(s,1-s) = 2 int_{1/2}^{0.7} s/(1-2c) ds = (0.49-0.25)/0.4 = 0.6
  RngStream rng(1002);
  MeanVar mv;
  SplitOutcome split;
  for (int i = 0; i < 100000; ++i) {
    sample_split_into(kRef, rng, split);
    mv.add(split.proportions[0]);
  }
  CHECK(std::abs(mv.mean() - 0.6) < 4.0 * mv.stderr_mean());
}

TEST_CASE("reference waiting law: support, delta, density, normalisation") {
  const WaitingLaw law(kRef);
  CHECK(law.a() == doctest::Approx(refvals::kA).epsilon(1e-14));
  CHECK(law.b() == doctest::Approx(refvals::kB).epsilon(1e-14));
  CHECK(law.delta() == doctest::Approx(0.3).epsilon(1e-14));
  // density is 5 e^{-2x} on [a,b], zero outside
  CHECK(law.density(0.5) == doctest::Approx(5.0 * std::exp(-1.0)).epsilon(1e-12));
  CHECK(law.density(0.2) == 0.0);
  CHECK(law.density(1.3) == 0.0);
  const double mass = simpson([&](double x) { return law.density(x); }, law.a(),
                              law.b(), 4000);
  CHECK(std::abs(mass - 1.0) < 1e-9);
}

TEST_CASE("reference mu: closed form vs independent quadrature oracle") {
  const WaitingLaw law(kRef);
  // Oracle 1: antiderivative of x.5e^{-2x} is -(5/4) e^{-2x}(2x+1).
  const double oracle_closed =
      1.25 * (std::exp(-2 * law.a()) * (2 * law.a() + 1) -
              std::exp(-2 * law.b()) * (2 * law.b() + 1));
  // Oracle 2: Simpson quadrature of x * density.
  const double oracle_quad =
      simpson([&](double x) { return x * law.density(x); }, law.a(), law.b(), 4000);
  CHECK(law.mu() == doctest::Approx(oracle_closed).epsilon(1e-12));
  CHECK(law.mu() == doctest::Approx(oracle_quad).epsilon(1e-10));
  CHECK(law.mu() == doctest::Approx(refvals::kMu).epsilon(1e-12));
  CHECK(std::abs(law.mu() - 0.666033) < 1e-5);
}

TEST_CASE("cdf boundary values and monotonicity") {
  const WaitingLaw law(kRef);
  CHECK(law.cdf(law.a()) == 0.0);
  CHECK(law.cdf(law.b()) == 1.0);
  CHECK(law.cdf(0.0) == 0.0);
  CHECK(law.cdf(2.0) == 1.0);
  double prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const double x = law.a() + (law.b() - law.a()) * i / 100.0;
    const double F = law.cdf(x);
    CHECK(F >= prev);
    prev = F;
  }
}

TEST_CASE("waiting samples: support, mean, KS against the closed-form cdf") {
  const WaitingLaw law(kRef);
  RngStream rng(1003);
  MeanVar mv;
  std::vector<double> sample;
  sample.reserve(100000);
  for (int i = 0; i < 1000000; ++i) {
    const double w = law.sample(rng);
    REQUIRE(w >= law.a() - 1e-12);
    REQUIRE(w <= law.b() + 1e-12);
    mv.add(w);
    if (i < 100000) sample.push_back(w);
  }
  CHECK(std::abs(mv.mean() - refvals::kMu) < 4.0 * mv.stderr_mean());
  const KsResult ks = ks_one_sample(sample, [&](double x) { return law.cdf(x); });
  CHECK(ks.passes(0.01));
}

TEST_CASE("sibling log-size: fixed points, symmetry, exact complement identity") {
  const WaitingLaw law(kRef);
  RngStream rng(1004);
  CHECK(law.sibling_log(std::log(2.0), rng) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(law.sibling_log(law.b(), rng) == doctest::Approx(law.a()).epsilon(1e-12));
  CHECK(law.sibling_log(law.a(), rng) == doctest::Approx(law.b()).epsilon(1e-12));
  CHECK_THROWS_AS(law.sibling_log(law.a() - 0.1, rng), std::domain_error);
  CHECK_THROWS_AS(law.sibling_log(law.b() + 0.1, rng), std::domain_error);
  for (int i = 0; i < 1000; ++i) {
    const double w = law.sample(rng);
    const double sib = law.sibling_log(w, rng);
    CHECK(std::abs(std::exp(-w) + std::exp(-sib) - 1.0) < 4e-16);
  }
}

TEST_CASE("size-biased pick from raw splits matches the waiting sampler") {
  const WaitingLaw law(kRef);
  RngStream rng_a(1005), rng_b(1006);
  std::vector<double> via_split, via_law;
  SplitOutcome split;
  for (int i = 0; i < 100000; ++i) {
    sample_split_into(kRef, rng_a, split);
    const double u = rng_a.uniform();
    const double pick =
        u < split.proportions[0] ? split.proportions[0] : split.proportions[1];
    via_split.push_back(-std::log(pick));
    via_law.push_back(law.sample(rng_b));
  }
  CHECK(ks_two_sample(via_split, via_law).passes(0.01));
}

TEST_CASE("truncated beta family: normalisation, mu dual route, sampling KS") {
  const MeasureSpec beta = MeasureSpec::binary_truncated_beta(2.0, 2.0, 0.25);
  const WaitingLaw law(beta);
  CHECK(law.a() == doctest::Approx(-std::log(0.75)).epsilon(1e-14));
  CHECK(law.b() == doctest::Approx(-std::log(0.25)).epsilon(1e-14));
  const double mass =
      simpson([&](double x) { return law.density(x); }, law.a(), law.b(), 4000);
  CHECK(std::abs(mass - 1.0) < 1e-9);
  const double mu_simpson =
      simpson([&](double x) { return x * law.density(x); }, law.a(), law.b(), 4000);
  CHECK(law.mu() == doctest::Approx(mu_simpson).epsilon(1e-9));
  CHECK(law.cdf(law.a()) == 0.0);
  CHECK(law.cdf(law.b()) == 1.0);

  RngStream rng(1007);
  std::vector<double> sample(100000);
  for (auto& w : sample) {
    w = law.sample(rng);
    REQUIRE(w >= law.a() - 1e-12);
    REQUIRE(w <= law.b() + 1e-12);
  }
  CHECK(ks_one_sample(sample, [&](double x) { return law.cdf(x); }).passes(0.01));

  // cdf_integral consistency: its derivative is the cdf.
  const double x0 = 0.9, h = 1e-5;
  const double deriv = (law.cdf_integral(x0 + h) - law.cdf_integral(x0 - h)) / (2 * h);
  CHECK(deriv == doctest::Approx(law.cdf(x0)).epsilon(1e-6));
}

TEST_CASE("assumption report: reference and beta pass, degenerate fails") {
  RngStream rng(1008);
  CHECK(validate_assumptions(kRef, rng).all_pass());
  RngStream rng2(1009);
  CHECK(validate_assumptions(MeasureSpec::binary_truncated_beta(2, 2, 0.25), rng2)
            .all_pass());
  RngStream rng3(1010);
  const AssumptionReport bad =
      validate_assumptions(MeasureSpec::binary_uniform(0.5), rng3);
  CHECK_FALSE(bad.all_pass());
}
