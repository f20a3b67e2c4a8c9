#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fragmc/accumulators.hpp"
#include "fragmc/dislocation.hpp"
#include "fragmc/errors.hpp"
#include "fragmc/renewal.hpp"
#include "fragmc/stats.hpp"
#include "reference_values.hpp"

using namespace fragmc;

namespace {
const MeasureSpec kRef = MeasureSpec::binary_uniform(0.3);

// Closed-form stationary-residual CDF for the reference measure:
// (x - int_0^x F)/mu with F(t) = (0.49 - e^{-2t})/0.4 on [a,b].
double eta_cdf_oracle(double x) {
  const double a = refvals::kA, b = refvals::kB;
  if (x <= 0) return 0.0;
  if (x >= b) return 1.0;
  double intF = 0.0;
  if (x > a) {
    intF = (std::exp(-2 * a) * (x - a) + (std::exp(-2 * x) - std::exp(-2 * a)) / 2.0) /
           0.4;
  }
  return (x - intF) / refvals::kMu;
}
}  // namespace

TEST_CASE("residual at t=0 is one waiting time; age is zero") {
  const WaitingLaw law(kRef);
  RngStream rng(2001);
  std::vector<double> res;
  for (int i = 0; i < 100000; ++i) {
    const RenewalState st = simulate_residual(law, 0.0, rng);
    REQUIRE(st.age == 0.0);
    res.push_back(st.residual);
  }
  CHECK(ks_one_sample(res, [&](double x) { return law.cdf(x); }).passes(0.01));
}

TEST_CASE("renewal state invariants at a generic time") {
  const WaitingLaw law(kRef);
  RngStream rng(2002);
  for (int i = 0; i < 100000; ++i) {
    const RenewalState st = simulate_residual(law, 3.7, rng);
    REQUIRE(st.residual > 0.0);
    REQUIRE(st.residual <= law.b() + 1e-12);
    REQUIRE(st.age >= 0.0);
    REQUIRE(st.age < law.b());
    const double straddle = st.age + st.residual;
    REQUIRE(straddle >= law.a() - 1e-12);
    REQUIRE(straddle <= law.b() + 1e-12);
  }
  CHECK_THROWS_AS(simulate_residual(law, -0.5, rng), std::domain_error);
}

TEST_CASE("residual law at t=50 matches the stationary limit") {
  const WaitingLaw law(kRef);
  const StationaryResidualLaw eta(law);
  RngStream rng(2003);
  std::vector<double> res(100000);
  for (auto& r : res) r = simulate_residual(law, 50.0, rng).residual;
  CHECK(ks_one_sample(res, [&](double x) { return eta.cdf(x); }).passes(0.01));
}

TEST_CASE("stationary state: length-biased straddle, stationary residual, support") {
  const WaitingLaw law(kRef);
  const StationaryResidualLaw eta(law);
  RngStream rng(2004);
  MeanVar straddle;
  std::vector<double> res(100000);
  for (auto& r : res) {
    const RenewalState st = sample_stationary_state(law, rng);
    REQUIRE(st.age >= 0.0);
    REQUIRE(st.residual > 0.0);
    const double sum = st.age + st.residual;
    REQUIRE(sum >= law.a() - 1e-12);
    REQUIRE(sum <= law.b() + 1e-12);
    straddle.add(sum);
    r = st.residual;
  }
  // E[straddle] = E[Y^2]/mu (length-biased mean).
  const double oracle = refvals::kPiSecondMoment / refvals::kMu;
  CHECK(std::abs(straddle.mean() - oracle) < 4.0 * straddle.stderr_mean());
  CHECK(ks_one_sample(res, [&](double x) { return eta.cdf(x); }).passes(0.01));
}

TEST_CASE("stationary residual law: normalisation, density endpoints, moments") {
  const WaitingLaw law(kRef);
  const StationaryResidualLaw eta(law);
  CHECK(std::abs(eta.integrate([](double) { return 1.0; }) - 1.0) < 1e-9);
  CHECK(eta.density(law.a()) == doctest::Approx(1.0 / law.mu()).epsilon(1e-12));
  CHECK(eta.density(law.b()) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(eta.density(-0.1) == 0.0);
  // eta(e^{-x}): closed-form antiderivative oracle, both pieces of (1-F):
  //   (1/mu)[ int_0^a e^{-x} dx + int_a^b e^{-x}(e^{-2x}-e^{-2b})/0.4 dx ].
  const double a = law.a(), b = law.b();
  const double piece1 = 1.0 - std::exp(-a);
  const double piece2 = ((std::exp(-3 * a) - std::exp(-3 * b)) / 3.0 -
                         std::exp(-2 * b) * (std::exp(-a) - std::exp(-b))) /
                        0.4;
  const double oracle = (piece1 + piece2) / law.mu();
  CHECK(oracle == doctest::Approx(refvals::kEtaExp1).epsilon(1e-12));
  const double lib = eta.integrate([](double x) { return std::exp(-x); });
  CHECK(lib == doctest::Approx(oracle).epsilon(1e-8));
  // mean of eta equals E[Y^2]/(2 mu)
  const double mean = eta.integrate([](double x) { return x; });
  CHECK(mean == doctest::Approx(refvals::kEtaMean).epsilon(1e-8));
  // cdf matches the closed-form oracle
  for (double x : {0.2, 0.5, 0.9, 1.1}) {
    CHECK(eta.cdf(x) == doctest::Approx(eta_cdf_oracle(x)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(
      eta.integrate([](double x) { return x < 0.5 ? 1.0 : std::nan(""); }),
      EvaluationError);
}

TEST_CASE("defining double expectation, Monte Carlo route, matches the density") {
  // eta([0,x]) = E[min(Y,x)]/mu with Y a waiting time.
  const WaitingLaw law(kRef);
  const StationaryResidualLaw eta(law);
  RngStream rng(2005);
  for (double x : {0.5, 0.8, 1.1}) {
    MeanVar mv;
    for (int i = 0; i < 200000; ++i) mv.add(std::min(law.sample(rng), x));
    const double mc = mv.mean() / law.mu();
    const double se = mv.stderr_mean() / law.mu();
    CHECK(std::abs(mc - eta.cdf(x)) < 4.0 * se);
  }
}

TEST_CASE("stationarity: delayed-process residual law is time-invariant") {
  const WaitingLaw law(kRef);
  RngStream rng(2006);
  std::vector<double> at0(50000), at5(50000);
  for (std::size_t i = 0; i < at0.size(); ++i) {
    at0[i] = sample_stationary_state(law, rng).residual;
    double pos = sample_stationary_state(law, rng).residual;
    while (pos <= 5.0) pos += law.sample(rng);
    at5[i] = pos - 5.0;
  }
  CHECK(ks_two_sample(at0, at5).passes(0.01));
}

TEST_CASE("decay probe: plumbing paths") {
  const WaitingLaw law(kRef);
  DecayProbeOptions opts;
  opts.replicas_per_point = 2000;
  // zero function -> below the noise floor, not an error
  const DecayReport zero =
      convergence_rate_probe(law, [](double) { return 0.0; }, {1.0, 2.0, 3.0}, opts, 42);
  CHECK_FALSE(zero.fit_available);
  CHECK(zero.note.find("noise floor") != std::string::npos);
  // one-point grid -> config error
  CHECK_THROWS_AS(
      convergence_rate_probe(law, [](double) { return 0.0; }, {1.0}, opts, 42),
      ConfigError);
  // an uncentered g is auto-centered and flagged
  const DecayReport unc = convergence_rate_probe(
      law, [](double x) { return x < 0.7 ? 1.0 : 0.0; }, {0.5, 1.0}, opts, 42);
  CHECK(unc.auto_centered);
}

TEST_CASE("decay probe sees a negative slope where the signal is resolvable") {
  const WaitingLaw law(kRef);
  const double mid = 0.5 * (law.a() + law.b());
  DecayProbeOptions opts;
  opts.replicas_per_point = 300000;
  const DecayReport rep = convergence_rate_probe(
      law, [&](double x) { return (x >= law.a() && x <= mid) ? 1.0 : 0.0; },
      {0.5, 0.75, 1.25}, opts, 4242);
  REQUIRE(rep.fit_available);
  CHECK(rep.slope < 0.0);
}

TEST_CASE("propagated residual expectation matches Monte Carlo") {
  const WaitingLaw law(kRef);
  const StationaryResidualLaw eta(law);
  // centered exponential on the log scale
  const double m = refvals::kEtaExp1;
  auto f = [m](double x) { return std::exp(-x) - m; };
  const ResidualExpectation psi(law, f);
  // psi(0) = E f(Y) for one waiting time
  RngStream rng(2007);
  MeanVar at0;
  for (int i = 0; i < 400000; ++i) at0.add(f(law.sample(rng)));
  CHECK(std::abs(psi(0.0) - at0.mean()) < 4.0 * at0.stderr_mean());
  // transient values against direct simulation
  for (double t : {0.7, 1.5}) {
    MeanVar mv;
    for (int i = 0; i < 400000; ++i) mv.add(f(simulate_residual(law, t, rng).residual));
    CHECK(std::abs(psi(t) - mv.mean()) < 4.0 * mv.stderr_mean());
  }
  // centered input: the propagated expectation dies out
  CHECK(std::abs(psi(8.0)) < 1e-4);
  CHECK(std::abs(psi(1000.0)) < 1e-8);  // beyond horizon: stationary value
}
