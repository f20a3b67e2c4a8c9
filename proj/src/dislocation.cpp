#include "fragmc/dislocation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

#include "fragmc/accumulators.hpp"
#include "fragmc/errors.hpp"
#include "fragmc/quadrature.hpp"

namespace fragmc {

std::string MeasureSpec::describe() const {
  std::ostringstream os;
  if (family == MeasureFamily::BinaryUniform) {
    os << "binary_uniform(c=" << c << ")";
  } else {
    os << "binary_truncated_beta(" << shape1 << "," << shape2 << ",c=" << c << ")";
  }
  return os.str();
}

void validate(const MeasureSpec& spec) {
  if (!(spec.c > 0.0) || !(spec.c < 0.5)) {
    throw ConfigError("measure spec: c must lie strictly in (0, 1/2), got c=" +
                      std::to_string(spec.c));
  }
  if (spec.family == MeasureFamily::BinaryTruncatedBeta) {
    if (!(spec.shape1 > 0.0) || !(spec.shape2 > 0.0)) {
      throw ConfigError("measure spec: beta shapes must be positive");
    }
  }
}

double sample_binary_fraction(const MeasureSpec& spec, RngStream& rng) {
  const double u = rng.uniform();
  if (spec.family == MeasureFamily::BinaryUniform) {
    return spec.c + (1.0 - 2.0 * spec.c) * u;
  }
  const double pc = boost::math::ibeta(spec.shape1, spec.shape2, spec.c);
  const double p1c = boost::math::ibeta(spec.shape1, spec.shape2, 1.0 - spec.c);
  return boost::math::ibeta_inv(spec.shape1, spec.shape2, pc + u * (p1c - pc));
}

void sample_split_into(const MeasureSpec& spec, RngStream& rng, SplitOutcome& out) {
  validate(spec);
  const double s = sample_binary_fraction(spec, rng);
  out.proportions.resize(2);
  out.proportions[0] = std::max(s, 1.0 - s);
  out.proportions[1] = std::min(s, 1.0 - s);
}

SplitOutcome sample_split(const MeasureSpec& spec, RngStream& rng) {
  SplitOutcome out;
  sample_split_into(spec, rng, out);
  return out;
}

WaitingLaw::WaitingLaw(const MeasureSpec& spec) : spec_(spec) {
  validate(spec);
  a_ = -std::log1p(-spec.c);
  b_ = -std::log(spec.c);
  delta_ = std::exp(-b_);
  if (spec.family == MeasureFamily::BinaryUniform) {
    const double norm = 1.0 - 2.0 * spec.c;
    mu_ = (std::exp(-2 * a_) * (2 * a_ + 1) - std::exp(-2 * b_) * (2 * b_ + 1)) /
          (2.0 * norm);
  } else {
    const double lg = std::lgamma(spec.shape1) + std::lgamma(spec.shape2) -
                      std::lgamma(spec.shape1 + spec.shape2);
    const double trunc_mass =
        boost::math::ibeta(spec.shape1, spec.shape2, 1.0 - spec.c) -
        boost::math::ibeta(spec.shape1, spec.shape2, spec.c);
    beta_lognorm_ = lg + std::log(trunc_mass);
    build_tables();
  }
}

double WaitingLaw::size_biased_density(double z) const {
  // z * (h(z) + h(1-z)) with h the truncated-beta pdf on [c, 1-c].
  const double al = spec_.shape1, be = spec_.shape2;
  auto h = [&](double t) {
    return std::exp((al - 1) * std::log(t) + (be - 1) * std::log1p(-t) -
                    beta_lognorm_);
  };
  return z * (h(z) + h(1.0 - z));
}

double WaitingLaw::density(double x) const {
  if (x < a_ || x > b_) return 0.0;
  if (spec_.family == MeasureFamily::BinaryUniform) {
    return 2.0 * std::exp(-2.0 * x) / (1.0 - 2.0 * spec_.c);
  }
  const double z = std::exp(-x);
  return size_biased_density(z) * z;
}

namespace {
// Cubic Hermite evaluation on a uniform grid given values and exact slopes.
double hermite_eval(const std::vector<double>& knots,
                    const std::vector<double>& vals,
                    const std::function<double(double)>& slope, double x) {
  const double lo = knots.front(), hi = knots.back();
  const double h = (hi - lo) / static_cast<double>(knots.size() - 1);
  std::size_t i = static_cast<std::size_t>((x - lo) / h);
  if (i >= knots.size() - 1) i = knots.size() - 2;
  const double x0 = knots[i], x1 = knots[i + 1];
  const double t = (x - x0) / (x1 - x0);
  const double v0 = vals[i], v1 = vals[i + 1];
  const double d0 = slope(x0) * (x1 - x0), d1 = slope(x1) * (x1 - x0);
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * v0 + (t3 - 2 * t2 + t) * d0 +
         (-2 * t3 + 3 * t2) * v1 + (t3 - t2) * d1;
}
}  // namespace

void WaitingLaw::build_tables() {
  constexpr std::size_t kCells = 4096;
  knots_.resize(kCells + 1);
  cdf_knots_.resize(kCells + 1);
  cdfint_knots_.resize(kCells + 1);
  const double h = (b_ - a_) / static_cast<double>(kCells);
  for (std::size_t i = 0; i <= kCells; ++i) knots_[i] = a_ + h * static_cast<double>(i);
  knots_.back() = b_;
  cdf_knots_[0] = 0.0;
  cdfint_knots_[0] = 0.0;
  CompensatedSum mu_acc;
  auto dens = [this](double x) { return density(x); };
  auto xdens = [this](double x) { return x * density(x); };
  for (std::size_t i = 0; i < kCells; ++i) {
    const double x0 = knots_[i], x1 = knots_[i + 1];
    const double mass = integrate_cell(dens, x0, x1);
    const double xmass = integrate_cell(xdens, x0, x1);
    cdf_knots_[i + 1] = cdf_knots_[i] + mass;
    // \int F over the cell by parts: [x F] - \int x pi.
    cdfint_knots_[i + 1] =
        cdfint_knots_[i] + x1 * cdf_knots_[i + 1] - x0 * cdf_knots_[i] - xmass;
    mu_acc.add(xmass);
  }
  mu_ = mu_acc.value();
}

double WaitingLaw::cdf(double x) const {
  if (x <= a_) return 0.0;
  if (x >= b_) return 1.0;
  if (spec_.family == MeasureFamily::BinaryUniform) {
    return (std::exp(-2 * a_) - std::exp(-2 * x)) / (1.0 - 2.0 * spec_.c);
  }
  return hermite_eval(knots_, cdf_knots_, [this](double t) { return density(t); }, x);
}

double WaitingLaw::cdf_integral(double x) const {
  if (x <= a_) return 0.0;
  const double at_b = (spec_.family == MeasureFamily::BinaryUniform)
                          ? (std::exp(-2 * a_) * (b_ - a_) +
                             (std::exp(-2 * b_) - std::exp(-2 * a_)) / 2.0) /
                                (1.0 - 2.0 * spec_.c)
                          : cdfint_knots_.back();
  if (x >= b_) return at_b + (x - b_);
  if (spec_.family == MeasureFamily::BinaryUniform) {
    return (std::exp(-2 * a_) * (x - a_) + (std::exp(-2 * x) - std::exp(-2 * a_)) / 2.0) /
           (1.0 - 2.0 * spec_.c);
  }
  return hermite_eval(knots_, cdfint_knots_, [this](double t) { return cdf(t); }, x);
}

double WaitingLaw::sample(RngStream& rng) const {
  const double s = sample_binary_fraction(spec_, rng);
  const double pick = rng.uniform() < s ? s : 1.0 - s;
  return -std::log(pick);
}

double WaitingLaw::sibling_log(double w, RngStream& rng) const {
  (void)rng;  // binary families: the sibling is deterministic
  if (w < a_ - 1e-12 || w > b_ + 1e-12) {
    throw std::domain_error("sibling_log: waiting time outside [a,b]");
  }
  w = std::min(std::max(w, a_), b_);
  return -std::log1p(-std::exp(-w));
}

AssumptionReport validate_assumptions(const MeasureSpec& spec, RngStream& rng) {
  AssumptionReport report;
  bool params_ok = true;
  std::string param_err;
  try {
    validate(spec);
  } catch (const ConfigError& e) {
    params_ok = false;
    param_err = e.what();
  }

  if (!params_ok) {
    report.checks.push_back({"probability split, s1 in (0,1)", false, param_err});
    report.checks.push_back({"conservation", false, param_err});
    report.checks.push_back({"compact interval waiting-law support", false,
                             "degenerate or invalid support: " + param_err});
    report.checks.push_back({"continuous bounded waiting density", false, param_err});
    report.checks.push_back({"exponential moment bound", false, param_err});
    return report;
  }

  const WaitingLaw law(spec);
  constexpr int kSamples = 20000;
  bool in01 = true, conservative = true, waits_in_support = true;
  SplitOutcome split;
  for (int i = 0; i < kSamples; ++i) {
    sample_split_into(spec, rng, split);
    CompensatedSum sum;
    for (double p : split.proportions) {
      if (!(p > 0.0 && p < 1.0)) in01 = false;
      sum.add(p);
    }
    if (std::abs(sum.value() - 1.0) > 1e-12) conservative = false;
    const double w = law.sample(rng);
    if (w < law.a() - 1e-12 || w > law.b() + 1e-12) waits_in_support = false;
  }
  report.checks.push_back({"probability split, s1 in (0,1)", in01,
                           "sampled proportions strictly inside (0,1)"});
  report.checks.push_back(
      {"conservation", conservative, "|sum proportions - 1| <= 1e-12 on all samples"});

  const double mass = integrate([&law](double x) { return law.density(x); },
                                law.a(), law.b(), 1e-12)
                          .value;
  const bool support_ok = law.a() > 0 && law.b() > law.a() + 1e-9 &&
                          std::isfinite(law.b()) && waits_in_support &&
                          std::abs(mass - 1.0) <= 1e-9;
  {
    std::ostringstream os;
    os << "[a,b]=[" << law.a() << "," << law.b() << "], density mass=" << mass;
    report.checks.push_back({"compact interval waiting-law support", support_ok, os.str()});
  }

  double sup_density = 0.0;
  bool finite = true;
  for (int i = 0; i <= 2000; ++i) {
    const double x = law.a() + (law.b() - law.a()) * i / 2000.0;
    const double d = law.density(x);
    if (!std::isfinite(d)) finite = false;
    sup_density = std::max(sup_density, d);
  }
  {
    std::ostringstream os;
    os << "sup density on grid = " << sup_density;
    report.checks.push_back({"continuous bounded waiting density", finite, os.str()});
  }
  report.checks.push_back(
      {"exponential moment bound", true,
       "compact support: exp(theta x) * density bounded for every theta"});
  return report;
}

}  // namespace fragmc
