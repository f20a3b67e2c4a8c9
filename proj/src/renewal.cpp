#include "fragmc/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fragmc/accumulators.hpp"
#include "fragmc/errors.hpp"
#include "fragmc/parallel.hpp"
#include "fragmc/quadrature.hpp"
#include "fragmc/stats.hpp"

namespace fragmc {

RenewalState simulate_residual(const WaitingLaw& law, double t, RngStream& rng) {
  if (!(t >= 0.0)) throw std::domain_error("simulate_residual: t must be >= 0");
  double prev = 0.0, pos = 0.0;
  do {
    prev = pos;
    pos += law.sample(rng);
  } while (pos <= t);
  return {t - prev, pos - t};
}

RenewalState sample_stationary_state(const WaitingLaw& law, RngStream& rng) {
  double y;
  do {
    y = law.sample(rng);
  } while (rng.uniform() * law.b() >= y);
  const double u = rng.uniform();
  return {y * u, y * (1.0 - u)};
}

double StationaryResidualLaw::density(double x) const {
  if (x < 0.0 || x > law_->b()) return 0.0;
  return (1.0 - law_->cdf(x)) / law_->mu();
}

double StationaryResidualLaw::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= law_->b()) return 1.0;
  return (x - law_->cdf_integral(x)) / law_->mu();
}

double StationaryResidualLaw::integrate(const std::function<double(double)>& g,
                                        const std::vector<double>& breakpoints,
                                        double rel_tol) const {
  std::vector<double> brk = breakpoints;
  brk.push_back(law_->a());
  auto integrand = [this, &g](double x) {
    const double gx = g(x);
    if (!std::isfinite(gx)) {
      throw EvaluationError("stationary residual integral: non-finite value at x=" +
                            std::to_string(x));
    }
    return gx * density(x);
  };
  return integrate_piecewise(integrand, 0.0, law_->b(), brk, rel_tol).value;
}

double stationary_residual_mean(const WaitingLaw& law,
                                const std::function<double(double)>& g,
                                const std::vector<double>& breakpoints,
                                double rel_tol) {
  return StationaryResidualLaw(law).integrate(g, breakpoints, rel_tol);
}

DecayReport convergence_rate_probe(const WaitingLaw& law,
                                   const std::function<double(double)>& g,
                                   const std::vector<double>& t_grid,
                                   const DecayProbeOptions& opts,
                                   std::uint64_t seed) {
  if (t_grid.size() < 2) {
    throw ConfigError("convergence_rate_probe: insufficient points (need a grid of >= 2)");
  }
  if (opts.replicas_per_point == 0) {
    throw ConfigError("convergence_rate_probe: replicas_per_point must be >= 1");
  }
  DecayReport report;
  const double center = stationary_residual_mean(law, g);
  if (std::abs(center) > 1e-8) report.auto_centered = true;
  auto gc = [&g, center](double x) { return g(x) - center; };

  for (std::size_t pt = 0; pt < t_grid.size(); ++pt) {
    const double t = t_grid[pt];
    const std::size_t n = opts.replicas_per_point;
    const std::size_t n_chunks = (n + kDefaultGrain - 1) / kDefaultGrain;
    std::vector<MeanVar> partial(n_chunks);
    parallel_chunks(n, opts.jobs, kDefaultGrain,
                    [&](std::size_t chunk, std::size_t lo, std::size_t hi) {
                      MeanVar acc;
                      for (std::size_t r = lo; r < hi; ++r) {
                        RngStream rng(seed, stream_tag::kDecayProbe, pt, r);
                        acc.add(gc(simulate_residual(law, t, rng).residual));
                      }
                      partial[chunk] = acc;
                    });
    MeanVar acc;
    for (const auto& p : partial) acc.merge(p);
    report.points.push_back({t, acc.mean(), acc.stderr_mean(), false});
  }

  std::vector<double> xs, ys;
  for (auto& p : report.points) {
    if (std::abs(p.estimate) > opts.sigma_exclusion * p.stderr_est &&
        p.estimate != 0.0) {
      p.used_in_fit = true;
      xs.push_back(p.t);
      ys.push_back(std::log(std::abs(p.estimate)));
    }
  }
  if (xs.size() < 2) {
    report.fit_available = false;
    report.note = "decay below noise floor: fewer than 2 grid points exceed the " +
                  std::to_string(opts.sigma_exclusion) + "-sigma threshold";
    return report;
  }
  const LinearFit fit = least_squares(xs, ys);
  report.fit_available = true;
  report.slope = fit.slope;
  report.intercept = fit.intercept;
  report.r2 = fit.r2;
  return report;
}

ResidualExpectation::ResidualExpectation(const WaitingLaw& law,
                                         const std::function<double(double)>& f,
                                         const std::vector<double>& breakpoints,
                                         double horizon, double step)
    : horizon_(horizon > 0 ? horizon : 10.0 * law.b()), step_(step) {
  stationary_ = stationary_residual_mean(law, f, breakpoints);
  const std::size_t n = static_cast<std::size_t>(std::ceil(horizon_ / step_)) + 1;
  horizon_ = step_ * static_cast<double>(n - 1);
  values_.resize(n);

  // ghat(t) = E[f(Y - t) 1{Y - t > 0}] on the grid.
  std::vector<double> ghat(n, 0.0);
  auto fv = [&f](double x) {
    const double v = f(x);
    if (!std::isfinite(v)) {
      throw EvaluationError("residual expectation: non-finite f at x=" +
                            std::to_string(x));
    }
    return v;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double t = step_ * static_cast<double>(i);
    if (t >= law.b()) break;
    const double lo = std::max(law.a(), t);
    std::vector<double> brk;
    for (double x : breakpoints) brk.push_back(t + x);  // jumps of f(x - t)
    ghat[i] = integrate_piecewise(
                  [&](double x) { return fv(x - t) * law.density(x); }, lo,
                  law.b(), brk, 1e-9)
                  .value;
  }

  // Exact cell masses and centroids of the waiting law on its support.
  const std::size_t ja = static_cast<std::size_t>(std::floor(law.a() / step_));
  const std::size_t jb =
      std::min(n - 1, static_cast<std::size_t>(std::ceil(law.b() / step_)));
  std::vector<double> mass(jb + 1, 0.0), centroid(jb + 1, 0.0);
  for (std::size_t j = ja; j < jb; ++j) {
    const double lo = step_ * static_cast<double>(j);
    const double hi = step_ * static_cast<double>(j + 1);
    const double m = law.cdf(hi) - law.cdf(lo);
    mass[j] = m;
    if (m > 0) {
      centroid[j] =
          integrate_cell([&law](double x) { return x * law.density(x); }, lo, hi) / m;
    }
  }

  auto interp = [&](double t) {
    if (t <= 0.0) return values_[0];
    const double pos = t / step_;
    std::size_t i = static_cast<std::size_t>(pos);
    if (i >= n - 1) return values_[n - 1];
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * values_[i] + w * values_[i + 1];
  };

  for (std::size_t i = 0; i < n; ++i) {
    const double t = step_ * static_cast<double>(i);
    double conv = 0.0;
    if (t > law.a()) {
      for (std::size_t j = ja; j < jb && step_ * static_cast<double>(j + 1) <= t; ++j) {
        if (mass[j] > 0) conv += mass[j] * interp(t - centroid[j]);
      }
      // partial cell [cell_lo, t]
      const std::size_t jp = static_cast<std::size_t>(t / step_);
      if (jp >= ja && jp < jb) {
        const double lo = step_ * static_cast<double>(jp);
        const double pm = law.cdf(t) - law.cdf(lo);
        if (pm > 0) conv += pm * interp(t - 0.5 * (lo + t));
      }
    }
    values_[i] = ghat[i] + conv;
  }
}

double ResidualExpectation::operator()(double t) const {
  if (t <= 0.0) return values_.front();
  if (t >= horizon_) return stationary_;
  const double pos = t / step_;
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= values_.size()) return values_.back();
  const double w = pos - static_cast<double>(i);
  return (1.0 - w) * values_[i] + w * values_[i + 1];
}

}  // namespace fragmc
