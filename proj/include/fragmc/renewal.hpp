#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fragmc/dislocation.hpp"
#include "fragmc/rng.hpp"

namespace fragmc {

/// State of a renewal process at a fixed time: age = time since the last
/// renewal, residual = time to the next one. age + residual is the waiting
/// interval straddling the observation time.
struct RenewalState {
  double age = 0.0;
  double residual = 0.0;
};

/// Zero-delay renewal process run until it passes t.
RenewalState simulate_residual(const WaitingLaw& law, double t, RngStream& rng);

/// (age, residual) under the stationary joint law: the straddling interval is
/// length-biased (density x/mu w.r.t. the waiting law, sampled by rejection
/// with acceptance x/b) and a uniform fraction splits it into age + residual.
RenewalState sample_stationary_state(const WaitingLaw& law, RngStream& rng);

/// Limit law of the residual lifetime, with density (1 - F(x))/mu on [0,b].
class StationaryResidualLaw {
 public:
  explicit StationaryResidualLaw(const WaitingLaw& law) : law_(&law) {}
  double density(double x) const;
  double cdf(double x) const;
  double upper() const { return law_->b(); }
  /// Integral of g against the law, adaptive quadrature split at the
  /// density kink x = a plus any supplied breakpoints of g.
  double integrate(const std::function<double(double)>& g,
                   const std::vector<double>& breakpoints = {},
                   double rel_tol = 1e-8) const;

 private:
  const WaitingLaw* law_;
};

inline StationaryResidualLaw stationary_residual_law(const WaitingLaw& law) {
  return StationaryResidualLaw(law);
}

double stationary_residual_mean(const WaitingLaw& law,
                                const std::function<double(double)>& g,
                                const std::vector<double>& breakpoints = {},
                                double rel_tol = 1e-8);

struct DecayPoint {
  double t = 0.0;
  double estimate = 0.0;
  double stderr_est = 0.0;
  bool used_in_fit = false;
};

struct DecayReport {
  std::vector<DecayPoint> points;
  bool fit_available = false;   // false => below noise floor everywhere
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  bool auto_centered = false;
  std::string note;
};

struct DecayProbeOptions {
  std::size_t replicas_per_point = 100000;
  unsigned jobs = 1;
  double sigma_exclusion = 3.0;  // drop points with |estimate| <= k * stderr
};

/// Estimates E[g(B_t)] on the grid and fits log|estimate| against t on the
/// points that clear the noise floor. g is centered against the stationary
/// residual law first (flagged in the report if that changed it).
DecayReport convergence_rate_probe(const WaitingLaw& law,
                                   const std::function<double(double)>& g,
                                   const std::vector<double>& t_grid,
                                   const DecayProbeOptions& opts,
                                   std::uint64_t seed);

/// Deterministic solve of psi(t) = E[f(B_t)] for the zero-delay renewal
/// process, by product integration of the renewal equation with exact
/// waiting-law cell masses. Evaluation is cubic-free linear interpolation on
/// a fine grid; beyond the horizon it returns the stationary mean of f.
class ResidualExpectation {
 public:
  ResidualExpectation(const WaitingLaw& law, const std::function<double(double)>& f,
                      const std::vector<double>& breakpoints = {},
                      double horizon = 0.0, double step = 1e-3);
  double operator()(double t) const;
  double horizon() const { return horizon_; }
  double stationary_value() const { return stationary_; }

 private:
  double horizon_ = 0.0;
  double step_ = 0.0;
  double stationary_ = 0.0;
  std::vector<double> values_;
};

}  // namespace fragmc
