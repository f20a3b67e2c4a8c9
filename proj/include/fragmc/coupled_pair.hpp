#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

#include "fragmc/dislocation.hpp"
#include "fragmc/renewal.hpp"
#include "fragmc/rng.hpp"

namespace fragmc {

/// A bounded function of the residual together with its known jump
/// locations, so quadratures (centering checks, propagated expectations) can
/// split there. Converts implicitly from any callable.
struct ResidualFunction {
  std::function<double(double)> fn;
  std::vector<double> breakpoints;

  ResidualFunction() = default;
  template <class F,
            class = std::enable_if_t<std::is_invocable_r_v<double, F, double>>>
  ResidualFunction(F&& f, std::vector<double> brk = {})
      : fn(std::forward<F>(f)), breakpoints(std::move(brk)) {}
  double operator()(double x) const { return fn(x); }
};

/// One draw of the stationary coupled pair evaluated at time 0: the two tags
/// separated at level v; `alive` is the indicator that the first tag's
/// residual at 0 reaches v (always true for v <= 0). Dead samples contribute
/// 0 to the kernel integrand.
struct PairSample {
  double v = 0.0;
  bool alive = false;
  double b1 = 0.0;
  double b2 = 0.0;
};

/// Residual of the second tag at the separation level, given the first tag's
/// (age, residual) there: the second tag departs at relative time -age into
/// the sibling of the straddling jump and renews forward past the level.
/// (age, residual) must satisfy age, residual in [0,b] with
/// a <= age+residual <= b.
double sample_sibling_residual(const WaitingLaw& law, double age, double residual,
                               RngStream& rng);

PairSample sample_pair_at_zero(const WaitingLaw& law, double v, RngStream& rng);

struct KernelSegment {
  double v_lo = 0.0;
  double v_hi = 0.0;
  double contribution = 0.0;
  double stderr_contribution = 0.0;
};

struct KernelEstimate {
  double value = 0.0;
  double stderr_value = 0.0;
  double v_min = 0.0;
  std::vector<KernelSegment> segments;
};

enum class KernelEstimator {
  /// Per sample, draw only the split state and multiply the two tags'
  /// conditional expectations propagated through the deterministic renewal
  /// solve. Unbiased (the tags evolve independently given the split state)
  /// and the only estimator whose node noise decays with |v|, which the
  /// adaptive tail rule needs.
  RaoBlackwell,
  /// Direct simulation of both residuals per sample. Kept for
  /// cross-validation; its node noise is amplified by the e^{-v} weight.
  Naive,
};

struct KernelOptions {
  double dv = 0.05;
  std::size_t samples_per_node = 20000;
  int initial_segments = 3;
  int max_segments = 24;
  double tail_rel = 1e-4;    // tail tolerance: max(tail_rel*|value|, tail_floor)
  double tail_floor = 1e-8;
  bool require_centered = true;
  KernelEstimator estimator = KernelEstimator::RaoBlackwell;
  unsigned jobs = 1;
};

/// Thrown when the adaptive tail extension hits max_segments; carries the
/// partial estimate.
class KernelTailError : public std::runtime_error {
 public:
  KernelTailError(const std::string& what, KernelEstimate partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const KernelEstimate& partial() const { return partial_; }

 private:
  KernelEstimate partial_;
};

/// The covariance kernel: integral over separation levels v in (-inf, b] of
/// e^{-v} E[ 1{v <= B1(0)} f(B1(0)) g(B2(0)) ], by composite midpoint
/// quadrature in v (segments of length b, extended left until the last
/// segment's contribution clears the tail tolerance) with per-node Monte
/// Carlo over derived streams.
KernelEstimate pair_covariance_kernel(const WaitingLaw& law,
                                      const ResidualFunction& f,
                                      const ResidualFunction& g,
                                      const KernelOptions& opts, std::uint64_t seed);

struct KernelMatrix {
  std::vector<std::vector<double>> value;        // symmetrised
  std::vector<std::vector<double>> stderr_value;
  std::vector<std::vector<double>> raw_value;    // directional estimates
  std::vector<std::vector<double>> raw_stderr;
  double max_asymmetry_sigma = 0.0;  // max |V(f,g)-V(g,f)| / joint sigma
};

KernelMatrix pair_covariance_matrix(const WaitingLaw& law,
                                    const std::vector<ResidualFunction>& fs,
                                    const KernelOptions& opts, std::uint64_t seed);

}  // namespace fragmc
