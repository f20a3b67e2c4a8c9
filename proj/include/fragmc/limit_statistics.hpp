#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fragmc/coupled_pair.hpp"
#include "fragmc/dislocation.hpp"

namespace fragmc {

/// A test function on [0,1] (the rescaled-size domain of the empirical
/// measure), with its known discontinuities so quadratures can split there.
struct TestFunction {
  std::string name;
  std::function<double(double)> fn;
  std::vector<double> breakpoints;  // x-space jump locations
  bool centered = false;
  double lln_limit_value = 0.0;  // cached once centered
};

/// y -> f(e^{-y}): moves a test function to the residual (log) scale.
std::function<double(double)> compose_exp_neg(std::function<double(double)> f);

/// Breakpoints of the composed function on [0,b].
std::vector<double> log_scale_breakpoints(const std::vector<double>& x_breaks);

/// Almost-sure limit of the size-weighted empirical mean of f.
double lln_limit(const WaitingLaw& law, const TestFunction& f);

/// f minus its limit; re-verified to be centered to 1e-8.
TestFunction center(const WaitingLaw& law, const TestFunction& f);

struct CovarianceModel {
  std::vector<std::string> names;
  std::vector<std::vector<double>> covariance;
  std::vector<std::vector<double>> covariance_stderr;
  std::vector<std::vector<double>> eta_part;  // deterministic quadrature
  std::vector<std::vector<double>> v_part;
  std::vector<std::vector<double>> v_part_stderr;
  double max_asymmetry_sigma = 0.0;
  std::vector<bool> negative_diagonal;  // flagged, never clamped
};

/// CLT covariance: K_ij = eta( e^{-y} f_i f_j (e^{-y}) ) + V_sym composed on
/// the log scale. All fs must be centered; the composition is done here so
/// callers cannot mix up domains.
CovarianceModel clt_covariance(const WaitingLaw& law,
                               const std::vector<TestFunction>& fs,
                               const KernelOptions& kernel_opts, std::uint64_t seed);

/// All partitions of {1..q} (q even, q <= 12) into unordered pairs.
std::vector<std::vector<std::pair<int, int>>> pair_partitions(int q);

/// q! / ((q/2)! 2^{q/2}) = (q-1)!!
std::uint64_t pair_partition_count(int q);

/// Sum over pair partitions of products of kernel entries; v_sym must be the
/// symmetrised q x q kernel matrix of the q (centered, log-scale) functions.
double pairing_limit_moment(const std::vector<std::vector<double>>& v_sym, int q);

/// sum_{i in [q]} q!/(q-i)! * i^{q-i}; the combinatorial constant in the
/// multi-tag colocation bound.
std::uint64_t colocation_bound_constant(int q);

}  // namespace fragmc
