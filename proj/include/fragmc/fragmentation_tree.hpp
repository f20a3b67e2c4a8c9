#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fragmc/dislocation.hpp"
#include "fragmc/rng.hpp"

namespace fragmc {

/// Fragments observed the first time their size drops below epsilon.
/// Sizes all lie in [delta*epsilon, epsilon) and sum to 1.
struct FrozenRun {
  double epsilon = 0.0;
  double t_depth = 0.0;  // -log(epsilon)
  std::vector<double> sizes;
  std::vector<double> parent_ratios;  // size / mother size, when recorded
};

struct TreeOptions {
  std::size_t max_fragments = 50'000'000;  // memory guard
  bool check_conservation = false;   // verify child sums at every split
  bool record_parent_ratios = false;  // keep size/mother-size per fragment
};

/// Expands the fragmentation chain from a unit block, freezing fragments as
/// they drop below epsilon. Depth-first with an explicit stack; identical
/// (spec, epsilon, seed) gives a bit-identical run.
FrozenRun simulate_frozen(const MeasureSpec& spec, double epsilon, RngStream& rng,
                          const TreeOptions& opts = {});

/// Streaming variant: frozen fragments are fed to the visitor in traversal
/// order as (size, size / mother size) without being stored.
void visit_frozen(const MeasureSpec& spec, double epsilon, RngStream& rng,
                  const std::function<void(double, double)>& visit,
                  const TreeOptions& opts = {});

/// Size-weighted empirical mean: sum_u size_u * f(size_u / epsilon), with
/// compensated summation.
double empirical_measure(const FrozenRun& run, const std::function<double(double)>& f);

/// Same, computed streaming (for runs too large to keep).
double empirical_measure_streamed(const MeasureSpec& spec, double epsilon,
                                  RngStream& rng, const std::function<double(double)>& f,
                                  const TreeOptions& opts = {});

/// Product-form moment with replacement: prod_j empirical_measure(f_j).
double u_statistic_with_replacement(const FrozenRun& run,
                                    const std::vector<std::function<double(double)>>& fs);

/// Injective-tuple (distinct-fragment) moment for product-form F, exact via
/// inclusion-exclusion over coincidence partitions; supports q <= 4.
double u_statistic_distinct(const FrozenRun& run,
                            const std::vector<std::function<double(double)>>& fs);

/// Dense two-argument variants for non-product F (capped quadratic cost).
double u_statistic_with_replacement_dense(
    const FrozenRun& run, const std::function<double(double, double)>& f2,
    std::size_t cap = 4000);
double u_statistic_distinct_dense(const FrozenRun& run,
                                  const std::function<double(double, double)>& f2,
                                  std::size_t cap = 4000);

/// CSV dump (size, size/epsilon), capped at max_rows.
void write_fragment_csv(const FrozenRun& run, const std::string& path,
                        std::size_t max_rows);

}  // namespace fragmc
