#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "fragmc/dislocation.hpp"
#include "fragmc/fragmentation_tree.hpp"
#include "fragmc/rng.hpp"

namespace fragmc {

struct TaggedOptions {
  bool keep_history = false;  // retain per-tag renewal times and cut nodes
  bool full_tree = false;     // expand untagged branches too, filling `tree`
  TreeOptions tree;
};

/// One tag-bearing node of the genealogy, identified by the log-size
/// interval it spans: it belongs to the level-t cut iff
/// parent_level <= t < level.
struct TaggedNode {
  double parent_level = 0.0;
  double level = 0.0;
  std::uint32_t tags = 0;
};

/// Result of running the chain with q uniformly painted tags until every
/// tag-bearing fragment is frozen below epsilon.
struct TaggedRun {
  int q = 0;
  double epsilon = 0.0;
  double t_depth = 0.0;
  std::vector<double> residuals;               // per tag: -log(frozen size) - T
  std::vector<std::uint32_t> frozen_groups;    // tag set per frozen fragment
  std::vector<std::vector<double>> histories;  // per tag: 0 = S_0 < S_1 < ...
  std::vector<TaggedNode> nodes;               // history mode only
  FrozenRun tree;                              // full mode only

  bool all_distinct() const;
};

/// Tags travel by child choice: at each split every tag in the fragment
/// independently picks a child with probability equal to the child's
/// relative size. Only tag-bearing branches are expanded unless
/// opts.full_tree is set.
TaggedRun simulate_tagged(const MeasureSpec& spec, double epsilon, int q,
                          RngStream& rng, const TaggedOptions& opts = {});

/// Level-t cut of the tag-bearing genealogy with the pairing diagnostics.
struct CutSnapshot {
  double t = 0.0;
  std::vector<std::uint32_t> tag_sets;          // one per cut member
  int singleton_count = 0;                      // members carrying one tag
  int excess = 0;                               // sum (#tags - 1) over members
  bool paired_exactly = false;                  // every pair {2i-1,2i} alone on a member
  std::vector<bool> pair_together;              // pair i rides one member (subset)
  bool paired_on_distinct = false;              // some pair partition realised exactly
  std::vector<std::pair<int, int>> pairing;     // the realised partition, 1-based tags
};

CutSnapshot snapshot(const TaggedRun& run, double t);

struct MomentEstimate {
  double mean = 0.0;
  double stderr_mean = 0.0;
  std::size_t replicas = 0;
};

/// Monte Carlo estimate of E[F(residuals) * 1{all tags on distinct frozen
/// fragments}] over independent tagged runs.
MomentEstimate tagged_moment(const MeasureSpec& spec, double epsilon, int q,
                             const std::function<double(const std::vector<double>&)>& F,
                             std::size_t replicas, std::uint64_t seed,
                             unsigned jobs = 1);

/// Product-form F from per-coordinate functions of the residuals.
std::function<double(const std::vector<double>&)> product_of(
    std::vector<std::function<double(double)>> fs);

}  // namespace fragmc
