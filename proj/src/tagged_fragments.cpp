#include "fragmc/tagged_fragments.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "fragmc/accumulators.hpp"
#include "fragmc/parallel.hpp"

namespace fragmc {

bool TaggedRun::all_distinct() const {
  for (std::uint32_t g : frozen_groups) {
    if (std::popcount(g) != 1) return false;
  }
  return true;
}

TaggedRun simulate_tagged(const MeasureSpec& spec, double epsilon, int q,
                          RngStream& rng, const TaggedOptions& opts) {
  validate(spec);
  if (q < 1 || q > 20) throw std::domain_error("simulate_tagged: q must be in [1,20]");
  const double delta = spec.c;
  if (!(epsilon > 0.0) || !(epsilon < delta)) {
    throw std::domain_error("simulate_tagged: epsilon must lie in (0, delta)");
  }
  TaggedRun run;
  run.q = q;
  run.epsilon = epsilon;
  run.t_depth = -std::log(epsilon);
  run.residuals.assign(static_cast<std::size_t>(q), 0.0);
  if (opts.keep_history) {
    run.histories.assign(static_cast<std::size_t>(q), std::vector<double>{0.0});
  }
  if (opts.full_tree) {
    run.tree.epsilon = epsilon;
    run.tree.t_depth = run.t_depth;
  }

  struct Active {
    double level;
    std::uint32_t tags;
  };
  std::vector<Active> stack;
  stack.push_back({0.0, q == 32 ? ~0u : ((1u << q) - 1u)});
  std::vector<double> plain;  // untagged branches, by size (full mode)
  std::size_t emitted = 0;

  auto emit_plain = [&](double size) {
    if (++emitted > opts.tree.max_fragments) {
      throw std::runtime_error("simulate_tagged: fragment cap exceeded");
    }
    run.tree.sizes.push_back(size);
  };

  while (!stack.empty()) {
    const Active node = stack.back();
    stack.pop_back();
    const double s = sample_binary_fraction(spec, rng);
    const double lev1 = node.level - std::log(s);
    const double lev2 = node.level - std::log1p(-s);
    std::uint32_t tags1 = 0, tags2 = 0;
    for (int k = 0; k < q; ++k) {
      const std::uint32_t bit = 1u << k;
      if (!(node.tags & bit)) continue;
      if (rng.uniform() < s) {
        tags1 |= bit;
      } else {
        tags2 |= bit;
      }
    }
    const double levels[2] = {lev1, lev2};
    const std::uint32_t masks[2] = {tags1, tags2};
    for (int side = 0; side < 2; ++side) {
      const double lev = levels[side];
      const std::uint32_t mask = masks[side];
      if (mask == 0) {
        if (opts.full_tree) {
          const double size = std::exp(-lev);
          if (size < epsilon) {
            emit_plain(size);
          } else {
            plain.push_back(size);
          }
        }
        continue;
      }
      if (opts.keep_history) {
        run.nodes.push_back({node.level, lev, mask});
        for (int k = 0; k < q; ++k) {
          if (mask & (1u << k)) run.histories[static_cast<std::size_t>(k)].push_back(lev);
        }
      }
      if (lev > run.t_depth) {
        run.frozen_groups.push_back(mask);
        for (int k = 0; k < q; ++k) {
          if (mask & (1u << k)) {
            run.residuals[static_cast<std::size_t>(k)] = lev - run.t_depth;
          }
        }
        if (opts.full_tree) emit_plain(std::exp(-lev));
      } else {
        stack.push_back({lev, mask});
      }
    }
  }

  if (opts.full_tree) {
    while (!plain.empty()) {
      const double x = plain.back();
      plain.pop_back();
      const double s = sample_binary_fraction(spec, rng);
      const double child[2] = {x * s, x * (1.0 - s)};
      for (double ch : child) {
        if (ch < epsilon) {
          emit_plain(ch);
        } else {
          plain.push_back(ch);
        }
      }
    }
  }
  return run;
}

CutSnapshot snapshot(const TaggedRun& run, double t) {
  if (run.nodes.empty()) {
    throw std::logic_error("snapshot: run was simulated without keep_history");
  }
  if (!(t >= 0.0) || t > run.t_depth) {
    throw std::domain_error("snapshot: t must lie in [0, T]");
  }
  CutSnapshot snap;
  snap.t = t;
  int tag_total = 0;
  for (const auto& node : run.nodes) {
    if (node.parent_level <= t && t < node.level) {
      snap.tag_sets.push_back(node.tags);
      const int m = std::popcount(node.tags);
      tag_total += m;
      if (m == 1) ++snap.singleton_count;
      snap.excess += m - 1;
    }
  }
  if (tag_total != run.q) {
    throw std::logic_error("snapshot: tag conservation violated on the cut");
  }
  if (run.q % 2 == 0) {
    const int p = run.q / 2;
    snap.paired_exactly = true;
    snap.pair_together.assign(static_cast<std::size_t>(p), false);
    for (int i = 0; i < p; ++i) {
      const std::uint32_t pair_mask = (1u << (2 * i)) | (1u << (2 * i + 1));
      bool exact = false, together = false;
      for (std::uint32_t g : snap.tag_sets) {
        if (g == pair_mask) exact = true;
        if ((g & pair_mask) == pair_mask) together = true;
      }
      snap.pair_together[static_cast<std::size_t>(i)] = together;
      if (!exact) snap.paired_exactly = false;
    }
  }
  snap.paired_on_distinct = !snap.tag_sets.empty();
  for (std::uint32_t g : snap.tag_sets) {
    if (std::popcount(g) != 2) snap.paired_on_distinct = false;
  }
  if (snap.paired_on_distinct) {
    for (std::uint32_t g : snap.tag_sets) {
      int bits[2] = {0, 0};
      int cnt = 0;
      for (int k = 0; k < run.q && cnt < 2; ++k) {
        if (g & (1u << k)) bits[cnt++] = k;
      }
      snap.pairing.emplace_back(bits[0] + 1, bits[1] + 1);
    }
  }
  return snap;
}

MomentEstimate tagged_moment(const MeasureSpec& spec, double epsilon, int q,
                             const std::function<double(const std::vector<double>&)>& F,
                             std::size_t replicas, std::uint64_t seed, unsigned jobs) {
  if (replicas == 0) throw std::invalid_argument("tagged_moment: replicas must be >= 1");
  const std::size_t n_chunks = (replicas + kDefaultGrain - 1) / kDefaultGrain;
  std::vector<MeanVar> partial(n_chunks);
  parallel_chunks(replicas, jobs, kDefaultGrain,
                  [&](std::size_t chunk, std::size_t lo, std::size_t hi) {
                    MeanVar acc;
                    TaggedOptions opts;  // cheap mode
                    for (std::size_t r = lo; r < hi; ++r) {
                      RngStream rng(seed, stream_tag::kTagged, r);
                      const TaggedRun run = simulate_tagged(spec, epsilon, q, rng, opts);
                      acc.add(run.all_distinct() ? F(run.residuals) : 0.0);
                    }
                    partial[chunk] = acc;
                  });
  MeanVar acc;
  for (const auto& p : partial) acc.merge(p);
  return {acc.mean(), acc.stderr_mean(), replicas};
}

std::function<double(const std::vector<double>&)> product_of(
    std::vector<std::function<double(double)>> fs) {
  return [fs = std::move(fs)](const std::vector<double>& xs) {
    double prod = 1.0;
    for (std::size_t i = 0; i < fs.size(); ++i) prod *= fs[i](xs[i]);
    return prod;
  };
}

}  // namespace fragmc
