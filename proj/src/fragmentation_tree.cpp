#include "fragmc/fragmentation_tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "fragmc/accumulators.hpp"
#include "fragmc/errors.hpp"

namespace fragmc {

namespace {

void check_epsilon(const MeasureSpec& spec, double epsilon) {
  validate(spec);
  const double delta = spec.c;  // e^{-b} with b = -log c
  if (!(epsilon > 0.0) || !(epsilon < delta)) {
    throw std::domain_error(
        "simulate_frozen: epsilon must lie in (0, delta); delta = " +
        std::to_string(delta));
  }
}

}  // namespace

void visit_frozen(const MeasureSpec& spec, double epsilon, RngStream& rng,
                  const std::function<void(double, double)>& visit,
                  const TreeOptions& opts) {
  check_epsilon(spec, epsilon);
  std::vector<double> stack;
  stack.push_back(1.0);
  std::size_t emitted = 0;
  while (!stack.empty()) {
    const double x = stack.back();
    stack.pop_back();
    const double s = sample_binary_fraction(spec, rng);
    const double frac[2] = {s, 1.0 - s};
    if (opts.check_conservation) {
      const double rel = std::abs((x * s + x * (1.0 - s)) - x) / x;
      if (rel > 1e-12) {
        throw std::runtime_error("conservation violated at a split, rel err " +
                                 std::to_string(rel));
      }
    }
    for (double f : frac) {
      const double ch = x * f;
      if (ch < epsilon) {
        if (++emitted > opts.max_fragments) {
          throw std::runtime_error(
              "simulate_frozen: fragment cap exceeded (max_fragments=" +
              std::to_string(opts.max_fragments) + ")");
        }
        visit(ch, f);
      } else {
        stack.push_back(ch);
      }
    }
  }
}

FrozenRun simulate_frozen(const MeasureSpec& spec, double epsilon, RngStream& rng,
                          const TreeOptions& opts) {
  FrozenRun run;
  run.epsilon = epsilon;
  run.t_depth = -std::log(epsilon);
  run.sizes.reserve(static_cast<std::size_t>(std::min(
      2.0 / (spec.c * epsilon), static_cast<double>(opts.max_fragments))));
  visit_frozen(spec, epsilon, rng,
               [&run, &opts](double s, double ratio) {
                 run.sizes.push_back(s);
                 if (opts.record_parent_ratios) run.parent_ratios.push_back(ratio);
               },
               opts);
  return run;
}

namespace {

double checked(const std::function<double(double)>& f, double x) {
  const double v = f(x);
  if (!std::isfinite(v)) {
    throw EvaluationError("empirical measure: non-finite test-function value at " +
                          std::to_string(x));
  }
  return v;
}

}  // namespace

double empirical_measure(const FrozenRun& run, const std::function<double(double)>& f) {
  CompensatedSum acc;
  for (double s : run.sizes) acc.add(s * checked(f, s / run.epsilon));
  return acc.value();
}

double empirical_measure_streamed(const MeasureSpec& spec, double epsilon,
                                  RngStream& rng,
                                  const std::function<double(double)>& f,
                                  const TreeOptions& opts) {
  CompensatedSum acc;
  visit_frozen(spec, epsilon, rng,
               [&](double s, double) { acc.add(s * checked(f, s / epsilon)); }, opts);
  return acc.value();
}

double u_statistic_with_replacement(
    const FrozenRun& run, const std::vector<std::function<double(double)>>& fs) {
  double prod = 1.0;
  for (const auto& f : fs) prod *= empirical_measure(run, f);
  return prod;
}

namespace {

/// All set partitions of {0,...,q-1} as block-index assignments.
void enumerate_partitions(int q, std::vector<std::vector<std::vector<int>>>& out) {
  std::vector<int> assign(q, 0);
  std::function<void(int, int)> rec = [&](int i, int max_block) {
    if (i == q) {
      std::vector<std::vector<int>> blocks(max_block);
      for (int k = 0; k < q; ++k) blocks[assign[k]].push_back(k);
      out.push_back(std::move(blocks));
      return;
    }
    for (int blk = 0; blk <= max_block; ++blk) {
      assign[i] = blk;
      rec(i + 1, std::max(max_block, blk + 1));
    }
  };
  rec(0, 0);
}

}  // namespace

double u_statistic_distinct(const FrozenRun& run,
                            const std::vector<std::function<double(double)>>& fs) {
  const int q = static_cast<int>(fs.size());
  if (q < 1) throw std::invalid_argument("u_statistic_distinct: need q >= 1");
  if (q > 4) {
    throw std::invalid_argument(
        "u_statistic_distinct: exact evaluation supported for q <= 4 only");
  }
  // Cache f_j(size/eps) per fragment.
  std::vector<std::vector<double>> fv(q);
  for (int j = 0; j < q; ++j) {
    fv[j].reserve(run.sizes.size());
    for (double s : run.sizes) fv[j].push_back(checked(fs[j], s / run.epsilon));
  }
  std::vector<std::vector<std::vector<int>>> partitions;
  enumerate_partitions(q, partitions);

  // Sum over injective tuples = sum over coincidence partitions P of
  // prod_{B in P} (-1)^{|B|-1} (|B|-1)! * sum_u size^{|B|} prod_{j in B} f_j.
  double total = 0.0;
  for (const auto& blocks : partitions) {
    double term = 1.0;
    for (const auto& block : blocks) {
      const int m = static_cast<int>(block.size());
      CompensatedSum bs;
      for (std::size_t u = 0; u < run.sizes.size(); ++u) {
        double w = std::pow(run.sizes[u], m);
        for (int j : block) w *= fv[static_cast<std::size_t>(j)][u];
        bs.add(w);
      }
      // Moebius weight of a merged block: (-1)^{m-1} (m-1)!
      double weight = (m % 2 == 1 ? 1.0 : -1.0);
      for (int k = 2; k <= m - 1; ++k) weight *= k;
      term *= weight * bs.value();
    }
    total += term;
  }
  return total;
}

double u_statistic_with_replacement_dense(
    const FrozenRun& run, const std::function<double(double, double)>& f2,
    std::size_t cap) {
  if (run.sizes.size() > cap) {
    throw std::invalid_argument(
        "dense two-argument moment: run exceeds the dense evaluation cap");
  }
  CompensatedSum acc;
  for (double x : run.sizes) {
    for (double y : run.sizes) {
      acc.add(x * y * f2(x / run.epsilon, y / run.epsilon));
    }
  }
  return acc.value();
}

double u_statistic_distinct_dense(const FrozenRun& run,
                                  const std::function<double(double, double)>& f2,
                                  std::size_t cap) {
  if (run.sizes.size() > cap) {
    throw std::invalid_argument(
        "dense two-argument moment: run exceeds the dense evaluation cap");
  }
  CompensatedSum acc;
  for (std::size_t i = 0; i < run.sizes.size(); ++i) {
    for (std::size_t j = 0; j < run.sizes.size(); ++j) {
      if (i == j) continue;
      acc.add(run.sizes[i] * run.sizes[j] *
              f2(run.sizes[i] / run.epsilon, run.sizes[j] / run.epsilon));
    }
  }
  return acc.value();
}

void write_fragment_csv(const FrozenRun& run, const std::string& path,
                        std::size_t max_rows) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + path);
  std::fprintf(fp, "size,size_over_epsilon\n");
  const std::size_t n = std::min(max_rows, run.sizes.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::fprintf(fp, "%.17g,%.17g\n", run.sizes[i], run.sizes[i] / run.epsilon);
  }
  std::fclose(fp);
}

}  // namespace fragmc
