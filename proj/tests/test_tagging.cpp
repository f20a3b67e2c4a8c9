#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <vector>

#include "fragmc/accumulators.hpp"
#include "fragmc/dislocation.hpp"
#include "fragmc/fragmentation_tree.hpp"
#include "fragmc/renewal.hpp"
#include "fragmc/stats.hpp"
#include "fragmc/tagged_fragments.hpp"
#include "reference_values.hpp"

using namespace fragmc;

namespace {
const MeasureSpec kRef = MeasureSpec::binary_uniform(0.3);
}

TEST_CASE("one tag: renewal histories have waiting-law increments, residual matches") {
  const WaitingLaw law(kRef);
  const double eps = 1e-3, t_depth = -std::log(eps);
  RngStream rng(4001), rng2(4002);
  std::vector<double> waits, direct_waits, residuals, direct_residuals;
  TaggedOptions opts;
  opts.keep_history = true;
  for (int i = 0; i < 20000; ++i) {
    const TaggedRun run = simulate_tagged(kRef, eps, 1, rng, opts);
    const auto& h = run.histories[0];
    REQUIRE(h.front() == 0.0);
    for (std::size_t j = 1; j < h.size(); ++j) {
      const double w = h[j] - h[j - 1];
      REQUIRE(w >= law.a() - 1e-12);
      REQUIRE(w <= law.b() + 1e-12);
      if (waits.size() < 100000) waits.push_back(w);
    }
    REQUIRE(run.residuals[0] ==
            doctest::Approx(h.back() - t_depth).epsilon(1e-9));
    residuals.push_back(run.residuals[0]);
    direct_waits.push_back(law.sample(rng2));
    direct_residuals.push_back(simulate_residual(law, t_depth, rng2).residual);
  }
  CHECK(ks_two_sample(waits, direct_waits).passes(0.01));
  CHECK(ks_two_sample(residuals, direct_residuals).passes(0.01));
}

TEST_CASE("tag conservation holds on every cut") {
  RngStream rng(4003);
  TaggedOptions opts;
  opts.keep_history = true;
  for (int i = 0; i < 200; ++i) {
    const TaggedRun run = simulate_tagged(kRef, 1e-3, 4, rng, opts);
    for (double frac : {0.0, 0.33, 0.8, 1.0}) {
      const CutSnapshot snap = snapshot(run, frac * run.t_depth);
      int total = 0;
      for (auto g : snap.tag_sets) total += std::popcount(g);
      REQUIRE(total == 4);
      REQUIRE(snap.excess == 4 - static_cast<int>(snap.tag_sets.size()));
    }
    CHECK_THROWS_AS(snapshot(run, run.t_depth + 0.1), std::domain_error);
  }
  // history not retained -> logic error
  const TaggedRun bare = simulate_tagged(kRef, 1e-3, 2, rng);
  CHECK_THROWS_AS(snapshot(bare, 0.5), std::logic_error);
}

TEST_CASE("cut at level zero holds the root's tag-bearing children") {
  // The level-0 cut consists of fragments smaller than 1 whose mother is the
  // root, so all q tags are spread over the root's children.
  RngStream rng(4004);
  TaggedOptions opts;
  opts.keep_history = true;
  int saw_two_members = 0;
  for (int i = 0; i < 200; ++i) {
    const TaggedRun run = simulate_tagged(kRef, 1e-2, 3, rng, opts);
    const CutSnapshot snap = snapshot(run, 0.0);
    REQUIRE(snap.tag_sets.size() >= 1);
    REQUIRE(snap.tag_sets.size() <= 2);  // binary splits
    if (snap.tag_sets.size() == 2) ++saw_two_members;
    int total = 0;
    for (auto g : snap.tag_sets) total += std::popcount(g);
    REQUIRE(total == 3);
  }
  CHECK(saw_two_members > 0);  // tags do split at the very first dislocation
}

TEST_CASE("final cut pairing flags agree with the frozen groups") {
  RngStream rng(4005);
  TaggedOptions opts;
  opts.keep_history = true;
  int together = 0;
  for (int i = 0; i < 500; ++i) {
    const TaggedRun run = simulate_tagged(kRef, 1e-2, 2, rng, opts);
    const CutSnapshot snap = snapshot(run, run.t_depth);
    REQUIRE(snap.pair_together.size() == 1);
    CHECK(snap.pair_together[0] == !run.all_distinct());
    if (!run.all_distinct()) ++together;
    // with q=2, an exact pairing on the cut means the two tags share a member
    CHECK(snap.paired_on_distinct == !run.all_distinct());
  }
  CHECK(together > 0);
}

TEST_CASE("exchangeability: symmetric statistics agree across tags") {
  RngStream rng(4006);
  MeanVar diff;
  for (int i = 0; i < 100000; ++i) {
    const TaggedRun run = simulate_tagged(kRef, 1e-2, 2, rng);
    diff.add(std::exp(-run.residuals[0]) - std::exp(-run.residuals[1]));
  }
  CHECK(std::abs(diff.mean()) < 4.0 * diff.stderr_mean());
}

TEST_CASE("two tags stay together past freezing with probability <= eps/delta") {
  const double eps = 1e-3;
  RngStream rng(4007);
  MeanVar freq;
  for (int i = 0; i < 100000; ++i) {
    const TaggedRun run = simulate_tagged(kRef, eps, 2, rng);
    freq.add(run.all_distinct() ? 0.0 : 1.0);
  }
  CHECK(freq.mean() <= eps / 0.3 + 4.0 * freq.stderr_mean());
}

TEST_CASE("tag transfer frequency equals the child proportion (binned chi2)") {
  RngStream rng(4008);
  constexpr int kBins = 10;
  std::vector<double> obs(kBins, 0.0), expd(kBins, 0.0), var(kBins, 0.0);
  for (int i = 0; i < 1000000; ++i) {
    const double s = sample_binary_fraction(kRef, rng);
    const bool follow = rng.uniform() < s;
    int bin = static_cast<int>((s - 0.3) / 0.4 * kBins);
    bin = std::min(std::max(bin, 0), kBins - 1);
    obs[bin] += follow ? 1.0 : 0.0;
    expd[bin] += s;
    var[bin] += s * (1.0 - s);
  }
  double chi2 = 0.0;
  for (int b = 0; b < kBins; ++b) {
    const double z = (obs[b] - expd[b]) / std::sqrt(var[b]);
    chi2 += z * z;
  }
  CHECK(chi2 < chi_squared_quantile(kBins, 0.99));
}

TEST_CASE("excess-tag probability obeys the combinatorial bound") {
  // P(L_{alpha T} >= 3) <= K1(4) eps^2 with q = 4, alpha in [q/(2k), 1].
  const double eps = 1e-3, alpha = 0.8;
  RngStream rng(4009);
  TaggedOptions opts;
  opts.keep_history = true;
  MeanVar freq;
  for (int i = 0; i < 20000; ++i) {
    const TaggedRun run = simulate_tagged(kRef, eps, 4, rng, opts);
    const CutSnapshot snap = snapshot(run, alpha * run.t_depth);
    freq.add(snap.excess >= 3 ? 1.0 : 0.0);
  }
  const double bound = 148.0 * eps * eps;  // K1(4) = 148
  CHECK(freq.mean() <= bound + 4.0 * freq.stderr_mean());
}

TEST_CASE("tagged moment agrees with the tree-side distinct-tuple moment") {
  const double eps = 1e-2;
  RngStream rng(4010);
  MeanVar tree;
  for (int i = 0; i < 3000; ++i) {
    const FrozenRun run = simulate_frozen(kRef, eps, rng);
    auto idf = [](double v) { return v; };
    tree.add(u_statistic_distinct(run, {idf, idf}));
  }
  auto fB = [](double y) { return std::exp(-y); };
  const MomentEstimate tagged = tagged_moment(
      kRef, eps, 2, product_of({fB, fB}), 400000, 4011, 1);
  const double joint = std::hypot(tree.stderr_mean(), tagged.stderr_mean);
  CHECK(std::abs(tree.mean() - tagged.mean) < 4.0 * joint);
}

TEST_CASE("full-tree mode produces a conserving frozen run containing the tags") {
  RngStream rng(4012);
  TaggedOptions opts;
  opts.full_tree = true;
  const TaggedRun run = simulate_tagged(kRef, 1e-3, 2, rng, opts);
  CompensatedSum total;
  for (double s : run.tree.sizes) {
    REQUIRE(s >= 0.3e-3);
    REQUIRE(s < 1e-3);
    total.add(s);
  }
  CHECK(std::abs(total.value() - 1.0) <= 1e-9);
  for (double r : run.residuals) {
    const double size = std::exp(-(run.t_depth + r));
    bool found = false;
    for (double s : run.tree.sizes) {
      if (std::abs(s - size) < 1e-15) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("tagged runs are deterministic and validate their inputs") {
  RngStream a(4013), b(4013);
  const TaggedRun r1 = simulate_tagged(kRef, 1e-3, 3, a);
  const TaggedRun r2 = simulate_tagged(kRef, 1e-3, 3, b);
  CHECK(r1.residuals == r2.residuals);
  CHECK(r1.frozen_groups == r2.frozen_groups);
  RngStream rng(1);
  CHECK_THROWS_AS(simulate_tagged(kRef, 1e-3, 0, rng), std::domain_error);
  CHECK_THROWS_AS(simulate_tagged(kRef, 0.4, 2, rng), std::domain_error);
}
