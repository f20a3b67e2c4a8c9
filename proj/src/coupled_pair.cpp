#include "fragmc/coupled_pair.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "fragmc/accumulators.hpp"
#include "fragmc/errors.hpp"
#include "fragmc/parallel.hpp"

namespace fragmc {

namespace {

void check_split_state(const WaitingLaw& law, double age, double residual) {
  const double tol = 1e-9;
  const double sum = age + residual;
  if (age < -tol || age > law.b() + tol || residual <= 0.0 ||
      residual > law.b() + tol || sum < law.a() - tol || sum > law.b() + tol) {
    throw std::domain_error(
        "sibling residual: (age, residual) outside the stationary support set");
  }
}

}  // namespace

double sample_sibling_residual(const WaitingLaw& law, double age, double residual,
                               RngStream& rng) {
  check_split_state(law, age, residual);
  double pos = -age + law.sibling_log(age + residual, rng);
  while (pos <= 0.0) pos += law.sample(rng);
  return pos;
}

PairSample sample_pair_at_zero(const WaitingLaw& law, double v, RngStream& rng) {
  if (v > law.b()) {
    throw std::domain_error("sample_pair_at_zero: v must be <= b = -log(delta)");
  }
  const RenewalState st = sample_stationary_state(law, rng);
  PairSample out;
  out.v = v;
  out.alive = (v <= 0.0) || (v - st.age <= 0.0);
  if (!out.alive) return out;
  double b1 = v + st.residual;
  while (b1 <= 0.0) b1 += law.sample(rng);
  double b2 = (v - st.age) + law.sibling_log(st.age + st.residual, rng);
  while (b2 <= 0.0) b2 += law.sample(rng);
  out.b1 = b1;
  out.b2 = b2;
  return out;
}

namespace {

struct NodeResult {
  double mean = 0.0;
  double se = 0.0;
};

class NodeSampler {
 public:
  NodeSampler(const WaitingLaw& law, const ResidualFunction& f,
              const ResidualFunction& g, KernelEstimator estimator)
      : law_(law), f_(f.fn), g_(g.fn), estimator_(estimator) {
    if (estimator_ == KernelEstimator::RaoBlackwell) {
      psi_f_ = std::make_unique<ResidualExpectation>(law, f.fn, f.breakpoints);
      psi_g_ = std::make_unique<ResidualExpectation>(law, g.fn, g.breakpoints);
    }
  }

  NodeResult evaluate(double v, std::size_t n, RngStream& rng) const {
    MeanVar acc;
    for (std::size_t i = 0; i < n; ++i) {
      acc.add(estimator_ == KernelEstimator::RaoBlackwell ? one_rb(v, rng)
                                                          : one_naive(v, rng));
    }
    return {acc.mean(), acc.stderr_mean()};
  }

 private:
  double one_rb(double v, RngStream& rng) const {
    const RenewalState st = sample_stationary_state(law_, rng);
    if (v > 0.0 && v - st.age > 0.0) return 0.0;
    const double arg1 = v + st.residual;
    const double e1 = arg1 > 0.0 ? f_(arg1) : (*psi_f_)(-arg1);
    const double x2 = (v - st.age) + law_.sibling_log(st.age + st.residual, rng);
    const double e2 = x2 > 0.0 ? g_(x2) : (*psi_g_)(-x2);
    return e1 * e2;
  }

  double one_naive(double v, RngStream& rng) const {
    const RenewalState st = sample_stationary_state(law_, rng);
    if (v > 0.0 && v - st.age > 0.0) return 0.0;
    double b1 = v + st.residual;
    while (b1 <= 0.0) b1 += law_.sample(rng);
    double b2 = (v - st.age) + law_.sibling_log(st.age + st.residual, rng);
    while (b2 <= 0.0) b2 += law_.sample(rng);
    return f_(b1) * g_(b2);
  }

  const WaitingLaw& law_;
  const std::function<double(double)>& f_;
  const std::function<double(double)>& g_;
  KernelEstimator estimator_;
  std::unique_ptr<ResidualExpectation> psi_f_, psi_g_;
};

}  // namespace

KernelEstimate pair_covariance_kernel(const WaitingLaw& law,
                                      const ResidualFunction& f,
                                      const ResidualFunction& g,
                                      const KernelOptions& opts, std::uint64_t seed) {
  if (opts.require_centered) {
    for (const auto* fn : {&f, &g}) {
      const double m = stationary_residual_mean(law, fn->fn, fn->breakpoints);
      if (std::abs(m) > 1e-8) {
        throw ConfigError(
            "pair_covariance_kernel: function is not centered under the "
            "stationary residual law (mean " +
            std::to_string(m) + "); center it or disable require_centered");
      }
    }
  }
  const NodeSampler sampler(law, f, g, opts.estimator);
  const double b = law.b();
  const std::size_t nodes_per_segment =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(b / opts.dv)));
  const double h = b / static_cast<double>(nodes_per_segment);

  KernelEstimate est;
  CompensatedSum total;
  double var_total = 0.0;
  for (int seg = 0; seg < opts.max_segments; ++seg) {
    const double v_hi = b - static_cast<double>(seg) * b;
    const double v_lo = v_hi - b;
    std::vector<double> node_contrib(nodes_per_segment, 0.0);
    std::vector<double> node_var(nodes_per_segment, 0.0);
    parallel_chunks(nodes_per_segment, opts.jobs, 1,
                    [&](std::size_t, std::size_t lo, std::size_t hi) {
                      for (std::size_t j = lo; j < hi; ++j) {
                        const double v = v_lo + (static_cast<double>(j) + 0.5) * h;
                        RngStream rng(seed, stream_tag::kPairKernel,
                                      static_cast<std::uint64_t>(seg), j);
                        const NodeResult r =
                            sampler.evaluate(v, opts.samples_per_node, rng);
                        const double w = h * std::exp(-v);
                        node_contrib[j] = w * r.mean;
                        node_var[j] = w * r.se * w * r.se;
                      }
                    });
    CompensatedSum seg_sum;
    double seg_var = 0.0;
    for (std::size_t j = 0; j < nodes_per_segment; ++j) {
      seg_sum.add(node_contrib[j]);
      seg_var += node_var[j];
    }
    const double seg_contribution = seg_sum.value();
    est.segments.push_back({v_lo, v_hi, seg_contribution, std::sqrt(seg_var)});
    total.add(seg_contribution);
    var_total += seg_var;
    est.v_min = v_lo;

    if (seg + 1 >= opts.initial_segments) {
      const double tol =
          std::max(opts.tail_rel * std::abs(total.value()), opts.tail_floor);
      if (std::abs(seg_contribution) < tol) {
        est.value = total.value();
        est.stderr_value = std::sqrt(var_total);
        return est;
      }
    }
  }
  est.value = total.value();
  est.stderr_value = std::sqrt(var_total);
  throw KernelTailError(
      "pair_covariance_kernel: tail did not converge within max_segments", est);
}

KernelMatrix pair_covariance_matrix(const WaitingLaw& law,
                                    const std::vector<ResidualFunction>& fs,
                                    const KernelOptions& opts, std::uint64_t seed) {
  const std::size_t n = fs.size();
  KernelMatrix m;
  m.value.assign(n, std::vector<double>(n, 0.0));
  m.stderr_value.assign(n, std::vector<double>(n, 0.0));
  m.raw_value.assign(n, std::vector<double>(n, 0.0));
  m.raw_stderr.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j < i) continue;
      const KernelEstimate eij =
          pair_covariance_kernel(law, fs[i], fs[j], opts, seed + 1000003 * (i * n + j));
      m.raw_value[i][j] = eij.value;
      m.raw_stderr[i][j] = eij.stderr_value;
      if (i != j) {
        const KernelEstimate eji = pair_covariance_kernel(
            law, fs[j], fs[i], opts, seed + 1000003 * (j * n + i));
        m.raw_value[j][i] = eji.value;
        m.raw_stderr[j][i] = eji.stderr_value;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    m.value[i][i] = m.raw_value[i][i];
    m.stderr_value[i][i] = m.raw_stderr[i][i];
    for (std::size_t j = i + 1; j < n; ++j) {
      m.value[i][j] = m.value[j][i] =
          0.5 * (m.raw_value[i][j] + m.raw_value[j][i]);
      m.stderr_value[i][j] = m.stderr_value[j][i] =
          0.5 * std::hypot(m.raw_stderr[i][j], m.raw_stderr[j][i]);
      const double joint =
          std::hypot(m.raw_stderr[i][j], m.raw_stderr[j][i]);
      if (joint > 0) {
        m.max_asymmetry_sigma =
            std::max(m.max_asymmetry_sigma,
                     std::abs(m.raw_value[i][j] - m.raw_value[j][i]) / joint);
      }
    }
  }
  return m;
}

}  // namespace fragmc
