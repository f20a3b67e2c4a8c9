#include "fragmc/limit_statistics.hpp"

#include <cmath>
#include <stdexcept>

#include "fragmc/errors.hpp"
#include "fragmc/renewal.hpp"

namespace fragmc {

std::function<double(double)> compose_exp_neg(std::function<double(double)> f) {
  return [f = std::move(f)](double y) { return f(std::exp(-y)); };
}

std::vector<double> log_scale_breakpoints(const std::vector<double>& x_breaks) {
  std::vector<double> out;
  for (double x : x_breaks) {
    if (x > 0.0 && x < 1.0) out.push_back(-std::log(x));
  }
  return out;
}

double lln_limit(const WaitingLaw& law, const TestFunction& f) {
  return stationary_residual_mean(law, compose_exp_neg(f.fn),
                                  log_scale_breakpoints(f.breakpoints));
}

TestFunction center(const WaitingLaw& law, const TestFunction& f) {
  const double m = lln_limit(law, f);
  TestFunction out;
  out.name = f.centered ? f.name : ("centered(" + f.name + ")");
  out.fn = [inner = f.fn, m](double x) { return inner(x) - m; };
  out.breakpoints = f.breakpoints;
  out.centered = true;
  out.lln_limit_value = 0.0;
  const double check = lln_limit(law, out);
  if (std::abs(check) > 1e-8) {
    throw std::logic_error("center: residual mean " + std::to_string(check) +
                           " after centering; quadrature inconsistency");
  }
  return out;
}

CovarianceModel clt_covariance(const WaitingLaw& law,
                               const std::vector<TestFunction>& fs,
                               const KernelOptions& kernel_opts, std::uint64_t seed) {
  const std::size_t n = fs.size();
  for (const auto& f : fs) {
    if (!f.centered) {
      throw ConfigError("clt_covariance: all test functions must be centered");
    }
  }
  CovarianceModel model;
  model.names.reserve(n);
  for (const auto& f : fs) model.names.push_back(f.name);
  model.eta_part.assign(n, std::vector<double>(n, 0.0));

  const StationaryResidualLaw eta(law);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      std::vector<double> brk = log_scale_breakpoints(fs[i].breakpoints);
      const auto brj = log_scale_breakpoints(fs[j].breakpoints);
      brk.insert(brk.end(), brj.begin(), brj.end());
      const auto& fi = fs[i].fn;
      const auto& fj = fs[j].fn;
      const double val = eta.integrate(
          [&](double y) {
            const double x = std::exp(-y);
            return x * fi(x) * fj(x);
          },
          brk);
      model.eta_part[i][j] = model.eta_part[j][i] = val;
    }
  }

  std::vector<ResidualFunction> composed;
  composed.reserve(n);
  for (const auto& f : fs) {
    composed.emplace_back(compose_exp_neg(f.fn), log_scale_breakpoints(f.breakpoints));
  }
  const KernelMatrix v = pair_covariance_matrix(law, composed, kernel_opts, seed);

  model.v_part = v.value;
  model.v_part_stderr = v.stderr_value;
  model.max_asymmetry_sigma = v.max_asymmetry_sigma;
  model.covariance.assign(n, std::vector<double>(n, 0.0));
  model.covariance_stderr.assign(n, std::vector<double>(n, 0.0));
  model.negative_diagonal.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      model.covariance[i][j] = model.eta_part[i][j] + model.v_part[i][j];
      model.covariance_stderr[i][j] = model.v_part_stderr[i][j];
    }
    if (model.covariance[i][i] < -4.0 * model.covariance_stderr[i][i]) {
      model.negative_diagonal[i] = true;
    }
  }
  return model;
}

std::vector<std::vector<std::pair<int, int>>> pair_partitions(int q) {
  if (q <= 0 || q % 2 != 0) {
    throw std::domain_error("pair_partitions: q must be a positive even integer");
  }
  if (q > 12) throw std::domain_error("pair_partitions: q > 12 not supported");
  std::vector<std::vector<std::pair<int, int>>> out;
  std::vector<int> pool(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) pool[static_cast<std::size_t>(i)] = i + 1;
  std::vector<std::pair<int, int>> current;
  std::function<void(std::vector<int>&)> rec = [&](std::vector<int>& rest) {
    if (rest.empty()) {
      out.push_back(current);
      return;
    }
    const int first = rest.front();
    for (std::size_t k = 1; k < rest.size(); ++k) {
      std::vector<int> next;
      next.reserve(rest.size() - 2);
      for (std::size_t m = 1; m < rest.size(); ++m) {
        if (m != k) next.push_back(rest[m]);
      }
      current.emplace_back(first, rest[k]);
      rec(next);
      current.pop_back();
    }
  };
  rec(pool);
  return out;
}

std::uint64_t pair_partition_count(int q) {
  if (q <= 0 || q % 2 != 0) {
    throw std::domain_error("pair_partition_count: q must be a positive even integer");
  }
  std::uint64_t count = 1;
  for (int k = q - 1; k > 1; k -= 2) {
    if (__builtin_mul_overflow(count, static_cast<std::uint64_t>(k), &count)) {
      throw std::overflow_error("pair_partition_count overflow");
    }
  }
  return count;
}

double pairing_limit_moment(const std::vector<std::vector<double>>& v_sym, int q) {
  if (static_cast<int>(v_sym.size()) != q) {
    throw std::invalid_argument("pairing_limit_moment: matrix size must equal q");
  }
  double total = 0.0;
  for (const auto& partition : pair_partitions(q)) {
    double prod = 1.0;
    for (const auto& [x, y] : partition) {
      prod *= v_sym[static_cast<std::size_t>(x - 1)][static_cast<std::size_t>(y - 1)];
    }
    total += prod;
  }
  return total;
}

std::uint64_t colocation_bound_constant(int q) {
  if (q < 1) throw std::domain_error("colocation_bound_constant: q must be >= 1");
  std::uint64_t total = 0;
  for (int i = 1; i <= q; ++i) {
    std::uint64_t term = 1;
    for (int k = q - i + 1; k <= q; ++k) {  // q!/(q-i)! as a falling product
      if (__builtin_mul_overflow(term, static_cast<std::uint64_t>(k), &term)) {
        throw std::overflow_error("colocation_bound_constant overflow");
      }
    }
    for (int p = 0; p < q - i; ++p) {
      if (__builtin_mul_overflow(term, static_cast<std::uint64_t>(i), &term)) {
        throw std::overflow_error("colocation_bound_constant overflow");
      }
    }
    if (__builtin_add_overflow(total, term, &total)) {
      throw std::overflow_error("colocation_bound_constant overflow");
    }
  }
  return total;
}

}  // namespace fragmc
