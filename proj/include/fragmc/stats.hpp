#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace fragmc {

struct KsResult {
  double distance = 0.0;
  double p_value = 1.0;
  double effective_n = 0.0;
  bool passes(double level) const { return p_value > level; }
};

/// Survival function of the Kolmogorov distribution, Q(x) = P(K > x).
double kolmogorov_sf(double x);

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
KsResult ks_one_sample(std::vector<double> sample,
                       const std::function<double(double)>& cdf);

/// Two-sample Kolmogorov–Smirnov test.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// One-sample KS with per-observation weights; the p-value uses the effective
/// sample size (sum w)^2 / sum w^2.
KsResult ks_weighted_one_sample(std::vector<double> sample,
                                std::vector<double> weights,
                                const std::function<double(double)>& cdf);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n_points = 0;
};

LinearFit least_squares(const std::vector<double>& x,
                        const std::vector<double>& y);

double normal_cdf(double x);
double normal_quantile(double p);
double chi_squared_quantile(double dof, double p);

/// Pearson correlation of two equal-length samples.
double correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace fragmc
