#pragma once

#include <cmath>
#include <cstddef>

namespace fragmc {

/// Neumaier-compensated sum. Used wherever ~1e6 small terms feed a 1e-9
/// conservation check.
class CompensatedSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Streaming mean/variance with compensated first and second moments.
/// Merging is associative enough for chunked reductions as long as the merge
/// order is fixed (see parallel.hpp).
class MeanVar {
 public:
  void add(double x) {
    ++n_;
    sum_.add(x);
    sumsq_.add(x * x);
  }
  void merge(const MeanVar& other) {
    n_ += other.n_;
    sum_.add(other.sum_.value());
    sumsq_.add(other.sumsq_.value());
  }
  std::size_t count() const { return n_; }
  double mean() const { return n_ ? sum_.value() / static_cast<double>(n_) : 0.0; }
  double variance() const {  // unbiased
    if (n_ < 2) return 0.0;
    const double n = static_cast<double>(n_);
    const double m = mean();
    double v = (sumsq_.value() - n * m * m) / (n - 1.0);
    return v > 0.0 ? v : 0.0;
  }
  double stderr_mean() const {
    return n_ ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  CompensatedSum sum_;
  CompensatedSum sumsq_;
};

}  // namespace fragmc
