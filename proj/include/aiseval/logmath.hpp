#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace aiseval {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum(exp(v))). Returns -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double log_mean_exp(std::span<const double> v) {
  return log_sum_exp(v) - std::log(static_cast<double>(v.size()));
}

/// Streaming log-sum-exp, so very large sample counts run in constant memory.
class RunningLogSumExp {
 public:
  void add(double x) {
    ++count_;
    if (x == kNegInf) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }

  long long count() const { return count_; }
  double log_sum() const { return max_ == kNegInf ? kNegInf : max_ + std::log(sum_); }
  double log_mean() const { return log_sum() - std::log(static_cast<double>(count_)); }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
  long long count_ = 0;
};

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;  // sample stddev / sqrt(n); 0 for n < 2
};

inline MeanStderr mean_and_stderr(std::span<const double> v) {
  MeanStderr out;
  if (v.empty()) return out;
  const double n = static_cast<double>(v.size());
  for (double x : v) out.mean += x;
  out.mean /= n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

}  // namespace aiseval
