#ifndef PDMPVOL_LOG_SUM_EXP_HPP
#define PDMPVOL_LOG_SUM_EXP_HPP

#include <cmath>
#include <cstdint>
#include <limits>

namespace pdmpvol {

// Streaming log(sum_j exp(x_j)), rescaled whenever a new maximum arrives.
class LogSumExp {
 public:
  void add(double x) noexcept {
    ++count_;
    if (x == -std::numeric_limits<double>::infinity()) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }

  std::uint64_t count() const noexcept { return count_; }

  double log_sum() const noexcept {
    if (sum_ == 0.0) return -std::numeric_limits<double>::infinity();
    return max_ + std::log(sum_);
  }

  // log of the arithmetic mean of exp(x_j).
  double log_mean() const noexcept {
    return log_sum() - std::log(static_cast<double>(count_));
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
  std::uint64_t count_ = 0;
};

}  // namespace pdmpvol

#endif  // PDMPVOL_LOG_SUM_EXP_HPP
