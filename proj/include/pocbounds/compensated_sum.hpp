#pragma once

namespace pocbounds {

/// Double-double accumulator (error-free transformations).
///
/// Keeps the running sum as an unevaluated pair hi + lo, so adding ~1e6
/// terms of mixed magnitude stays exact to well below one ulp of the
/// result. Summation order then no longer affects the rounded total,
/// which is what makes exhaustive-enumeration outputs bit-reproducible.
class CompensatedSum {
 public:
  CompensatedSum() : hi_(0.0), lo_(0.0) {}

  void add(double x) {
    // TwoSum(hi_, x)
    double s = hi_ + x;
    double bb = s - hi_;
    double err = (hi_ - (s - bb)) + (x - bb);
    hi_ = s;
    // Fold the new error into lo_, then renormalize.
    double t = lo_ + err;
    double s2 = hi_ + t;
    double bb2 = s2 - hi_;
    lo_ = (hi_ - (s2 - bb2)) + (t - bb2);
    hi_ = s2;
  }

  double value() const { return hi_ + lo_; }

 private:
  double hi_;
  double lo_;
};

}  // namespace pocbounds
