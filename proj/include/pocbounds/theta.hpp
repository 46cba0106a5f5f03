#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "pocbounds/errors.hpp"

namespace pocbounds {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Ordered list of probability symbols defining the coordinate system for
/// parameter vectors, bound forms, and covariance matrices.
///
/// The standard layout for a binary treatment/outcome problem is
///   [P(y_x), P(y_x'), P(x,y), P(x,y'), P(x',y), P(x',y')]
/// i.e. two experimental response rates followed by the four observational
/// joint cells in row-major (x, y) order.
class ThetaLayout {
 public:
  ThetaLayout() = default;

  explicit ThetaLayout(std::vector<std::string> symbols)
      : symbols_(std::move(symbols)) {
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      for (std::size_t j = i + 1; j < symbols_.size(); ++j) {
        if (symbols_[i] == symbols_[j]) {
          throw LayoutError("duplicate symbol '" + symbols_[i] +
                            "' in layout");
        }
      }
    }
  }

  static ThetaLayout standard_poc() {
    return ThetaLayout({"P(y_x)", "P(y_x')", "P(x,y)", "P(x,y')", "P(x',y)",
                        "P(x',y')"});
  }

  std::size_t size() const { return symbols_.size(); }

  const std::vector<std::string>& symbols() const { return symbols_; }

  const std::string& symbol(std::size_t i) const { return symbols_.at(i); }

  bool has(const std::string& symbol) const {
    for (const auto& s : symbols_)
      if (s == symbol) return true;
    return false;
  }

  std::size_t index_of(const std::string& symbol) const {
    for (std::size_t i = 0; i < symbols_.size(); ++i)
      if (symbols_[i] == symbol) return i;
    throw LayoutError("symbol '" + symbol + "' not present in layout");
  }

  bool operator==(const ThetaLayout& other) const {
    return symbols_ == other.symbols_;
  }
  bool operator!=(const ThetaLayout& other) const { return !(*this == other); }

  /// True when the layout is exactly the standard six-symbol layout, in
  /// which case joint-cell structure (sum to one, P(y) derivable) applies.
  bool is_standard_poc() const { return *this == standard_poc(); }

 private:
  std::vector<std::string> symbols_;
};

/// A validated parameter point: experimental response rates plus the
/// observational joint distribution, in layout order.
class Theta {
 public:
  Theta(ThetaLayout layout, Vector values, double tol = 1e-9)
      : layout_(std::move(layout)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != layout_.size()) {
      throw ValidationError("theta has " + std::to_string(values_.size()) +
                            " entries but layout has " +
                            std::to_string(layout_.size()) + " symbols");
    }
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      double v = values_[i];
      if (!std::isfinite(v) || v < -tol || v > 1.0 + tol) {
        throw ValidationError("component " + layout_.symbol(i) + " = " +
                              std::to_string(v) + " is not a probability");
      }
    }
    if (layout_.is_standard_poc()) {
      double joint = values_[2] + values_[3] + values_[4] + values_[5];
      if (std::abs(joint - 1.0) > tol) {
        throw ValidationError(
            "observational joint cells sum to " + std::to_string(joint) +
            ", expected 1");
      }
    }
  }

  static Theta standard(double p_yx, double p_yxp, double p_xy, double p_xyp,
                        double p_xpy, double p_xpyp, double tol = 1e-9) {
    Vector v(6);
    v << p_yx, p_yxp, p_xy, p_xyp, p_xpy, p_xpyp;
    return Theta(ThetaLayout::standard_poc(), std::move(v), tol);
  }

  const ThetaLayout& layout() const { return layout_; }
  const Vector& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return layout_.size(); }

  double at(const std::string& symbol) const {
    return values_[layout_.index_of(symbol)];
  }

  /// Marginal outcome rate P(y) = P(x,y) + P(x',y). Standard layout only.
  double p_y() const {
    require_standard();
    return values_[2] + values_[4];
  }

  /// True when theta satisfies the consistency constraints
  ///   P(x,y)  <= P(y_x)  <= 1 - P(x,y')   and
  ///   P(x',y) <= P(y_x') <= 1 - P(x',y')
  /// that any single causal model imposes on the pair of data sources.
  bool consistent(double tol = 1e-9) const {
    require_standard();
    double p_yx = values_[0], p_yxp = values_[1];
    double p_xy = values_[2], p_xyp = values_[3];
    double p_xpy = values_[4], p_xpyp = values_[5];
    return p_yx >= p_xy - tol && p_yx <= 1.0 - p_xyp + tol &&
           p_yxp >= p_xpy - tol && p_yxp <= 1.0 - p_xpyp + tol;
  }

  void require_consistent(double tol = 1e-9) const {
    if (!consistent(tol)) {
      throw InfeasibleThetaError(
          "theta violates the consistency constraints between experimental "
          "and observational probabilities");
    }
  }

 private:
  void require_standard() const {
    if (!layout_.is_standard_poc()) {
      throw LayoutError("operation requires the standard six-symbol layout");
    }
  }

  ThetaLayout layout_;
  Vector values_;
};

}  // namespace pocbounds
