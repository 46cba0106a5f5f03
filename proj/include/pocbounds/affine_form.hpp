#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pocbounds/errors.hpp"
#include "pocbounds/theta.hpp"

namespace pocbounds {

enum class Endpoint { kLower, kUpper };

inline const char* endpoint_name(Endpoint e) {
  return e == Endpoint::kLower ? "lower" : "upper";
}

/// One affine numerator term a'theta + b.
struct AffineTerm {
  Vector coeffs;
  double offset = 0.0;

  double value(const Vector& theta) const {
    return coeffs.dot(theta) + offset;
  }
};

struct BoundPair {
  double lower;
  double upper;
};

/// Which terms attain each envelope at a point, with the optimizer's
/// margin. The gap is zero exactly when the optimizer is not unique at
/// the given tolerance; for a unique optimizer it is the distance to the
/// nearest excluded term.
struct ActiveSetReport {
  std::vector<std::size_t> lower_active;
  std::vector<std::size_t> upper_active;
  double lower_gap = 0.0;
  double upper_gap = 0.0;
  double tol = 0.0;
};

/// Generalized gradients restricted to the active set: `gradients[i]` is
/// the g-vector of term `active[i]`. With a unique optimizer this holds
/// exactly the ordinary endpoint gradient.
struct GeneralizedGradientSet {
  std::vector<std::size_t> active;
  std::vector<Vector> gradients;
};

/// Bound pair in min/max-of-affine-terms representation:
///
///   upper(theta) = min_j (a_j'theta + b_j) / h(theta)
///   lower(theta) = max_k (c_k'theta + d_k) / h(theta)
///
/// where the denominator h is either the constant 1 or a single layout
/// component. Every sharp bound on the three causation probabilities fits
/// this shape, and the representation is what both the analytic and the
/// simulation-based interval constructions consume.
///
/// Term values, active sets and gaps are always reported on the numerator
/// scale, before division by h.
class AffineBoundForm {
 public:
  static constexpr double kDenominatorFloor = 1e-9;

  AffineBoundForm(ThetaLayout layout, std::vector<AffineTerm> lower_terms,
                  std::vector<AffineTerm> upper_terms,
                  std::optional<std::size_t> denominator_index = std::nullopt,
                  std::string name = "custom")
      : layout_(std::move(layout)),
        lower_terms_(std::move(lower_terms)),
        upper_terms_(std::move(upper_terms)),
        denominator_index_(denominator_index),
        name_(std::move(name)) {
    if (lower_terms_.empty() || upper_terms_.empty()) {
      throw ValidationError("bound form '" + name_ +
                            "' needs at least one term per envelope");
    }
    auto dim = static_cast<Eigen::Index>(layout_.size());
    for (const auto* terms : {&lower_terms_, &upper_terms_}) {
      for (const auto& t : *terms) {
        if (t.coeffs.size() != dim) {
          throw ValidationError(
              "term coefficient length does not match layout size in form '" +
              name_ + "'");
        }
      }
    }
    if (denominator_index_ && *denominator_index_ >= layout_.size()) {
      throw ValidationError("denominator index out of range in form '" +
                            name_ + "'");
    }
  }

  const ThetaLayout& layout() const { return layout_; }
  const std::vector<AffineTerm>& lower_terms() const { return lower_terms_; }
  const std::vector<AffineTerm>& upper_terms() const { return upper_terms_; }
  const std::optional<std::size_t>& denominator_index() const {
    return denominator_index_;
  }
  const std::string& name() const { return name_; }

  const std::vector<AffineTerm>& terms(Endpoint e) const {
    return e == Endpoint::kLower ? lower_terms_ : upper_terms_;
  }

  /// Denominator h(theta); throws if at or below the positivity floor.
  double denominator(const Vector& theta) const {
    if (!denominator_index_) return 1.0;
    double h = theta[static_cast<Eigen::Index>(*denominator_index_)];
    if (h <= kDenominatorFloor) {
      throw DegenerateDenominatorError(layout_.symbol(*denominator_index_), h,
                                       kDenominatorFloor);
    }
    return h;
  }

  /// Gradient of h: a unit vector or zero.
  Vector denominator_gradient() const {
    Vector g = Vector::Zero(static_cast<Eigen::Index>(layout_.size()));
    if (denominator_index_)
      g[static_cast<Eigen::Index>(*denominator_index_)] = 1.0;
    return g;
  }

  /// Numerator values of every term on one envelope.
  std::vector<double> term_values(Endpoint e, const Vector& theta) const {
    const auto& ts = terms(e);
    std::vector<double> out(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) out[i] = ts[i].value(theta);
    return out;
  }

  /// Optimal numerator: max over lower terms or min over upper terms.
  double envelope_numerator(Endpoint e, const Vector& theta) const {
    auto vals = term_values(e, theta);
    return e == Endpoint::kLower
               ? *std::max_element(vals.begin(), vals.end())
               : *std::min_element(vals.begin(), vals.end());
  }

  double evaluate_endpoint(Endpoint e, const Vector& theta) const {
    return envelope_numerator(e, theta) / denominator(theta);
  }

  /// Evaluates both endpoints. No clamping and no feasibility check:
  /// perturbed points off the probability simplex evaluate as-is.
  BoundPair evaluate(const Vector& theta) const {
    check_dim(theta);
    double h = denominator(theta);
    return {envelope_numerator(Endpoint::kLower, theta) / h,
            envelope_numerator(Endpoint::kUpper, theta) / h};
  }

  /// Validated-theta overload. For the built-in forms at a consistent
  /// theta the sharp bounds cannot cross; a crossing there is an internal
  /// arithmetic fault, not a caller error.
  BoundPair evaluate(const Theta& theta) const {
    check_layout(theta.layout());
    BoundPair out = evaluate(theta.values());
    if (is_builtin() && theta.consistent() && out.lower > out.upper + 1e-12) {
      throw NumericalError("built-in form '" + name_ +
                           "' produced crossed bounds at a consistent theta");
    }
    return out;
  }

  bool is_builtin() const {
    return name_ == "PNS" || name_ == "PN" || name_ == "PS";
  }

  /// Active terms within `tol` of the envelope optimum (numerator scale).
  /// The gap is 0 when the optimizer is tied at this tolerance, otherwise
  /// the distance from the optimum to the nearest excluded term.
  ActiveSetReport active_sets(const Vector& theta, double tol = 1e-9) const {
    check_dim(theta);
    ActiveSetReport report;
    report.tol = tol;
    for (Endpoint e : {Endpoint::kLower, Endpoint::kUpper}) {
      auto vals = term_values(e, theta);
      double best = e == Endpoint::kLower
                        ? *std::max_element(vals.begin(), vals.end())
                        : *std::min_element(vals.begin(), vals.end());
      std::vector<std::size_t> active;
      double nearest_excluded = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < vals.size(); ++i) {
        double dist = std::abs(vals[i] - best);
        if (dist <= tol) {
          active.push_back(i);
        } else {
          nearest_excluded = std::min(nearest_excluded, dist);
        }
      }
      double gap = active.size() >= 2 || !std::isfinite(nearest_excluded)
                       ? 0.0
                       : nearest_excluded;
      if (e == Endpoint::kLower) {
        report.lower_active = std::move(active);
        report.lower_gap = gap;
      } else {
        report.upper_active = std::move(active);
        report.upper_gap = gap;
      }
    }
    return report;
  }

  ActiveSetReport active_sets(const Theta& theta, double tol = 1e-9) const {
    check_layout(theta.layout());
    return active_sets(theta.values(), tol);
  }

  /// Gradient of one endpoint where it is differentiable, i.e. where a
  /// single term attains the envelope. With numerator N = a'theta + b and
  /// denominator h, the quotient rule gives
  ///   grad = (h a - N grad_h) / h^2.
  /// Throws NonSmoothEndpointError when two terms are within `tie_tol`.
  Vector endpoint_gradient(Endpoint e, const Vector& theta,
                           double tie_tol = 1e-9) const {
    check_dim(theta);
    auto vals = term_values(e, theta);
    std::size_t best_idx = 0;
    for (std::size_t i = 1; i < vals.size(); ++i) {
      bool better = e == Endpoint::kLower ? vals[i] > vals[best_idx]
                                          : vals[i] < vals[best_idx];
      if (better) best_idx = i;
    }
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (i != best_idx && std::abs(vals[i] - vals[best_idx]) <= tie_tol) {
        throw NonSmoothEndpointError(
            std::string("form '") + name_ + "' " + endpoint_name(e) +
            " endpoint has tied optimizers (margin <= " +
            std::to_string(tie_tol) +
            "); the endpoint is not differentiable here, use "
            "generalized_gradients / the simulation-based interval instead");
      }
    }
    double h = denominator(theta);
    const AffineTerm& t = terms(e)[best_idx];
    if (!denominator_index_) return t.coeffs;
    Vector grad = t.coeffs / h;
    grad[static_cast<Eigen::Index>(*denominator_index_)] -=
        vals[best_idx] / (h * h);
    return grad;
  }

  Vector endpoint_gradient(Endpoint e, const Theta& theta,
                           double tie_tol = 1e-9) const {
    check_layout(theta.layout());
    return endpoint_gradient(e, theta.values(), tie_tol);
  }

  struct EndpointGradients {
    Vector lower;
    Vector upper;
  };

  /// Both gradients at once; throws if either endpoint is tied.
  EndpointGradients endpoint_gradients(const Theta& theta,
                                       double tie_tol = 1e-9) const {
    return {endpoint_gradient(Endpoint::kLower, theta, tie_tol),
            endpoint_gradient(Endpoint::kUpper, theta, tie_tol)};
  }

  /// Generalized gradients over the active set at tolerance `tol`:
  ///   g_j = a_j / h - (N* / h^2) grad_h
  /// where N* is the envelope-optimal numerator. With a unique optimizer
  /// the single returned vector equals the ordinary gradient; at ties the
  /// directional derivative along z is the envelope over the g_j'z.
  GeneralizedGradientSet generalized_gradients(Endpoint e, const Vector& theta,
                                               double tol = 1e-9) const {
    check_dim(theta);
    double h = denominator(theta);
    auto vals = term_values(e, theta);
    double n_star = e == Endpoint::kLower
                        ? *std::max_element(vals.begin(), vals.end())
                        : *std::min_element(vals.begin(), vals.end());
    const auto& ts = terms(e);
    GeneralizedGradientSet out;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (std::abs(vals[i] - n_star) > tol) continue;
      out.active.push_back(i);
      if (!denominator_index_) {
        out.gradients.push_back(ts[i].coeffs);
        continue;
      }
      Vector g = ts[i].coeffs / h;
      g[static_cast<Eigen::Index>(*denominator_index_)] -= n_star / (h * h);
      out.gradients.push_back(std::move(g));
    }
    return out;
  }

  GeneralizedGradientSet generalized_gradients(Endpoint e, const Theta& theta,
                                               double tol = 1e-9) const {
    check_layout(theta.layout());
    return generalized_gradients(e, theta.values(), tol);
  }

 private:
  void check_dim(const Vector& theta) const {
    if (static_cast<std::size_t>(theta.size()) != layout_.size()) {
      throw ValidationError("parameter vector length " +
                            std::to_string(theta.size()) +
                            " does not match layout size " +
                            std::to_string(layout_.size()) + " of form '" +
                            name_ + "'");
    }
  }

  void check_layout(const ThetaLayout& other) const {
    if (other != layout_) {
      throw LayoutError("theta layout does not match layout of form '" +
                        name_ + "'");
    }
  }

  ThetaLayout layout_;
  std::vector<AffineTerm> lower_terms_;
  std::vector<AffineTerm> upper_terms_;
  std::optional<std::size_t> denominator_index_;
  std::string name_;
};

namespace detail {

inline AffineTerm make_term(std::initializer_list<std::pair<int, double>>
                                entries,
                            double offset) {
  AffineTerm t;
  t.coeffs = Vector::Zero(6);
  for (const auto& [idx, coef] : entries) t.coeffs[idx] = coef;
  t.offset = offset;
  return t;
}

}  // namespace detail

/// Sharp bounds on the probability that treatment is both necessary and
/// sufficient, P(y_x, y'_{x'}), as functions of the standard layout
/// [P(y_x), P(y_x'), P(x,y), P(x,y'), P(x',y), P(x',y')]:
///
///   max{ 0,
///        P(y_x) - P(y_x'),
///        P(y) - P(y_x'),
///        P(y_x) - P(y) }
///   <= PNS <=
///   min{ P(y_x),
///        1 - P(y_x'),
///        P(x,y) + P(x',y'),
///        P(y_x) - P(y_x') + P(x,y') + P(x',y) }
///
/// with P(y) = P(x,y) + P(x',y) expanded into joint cells.
inline AffineBoundForm build_pns_form() {
  using detail::make_term;
  std::vector<AffineTerm> lower = {
      make_term({}, 0.0),
      make_term({{0, 1.0}, {1, -1.0}}, 0.0),
      make_term({{2, 1.0}, {4, 1.0}, {1, -1.0}}, 0.0),
      make_term({{0, 1.0}, {2, -1.0}, {4, -1.0}}, 0.0),
  };
  std::vector<AffineTerm> upper = {
      make_term({{0, 1.0}}, 0.0),
      make_term({{1, -1.0}}, 1.0),
      make_term({{2, 1.0}, {5, 1.0}}, 0.0),
      make_term({{0, 1.0}, {1, -1.0}, {3, 1.0}, {4, 1.0}}, 0.0),
  };
  return AffineBoundForm(ThetaLayout::standard_poc(), std::move(lower),
                         std::move(upper), std::nullopt, "PNS");
}

/// Sharp bounds on the probability of necessity P(y'_{x'} | x, y), with
/// denominator h = P(x,y):
///
///   max{0, (P(y) - P(y_x')) / P(x,y)}
///   <= PN <=
///   min{1, (1 - P(y_x') - P(x',y')) / P(x,y)}.
///
/// The constant branches 0 and 1 are encoded as the numerator terms 0 and
/// P(x,y) so that both envelopes stay min/max-affine over the numerator.
inline AffineBoundForm build_pn_form() {
  using detail::make_term;
  std::vector<AffineTerm> lower = {
      make_term({}, 0.0),
      make_term({{2, 1.0}, {4, 1.0}, {1, -1.0}}, 0.0),
  };
  std::vector<AffineTerm> upper = {
      make_term({{2, 1.0}}, 0.0),
      make_term({{1, -1.0}, {5, -1.0}}, 1.0),
  };
  return AffineBoundForm(ThetaLayout::standard_poc(), std::move(lower),
                         std::move(upper), 2, "PN");
}

/// Sharp bounds on the probability of sufficiency P(y_x | x', y'), with
/// denominator h = P(x',y'):
///
///   max{0, (P(y_x) - P(y)) / P(x',y')}
///   <= PS <=
///   min{1, (P(y_x) - P(x,y)) / P(x',y')}.
inline AffineBoundForm build_ps_form() {
  using detail::make_term;
  std::vector<AffineTerm> lower = {
      make_term({}, 0.0),
      make_term({{0, 1.0}, {2, -1.0}, {4, -1.0}}, 0.0),
  };
  std::vector<AffineTerm> upper = {
      make_term({{5, 1.0}}, 0.0),
      make_term({{0, 1.0}, {2, -1.0}}, 0.0),
  };
  return AffineBoundForm(ThetaLayout::standard_poc(), std::move(lower),
                         std::move(upper), 5, "PS");
}

/// Builds the form for a named quantity: "pns", "pn" or "ps".
inline AffineBoundForm build_form(const std::string& quantity) {
  if (quantity == "pns" || quantity == "PNS") return build_pns_form();
  if (quantity == "pn" || quantity == "PN") return build_pn_form();
  if (quantity == "ps" || quantity == "PS") return build_ps_form();
  throw ValidationError("unknown quantity '" + quantity +
                        "'; expected pns, pn or ps");
}

}  // namespace pocbounds
