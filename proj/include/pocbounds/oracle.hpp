#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <string>

#include "pocbounds/affine_form.hpp"
#include "pocbounds/errors.hpp"
#include "pocbounds/theta.hpp"

namespace pocbounds {

/// Linear-programming oracle over response types.
///
/// Each individual is classified by how the outcome would respond to both
/// treatment assignments: always (y under both), benefit (y only under
/// treatment), harm (y only without treatment), never. Crossed with the
/// observed treatment group this gives eight cells
///
///   q = (q_{a,x}, q_{b,x}, q_{h,x}, q_{n,x},
///        q_{a,x'}, q_{b,x'}, q_{h,x'}, q_{n,x'})
///
/// and every parameter point pins down six linear functionals of q:
/// the four observational joint cells and the two experimental response
/// rates. The causation probabilities are linear in q, so their sharp
/// population bounds are the extrema of a linear objective over the
/// polytope {q >= 0, A q = b}. Those extrema are found by enumerating all
/// 28 choices of basic feasible solution of the 6x8 system.
///
/// This route deliberately shares no code with the min/max-affine bound
/// forms; the two implementations check each other.
class ResponseTypeOracle {
 public:
  explicit ResponseTypeOracle(double feas_tol = 1e-8)
      : feas_tol_(feas_tol) {}

  /// Minimum and maximum of objective'q over the feasible polytope.
  BoundPair optimize(const Vector& objective, const Theta& theta) const {
    if (objective.size() != 8) {
      throw ValidationError("response-type objective must have 8 entries");
    }
    if (!theta.layout().is_standard_poc()) {
      throw LayoutError(
          "response-type oracle requires the standard six-symbol layout");
    }
    theta.require_consistent(1e-9);

    Matrix a(6, 8);
    a.setZero();
    // Observational joint cells.
    a(0, 0) = 1.0; a(0, 1) = 1.0;  // P(x,y)   = q_{a,x} + q_{b,x}
    a(1, 2) = 1.0; a(1, 3) = 1.0;  // P(x,y')  = q_{h,x} + q_{n,x}
    a(2, 4) = 1.0; a(2, 6) = 1.0;  // P(x',y)  = q_{a,x'} + q_{h,x'}
    a(3, 5) = 1.0; a(3, 7) = 1.0;  // P(x',y') = q_{b,x'} + q_{n,x'}
    // Experimental response rates mix both groups.
    a(4, 0) = 1.0; a(4, 1) = 1.0; a(4, 4) = 1.0; a(4, 5) = 1.0;  // P(y_x)
    a(5, 0) = 1.0; a(5, 2) = 1.0; a(5, 4) = 1.0; a(5, 6) = 1.0;  // P(y_x')

    Vector b(6);
    b << theta[2], theta[3], theta[4], theta[5], theta[0], theta[1];

    double best_min = std::numeric_limits<double>::infinity();
    double best_max = -std::numeric_limits<double>::infinity();
    bool any_feasible = false;

    // A basic solution zeroes two of the eight coordinates.
    for (int i = 0; i < 8; ++i) {
      for (int j = i + 1; j < 8; ++j) {
        Matrix basis(6, 6);
        int cols[6];
        int c = 0;
        for (int k = 0; k < 8; ++k) {
          if (k == i || k == j) continue;
          basis.col(c) = a.col(k);
          cols[c] = k;
          ++c;
        }
        Eigen::FullPivLU<Matrix> lu(basis);
        if (lu.rank() < 6) continue;
        Vector xb = lu.solve(b);
        if ((basis * xb - b).cwiseAbs().maxCoeff() > 1e-9) continue;
        if (xb.minCoeff() < -feas_tol_) continue;
        any_feasible = true;
        double val = 0.0;
        for (int k = 0; k < 6; ++k) val += objective[cols[k]] * xb[k];
        best_min = std::min(best_min, val);
        best_max = std::max(best_max, val);
      }
    }
    if (!any_feasible) {
      throw InfeasibleThetaError(
          "no response-type distribution matches this parameter point");
    }
    return {best_min, best_max};
  }

  BoundPair pns_bounds(const Theta& theta) const {
    Vector c = Vector::Zero(8);
    c[1] = 1.0;  // benefit, treated group
    c[5] = 1.0;  // benefit, untreated group
    return optimize(c, theta);
  }

  /// PN = q_{b,x} / P(x,y).
  BoundPair pn_bounds(const Theta& theta) const {
    Vector c = Vector::Zero(8);
    c[1] = 1.0;
    double h = theta[2];
    if (h <= AffineBoundForm::kDenominatorFloor) {
      throw DegenerateDenominatorError("P(x,y)", h,
                                       AffineBoundForm::kDenominatorFloor);
    }
    BoundPair num = optimize(c, theta);
    return {num.lower / h, num.upper / h};
  }

  /// PS = q_{b,x'} / P(x',y').
  BoundPair ps_bounds(const Theta& theta) const {
    Vector c = Vector::Zero(8);
    c[5] = 1.0;
    double h = theta[5];
    if (h <= AffineBoundForm::kDenominatorFloor) {
      throw DegenerateDenominatorError("P(x',y')", h,
                                       AffineBoundForm::kDenominatorFloor);
    }
    BoundPair num = optimize(c, theta);
    return {num.lower / h, num.upper / h};
  }

  BoundPair bounds(const std::string& quantity, const Theta& theta) const {
    if (quantity == "pns" || quantity == "PNS") return pns_bounds(theta);
    if (quantity == "pn" || quantity == "PN") return pn_bounds(theta);
    if (quantity == "ps" || quantity == "PS") return ps_bounds(theta);
    throw ValidationError("unknown quantity '" + quantity +
                          "'; expected pns, pn or ps");
  }

 private:
  double feas_tol_;
};

/// Hand-reduced interval solutions of the same polytope.
///
/// Eliminating the six equalities leaves two free coordinates
///   u = q_{a,x}  in [max(0, B - P(x,y')),  min(P(x,y), B)]
///   w = q_{a,x'} in [max(0, A - P(x',y')), min(P(x',y), A)]
/// with A = P(y_x) - P(x,y) and B = P(y_x') - P(x',y). The three
/// objectives are monotone in (u, w), so their extrema sit at interval
/// endpoints. A third route for cross-checking the other two.
namespace closed_form {

struct FreeBox {
  double u_lo, u_hi, w_lo, w_hi;
  double a, b;
};

inline FreeBox free_box(const Theta& theta) {
  theta.require_consistent(1e-9);
  double a = theta[0] - theta[2];
  double b = theta[1] - theta[4];
  FreeBox box;
  box.a = a;
  box.b = b;
  box.u_lo = std::max(0.0, b - theta[3]);
  box.u_hi = std::min(theta[2], b);
  box.w_lo = std::max(0.0, a - theta[5]);
  box.w_hi = std::min(theta[4], a);
  return box;
}

/// PNS = P(x,y) + A - u - w.
inline BoundPair pns_bounds(const Theta& theta) {
  FreeBox box = free_box(theta);
  double base = theta[2] + box.a;
  return {base - box.u_hi - box.w_hi, base - box.u_lo - box.w_lo};
}

/// PN numerator q_{b,x} = P(x,y) - u.
inline BoundPair pn_bounds(const Theta& theta) {
  double h = theta[2];
  if (h <= AffineBoundForm::kDenominatorFloor) {
    throw DegenerateDenominatorError("P(x,y)", h,
                                     AffineBoundForm::kDenominatorFloor);
  }
  FreeBox box = free_box(theta);
  return {(theta[2] - box.u_hi) / h, (theta[2] - box.u_lo) / h};
}

/// PS numerator q_{b,x'} = A - w.
inline BoundPair ps_bounds(const Theta& theta) {
  double h = theta[5];
  if (h <= AffineBoundForm::kDenominatorFloor) {
    throw DegenerateDenominatorError("P(x',y')", h,
                                     AffineBoundForm::kDenominatorFloor);
  }
  FreeBox box = free_box(theta);
  return {(box.a - box.w_hi) / h, (box.a - box.w_lo) / h};
}

inline BoundPair bounds(const std::string& quantity, const Theta& theta) {
  if (quantity == "pns" || quantity == "PNS") return pns_bounds(theta);
  if (quantity == "pn" || quantity == "PN") return pn_bounds(theta);
  if (quantity == "ps" || quantity == "PS") return ps_bounds(theta);
  throw ValidationError("unknown quantity '" + quantity +
                        "'; expected pns, pn or ps");
}

}  // namespace closed_form

}  // namespace pocbounds
