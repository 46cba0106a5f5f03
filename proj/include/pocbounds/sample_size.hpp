#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "pocbounds/affine_form.hpp"
#include "pocbounds/errors.hpp"
#include "pocbounds/inference.hpp"
#include "pocbounds/normal.hpp"
#include "pocbounds/theta.hpp"

namespace pocbounds {

/// How experimental units are split across arms when planning.
struct CovarianceModel {
  double arm_fraction = 0.5;  // fraction of m assigned to the treated arm
};

struct SampleSizePlan {
  std::int64_t m = 0;  // total experimental size (both arms)
  std::int64_t n = 0;  // observational size
  double epsilon = 0.0;
  double alpha = 0.0;
  double ratio = 0.0;  // r = m/n
  std::string method;  // "worstcase" | "variance"
  double arm_fraction = 0.5;
  // Variance route only: max endpoint variance of the root-n-normalized
  // estimator at the pilot point.
  double unit_variance = 0.0;
};

namespace detail {

inline void validate_plan_inputs(double epsilon, double alpha, double ratio) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("target margin of error must be positive");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  if (!(ratio > 0.0) || !std::isfinite(ratio)) {
    throw ValidationError("ratio m/n must be positive");
  }
}

inline std::int64_t ceil_to_count(double x) {
  if (!(x >= 0.0) || x > 9.0e18) {
    throw ValidationError("planned sample size overflows a 64-bit count");
  }
  return static_cast<std::int64_t>(std::ceil(x));
}

}  // namespace detail

/// Squared critical-value-to-margin ratio (z_{1-alpha/2} / epsilon)^2,
/// the experiment-size requirement in the limit of unlimited
/// observational data.
inline double plan_base_factor(double epsilon, double alpha) {
  detail::validate_plan_inputs(epsilon, alpha, 1.0);
  double z = two_sided_z(alpha);
  return (z / epsilon) * (z / epsilon);
}

/// Closed-form worst-case plan.
///
/// The widest-variance endpoint term combines two binomial proportions
/// (one per arm, m/2 each) and one observational binomial, so with
/// p(1-p) <= 1/4 everywhere and n = m/r:
///
///   err <= z_{1-alpha/2} sqrt(1/m + 1/(4n))
///
/// giving m = ceil((1 + 1/(4r)) (z_{1-alpha/2}/epsilon)^2). The 1/(4r)
/// factor is kept exactly in this published form; it shrinks the
/// experimental requirement as the ratio grows and tends to the base
/// factor as r -> infinity.
inline SampleSizePlan worst_case_plan(double epsilon, double alpha,
                                      double ratio) {
  detail::validate_plan_inputs(epsilon, alpha, ratio);
  double base = plan_base_factor(epsilon, alpha);
  double m_real = (1.0 + 1.0 / (4.0 * ratio)) * base;
  SampleSizePlan plan;
  plan.m = detail::ceil_to_count(m_real);
  plan.n = detail::ceil_to_count(static_cast<double>(plan.m) / ratio);
  plan.epsilon = epsilon;
  plan.alpha = alpha;
  plan.ratio = ratio;
  plan.method = "worstcase";
  plan.arm_fraction = 0.5;
  return plan;
}

/// Published benchmark requirement for the same planning target, used
/// only for reporting the comparison ratio: m >= (2 z_{1-alpha/2} /
/// epsilon)^2. At (0.05, 0.05) this is 6147, about three times the
/// worst-case plan at r = 1.
inline std::int64_t benchmark_plan_size(double epsilon, double alpha) {
  detail::validate_plan_inputs(epsilon, alpha, 1.0);
  double z = two_sided_z(alpha);
  double m_real = (2.0 * z / epsilon) * (2.0 * z / epsilon);
  return detail::ceil_to_count(m_real);
}

/// Variance-based refinement: replaces the AM-GM worst case with the
/// delta-method variance at a pilot point. Solves for the smallest n with
///
///   z_{1-alpha/2} * sqrt(V(theta_pilot) / n) <= epsilon
///
/// for both endpoints, where V is the variance of the root-n-normalized
/// endpoint estimate under arm sizes (arm_fraction r n, (1-arm_fraction)
/// r n) and observational size n. Returns m = ceil(r n).
///
/// The pilot must have unique optimizers on both envelopes; a tied pilot
/// has no delta-method variance and the worst-case plan applies instead.
inline SampleSizePlan variance_based_plan(const AffineBoundForm& form,
                                          const Theta& pilot,
                                          const CovarianceModel& cov_model,
                                          double epsilon, double alpha,
                                          double ratio) {
  detail::validate_plan_inputs(epsilon, alpha, ratio);
  if (!(cov_model.arm_fraction > 0.0 && cov_model.arm_fraction < 1.0)) {
    throw ValidationError("arm fraction must lie strictly in (0, 1)");
  }
  // Covariance of theta-hat at n = 1 with the arm sizes scaled by r;
  // scaling n then divides every entry by n.
  CovarianceEstimate unit = multinomial_covariance(
      pilot, cov_model.arm_fraction * ratio,
      (1.0 - cov_model.arm_fraction) * ratio, 1.0);
  double v_max = 0.0;
  for (Endpoint e : {Endpoint::kLower, Endpoint::kUpper}) {
    Vector grad;
    try {
      grad = form.endpoint_gradient(e, pilot);
    } catch (const NonSmoothEndpointError&) {
      throw NonSmoothEndpointError(
          std::string("pilot point has tied optimizers on the ") +
          endpoint_name(e) +
          " envelope; variance-based planning needs a smooth pilot, use "
          "worst_case_plan instead");
    }
    v_max = std::max(v_max, grad.dot(unit.cov * grad));
  }
  double base = plan_base_factor(epsilon, alpha);
  SampleSizePlan plan;
  plan.n = detail::ceil_to_count(v_max * base);
  if (plan.n < 1) plan.n = 1;
  plan.m = detail::ceil_to_count(ratio * static_cast<double>(plan.n));
  plan.epsilon = epsilon;
  plan.alpha = alpha;
  plan.ratio = ratio;
  plan.method = "variance";
  plan.arm_fraction = cov_model.arm_fraction;
  plan.unit_variance = v_max;
  return plan;
}

}  // namespace pocbounds
