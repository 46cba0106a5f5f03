#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pocbounds/affine_form.hpp"
#include "pocbounds/errors.hpp"
#include "pocbounds/normal.hpp"
#include "pocbounds/rng.hpp"
#include "pocbounds/serialize.hpp"
#include "pocbounds/theta.hpp"

namespace pocbounds {

/// Raw counts from the two data sources. Experimental cells are arm x
/// outcome (first index 1 = treated arm); observational cells are
/// treatment x outcome as found in the population.
struct SampleCounts {
  std::int64_t m11 = 0, m10 = 0, m01 = 0, m00 = 0;  // experimental
  std::int64_t n11 = 0, n10 = 0, n01 = 0, n00 = 0;  // observational

  std::int64_t treated_size() const { return m11 + m10; }
  std::int64_t control_size() const { return m01 + m00; }
  std::int64_t obs_size() const { return n11 + n10 + n01 + n00; }

  void validate() const {
    if (m11 < 0 || m10 < 0 || m01 < 0 || m00 < 0 || n11 < 0 || n10 < 0 ||
        n01 < 0 || n00 < 0) {
      throw ValidationError("counts must be non-negative");
    }
    if (treated_size() <= 0 || control_size() <= 0) {
      throw InsufficientDataError("both experimental arms must be non-empty");
    }
    if (obs_size() <= 0) {
      throw InsufficientDataError("observational sample must be non-empty");
    }
  }
};

/// Plug-in estimate of theta from counts, with the sizes retained for
/// covariance estimation: conditional frequencies for the experimental
/// components, joint frequencies for the observational ones.
class ThetaEstimate {
 public:
  static ThetaEstimate from_counts(const SampleCounts& counts) {
    counts.validate();
    double m1 = static_cast<double>(counts.treated_size());
    double m0 = static_cast<double>(counts.control_size());
    double n = static_cast<double>(counts.obs_size());
    Theta theta = Theta::standard(static_cast<double>(counts.m11) / m1,
                                  static_cast<double>(counts.m01) / m0,
                                  static_cast<double>(counts.n11) / n,
                                  static_cast<double>(counts.n10) / n,
                                  static_cast<double>(counts.n01) / n,
                                  static_cast<double>(counts.n00) / n);
    return ThetaEstimate(std::move(theta), counts);
  }

  const Theta& theta() const { return theta_; }
  const SampleCounts& counts() const { return counts_; }
  double treated_size() const {
    return static_cast<double>(counts_.treated_size());
  }
  double control_size() const {
    return static_cast<double>(counts_.control_size());
  }
  double obs_size() const { return static_cast<double>(counts_.obs_size()); }

 private:
  ThetaEstimate(Theta theta, SampleCounts counts)
      : theta_(std::move(theta)), counts_(counts) {}

  Theta theta_;
  SampleCounts counts_;
};

/// Covariance of the plug-in estimator, plus the norming sample size used
/// by the rate-root-n asymptotics.
struct CovarianceEstimate {
  Matrix cov;      // Cov(theta_hat), 6x6
  double n = 0.0;  // observational sample size

  /// Covariance of the root-n-normalized estimator, n * Cov(theta_hat).
  Matrix scaled() const { return n * cov; }
};

/// Exact covariance of the plug-in estimator at a given parameter point:
/// two independent binomial proportions and an independent multinomial
/// block, with no cross-covariance.
inline CovarianceEstimate multinomial_covariance(const Theta& theta,
                                                 double treated_size,
                                                 double control_size,
                                                 double obs_size) {
  if (!theta.layout().is_standard_poc()) {
    throw LayoutError("covariance model requires the standard layout");
  }
  if (treated_size <= 0.0 || control_size <= 0.0 || obs_size <= 0.0) {
    throw InsufficientDataError("all sample sizes must be positive");
  }
  Matrix cov = Matrix::Zero(6, 6);
  double p1 = theta[0];
  double p0 = theta[1];
  cov(0, 0) = p1 * (1.0 - p1) / treated_size;
  cov(1, 1) = p0 * (1.0 - p0) / control_size;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double pi = theta[2 + i];
      double pj = theta[2 + j];
      cov(2 + i, 2 + j) = ((i == j ? pi : 0.0) - pi * pj) / obs_size;
    }
  }
  return {cov, obs_size};
}

inline CovarianceEstimate estimate_covariance(const ThetaEstimate& est) {
  return multinomial_covariance(est.theta(), est.treated_size(),
                                est.control_size(), est.obs_size());
}

/// Analytic interval for one endpoint at a differentiability point.
/// With gradient g of the endpoint, se = sqrt(g' Cov g) and the interval
/// is point +- z_{1-alpha/2} se. Throws NonSmoothEndpointError when the
/// optimizer is tied within tie_tol.
inline IntervalEstimate smooth_ci(const AffineBoundForm& form, Endpoint e,
                                  const Theta& theta,
                                  const CovarianceEstimate& cov_est,
                                  double alpha = 0.05,
                                  double tie_tol = 1e-9) {
  double point = form.evaluate_endpoint(e, theta.values());
  Vector grad = form.endpoint_gradient(e, theta, tie_tol);
  double var = grad.dot(cov_est.cov * grad);
  double se = std::sqrt(std::max(var, 0.0));
  double z = two_sided_z(alpha);
  IntervalEstimate out;
  out.endpoint = endpoint_name(e);
  out.method = "smooth";
  out.point = point;
  out.se = se;
  out.ci_low = point - z * se;
  out.ci_high = point + z * se;
  out.alpha = alpha;
  return out;
}

/// Draws from N(0, cov) addressable by index: draw(i) is a pure function
/// of (seed, i), so rejected draws can be skipped without disturbing the
/// rest of the stream.
class GaussianSampler {
 public:
  static constexpr double kNegativeEigenvalueSlack = 1e-10;
  static constexpr double kRelativeNullspaceCut = 1e-12;

  GaussianSampler(const Matrix& cov, std::uint64_t seed)
      : rng_(seed), dim_(cov.rows()) {
    if (cov.rows() != cov.cols()) {
      throw ValidationError("covariance matrix must be square");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.info() != Eigen::Success) {
      throw NumericalError("eigendecomposition of covariance failed");
    }
    Vector evals = es.eigenvalues();
    double lmax = std::max(evals.maxCoeff(), 0.0);
    if (evals.minCoeff() < -kNegativeEigenvalueSlack) {
      throw NotPsdError("covariance has eigenvalue " +
                        std::to_string(evals.minCoeff()) +
                        " below the PSD slack");
    }
    // Eigenvalues that are numerically zero (including the exact null
    // direction of a multinomial block) are cut to zero so that draws stay
    // on the support of the distribution instead of picking up noise.
    for (Eigen::Index i = 0; i < evals.size(); ++i) {
      evals[i] = evals[i] <= kRelativeNullspaceCut * lmax ? 0.0 : evals[i];
    }
    transform_ = es.eigenvectors() * evals.cwiseSqrt().asDiagonal();
  }

  Eigen::Index dim() const { return dim_; }

  Vector draw(std::uint64_t index) const {
    Vector z(dim_);
    for (Eigen::Index i = 0; i < dim_; ++i) {
      z[i] = rng_.normal(index * static_cast<std::uint64_t>(dim_) +
                         static_cast<std::uint64_t>(i));
    }
    return transform_ * z;
  }

 private:
  Matrix transform_;
  CounterRng rng_;
  Eigen::Index dim_;
};

/// Linear-interpolation sample quantile (the common "type 7" rule).
inline double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) {
    throw ValidationError("quantile of an empty sample");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError("quantile level must lie in [0, 1]");
  }
  std::sort(values.begin(), values.end());
  double h = static_cast<double>(values.size() - 1) * p;
  auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] -
                                                       values[lo]);
}

struct NumericalDeltaConfig {
  double alpha = 0.05;
  int B = 1000;
  double epsilon_n = 0.0;  // 0 selects the default n^(-1/4)
  std::uint64_t seed = 0;
  int max_resample_factor = 10;
};

struct NumericalDeltaResult {
  IntervalEstimate estimate;
  int rejected_draws = 0;
};

/// Simulation-based interval for one endpoint, valid with or without tied
/// optimizers.
///
/// The root-n error of the plug-in endpoint converges to the directional
/// derivative of the endpoint along a N(0, n Cov) limit. That distribution
/// is estimated by the difference quotients
///
///   T_b = (f(theta_hat + eps Z_b) - f(theta_hat)) / eps,   Z_b ~ N(0, n Cov)
///
/// and the interval inverts their quantiles:
///
///   [ point - q_{1-alpha/2}(T) / sqrt(n),  point - q_{alpha/2}(T) / sqrt(n) ].
///
/// Perturbed points whose denominator falls to the positivity floor are
/// rejected and redrawn; if fewer than B draws survive after
/// max_resample_factor * B attempts the point is too close to the boundary
/// for this construction and NearBoundaryError is thrown.
inline NumericalDeltaResult numerical_delta_ci(
    const AffineBoundForm& form, Endpoint e, const Theta& theta,
    const CovarianceEstimate& cov_est, const NumericalDeltaConfig& config) {
  if (config.B < 2) {
    throw ValidationError("numerical delta needs at least 2 draws");
  }
  double n = cov_est.n;
  if (n <= 0.0) {
    throw InsufficientDataError("norming sample size must be positive");
  }
  double eps = config.epsilon_n > 0.0 ? config.epsilon_n
                                      : std::pow(n, -0.25);
  double point = form.evaluate_endpoint(e, theta.values());

  GaussianSampler sampler(cov_est.scaled(), config.seed);
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(config.B));
  int rejected = 0;
  std::uint64_t max_attempts =
      static_cast<std::uint64_t>(config.max_resample_factor) *
      static_cast<std::uint64_t>(config.B);
  std::uint64_t attempt = 0;
  const auto& den_idx = form.denominator_index();
  while (t.size() < static_cast<std::size_t>(config.B)) {
    if (attempt >= max_attempts) {
      throw NearBoundaryError(
          "more than " + std::to_string(max_attempts) +
          " perturbed draws hit the denominator floor; the estimate is too "
          "close to the boundary for the simulation-based interval");
    }
    Vector perturbed = theta.values() + eps * sampler.draw(attempt);
    ++attempt;
    if (den_idx &&
        perturbed[static_cast<Eigen::Index>(*den_idx)] <=
            AffineBoundForm::kDenominatorFloor) {
      ++rejected;
      continue;
    }
    double value = form.evaluate_endpoint(e, perturbed);
    t.push_back((value - point) / eps);
  }

  double z_hi = quantile_type7(t, 1.0 - config.alpha / 2.0);
  double z_lo = quantile_type7(t, config.alpha / 2.0);
  double root_n = std::sqrt(n);

  NumericalDeltaResult result;
  result.rejected_draws = rejected;
  IntervalEstimate& out = result.estimate;
  out.endpoint = endpoint_name(e);
  out.method = "numdelta";
  out.point = point;
  out.se = 0.0;
  out.ci_low = point - z_hi / root_n;
  out.ci_high = point - z_lo / root_n;
  out.alpha = config.alpha;
  out.B = config.B;
  out.epsilon_n = eps;
  out.seed = config.seed;
  return result;
}

struct NearTieDiagnostic {
  double gap = 0.0;        // optimal minus second-best numerator value
  double scale = 0.0;      // sqrt(max_j a_j' Cov a_j)
  double threshold = 0.0;  // multiplier * scale
  bool near_tie = false;   // gap <= threshold
};

/// Measures how close the envelope optimum is to a tie, on the scale of
/// the sampling noise of the individual terms. gap <= threshold flags the
/// point as effectively non-differentiable: the analytic interval is
/// unreliable there and the simulation-based one should be used.
///
/// The default multiplier is 2 z_{1-alpha/2}: terms whose values are
/// within two critical radii of each other can exchange roles across
/// plausible realizations of theta_hat.
inline NearTieDiagnostic near_tie_diagnostic(const AffineBoundForm& form,
                                             Endpoint e, const Theta& theta,
                                             const CovarianceEstimate& cov_est,
                                             double alpha = 0.05,
                                             double multiplier = 0.0) {
  auto vals = form.term_values(e, theta.values());
  NearTieDiagnostic diag;
  if (vals.size() < 2) {
    diag.gap = std::numeric_limits<double>::infinity();
  } else {
    std::sort(vals.begin(), vals.end());
    if (e == Endpoint::kUpper) {
      diag.gap = vals[1] - vals[0];
    } else {
      diag.gap = vals[vals.size() - 1] - vals[vals.size() - 2];
    }
  }
  double max_var = 0.0;
  for (const auto& term : form.terms(e)) {
    max_var = std::max(max_var, term.coeffs.dot(cov_est.cov * term.coeffs));
  }
  diag.scale = std::sqrt(std::max(max_var, 0.0));
  double mult = multiplier > 0.0 ? multiplier : 2.0 * two_sided_z(alpha);
  diag.threshold = mult * diag.scale;
  diag.near_tie = diag.gap <= diag.threshold;
  return diag;
}

enum class CiMethod { kSmooth, kNumDelta };

inline const char* ci_method_name(CiMethod m) {
  return m == CiMethod::kSmooth ? "smooth" : "numdelta";
}

/// Picks the analytic interval away from ties and the simulation-based
/// interval near them.
inline CiMethod select_method(const AffineBoundForm& form, Endpoint e,
                              const Theta& theta,
                              const CovarianceEstimate& cov_est,
                              double alpha = 0.05) {
  NearTieDiagnostic diag = near_tie_diagnostic(form, e, theta, cov_est, alpha);
  return diag.near_tie ? CiMethod::kNumDelta : CiMethod::kSmooth;
}

}  // namespace pocbounds
