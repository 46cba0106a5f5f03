#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "json.hpp"
#include "pocbounds/affine_form.hpp"
#include "pocbounds/compensated_sum.hpp"
#include "pocbounds/errors.hpp"
#include "pocbounds/inference.hpp"
#include "pocbounds/rng.hpp"
#include "pocbounds/theta.hpp"

namespace pocbounds {

/// Structural model over 20 exogenous Bernoulli covariates:
///   Z_i ~ Bernoulli(uz_probs[i])
///   X = 1{ beta_x . Z + U_X > 0.5 },           U_X ~ Bernoulli(ux_prob)
///   Y = 1{ c X + beta_y . Z + U_Y in (0,1) u (1,2) },
///                                              U_Y ~ Bernoulli(uy_prob)
/// Everything downstream (population probabilities, counterfactuals,
/// samples) is induced by this triple of equations.
struct ScmSpec {
  std::array<double, 20> uz_probs{};
  double ux_prob = 0.0;
  double uy_prob = 0.0;
  std::array<double, 20> beta_x{};
  std::array<double, 20> beta_y{};
  double c = 0.0;

  static constexpr int kNumCovariates = 20;

  void validate() const {
    auto check_prob = [](double p, const std::string& what) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError(what + " = " + std::to_string(p) +
                              " is not a probability");
      }
    };
    for (int i = 0; i < kNumCovariates; ++i) {
      check_prob(uz_probs[i], "uz_probs[" + std::to_string(i) + "]");
      if (!std::isfinite(beta_x[i]) || !std::isfinite(beta_y[i])) {
        throw ValidationError("coefficient " + std::to_string(i) +
                              " is not finite");
      }
    }
    check_prob(ux_prob, "ux_prob");
    check_prob(uy_prob, "uy_prob");
    if (!std::isfinite(c)) {
      throw ValidationError("constant c is not finite");
    }
  }
};

/// Treatment equation: strict threshold on the covariate score.
inline int f_x(double m_x, int u_x) {
  return m_x + static_cast<double>(u_x) > 0.5 ? 1 : 0;
}

/// Outcome equation. Strict inequalities on both windows: a score landing
/// exactly on 0, 1 or 2 yields 0.
inline int f_y(double c, int x, double m_y, int u_y) {
  double s = c * static_cast<double>(x) + m_y + static_cast<double>(u_y);
  return ((0.0 < s && s < 1.0) || (1.0 < s && s < 2.0)) ? 1 : 0;
}

/// Exact population quantities induced by a spec.
struct PopulationSummary {
  Theta theta_true;
  double pns_true = 0.0;
  BoundPair pns_bounds_true{0.0, 0.0};
  bool pn_defined = false;  // requires P(x,y) above the denominator floor
  double pn_true = 0.0;
  BoundPair pn_bounds_true{0.0, 0.0};
  bool ps_defined = false;  // requires P(x',y') above the floor
  double ps_true = 0.0;
  BoundPair ps_bounds_true{0.0, 0.0};
};

namespace detail {

/// Score/weight tables over the two 10-bit halves of the covariate
/// pattern. Both the exhaustive enumeration and the samplers read scores
/// as half-table sums, so every path sees bit-identical thresholds.
struct HalfTables {
  std::array<double, 1024> w_lo, w_hi;
  std::array<double, 1024> mx_lo, mx_hi;
  std::array<double, 1024> my_lo, my_hi;

  explicit HalfTables(const ScmSpec& spec) {
    for (int pattern = 0; pattern < 1024; ++pattern) {
      // Bit j of the pattern is covariate j in the low table and
      // covariate 10+j in the high table.
      double wl = 1.0, wh = 1.0;
      double mxl = 0.0, mxh = 0.0, myl = 0.0, myh = 0.0;
      for (int j = 0; j < 10; ++j) {
        bool bit = (pattern >> j) & 1;
        wl *= bit ? spec.uz_probs[j] : 1.0 - spec.uz_probs[j];
        wh *= bit ? spec.uz_probs[10 + j] : 1.0 - spec.uz_probs[10 + j];
        if (bit) {
          mxl += spec.beta_x[j];
          myl += spec.beta_y[j];
          mxh += spec.beta_x[10 + j];
          myh += spec.beta_y[10 + j];
        }
      }
      w_lo[pattern] = wl;
      w_hi[pattern] = wh;
      mx_lo[pattern] = mxl;
      mx_hi[pattern] = mxh;
      my_lo[pattern] = myl;
      my_hi[pattern] = myh;
    }
  }

  double weight(int lo, int hi) const { return w_lo[lo] * w_hi[hi]; }
  double m_x(int lo, int hi) const { return mx_lo[lo] + mx_hi[hi]; }
  double m_y(int lo, int hi) const { return my_lo[lo] + my_hi[hi]; }
};

/// Deterministic signature of a covariate pattern: the six indicator bits
/// that fully determine treatment and both potential outcomes once the
/// exogenous noise bits are fixed.
inline int pattern_signature(const ScmSpec& spec, double m_x, double m_y) {
  int x0 = f_x(m_x, 0);
  int x1 = f_x(m_x, 1);
  int y10 = f_y(spec.c, 1, m_y, 0);
  int y11 = f_y(spec.c, 1, m_y, 1);
  int y00 = f_y(spec.c, 0, m_y, 0);
  int y01 = f_y(spec.c, 0, m_y, 1);
  return x0 | (x1 << 1) | (y10 << 2) | (y11 << 3) | (y00 << 4) | (y01 << 5);
}

struct SignatureWeights {
  std::array<double, 64> w{};
};

/// Total covariate probability mass per signature. The 2^20 pattern loop
/// only buckets weights; all noise mixing happens exactly afterwards.
inline SignatureWeights signature_weights(const ScmSpec& spec,
                                          const HalfTables& tables,
                                          bool reversed_order) {
  std::array<CompensatedSum, 64> acc;
  std::int64_t total = 1 << ScmSpec::kNumCovariates;
  for (std::int64_t step = 0; step < total; ++step) {
    std::int64_t k = reversed_order ? total - 1 - step : step;
    int lo = static_cast<int>(k & 1023);
    int hi = static_cast<int>(k >> 10);
    int sig = pattern_signature(spec, tables.m_x(lo, hi),
                                tables.m_y(lo, hi));
    acc[static_cast<std::size_t>(sig)].add(tables.weight(lo, hi));
  }
  SignatureWeights out;
  for (int s = 0; s < 64; ++s) out.w[static_cast<std::size_t>(s)] =
      acc[static_cast<std::size_t>(s)].value();
  return out;
}

struct RawPopulation {
  double p_yx = 0.0, p_yxp = 0.0;
  double joint[2][2] = {{0.0, 0.0}, {0.0, 0.0}};  // [x][y]
  double pns = 0.0;
  double pn_num = 0.0;  // P(X=1, Y=1, Y would fail without treatment)
  double ps_num = 0.0;  // P(X=0, Y=0, Y would occur under treatment)
};

inline PopulationSummary summarize(const RawPopulation& raw) {
  Theta theta = Theta::standard(raw.p_yx, raw.p_yxp, raw.joint[1][1],
                                raw.joint[1][0], raw.joint[0][1],
                                raw.joint[0][0]);
  PopulationSummary out{std::move(theta)};
  out.pns_true = raw.pns;
  out.pns_bounds_true = build_pns_form().evaluate(out.theta_true);
  double p_xy = out.theta_true[2];
  double p_xpyp = out.theta_true[5];
  if (p_xy > AffineBoundForm::kDenominatorFloor) {
    out.pn_defined = true;
    out.pn_true = raw.pn_num / p_xy;
    out.pn_bounds_true = build_pn_form().evaluate(out.theta_true);
  }
  if (p_xpyp > AffineBoundForm::kDenominatorFloor) {
    out.ps_defined = true;
    out.ps_true = raw.ps_num / p_xpyp;
    out.ps_bounds_true = build_ps_form().evaluate(out.theta_true);
  }
  return out;
}

inline PopulationSummary enumerate_impl(const ScmSpec& spec,
                                        bool reversed_order) {
  spec.validate();
  HalfTables tables(spec);
  SignatureWeights sig = signature_weights(spec, tables, reversed_order);

  double px = spec.ux_prob;
  double py = spec.uy_prob;
  RawPopulation raw;
  for (int s = 0; s < 64; ++s) {
    double w = sig.w[static_cast<std::size_t>(s)];
    if (w == 0.0) continue;
    int x_of_ux[2] = {s & 1, (s >> 1) & 1};
    int y1_of_uy[2] = {(s >> 2) & 1, (s >> 3) & 1};
    int y0_of_uy[2] = {(s >> 4) & 1, (s >> 5) & 1};
    for (int uy = 0; uy < 2; ++uy) {
      double puy = uy ? py : 1.0 - py;
      raw.p_yx += w * puy * y1_of_uy[uy];
      raw.p_yxp += w * puy * y0_of_uy[uy];
      raw.pns += w * puy * (y1_of_uy[uy] * (1 - y0_of_uy[uy]));
      for (int ux = 0; ux < 2; ++ux) {
        double pux = ux ? px : 1.0 - px;
        int x = x_of_ux[ux];
        int y = x ? y1_of_uy[uy] : y0_of_uy[uy];
        double mass = w * pux * puy;
        raw.joint[x][y] += mass;
        int benefit = y1_of_uy[uy] * (1 - y0_of_uy[uy]);
        if (benefit) {
          if (x == 1) raw.pn_num += mass;  // then Y = Y_x = 1
          if (x == 0) raw.ps_num += mass;  // then Y = Y_{x'} = 0
        }
      }
    }
  }
  return summarize(raw);
}

}  // namespace detail

/// Exact population summary by exhaustive enumeration: the 2^20 covariate
/// patterns are bucketed into 64 outcome signatures with compensated
/// summation, and the four noise combinations are mixed in analytically.
/// Identical sums in any iteration order; runs in well under a second.
inline PopulationSummary enumerate_population(const ScmSpec& spec) {
  return detail::enumerate_impl(spec, /*reversed_order=*/false);
}

/// Literal reference enumeration over all 2^22 exogenous configurations
/// (every covariate pattern crossed with both noise bits), kept as an
/// independent check of the bucketed fast path. Same half-table scores,
/// so any disagreement beyond summation roundoff is a real defect.
inline PopulationSummary enumerate_population_reference(const ScmSpec& spec) {
  spec.validate();
  detail::HalfTables tables(spec);
  double px = spec.ux_prob;
  double py = spec.uy_prob;

  CompensatedSum p_yx, p_yxp, pns, pn_num, ps_num;
  CompensatedSum joint[2][2];
  std::int64_t total = 1 << ScmSpec::kNumCovariates;
  for (std::int64_t k = 0; k < total; ++k) {
    int lo = static_cast<int>(k & 1023);
    int hi = static_cast<int>(k >> 10);
    double wz = tables.weight(lo, hi);
    double m_x = tables.m_x(lo, hi);
    double m_y = tables.m_y(lo, hi);
    for (int ux = 0; ux < 2; ++ux) {
      double pux = ux ? px : 1.0 - px;
      for (int uy = 0; uy < 2; ++uy) {
        double puy = uy ? py : 1.0 - py;
        double w = wz * pux * puy;
        int x = f_x(m_x, ux);
        int y_x = f_y(spec.c, 1, m_y, uy);
        int y_xp = f_y(spec.c, 0, m_y, uy);
        int y = x ? y_x : y_xp;
        p_yx.add(w * y_x);
        p_yxp.add(w * y_xp);
        joint[x][y].add(w);
        int benefit = y_x * (1 - y_xp);
        pns.add(w * benefit);
        if (benefit && x == 1) pn_num.add(w);
        if (benefit && x == 0) ps_num.add(w);
      }
    }
  }
  detail::RawPopulation raw;
  raw.p_yx = p_yx.value();
  raw.p_yxp = p_yxp.value();
  raw.pns = pns.value();
  raw.pn_num = pn_num.value();
  raw.ps_num = ps_num.value();
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) raw.joint[x][y] = joint[x][y].value();
  return detail::summarize(raw);
}

/// One drawn sample, reduced to its four cell counts.
struct SampleBatch {
  enum class Kind { kExperimental, kObservational };
  Kind kind = Kind::kExperimental;
  std::int64_t c11 = 0, c10 = 0, c01 = 0, c00 = 0;  // [x or arm][y]
  std::int64_t size = 0;
  std::uint64_t seed = 0;
};

namespace detail {

/// Counter slots per unit: 0-19 covariate noise, 20 treatment noise
/// (observational only), 21 outcome noise, 22 the randomization coin
/// (experimental only). 32 slots reserved per unit so the two samplers
/// can never collide on a counter.
constexpr std::uint64_t kSlotsPerUnit = 32;
constexpr std::uint64_t kSlotUx = 20;
constexpr std::uint64_t kSlotUy = 21;
constexpr std::uint64_t kSlotCoin = 22;

struct DrawnUnit {
  double m_x;
  double m_y;
  int u_y;
};

inline DrawnUnit draw_covariates(const ScmSpec& spec, const HalfTables& tables,
                                 const CounterRng& rng, std::uint64_t unit) {
  std::uint64_t base = unit * kSlotsPerUnit;
  int lo = 0, hi = 0;
  for (int j = 0; j < 10; ++j) {
    if (rng.bernoulli(base + static_cast<std::uint64_t>(j),
                      spec.uz_probs[j])) {
      lo |= 1 << j;
    }
    if (rng.bernoulli(base + static_cast<std::uint64_t>(10 + j),
                      spec.uz_probs[10 + j])) {
      hi |= 1 << j;
    }
  }
  DrawnUnit unit_state;
  unit_state.m_x = tables.m_x(lo, hi);
  unit_state.m_y = tables.m_y(lo, hi);
  unit_state.u_y = rng.bernoulli(base + kSlotUy, spec.uy_prob) ? 1 : 0;
  return unit_state;
}

}  // namespace detail

/// Experimental sample: treatment is a fair coin independent of all
/// exogenous noise, so the arm sizes are themselves random.
inline SampleBatch draw_experimental(const ScmSpec& spec, std::int64_t m,
                                     std::uint64_t seed) {
  spec.validate();
  if (m < 1) throw ValidationError("experimental sample size must be >= 1");
  detail::HalfTables tables(spec);
  CounterRng rng(seed);
  SampleBatch batch;
  batch.kind = SampleBatch::Kind::kExperimental;
  batch.size = m;
  batch.seed = seed;
  for (std::int64_t i = 0; i < m; ++i) {
    auto unit = detail::draw_covariates(spec, tables, rng,
                                        static_cast<std::uint64_t>(i));
    std::uint64_t base =
        static_cast<std::uint64_t>(i) * detail::kSlotsPerUnit;
    int x = rng.bernoulli(base + detail::kSlotCoin, 0.5) ? 1 : 0;
    int y = f_y(spec.c, x, unit.m_y, unit.u_y);
    (x ? (y ? batch.c11 : batch.c10) : (y ? batch.c01 : batch.c00)) += 1;
  }
  return batch;
}

/// Observational sample: treatment follows the structural equation.
inline SampleBatch draw_observational(const ScmSpec& spec, std::int64_t n,
                                      std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw ValidationError("observational sample size must be >= 1");
  detail::HalfTables tables(spec);
  CounterRng rng(seed);
  SampleBatch batch;
  batch.kind = SampleBatch::Kind::kObservational;
  batch.size = n;
  batch.seed = seed;
  for (std::int64_t i = 0; i < n; ++i) {
    auto unit = detail::draw_covariates(spec, tables, rng,
                                        static_cast<std::uint64_t>(i));
    std::uint64_t base =
        static_cast<std::uint64_t>(i) * detail::kSlotsPerUnit;
    int u_x = rng.bernoulli(base + detail::kSlotUx, spec.ux_prob) ? 1 : 0;
    int x = f_x(unit.m_x, u_x);
    int y = f_y(spec.c, x, unit.m_y, unit.u_y);
    (x ? (y ? batch.c11 : batch.c10) : (y ? batch.c01 : batch.c00)) += 1;
  }
  return batch;
}

/// Plug-in estimate from one batch of each kind.
inline ThetaEstimate estimate_theta(const SampleBatch& experimental,
                                    const SampleBatch& observational) {
  if (experimental.kind != SampleBatch::Kind::kExperimental ||
      observational.kind != SampleBatch::Kind::kObservational) {
    throw ValidationError(
        "estimate_theta needs one experimental and one observational batch");
  }
  SampleCounts counts;
  counts.m11 = experimental.c11;
  counts.m10 = experimental.c10;
  counts.m01 = experimental.c01;
  counts.m00 = experimental.c00;
  counts.n11 = observational.c11;
  counts.n10 = observational.c10;
  counts.n01 = observational.c01;
  counts.n00 = observational.c00;
  return ThetaEstimate::from_counts(counts);
}

/// Random model: noise probabilities uniform on (0, 1), coefficients and
/// the constant uniform on (-1, 1). Draw order is fixed (covariate probs,
/// ux, uy, beta_x, beta_y, c) so a seed pins the spec forever.
inline ScmSpec random_spec(std::uint64_t seed) {
  SequentialRng rng(seed);
  ScmSpec spec;
  for (int i = 0; i < ScmSpec::kNumCovariates; ++i) {
    spec.uz_probs[i] = rng.next_uniform();
  }
  spec.ux_prob = rng.next_uniform();
  spec.uy_prob = rng.next_uniform();
  for (int i = 0; i < ScmSpec::kNumCovariates; ++i) {
    spec.beta_x[i] = 2.0 * rng.next_uniform() - 1.0;
  }
  for (int i = 0; i < ScmSpec::kNumCovariates; ++i) {
    spec.beta_y[i] = 2.0 * rng.next_uniform() - 1.0;
  }
  spec.c = 2.0 * rng.next_uniform() - 1.0;
  return spec;
}

inline nlohmann::json scm_spec_to_json(const ScmSpec& spec) {
  nlohmann::json doc;
  doc["uz_probs"] = spec.uz_probs;
  doc["ux_prob"] = spec.ux_prob;
  doc["uy_prob"] = spec.uy_prob;
  doc["beta_x"] = spec.beta_x;
  doc["beta_y"] = spec.beta_y;
  doc["c"] = spec.c;
  return doc;
}

inline ScmSpec scm_spec_from_json(const nlohmann::json& doc) {
  for (const char* field :
       {"uz_probs", "ux_prob", "uy_prob", "beta_x", "beta_y", "c"}) {
    if (!doc.contains(field)) {
      throw ValidationError(std::string("model document is missing required "
                                        "field '") +
                            field + "'");
    }
  }
  ScmSpec spec;
  auto uz = doc.at("uz_probs").get<std::vector<double>>();
  auto bx = doc.at("beta_x").get<std::vector<double>>();
  auto by = doc.at("beta_y").get<std::vector<double>>();
  if (uz.size() != ScmSpec::kNumCovariates ||
      bx.size() != ScmSpec::kNumCovariates ||
      by.size() != ScmSpec::kNumCovariates) {
    throw ValidationError("uz_probs, beta_x and beta_y must each have 20 "
                          "entries");
  }
  std::copy(uz.begin(), uz.end(), spec.uz_probs.begin());
  std::copy(bx.begin(), bx.end(), spec.beta_x.begin());
  std::copy(by.begin(), by.end(), spec.beta_y.begin());
  spec.ux_prob = doc.at("ux_prob").get<double>();
  spec.uy_prob = doc.at("uy_prob").get<double>();
  spec.c = doc.at("c").get<double>();
  spec.validate();
  return spec;
}

inline ScmSpec load_scm_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open model file '" + path + "'");
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file '" + path + "' is not valid JSON: " +
                          e.what());
  }
  return scm_spec_from_json(doc);
}

inline void save_scm_spec(const ScmSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ValidationError("cannot write model file '" + path + "'");
  }
  out << scm_spec_to_json(spec).dump(2) << "\n";
}

}  // namespace pocbounds
