#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pocbounds/affine_form.hpp"
#include "pocbounds/builtin_models.hpp"
#include "pocbounds/inference.hpp"
#include "pocbounds/sample_size.hpp"
#include "pocbounds/scm.hpp"
#include "pocbounds/theta.hpp"

namespace pocbounds {

/// Shortest decimal form that round-trips to the same double, so CSV
/// files are byte-stable and lossless to re-parse.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

enum class MethodPolicy { kAuto, kForceSmooth, kForceNumDelta };

struct ReplicationConfig {
  std::vector<ScmSpec> specs;
  std::vector<std::string> spec_names;
  std::vector<std::int64_t> sizes{120, 481, 1921};
  int replications = 1000;
  double ratio = 1.0;  // m = ceil(ratio * n)
  double alpha = 0.05;
  std::uint64_t master_seed = 0;
  std::string out_dir;  // consumed by the CLI; empty means stdout
  bool with_ci = true;
  MethodPolicy method_policy = MethodPolicy::kAuto;
  int numdelta_B = 1000;
  // |error| threshold used for the per-replication stability fraction.
  double error_threshold = 0.05;

  void validate() const {
    if (specs.empty()) throw ValidationError("no model specs configured");
    if (spec_names.size() != specs.size()) {
      throw ValidationError("spec_names must parallel specs");
    }
    if (replications < 1) throw ValidationError("replications must be >= 1");
    if (sizes.empty()) throw ValidationError("no sample sizes configured");
    for (auto n : sizes) {
      if (n < 1) throw ValidationError("sample sizes must be >= 1");
    }
    if (!(ratio > 0.0)) throw ValidationError("ratio must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw ValidationError("alpha must lie in (0, 1)");
    }
    if (numdelta_B < 2) throw ValidationError("numdelta_B must be >= 2");
    for (const auto& spec : specs) spec.validate();
  }
};

/// One replication. `ok` is false when a drawn experimental batch left an
/// arm empty; such rows stay in the report (flagged, not dropped).
/// Per-endpoint CI methods are "smooth", "numdelta", or "none" when no
/// interval could be produced under the configured policy.
struct ReplicationRow {
  std::size_t spec_index = 0;
  std::int64_t n = 0;
  int rep = 0;
  bool ok = false;
  double lower_est = std::numeric_limits<double>::quiet_NaN();
  double upper_est = std::numeric_limits<double>::quiet_NaN();
  double lower_err = std::numeric_limits<double>::quiet_NaN();
  double upper_err = std::numeric_limits<double>::quiet_NaN();
  std::string lower_method = "none";
  std::string upper_method = "none";
  double lower_ci_low = std::numeric_limits<double>::quiet_NaN();
  double lower_ci_high = std::numeric_limits<double>::quiet_NaN();
  double upper_ci_low = std::numeric_limits<double>::quiet_NaN();
  double upper_ci_high = std::numeric_limits<double>::quiet_NaN();
  bool lower_covered = false;
  bool upper_covered = false;
};

struct CellAggregate {
  std::size_t spec_index = 0;
  std::int64_t n = 0;
  std::int64_t valid = 0;
  std::int64_t flagged = 0;
  double mean_err_lower = 0.0, mean_err_upper = 0.0;
  double mean_abs_err_lower = 0.0, mean_abs_err_upper = 0.0;
  // Fraction of valid replications with |error| <= error_threshold.
  double frac_small_err_lower = 0.0, frac_small_err_upper = 0.0;
  std::int64_t smooth_lower = 0, numdelta_lower = 0, no_ci_lower = 0;
  std::int64_t smooth_upper = 0, numdelta_upper = 0, no_ci_upper = 0;
  // Coverage among rows whose CI was produced.
  double coverage_lower = 0.0, coverage_upper = 0.0;
};

struct ReplicationReport {
  std::vector<PopulationSummary> truths;  // one per spec
  std::vector<ReplicationRow> rows;
  std::vector<CellAggregate> cells;
};

inline std::vector<CellAggregate> recompute_aggregates(
    const ReplicationConfig& cfg, const std::vector<ReplicationRow>& rows) {
  std::vector<CellAggregate> cells;
  for (std::size_t spec_idx = 0; spec_idx < cfg.specs.size(); ++spec_idx) {
    for (std::int64_t n : cfg.sizes) {
      CellAggregate cell;
      cell.spec_index = spec_idx;
      cell.n = n;
      std::int64_t ci_lower = 0, ci_upper = 0;
      std::int64_t cov_lower = 0, cov_upper = 0;
      std::int64_t small_lower = 0, small_upper = 0;
      for (const auto& row : rows) {
        if (row.spec_index != spec_idx || row.n != n) continue;
        if (!row.ok) {
          ++cell.flagged;
          continue;
        }
        ++cell.valid;
        cell.mean_err_lower += row.lower_err;
        cell.mean_err_upper += row.upper_err;
        cell.mean_abs_err_lower += std::abs(row.lower_err);
        cell.mean_abs_err_upper += std::abs(row.upper_err);
        if (std::abs(row.lower_err) <= cfg.error_threshold) ++small_lower;
        if (std::abs(row.upper_err) <= cfg.error_threshold) ++small_upper;
        if (row.lower_method == "smooth") ++cell.smooth_lower;
        else if (row.lower_method == "numdelta") ++cell.numdelta_lower;
        else ++cell.no_ci_lower;
        if (row.upper_method == "smooth") ++cell.smooth_upper;
        else if (row.upper_method == "numdelta") ++cell.numdelta_upper;
        else ++cell.no_ci_upper;
        if (row.lower_method != "none") {
          ++ci_lower;
          if (row.lower_covered) ++cov_lower;
        }
        if (row.upper_method != "none") {
          ++ci_upper;
          if (row.upper_covered) ++cov_upper;
        }
      }
      if (cell.valid > 0) {
        double v = static_cast<double>(cell.valid);
        cell.mean_err_lower /= v;
        cell.mean_err_upper /= v;
        cell.mean_abs_err_lower /= v;
        cell.mean_abs_err_upper /= v;
        cell.frac_small_err_lower = static_cast<double>(small_lower) / v;
        cell.frac_small_err_upper = static_cast<double>(small_upper) / v;
      }
      cell.coverage_lower =
          ci_lower > 0 ? static_cast<double>(cov_lower) /
                             static_cast<double>(ci_lower)
                       : 0.0;
      cell.coverage_upper =
          ci_upper > 0 ? static_cast<double>(cov_upper) /
                             static_cast<double>(ci_upper)
                       : 0.0;
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

namespace detail {

struct EndpointCiOutcome {
  std::string method = "none";
  double ci_low = std::numeric_limits<double>::quiet_NaN();
  double ci_high = std::numeric_limits<double>::quiet_NaN();
};

inline EndpointCiOutcome endpoint_ci(const AffineBoundForm& form, Endpoint e,
                                     const ThetaEstimate& est,
                                     const CovarianceEstimate& cov,
                                     const ReplicationConfig& cfg,
                                     std::uint64_t numdelta_seed) {
  EndpointCiOutcome out;
  CiMethod method;
  switch (cfg.method_policy) {
    case MethodPolicy::kForceSmooth:
      method = CiMethod::kSmooth;
      break;
    case MethodPolicy::kForceNumDelta:
      method = CiMethod::kNumDelta;
      break;
    default:
      method = select_method(form, e, est.theta(), cov, cfg.alpha);
  }
  if (method == CiMethod::kSmooth) {
    try {
      IntervalEstimate ci = smooth_ci(form, e, est.theta(), cov, cfg.alpha);
      out.method = "smooth";
      out.ci_low = ci.ci_low;
      out.ci_high = ci.ci_high;
      return out;
    } catch (const NonSmoothEndpointError&) {
      // Exactly tied at the estimate. Under the auto policy fall through
      // to the simulation interval; under force-smooth report no CI.
      if (cfg.method_policy == MethodPolicy::kForceSmooth) return out;
      method = CiMethod::kNumDelta;
    }
  }
  NumericalDeltaConfig nd;
  nd.alpha = cfg.alpha;
  nd.B = cfg.numdelta_B;
  nd.seed = numdelta_seed;
  try {
    NumericalDeltaResult res = numerical_delta_ci(form, e, est.theta(), cov,
                                                  nd);
    out.method = "numdelta";
    out.ci_low = res.estimate.ci_low;
    out.ci_high = res.estimate.ci_high;
  } catch (const NumericalError&) {
    // Near-boundary or degenerate draw stream: leave the row without a CI.
  }
  return out;
}

}  // namespace detail

/// Monte Carlo replication engine for the built-in bound study.
///
/// For every (spec, n, replication) cell a child seed is derived from
/// (master, spec index, n, replication), so runs are reproducible cell by
/// cell and adding sizes or specs never perturbs existing cells. Each
/// replication draws m = ceil(ratio n) experimental and n observational
/// units, estimates theta, evaluates the PNS bounds, and optionally
/// attaches per-endpoint confidence intervals (analytic away from ties,
/// simulation-based near them).
inline ReplicationReport run_replications(const ReplicationConfig& cfg) {
  cfg.validate();
  ReplicationReport report;
  report.truths.reserve(cfg.specs.size());
  for (const auto& spec : cfg.specs) {
    report.truths.push_back(enumerate_population(spec));
  }
  AffineBoundForm pns = build_pns_form();

  for (std::size_t spec_idx = 0; spec_idx < cfg.specs.size(); ++spec_idx) {
    const ScmSpec& spec = cfg.specs[spec_idx];
    const PopulationSummary& truth = report.truths[spec_idx];
    for (std::int64_t n : cfg.sizes) {
      auto m = static_cast<std::int64_t>(
          std::ceil(cfg.ratio * static_cast<double>(n)));
      if (m < 1) m = 1;
      for (int rep = 0; rep < cfg.replications; ++rep) {
        std::uint64_t child =
            derive_seed(cfg.master_seed, static_cast<std::uint64_t>(spec_idx),
                        static_cast<std::uint64_t>(n),
                        static_cast<std::uint64_t>(rep));
        ReplicationRow row;
        row.spec_index = spec_idx;
        row.n = n;
        row.rep = rep;

        SampleBatch exp = draw_experimental(spec, m, derive_seed(child, 1));
        SampleBatch obs = draw_observational(spec, n, derive_seed(child, 2));
        if (exp.c11 + exp.c10 == 0 || exp.c01 + exp.c00 == 0) {
          report.rows.push_back(std::move(row));  // flagged: empty arm
          continue;
        }
        ThetaEstimate est = estimate_theta(exp, obs);
        BoundPair bounds = pns.evaluate(est.theta().values());
        row.ok = true;
        row.lower_est = bounds.lower;
        row.upper_est = bounds.upper;
        row.lower_err = bounds.lower - truth.pns_bounds_true.lower;
        row.upper_err = bounds.upper - truth.pns_bounds_true.upper;

        if (cfg.with_ci) {
          CovarianceEstimate cov = estimate_covariance(est);
          auto low = detail::endpoint_ci(pns, Endpoint::kLower, est, cov, cfg,
                                         derive_seed(child, 3, 0));
          auto up = detail::endpoint_ci(pns, Endpoint::kUpper, est, cov, cfg,
                                        derive_seed(child, 3, 1));
          row.lower_method = low.method;
          row.lower_ci_low = low.ci_low;
          row.lower_ci_high = low.ci_high;
          row.upper_method = up.method;
          row.upper_ci_low = up.ci_low;
          row.upper_ci_high = up.ci_high;
          if (low.method != "none") {
            row.lower_covered = low.ci_low <= truth.pns_bounds_true.lower &&
                                truth.pns_bounds_true.lower <= low.ci_high;
          }
          if (up.method != "none") {
            row.upper_covered = up.ci_low <= truth.pns_bounds_true.upper &&
                                truth.pns_bounds_true.upper <= up.ci_high;
          }
        }
        report.rows.push_back(std::move(row));
      }
    }
  }
  report.cells = recompute_aggregates(cfg, report.rows);
  return report;
}

struct CurveRow {
  std::string label;
  std::int64_t n = 0;
  std::int64_t valid = 0;
  std::int64_t flagged = 0;
  double mean_err_lower = 0.0, mean_err_upper = 0.0;
  double mean_abs_err_lower = 0.0, mean_abs_err_upper = 0.0;
};

/// Mean estimation error against the exact bounds over a grid of sample
/// sizes, one row per (spec, n). Confidence intervals are skipped: the
/// curves only need point estimates.
inline std::vector<CurveRow> error_curve(const ReplicationConfig& cfg) {
  for (std::size_t i = 1; i < cfg.sizes.size(); ++i) {
    if (cfg.sizes[i] <= cfg.sizes[i - 1]) {
      throw ValidationError("size grid must be sorted strictly ascending");
    }
  }
  ReplicationConfig light = cfg;
  light.with_ci = false;
  ReplicationReport report = run_replications(light);
  std::vector<CurveRow> rows;
  for (const auto& cell : report.cells) {
    CurveRow row;
    row.label = cfg.spec_names[cell.spec_index];
    row.n = cell.n;
    row.valid = cell.valid;
    row.flagged = cell.flagged;
    row.mean_err_lower = cell.mean_err_lower;
    row.mean_err_upper = cell.mean_err_upper;
    row.mean_abs_err_lower = cell.mean_abs_err_lower;
    row.mean_abs_err_upper = cell.mean_abs_err_upper;
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Collapses per-spec curve rows into one pooled row per n, weighting by
/// valid replication counts.
inline std::vector<CurveRow> pool_curve(const std::vector<CurveRow>& rows,
                                        const std::string& label) {
  std::vector<CurveRow> pooled;
  for (const auto& row : rows) {
    CurveRow* target = nullptr;
    for (auto& p : pooled) {
      if (p.n == row.n) {
        target = &p;
        break;
      }
    }
    if (!target) {
      CurveRow fresh;
      fresh.label = label;
      fresh.n = row.n;
      pooled.push_back(std::move(fresh));
      target = &pooled.back();
    }
    double w_old = static_cast<double>(target->valid);
    double w_new = static_cast<double>(row.valid);
    double w_tot = w_old + w_new;
    if (w_tot > 0.0) {
      auto blend = [&](double acc, double add) {
        return (acc * w_old + add * w_new) / w_tot;
      };
      target->mean_err_lower = blend(target->mean_err_lower,
                                     row.mean_err_lower);
      target->mean_err_upper = blend(target->mean_err_upper,
                                     row.mean_err_upper);
      target->mean_abs_err_lower = blend(target->mean_abs_err_lower,
                                         row.mean_abs_err_lower);
      target->mean_abs_err_upper = blend(target->mean_abs_err_upper,
                                         row.mean_abs_err_upper);
    }
    target->valid += row.valid;
    target->flagged += row.flagged;
  }
  return pooled;
}

inline void write_scatter_csv(std::ostream& out,
                              const ReplicationConfig& cfg,
                              const ReplicationReport& report) {
  out << "spec,n,rep,ok,lower_true,upper_true,lower_est,upper_est,"
         "lower_err,upper_err,lower_method,upper_method,"
         "lower_ci_low,lower_ci_high,upper_ci_low,upper_ci_high,"
         "lower_covered,upper_covered\n";
  for (const auto& row : report.rows) {
    const auto& truth = report.truths[row.spec_index];
    out << cfg.spec_names[row.spec_index] << ',' << row.n << ',' << row.rep
        << ',' << (row.ok ? 1 : 0) << ','
        << format_double(truth.pns_bounds_true.lower) << ','
        << format_double(truth.pns_bounds_true.upper) << ',';
    if (row.ok) {
      out << format_double(row.lower_est) << ','
          << format_double(row.upper_est) << ','
          << format_double(row.lower_err) << ','
          << format_double(row.upper_err) << ',' << row.lower_method << ','
          << row.upper_method << ',';
      auto ci_field = [&](const std::string& method, double v) {
        return method != "none" ? format_double(v) : std::string();
      };
      out << ci_field(row.lower_method, row.lower_ci_low) << ','
          << ci_field(row.lower_method, row.lower_ci_high) << ','
          << ci_field(row.upper_method, row.upper_ci_low) << ','
          << ci_field(row.upper_method, row.upper_ci_high) << ','
          << (row.lower_covered ? 1 : 0) << ','
          << (row.upper_covered ? 1 : 0) << '\n';
    } else {
      out << ",,,,none,none,,,,,0,0\n";
    }
  }
}

inline void write_curve_csv(std::ostream& out,
                            const std::vector<CurveRow>& rows) {
  out << "spec,n,valid,flagged,mean_err_lower,mean_err_upper,"
         "mean_abs_err_lower,mean_abs_err_upper\n";
  for (const auto& row : rows) {
    out << row.label << ',' << row.n << ',' << row.valid << ','
        << row.flagged << ',' << format_double(row.mean_err_lower) << ','
        << format_double(row.mean_err_upper) << ','
        << format_double(row.mean_abs_err_lower) << ','
        << format_double(row.mean_abs_err_upper) << '\n';
  }
}

struct ReproduceResult {
  std::vector<std::string> files;
  nlohmann::json summary;
};

namespace detail {

inline void write_text_file(const std::string& path,
                            const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write output file '" + path + "'");
  out << body;
}

/// Smallest grid n at which both endpoint mean |errors| are at or below
/// the threshold; 0 when the curve never crosses.
inline std::int64_t crossing_n(const std::vector<CurveRow>& rows,
                               const std::string& label, double threshold) {
  std::int64_t best = 0;
  for (const auto& row : rows) {
    if (row.label != label) continue;
    if (row.mean_abs_err_lower <= threshold &&
        row.mean_abs_err_upper <= threshold) {
      if (best == 0 || row.n < best) best = row.n;
    }
  }
  return best;
}

}  // namespace detail

/// End-to-end reproduction of the built-in simulation study.
///
/// Writes, under out_dir:
///   scatter_model1.csv / scatter_model2.csv   (sizes 120/481/1921, R=1000)
///   curve_model1.csv / curve_model2.csv       (grid 100..1000 step 100)
///   curve_random20.csv                        (20 random specs, pooled)
///   sample_size.csv                           (plan vs benchmark)
///   summary.json                              (aggregates and pass flags)
/// plus manifest.json; a failing sub-step still writes the manifest with
/// the files completed so far before rethrowing.
inline ReproduceResult reproduce_study(const std::string& out_dir,
                                       std::uint64_t master_seed,
                                       int replications = 1000) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  ReproduceResult result;
  auto emit = [&](const std::string& name, const std::string& body) {
    detail::write_text_file((fs::path(out_dir) / name).string(), body);
    result.files.push_back(name);
  };
  auto write_manifest = [&](const std::string& status,
                            const std::string& error_msg) {
    nlohmann::json manifest;
    manifest["status"] = status;
    manifest["seed"] = master_seed;
    manifest["files"] = result.files;
    if (!error_msg.empty()) manifest["error"] = error_msg;
    detail::write_text_file((fs::path(out_dir) / "manifest.json").string(),
                            manifest.dump(2) + "\n");
  };

  try {
    nlohmann::json summary;

    // Sample-size table: the closed-form plan against the published
    // benchmark requirement.
    SampleSizePlan plan = worst_case_plan(0.05, 0.05, 1.0);
    std::int64_t base = detail::ceil_to_count(plan_base_factor(0.05, 0.05));
    std::int64_t benchmark = benchmark_plan_size(0.05, 0.05);
    double fraction = static_cast<double>(plan.m) /
                      static_cast<double>(benchmark);
    {
      std::ostringstream csv;
      csv << "epsilon,alpha,ratio,m,n,base_factor,benchmark_m,fraction\n";
      csv << format_double(plan.epsilon) << ',' << format_double(plan.alpha)
          << ',' << format_double(plan.ratio) << ',' << plan.m << ','
          << plan.n << ',' << base << ',' << benchmark << ','
          << format_double(fraction) << '\n';
      emit("sample_size.csv", csv.str());
    }
    summary["plan"] = {{"m", plan.m},
                       {"n", plan.n},
                       {"base_factor", base},
                       {"benchmark_m", benchmark},
                       {"fraction", fraction},
                       {"pass", plan.m == 1921 && plan.n == 1921 &&
                                    base == 1537 && fraction <= 0.32}};

    // Scatter runs at the three study sizes, with CIs.
    ReplicationConfig scatter_cfg;
    scatter_cfg.specs = {builtin_model_by_name("model1"),
                         builtin_model_by_name("model2")};
    scatter_cfg.spec_names = {"model1", "model2"};
    scatter_cfg.sizes = {120, 481, 1921};
    scatter_cfg.replications = replications;
    scatter_cfg.master_seed = derive_seed(master_seed, 1);
    ReplicationReport scatter = run_replications(scatter_cfg);
    for (std::size_t i = 0; i < scatter_cfg.specs.size(); ++i) {
      ReplicationConfig one = scatter_cfg;
      one.specs = {scatter_cfg.specs[i]};
      one.spec_names = {scatter_cfg.spec_names[i]};
      ReplicationReport sub;
      sub.truths = {scatter.truths[i]};
      for (const auto& row : scatter.rows) {
        if (row.spec_index != i) continue;
        ReplicationRow copy = row;
        copy.spec_index = 0;
        sub.rows.push_back(std::move(copy));
      }
      std::ostringstream csv;
      write_scatter_csv(csv, one, sub);
      emit("scatter_" + scatter_cfg.spec_names[i] + ".csv", csv.str());
    }

    nlohmann::json stability;
    nlohmann::json coverage;
    bool stability_pass = true;
    for (const auto& cell : scatter.cells) {
      if (cell.n != 1921) continue;
      const std::string& name = scatter_cfg.spec_names[cell.spec_index];
      bool pass = cell.mean_abs_err_lower <= 0.05 &&
                  cell.mean_abs_err_upper <= 0.05 &&
                  cell.frac_small_err_lower >= 0.90 &&
                  cell.frac_small_err_upper >= 0.90;
      stability_pass = stability_pass && pass;
      stability[name] = {{"mean_abs_err_lower", cell.mean_abs_err_lower},
                         {"mean_abs_err_upper", cell.mean_abs_err_upper},
                         {"frac_small_err_lower", cell.frac_small_err_lower},
                         {"frac_small_err_upper", cell.frac_small_err_upper},
                         {"flagged", cell.flagged},
                         {"pass", pass}};
      coverage[name] = {{"lower", cell.coverage_lower},
                        {"upper", cell.coverage_upper},
                        {"smooth_lower", cell.smooth_lower},
                        {"numdelta_lower", cell.numdelta_lower},
                        {"smooth_upper", cell.smooth_upper},
                        {"numdelta_upper", cell.numdelta_upper}};
    }
    stability["pass"] = stability_pass;
    summary["stability"] = stability;
    summary["coverage_n1921"] = coverage;

    // Error curves over the size grid for both built-in models.
    std::vector<std::int64_t> grid;
    for (std::int64_t n = 100; n <= 1000; n += 100) grid.push_back(n);
    ReplicationConfig curve_cfg = scatter_cfg;
    curve_cfg.sizes = grid;
    curve_cfg.master_seed = derive_seed(master_seed, 2);
    std::vector<CurveRow> curves = error_curve(curve_cfg);
    for (const auto& name : curve_cfg.spec_names) {
      std::vector<CurveRow> own;
      for (const auto& row : curves) {
        if (row.label == name) own.push_back(row);
      }
      std::ostringstream csv;
      write_curve_csv(csv, own);
      emit("curve_" + name + ".csv", csv.str());
    }

    // The 20-random-model protocol, pooled pointwise over the same grid.
    ReplicationConfig random_cfg;
    random_cfg.sizes = grid;
    random_cfg.replications = replications;
    random_cfg.master_seed = derive_seed(master_seed, 3);
    for (int i = 0; i < 20; ++i) {
      random_cfg.specs.push_back(
          random_spec(derive_seed(master_seed, 4, static_cast<std::uint64_t>(
                                                      i))));
      random_cfg.spec_names.push_back("random" + std::to_string(i));
    }
    std::vector<CurveRow> random_curves = error_curve(random_cfg);
    std::vector<CurveRow> pooled = pool_curve(random_curves, "random20");
    {
      std::ostringstream csv;
      write_curve_csv(csv, pooled);
      emit("curve_random20.csv", csv.str());
    }

    std::int64_t cross1 = detail::crossing_n(curves, "model1", 0.05);
    std::int64_t cross2 = detail::crossing_n(curves, "model2", 0.05);
    std::int64_t cross_pooled = detail::crossing_n(pooled, "random20", 0.05);
    bool curve_pass = cross1 > 0 && cross1 <= 500 && cross2 > 0 &&
                      cross2 <= 500 && cross_pooled > 0 &&
                      cross_pooled <= 500;
    summary["curves"] = {{"model1_crossing_n", cross1},
                         {"model2_crossing_n", cross2},
                         {"random20_crossing_n", cross_pooled},
                         {"pass", curve_pass}};

    summary["seed"] = master_seed;
    summary["replications"] = replications;
    emit("summary.json", summary.dump(2) + "\n");
    result.summary = std::move(summary);
    write_manifest("complete", "");
  } catch (const std::exception& e) {
    write_manifest("failed", e.what());
    throw;
  }
  return result;
}

}  // namespace pocbounds
