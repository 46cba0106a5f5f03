// Command-line front end: bound evaluation, confidence intervals, sample
// size planning, replication studies, and exact population enumeration.
//
// Exit codes: 0 success, 2 invalid input, 3 numerical degeneracy.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pocbounds/pocbounds.hpp"

namespace {

using pocbounds::Json;

struct GlobalArgs {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  std::string format = "json";
};

void emit(const GlobalArgs& g, const std::string& body) {
  if (g.out.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream f(g.out, std::ios::binary);
  if (!f) {
    throw pocbounds::ValidationError("cannot write output file '" + g.out +
                                     "'");
  }
  f << body;
}

Json parse_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) {
    throw pocbounds::ValidationError("cannot open " + what + " file '" +
                                     path + "'");
  }
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw pocbounds::ValidationError("malformed JSON in " + what + " file '" +
                                     path + "': " + e.what());
  }
}

pocbounds::Theta theta_from_values(const std::vector<double>& vals) {
  if (vals.size() != 6) {
    throw pocbounds::ValidationError(
        "theta needs exactly 6 values in the order P(y_x), P(y_x'), "
        "P(x,y), P(x,y'), P(x',y), P(x',y')");
  }
  return pocbounds::Theta::standard(vals[0], vals[1], vals[2], vals[3],
                                    vals[4], vals[5]);
}

pocbounds::Theta theta_from_file(const std::string& path) {
  Json doc = parse_json_file(path, "theta");
  if (doc.is_array()) {
    return theta_from_values(doc.get<std::vector<double>>());
  }
  if (doc.is_object()) {
    std::vector<double> vals;
    for (const auto& symbol : pocbounds::ThetaLayout::standard_poc()
                                  .symbols()) {
      if (!doc.contains(symbol)) {
        throw pocbounds::ValidationError("theta file is missing component '" +
                                         symbol + "'");
      }
      vals.push_back(doc.at(symbol).get<double>());
    }
    return theta_from_values(vals);
  }
  throw pocbounds::ValidationError(
      "theta file must hold a 6-element array or an object keyed by the "
      "standard component names");
}

pocbounds::Theta resolve_theta(const std::vector<double>& flag_values,
                               const std::string& file) {
  if (!flag_values.empty() && !file.empty()) {
    throw pocbounds::ValidationError(
        "pass either --theta or --theta-file, not both");
  }
  if (!flag_values.empty()) return theta_from_values(flag_values);
  if (!file.empty()) return theta_from_file(file);
  throw pocbounds::ValidationError("one of --theta or --theta-file is "
                                   "required");
}

std::string join_indices(const std::vector<std::size_t>& idx) {
  std::ostringstream out;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) out << ';';
    out << idx[i];
  }
  return out.str();
}

std::vector<double> to_std_vector(const pocbounds::Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// ---------------------------------------------------------------- bounds

struct BoundsArgs {
  std::string quantity = "pns";
  std::vector<double> theta;
  std::string theta_file;
};

void run_bounds(const GlobalArgs& g, const BoundsArgs& a) {
  pocbounds::Theta theta = resolve_theta(a.theta, a.theta_file);
  // The sharp-bound formulas are meaningful only for pairs of
  // experimental and observational distributions that a single causal
  // model can generate; reject anything else as a domain error.
  theta.require_consistent();
  pocbounds::AffineBoundForm form = pocbounds::build_form(a.quantity);
  pocbounds::BoundPair bp = form.evaluate(theta);
  pocbounds::ActiveSetReport act = form.active_sets(theta);
  if (g.format == "csv") {
    std::ostringstream csv;
    csv << "quantity,lower,upper,lower_active,upper_active,lower_gap,"
           "upper_gap\n";
    csv << a.quantity << ',' << pocbounds::format_double(bp.lower) << ','
        << pocbounds::format_double(bp.upper) << ','
        << join_indices(act.lower_active) << ','
        << join_indices(act.upper_active) << ','
        << pocbounds::format_double(act.lower_gap) << ','
        << pocbounds::format_double(act.upper_gap) << '\n';
    emit(g, csv.str());
    return;
  }
  Json doc;
  doc["quantity"] = a.quantity;
  doc["theta"] = to_std_vector(theta.values());
  doc["lower"] = bp.lower;
  doc["upper"] = bp.upper;
  doc["lower_active"] = act.lower_active;
  doc["upper_active"] = act.upper_active;
  doc["lower_gap"] = act.lower_gap;
  doc["upper_gap"] = act.upper_gap;
  doc["lower_term_values"] =
      form.term_values(pocbounds::Endpoint::kLower, theta.values());
  doc["upper_term_values"] =
      form.term_values(pocbounds::Endpoint::kUpper, theta.values());
  emit(g, doc.dump(2) + "\n");
}

// -------------------------------------------------------------------- ci

struct CiArgs {
  std::string quantity = "pns";
  std::string method = "auto";
  double alpha = 0.05;
  int B = 1000;
  double epsilon_n = 0.0;
  std::int64_t m11 = 0, m10 = 0, m01 = 0, m00 = 0;
  std::int64_t n11 = 0, n10 = 0, n01 = 0, n00 = 0;
};

pocbounds::IntervalEstimate one_ci(const pocbounds::AffineBoundForm& form,
                                   pocbounds::Endpoint e, const CiArgs& a,
                                   const pocbounds::ThetaEstimate& est,
                                   const pocbounds::CovarianceEstimate& cov,
                                   std::uint64_t seed) {
  auto numdelta = [&]() {
    pocbounds::NumericalDeltaConfig cfg;
    cfg.alpha = a.alpha;
    cfg.B = a.B;
    cfg.epsilon_n = a.epsilon_n;
    cfg.seed = seed;
    return pocbounds::numerical_delta_ci(form, e, est.theta(), cov, cfg)
        .estimate;
  };
  if (a.method == "smooth") {
    return pocbounds::smooth_ci(form, e, est.theta(), cov, a.alpha);
  }
  if (a.method == "numdelta") return numdelta();
  if (a.method != "auto") {
    throw pocbounds::ValidationError(
        "unknown method '" + a.method + "' (expected smooth, numdelta, or "
        "auto)");
  }
  if (pocbounds::select_method(form, e, est.theta(), cov, a.alpha) ==
      pocbounds::CiMethod::kSmooth) {
    try {
      return pocbounds::smooth_ci(form, e, est.theta(), cov, a.alpha);
    } catch (const pocbounds::NonSmoothEndpointError&) {
      // Exact tie at the estimate: fall through to the simulation interval.
    }
  }
  return numdelta();
}

void run_ci(const GlobalArgs& g, const CiArgs& a) {
  pocbounds::SampleCounts counts{a.m11, a.m10, a.m01, a.m00,
                                 a.n11, a.n10, a.n01, a.n00};
  pocbounds::ThetaEstimate est = pocbounds::ThetaEstimate::from_counts(counts);
  pocbounds::CovarianceEstimate cov = pocbounds::estimate_covariance(est);
  pocbounds::AffineBoundForm form = pocbounds::build_form(a.quantity);
  pocbounds::IntervalEstimate lower =
      one_ci(form, pocbounds::Endpoint::kLower, a, est, cov,
             pocbounds::derive_seed(g.seed, 0));
  pocbounds::IntervalEstimate upper =
      one_ci(form, pocbounds::Endpoint::kUpper, a, est, cov,
             pocbounds::derive_seed(g.seed, 1));
  if (g.format == "csv") {
    std::ostringstream csv;
    csv << "endpoint,method,point,se,ci_low,ci_high,alpha,B,epsilon_n,seed\n";
    for (const auto& ci : {lower, upper}) {
      csv << ci.endpoint << ',' << ci.method << ','
          << pocbounds::format_double(ci.point) << ','
          << pocbounds::format_double(ci.se) << ','
          << pocbounds::format_double(ci.ci_low) << ','
          << pocbounds::format_double(ci.ci_high) << ','
          << pocbounds::format_double(ci.alpha) << ',' << ci.B << ','
          << pocbounds::format_double(ci.epsilon_n) << ',' << ci.seed << '\n';
    }
    emit(g, csv.str());
    return;
  }
  Json doc;
  doc["quantity"] = a.quantity;
  doc["theta_hat"] = to_std_vector(est.theta().values());
  doc["lower"] = pocbounds::interval_to_json(lower);
  doc["upper"] = pocbounds::interval_to_json(upper);
  emit(g, doc.dump(2) + "\n");
}

// ------------------------------------------------------------------ plan

struct PlanArgs {
  double epsilon = 0.0;
  double alpha = 0.05;
  double ratio = 1.0;
  std::string method = "worstcase";
  std::string quantity = "pns";
  double arm_fraction = 0.5;
  std::vector<double> theta;
  std::string theta_file;
};

void run_plan(const GlobalArgs& g, const PlanArgs& a) {
  pocbounds::SampleSizePlan plan;
  if (a.method == "worstcase") {
    plan = pocbounds::worst_case_plan(a.epsilon, a.alpha, a.ratio);
  } else if (a.method == "variance") {
    pocbounds::Theta pilot = resolve_theta(a.theta, a.theta_file);
    pocbounds::AffineBoundForm form = pocbounds::build_form(a.quantity);
    pocbounds::CovarianceModel cov_model;
    cov_model.arm_fraction = a.arm_fraction;
    plan = pocbounds::variance_based_plan(form, pilot, cov_model, a.epsilon,
                                          a.alpha, a.ratio);
  } else {
    throw pocbounds::ValidationError("unknown plan method '" + a.method +
                                     "' (expected worstcase or variance)");
  }
  if (g.format == "csv") {
    std::ostringstream csv;
    csv << "method,epsilon,alpha,ratio,m,n,arm_fraction,unit_variance\n";
    csv << plan.method << ',' << pocbounds::format_double(plan.epsilon) << ','
        << pocbounds::format_double(plan.alpha) << ','
        << pocbounds::format_double(plan.ratio) << ',' << plan.m << ','
        << plan.n << ',' << pocbounds::format_double(plan.arm_fraction) << ','
        << pocbounds::format_double(plan.unit_variance) << '\n';
    emit(g, csv.str());
    return;
  }
  Json doc;
  doc["method"] = plan.method;
  doc["epsilon"] = plan.epsilon;
  doc["alpha"] = plan.alpha;
  doc["ratio"] = plan.ratio;
  doc["m"] = plan.m;
  doc["n"] = plan.n;
  doc["arm_fraction"] = plan.arm_fraction;
  doc["unit_variance"] = plan.unit_variance;
  emit(g, doc.dump(2) + "\n");
}

// -------------------------------------------------------------- simulate

pocbounds::ScmSpec spec_from_config_entry(const Json& entry,
                                          std::string* name_out,
                                          int position) {
  if (entry.is_object()) {
    *name_out = "inline" + std::to_string(position);
    return pocbounds::scm_spec_from_json(entry);
  }
  if (!entry.is_string()) {
    throw pocbounds::ValidationError(
        "spec entries must be strings or inline objects");
  }
  std::string s = entry.get<std::string>();
  if (s == "model1" || s == "model2") {
    *name_out = s;
    return pocbounds::builtin_model_by_name(s);
  }
  if (s.rfind("random:", 0) == 0) {
    std::uint64_t seed = 0;
    try {
      seed = std::stoull(s.substr(7));
    } catch (const std::exception&) {
      throw pocbounds::ValidationError("bad random spec entry '" + s +
                                       "' (expected random:<seed>)");
    }
    *name_out = "random" + s.substr(7);
    return pocbounds::random_spec(seed);
  }
  *name_out = std::filesystem::path(s).stem().string();
  return pocbounds::load_scm_spec(s);
}

pocbounds::ReplicationConfig config_from_file(const std::string& path) {
  Json doc = parse_json_file(path, "replication config");
  if (!doc.is_object() || !doc.contains("specs")) {
    throw pocbounds::ValidationError(
        "replication config must be an object with a 'specs' array");
  }
  pocbounds::ReplicationConfig cfg;
  int position = 0;
  for (const auto& entry : doc.at("specs")) {
    std::string name;
    cfg.specs.push_back(spec_from_config_entry(entry, &name, position++));
    cfg.spec_names.push_back(name);
  }
  if (doc.contains("sizes")) {
    cfg.sizes = doc.at("sizes").get<std::vector<std::int64_t>>();
  }
  if (doc.contains("replications")) {
    cfg.replications = doc.at("replications").get<int>();
  }
  if (doc.contains("ratio")) cfg.ratio = doc.at("ratio").get<double>();
  if (doc.contains("alpha")) cfg.alpha = doc.at("alpha").get<double>();
  if (doc.contains("seed")) {
    cfg.master_seed = doc.at("seed").get<std::uint64_t>();
  }
  if (doc.contains("with_ci")) cfg.with_ci = doc.at("with_ci").get<bool>();
  if (doc.contains("out_dir")) {
    cfg.out_dir = doc.at("out_dir").get<std::string>();
  }
  return cfg;
}

void run_simulate(const GlobalArgs& g, const std::string& config_path) {
  pocbounds::ReplicationConfig cfg = config_from_file(config_path);
  if (g.seed_given) cfg.master_seed = g.seed;
  pocbounds::ReplicationReport report = pocbounds::run_replications(cfg);
  if (g.format == "csv") {
    std::ostringstream csv;
    pocbounds::write_scatter_csv(csv, cfg, report);
    if (!cfg.out_dir.empty()) {
      std::filesystem::create_directories(cfg.out_dir);
      std::string path =
          (std::filesystem::path(cfg.out_dir) / "scatter.csv").string();
      std::ofstream f(path, std::ios::binary);
      if (!f) {
        throw pocbounds::ValidationError("cannot write output file '" + path +
                                         "'");
      }
      f << csv.str();
      std::cout << "wrote " << path << "\n";
      return;
    }
    emit(g, csv.str());
    return;
  }
  Json doc;
  doc["seed"] = cfg.master_seed;
  doc["replications"] = cfg.replications;
  Json cells = Json::array();
  for (const auto& cell : report.cells) {
    Json jc;
    jc["spec"] = cfg.spec_names[cell.spec_index];
    jc["n"] = cell.n;
    jc["valid"] = cell.valid;
    jc["flagged"] = cell.flagged;
    jc["mean_err_lower"] = cell.mean_err_lower;
    jc["mean_err_upper"] = cell.mean_err_upper;
    jc["mean_abs_err_lower"] = cell.mean_abs_err_lower;
    jc["mean_abs_err_upper"] = cell.mean_abs_err_upper;
    jc["coverage_lower"] = cell.coverage_lower;
    jc["coverage_upper"] = cell.coverage_upper;
    jc["smooth_lower"] = cell.smooth_lower;
    jc["numdelta_lower"] = cell.numdelta_lower;
    jc["smooth_upper"] = cell.smooth_upper;
    jc["numdelta_upper"] = cell.numdelta_upper;
    cells.push_back(std::move(jc));
  }
  doc["cells"] = std::move(cells);
  Json truths = Json::array();
  for (std::size_t i = 0; i < report.truths.size(); ++i) {
    Json jt;
    jt["spec"] = cfg.spec_names[i];
    jt["pns_true"] = report.truths[i].pns_true;
    jt["lower_true"] = report.truths[i].pns_bounds_true.lower;
    jt["upper_true"] = report.truths[i].pns_bounds_true.upper;
    truths.push_back(std::move(jt));
  }
  doc["truths"] = std::move(truths);
  emit(g, doc.dump(2) + "\n");
}

// ------------------------------------------------------------- reproduce

void run_reproduce(const GlobalArgs& g, int replications) {
  std::string out_dir = g.out.empty() ? "reproduction" : g.out;
  pocbounds::ReproduceResult result =
      pocbounds::reproduce_study(out_dir, g.seed, replications);
  std::cout << result.summary.dump(2) << "\n";
}

// ------------------------------------------------------------- enumerate

Json summary_to_json(const pocbounds::PopulationSummary& pop) {
  Json doc;
  doc["theta_true"] = to_std_vector(pop.theta_true.values());
  doc["layout"] = pop.theta_true.layout().symbols();
  doc["pns_true"] = pop.pns_true;
  doc["pns_lower"] = pop.pns_bounds_true.lower;
  doc["pns_upper"] = pop.pns_bounds_true.upper;
  doc["pn_defined"] = pop.pn_defined;
  if (pop.pn_defined) {
    doc["pn_true"] = pop.pn_true;
    doc["pn_lower"] = pop.pn_bounds_true.lower;
    doc["pn_upper"] = pop.pn_bounds_true.upper;
  }
  doc["ps_defined"] = pop.ps_defined;
  if (pop.ps_defined) {
    doc["ps_true"] = pop.ps_true;
    doc["ps_lower"] = pop.ps_bounds_true.lower;
    doc["ps_upper"] = pop.ps_bounds_true.upper;
  }
  return doc;
}

void run_enumerate(const GlobalArgs& g, const std::string& spec_path,
                   const std::string& model) {
  if (spec_path.empty() == model.empty()) {
    throw pocbounds::ValidationError(
        "pass exactly one of --spec or --model");
  }
  pocbounds::ScmSpec spec = model.empty()
                                ? pocbounds::load_scm_spec(spec_path)
                                : pocbounds::builtin_model_by_name(model);
  pocbounds::PopulationSummary pop = pocbounds::enumerate_population(spec);
  if (g.format == "csv") {
    std::ostringstream csv;
    csv << "component,value\n";
    const auto& symbols = pop.theta_true.layout().symbols();
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      csv << symbols[i] << ','
          << pocbounds::format_double(pop.theta_true[i]) << '\n';
    }
    csv << "pns_true," << pocbounds::format_double(pop.pns_true) << '\n';
    csv << "pns_lower,"
        << pocbounds::format_double(pop.pns_bounds_true.lower) << '\n';
    csv << "pns_upper,"
        << pocbounds::format_double(pop.pns_bounds_true.upper) << '\n';
    if (pop.pn_defined) {
      csv << "pn_true," << pocbounds::format_double(pop.pn_true) << '\n';
      csv << "pn_lower,"
          << pocbounds::format_double(pop.pn_bounds_true.lower) << '\n';
      csv << "pn_upper,"
          << pocbounds::format_double(pop.pn_bounds_true.upper) << '\n';
    }
    if (pop.ps_defined) {
      csv << "ps_true," << pocbounds::format_double(pop.ps_true) << '\n';
      csv << "ps_lower,"
          << pocbounds::format_double(pop.ps_bounds_true.lower) << '\n';
      csv << "ps_upper,"
          << pocbounds::format_double(pop.ps_bounds_true.upper) << '\n';
    }
    emit(g, csv.str());
    return;
  }
  emit(g, summary_to_json(pop).dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Sharp bounds on probabilities of causation: evaluation, confidence "
      "intervals, sample size planning, and simulation studies"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Master random seed");
  app.add_option("--out", g.out,
                 "Output file (or directory for reproduce); default stdout");
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}));

  BoundsArgs bounds_args;
  auto* bounds = app.add_subcommand(
      "bounds", "Evaluate sharp bounds and active sets at a theta");
  bounds->add_option("--quantity", bounds_args.quantity,
                     "Causal quantity: pns, pn, or ps")
      ->check(CLI::IsMember({"pns", "pn", "ps"}));
  bounds->add_option("--theta", bounds_args.theta,
                     "Six comma-separated values: P(y_x), P(y_x'), P(x,y), "
                     "P(x,y'), P(x',y), P(x',y')")
      ->delimiter(',');
  bounds->add_option("--theta-file", bounds_args.theta_file,
                     "JSON file with a 6-array or symbol-keyed object");

  CiArgs ci_args;
  auto* ci = app.add_subcommand(
      "ci", "Confidence intervals for both bound endpoints from counts");
  ci->add_option("--quantity", ci_args.quantity, "pns, pn, or ps")
      ->check(CLI::IsMember({"pns", "pn", "ps"}));
  ci->add_option("--method", ci_args.method,
                 "smooth, numdelta, or auto (near-tie aware)")
      ->check(CLI::IsMember({"smooth", "numdelta", "auto"}));
  ci->add_option("--alpha", ci_args.alpha, "Two-sided level (default 0.05)");
  ci->add_option("--B", ci_args.B, "Perturbation draws for numdelta");
  ci->add_option("--epsilon-n", ci_args.epsilon_n,
                 "Step size for numdelta; 0 selects n^(-1/4)");
  ci->add_option("--m11", ci_args.m11, "Treated arm successes")->required();
  ci->add_option("--m10", ci_args.m10, "Treated arm failures")->required();
  ci->add_option("--m01", ci_args.m01, "Control arm successes")->required();
  ci->add_option("--m00", ci_args.m00, "Control arm failures")->required();
  ci->add_option("--n11", ci_args.n11, "Observational count of (x, y)")
      ->required();
  ci->add_option("--n10", ci_args.n10, "Observational count of (x, y')")
      ->required();
  ci->add_option("--n01", ci_args.n01, "Observational count of (x', y)")
      ->required();
  ci->add_option("--n00", ci_args.n00, "Observational count of (x', y')")
      ->required();

  PlanArgs plan_args;
  auto* plan = app.add_subcommand(
      "plan", "Sample sizes needed for a target margin of error");
  plan->add_option("--epsilon", plan_args.epsilon, "Target margin of error")
      ->required();
  plan->add_option("--alpha", plan_args.alpha, "Two-sided level");
  plan->add_option("--ratio", plan_args.ratio,
                   "Experimental-to-observational ratio r = m/n");
  plan->add_option("--method", plan_args.method, "worstcase or variance")
      ->check(CLI::IsMember({"worstcase", "variance"}));
  plan->add_option("--quantity", plan_args.quantity,
                   "Bound planned for (variance method)")
      ->check(CLI::IsMember({"pns", "pn", "ps"}));
  plan->add_option("--arm-fraction", plan_args.arm_fraction,
                   "Treated fraction of the experimental sample");
  plan->add_option("--theta", plan_args.theta,
                   "Pilot theta for the variance method")
      ->delimiter(',');
  plan->add_option("--theta-file", plan_args.theta_file,
                   "Pilot theta JSON file for the variance method");

  std::string sim_config;
  auto* simulate = app.add_subcommand(
      "simulate", "Run a replication study from a JSON config file");
  simulate->add_option("--config", sim_config, "ReplicationConfig JSON file")
      ->required();

  int reproduce_reps = 1000;
  auto* reproduce = app.add_subcommand(
      "reproduce",
      "Write the full simulation study bundle (scatter and error-curve "
      "CSVs, sample-size table, summary) under --out");
  reproduce->add_option("--replications", reproduce_reps,
                        "Replications per cell (default 1000)");

  std::string enum_spec, enum_model;
  auto* enumerate = app.add_subcommand(
      "enumerate", "Exact population quantities for a model spec");
  enumerate->add_option("--spec", enum_spec, "Model spec JSON file");
  enumerate->add_option("--model", enum_model, "Built-in model name");

  try {
    app.parse(argc, argv);
    g.seed_given = seed_opt->count() > 0;
    if (bounds->parsed()) run_bounds(g, bounds_args);
    if (ci->parsed()) run_ci(g, ci_args);
    if (plan->parsed()) run_plan(g, plan_args);
    if (simulate->parsed()) run_simulate(g, sim_config);
    if (reproduce->parsed()) run_reproduce(g, reproduce_reps);
    if (enumerate->parsed()) run_enumerate(g, enum_spec, enum_model);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const pocbounds::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pocbounds::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
