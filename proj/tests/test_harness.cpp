#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pocbounds/builtin_models.hpp"
#include "pocbounds/harness.hpp"
#include "pocbounds/rng.hpp"

namespace {

using namespace pocbounds;
namespace fs = std::filesystem;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_or_nan(const std::string& field) {
  if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::strtod(field.c_str(), nullptr);
}

ReplicationConfig small_config() {
  ReplicationConfig cfg;
  cfg.specs = {builtin_model1()};
  cfg.spec_names = {"model1"};
  cfg.sizes = {120};
  cfg.replications = 50;
  cfg.master_seed = 7;
  return cfg;
}

TEST_CASE("doubles are formatted losslessly") {
  for (double x : {0.1, 1.0 / 3.0, 0.2584433889268452, -1.5, 0.0, 1e-17,
                   6.02214076e23, 1e300}) {
    std::string text = format_double(x);
    REQUIRE(std::strtod(text.c_str(), nullptr) == x);
  }
  REQUIRE(format_double(0.5) == "0.5");
  REQUIRE(format_double(0.0) == "0");
}

TEST_CASE("replication config validation") {
  ReplicationConfig cfg = small_config();
  REQUIRE_NOTHROW(cfg.validate());

  ReplicationConfig no_specs = cfg;
  no_specs.specs.clear();
  no_specs.spec_names.clear();
  REQUIRE_THROWS_AS(no_specs.validate(), ValidationError);

  ReplicationConfig mismatched = cfg;
  mismatched.spec_names.push_back("extra");
  REQUIRE_THROWS_AS(mismatched.validate(), ValidationError);

  ReplicationConfig zero_reps = cfg;
  zero_reps.replications = 0;
  REQUIRE_THROWS_AS(zero_reps.validate(), ValidationError);

  ReplicationConfig no_sizes = cfg;
  no_sizes.sizes.clear();
  REQUIRE_THROWS_AS(no_sizes.validate(), ValidationError);

  ReplicationConfig bad_size = cfg;
  bad_size.sizes = {0};
  REQUIRE_THROWS_AS(bad_size.validate(), ValidationError);

  ReplicationConfig bad_ratio = cfg;
  bad_ratio.ratio = 0.0;
  REQUIRE_THROWS_AS(bad_ratio.validate(), ValidationError);

  ReplicationConfig bad_alpha = cfg;
  bad_alpha.alpha = 1.0;
  REQUIRE_THROWS_AS(bad_alpha.validate(), ValidationError);

  ReplicationConfig bad_b = cfg;
  bad_b.numdelta_B = 1;
  REQUIRE_THROWS_AS(bad_b.validate(), ValidationError);
}

TEST_CASE("single replication produces one coherent row") {
  ReplicationConfig cfg = small_config();
  cfg.replications = 1;
  ReplicationReport report = run_replications(cfg);
  REQUIRE(report.truths.size() == 1);
  REQUIRE(report.rows.size() == 1);
  REQUIRE(report.cells.size() == 1);

  const ReplicationRow& row = report.rows[0];
  REQUIRE(row.ok);
  REQUIRE(row.spec_index == 0);
  REQUIRE(row.n == 120);
  const auto& truth = report.truths[0].pns_bounds_true;
  REQUIRE(row.lower_err == row.lower_est - truth.lower);
  REQUIRE(row.upper_err == row.upper_est - truth.upper);
  REQUIRE(row.lower_method != "none");
  REQUIRE(row.lower_ci_low <= row.lower_est);
  REQUIRE(row.upper_ci_high >= row.upper_est);

  const CellAggregate& cell = report.cells[0];
  REQUIRE(cell.valid == 1);
  REQUIRE(cell.flagged == 0);
  REQUIRE(cell.mean_err_lower == row.lower_err);
  REQUIRE(cell.frac_small_err_lower ==
          (std::abs(row.lower_err) <= cfg.error_threshold ? 1.0 : 0.0));
}

TEST_CASE("replication runs are deterministic in the master seed") {
  ReplicationConfig cfg = small_config();
  cfg.replications = 10;
  ReplicationReport a = run_replications(cfg);
  ReplicationReport b = run_replications(cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    REQUIRE(a.rows[i].lower_est == b.rows[i].lower_est);
    REQUIRE(a.rows[i].upper_est == b.rows[i].upper_est);
    REQUIRE(a.rows[i].lower_ci_low == b.rows[i].lower_ci_low);
    REQUIRE(a.rows[i].upper_ci_high == b.rows[i].upper_ci_high);
    REQUIRE(a.rows[i].lower_method == b.rows[i].lower_method);
  }

  ReplicationConfig other = cfg;
  other.master_seed = 8;
  ReplicationReport c = run_replications(other);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    any_diff = any_diff || a.rows[i].lower_est != c.rows[i].lower_est;
  }
  REQUIRE(any_diff);
}

TEST_CASE("extending the study leaves existing cells untouched") {
  // Per-cell child seeds depend only on (master, spec, n, rep), so growing
  // the size grid or the spec list must reproduce the old cells bit for
  // bit.
  ReplicationConfig base = small_config();
  base.replications = 8;
  base.sizes = {120, 481};
  ReplicationReport before = run_replications(base);

  ReplicationConfig more_sizes = base;
  more_sizes.sizes = {120, 481, 1921};
  ReplicationReport after_sizes = run_replications(more_sizes);

  ReplicationConfig more_specs = base;
  more_specs.specs.push_back(builtin_model2());
  more_specs.spec_names.push_back("model2");
  ReplicationReport after_specs = run_replications(more_specs);

  auto find_row = [](const ReplicationReport& report, std::size_t spec_idx,
                     std::int64_t n, int rep) -> const ReplicationRow& {
    for (const auto& row : report.rows) {
      if (row.spec_index == spec_idx && row.n == n && row.rep == rep) {
        return row;
      }
    }
    FAIL("row not found");
    return report.rows.front();
  };

  for (std::int64_t n : base.sizes) {
    for (int rep = 0; rep < base.replications; ++rep) {
      const auto& orig = find_row(before, 0, n, rep);
      const auto& grown = find_row(after_sizes, 0, n, rep);
      REQUIRE(grown.lower_est == orig.lower_est);
      REQUIRE(grown.upper_est == orig.upper_est);
      REQUIRE(grown.lower_ci_low == orig.lower_ci_low);
      const auto& respecced = find_row(after_specs, 0, n, rep);
      REQUIRE(respecced.lower_est == orig.lower_est);
      REQUIRE(respecced.upper_ci_high == orig.upper_ci_high);
    }
  }
}

TEST_CASE("single-unit experiments are flagged, not dropped") {
  ReplicationConfig cfg = small_config();
  cfg.replications = 20;
  cfg.sizes = {50};
  cfg.ratio = 1e-9;  // m = ceil(1e-9 * 50) = 1: one arm is always empty
  ReplicationReport report = run_replications(cfg);
  REQUIRE(report.rows.size() == 20);
  for (const auto& row : report.rows) {
    REQUIRE_FALSE(row.ok);
    REQUIRE(std::isnan(row.lower_est));
    REQUIRE(row.lower_method == "none");
  }
  REQUIRE(report.cells.size() == 1);
  REQUIRE(report.cells[0].valid == 0);
  REQUIRE(report.cells[0].flagged == 20);
  REQUIRE(report.cells[0].coverage_lower == 0.0);

  std::ostringstream csv;
  write_scatter_csv(csv, cfg, report);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);  // header
  int body_lines = 0;
  while (std::getline(lines, line)) {
    ++body_lines;
    auto fields = split_csv_line(line);
    REQUIRE(fields.size() == 18);
    REQUIRE(fields[3] == "0");        // ok flag
    REQUIRE(fields[6].empty());       // no estimate
    REQUIRE(fields[10] == "none");    // no method
  }
  REQUIRE(body_lines == 20);
}

TEST_CASE("aggregates can be recomputed exactly from the scatter csv") {
  ReplicationConfig cfg = small_config();
  ReplicationReport report = run_replications(cfg);

  std::ostringstream csv;
  write_scatter_csv(csv, cfg, report);

  std::istringstream lines(csv.str());
  std::string header;
  std::getline(lines, header);
  REQUIRE(header ==
          "spec,n,rep,ok,lower_true,upper_true,lower_est,upper_est,"
          "lower_err,upper_err,lower_method,upper_method,"
          "lower_ci_low,lower_ci_high,upper_ci_low,upper_ci_high,"
          "lower_covered,upper_covered");

  std::vector<ReplicationRow> parsed;
  std::string line;
  while (std::getline(lines, line)) {
    auto f = split_csv_line(line);
    REQUIRE(f.size() == 18);
    ReplicationRow row;
    REQUIRE(f[0] == "model1");
    row.spec_index = 0;
    row.n = std::stoll(f[1]);
    row.rep = std::stoi(f[2]);
    row.ok = f[3] == "1";
    row.lower_est = parse_or_nan(f[6]);
    row.upper_est = parse_or_nan(f[7]);
    row.lower_err = parse_or_nan(f[8]);
    row.upper_err = parse_or_nan(f[9]);
    row.lower_method = f[10];
    row.upper_method = f[11];
    row.lower_ci_low = parse_or_nan(f[12]);
    row.lower_ci_high = parse_or_nan(f[13]);
    row.upper_ci_low = parse_or_nan(f[14]);
    row.upper_ci_high = parse_or_nan(f[15]);
    row.lower_covered = f[16] == "1";
    row.upper_covered = f[17] == "1";
    parsed.push_back(std::move(row));
  }
  REQUIRE(parsed.size() == report.rows.size());

  // Re-aggregating the parsed rows reproduces the report's cells bit for
  // bit: the formatting is lossless and the aggregation order matches.
  auto cells = recompute_aggregates(cfg, parsed);
  REQUIRE(cells.size() == report.cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    REQUIRE(cells[i].valid == report.cells[i].valid);
    REQUIRE(cells[i].flagged == report.cells[i].flagged);
    REQUIRE(cells[i].mean_err_lower == report.cells[i].mean_err_lower);
    REQUIRE(cells[i].mean_err_upper == report.cells[i].mean_err_upper);
    REQUIRE(cells[i].mean_abs_err_lower ==
            report.cells[i].mean_abs_err_lower);
    REQUIRE(cells[i].frac_small_err_lower ==
            report.cells[i].frac_small_err_lower);
    REQUIRE(cells[i].smooth_lower == report.cells[i].smooth_lower);
    REQUIRE(cells[i].numdelta_lower == report.cells[i].numdelta_lower);
    REQUIRE(cells[i].no_ci_lower == report.cells[i].no_ci_lower);
    REQUIRE(cells[i].coverage_lower == report.cells[i].coverage_lower);
    REQUIRE(cells[i].coverage_upper == report.cells[i].coverage_upper);
  }
}

TEST_CASE("error curves demand an ascending grid") {
  ReplicationConfig cfg = small_config();
  cfg.replications = 2;
  cfg.sizes = {200, 100};
  REQUIRE_THROWS_AS(error_curve(cfg), ValidationError);

  cfg.sizes = {100, 100};
  REQUIRE_THROWS_AS(error_curve(cfg), ValidationError);

  cfg.sizes = {100, 200};
  auto rows = error_curve(cfg);
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0].label == "model1");
  REQUIRE(rows[0].n == 100);
  REQUIRE(rows[1].n == 200);
  REQUIRE(rows[0].valid + rows[0].flagged == 2);
}

TEST_CASE("pooling curve rows weights by valid replications") {
  CurveRow a;
  a.label = "model1";
  a.n = 100;
  a.valid = 10;
  a.flagged = 1;
  a.mean_err_lower = 0.1;
  a.mean_abs_err_lower = 0.1;
  CurveRow b = a;
  b.label = "model2";
  b.valid = 30;
  b.flagged = 2;
  b.mean_err_lower = 0.3;
  b.mean_abs_err_lower = 0.3;
  CurveRow c;
  c.label = "model2";
  c.n = 200;
  c.valid = 5;
  c.mean_err_lower = -0.4;
  c.mean_abs_err_lower = 0.4;

  auto pooled = pool_curve({a, b, c}, "both");
  REQUIRE(pooled.size() == 2);
  REQUIRE(pooled[0].label == "both");
  REQUIRE(pooled[0].n == 100);
  REQUIRE(pooled[0].valid == 40);
  REQUIRE(pooled[0].flagged == 3);
  REQUIRE(pooled[0].mean_err_lower == Catch::Approx(0.25).margin(1e-15));
  REQUIRE(pooled[0].mean_abs_err_lower == Catch::Approx(0.25).margin(1e-15));
  REQUIRE(pooled[1].n == 200);
  REQUIRE(pooled[1].valid == 5);
  REQUIRE(pooled[1].mean_err_lower == Catch::Approx(-0.4).margin(1e-15));

  // All-flagged inputs pool to an empty cell without dividing by zero.
  CurveRow empty1;
  empty1.label = "x";
  empty1.n = 50;
  CurveRow empty2 = empty1;
  auto degenerate = pool_curve({empty1, empty2}, "x");
  REQUIRE(degenerate.size() == 1);
  REQUIRE(degenerate[0].valid == 0);
  REQUIRE(degenerate[0].mean_err_lower == 0.0);
}

TEST_CASE("curve csv layout is stable") {
  CurveRow row;
  row.label = "model1";
  row.n = 100;
  row.valid = 3;
  row.flagged = 1;
  row.mean_err_lower = 0.5;
  row.mean_err_upper = -0.25;
  row.mean_abs_err_lower = 0.5;
  row.mean_abs_err_upper = 0.25;
  std::ostringstream out;
  write_curve_csv(out, {row});
  REQUIRE(out.str() ==
          "spec,n,valid,flagged,mean_err_lower,mean_err_upper,"
          "mean_abs_err_lower,mean_abs_err_upper\n"
          "model1,100,3,1,0.5,-0.25,0.5,0.25\n");
}

TEST_CASE("crossing detection finds the first adequate grid size") {
  auto make = [](std::int64_t n, double lo, double hi) {
    CurveRow row;
    row.label = "m";
    row.n = n;
    row.mean_abs_err_lower = lo;
    row.mean_abs_err_upper = hi;
    return row;
  };
  std::vector<CurveRow> rows = {make(100, 0.06, 0.03), make(200, 0.04, 0.05),
                                make(300, 0.02, 0.01)};
  REQUIRE(detail::crossing_n(rows, "m", 0.05) == 200);
  REQUIRE(detail::crossing_n(rows, "m", 0.005) == 0);
  REQUIRE(detail::crossing_n(rows, "other", 0.05) == 0);
  // Both endpoints must cross at the same n.
  REQUIRE(detail::crossing_n({make(100, 0.04, 0.06), make(200, 0.06, 0.04)},
                             "m", 0.05) == 0);
}

TEST_CASE("study reproduction writes a complete, repeatable bundle") {
  fs::path dir_a = fs::path("repro_test_a");
  fs::path dir_b = fs::path("repro_test_b");
  fs::path dir_c = fs::path("repro_test_c");
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);

  ReproduceResult first = reproduce_study(dir_a.string(), 42, 3);
  const std::vector<std::string> expected = {
      "sample_size.csv",    "scatter_model1.csv", "scatter_model2.csv",
      "curve_model1.csv",   "curve_model2.csv",   "curve_random20.csv",
      "summary.json"};
  REQUIRE(first.files == expected);
  for (const auto& name : expected) {
    REQUIRE(fs::exists(dir_a / name));
  }

  std::ifstream manifest_in(dir_a / "manifest.json");
  REQUIRE(manifest_in.good());
  nlohmann::json manifest;
  manifest_in >> manifest;
  REQUIRE(manifest.at("status") == "complete");
  REQUIRE(manifest.at("seed") == 42);
  REQUIRE(manifest.at("files").get<std::vector<std::string>>() == expected);

  REQUIRE(first.summary.at("plan").at("pass").get<bool>());
  REQUIRE(first.summary.at("plan").at("m").get<std::int64_t>() == 1921);
  REQUIRE(first.summary.at("replications").get<int>() == 3);

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };

  // A second run with the same seed is byte-identical file by file.
  reproduce_study(dir_b.string(), 42, 3);
  for (const auto& name : expected) {
    REQUIRE(slurp(dir_a / name) == slurp(dir_b / name));
  }

  // A different seed changes the simulated scatter.
  reproduce_study(dir_c.string(), 43, 3);
  REQUIRE(slurp(dir_a / "scatter_model1.csv") !=
          slurp(dir_c / "scatter_model1.csv"));
  // ... but not the deterministic planning table.
  REQUIRE(slurp(dir_a / "sample_size.csv") ==
          slurp(dir_c / "sample_size.csv"));

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);
}

}  // namespace
