#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "robust_mimo/bench.hpp"

using namespace robust_mimo;
using namespace robust_mimo::bench;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::string drop_column(const std::string& line, int column) {
  std::string out;
  std::istringstream in(line);
  std::string cell;
  int k = 0;
  while (std::getline(in, cell, ',')) {
    if (k++ == column) continue;
    if (!out.empty()) out += ",";
    out += cell;
  }
  return out;
}

}  // namespace

TEST(GenerateChannel, DeterministicForSeed) {
  EXPECT_EQ((generate_channel(3, 2, 5) - generate_channel(3, 2, 5)).norm(), 0.0);
  EXPECT_GT((generate_channel(3, 2, 5) - generate_channel(3, 2, 6)).norm(), 0.0);
  const ComplexMatrix one = generate_channel(1, 1, 9);
  EXPECT_EQ(one.rows(), 1);
  EXPECT_EQ(one.cols(), 1);
  EXPECT_THROW(generate_channel(0, 1, 1), PreconditionError);
}

TEST(GenerateChannel, UnitVarianceEntries) {
  const ComplexMatrix A = generate_channel(100, 1000, 123);
  const double mean_power = A.squaredNorm() / static_cast<double>(A.size());
  EXPECT_GE(mean_power, 0.99);
  EXPECT_LE(mean_power, 1.01);
  EXPECT_NEAR(A.real().squaredNorm() / static_cast<double>(A.size()), 0.5, 0.01);
}

TEST(BenchConfig, ParsesAndRoundTrips) {
  const BenchConfig cfg = parse_config(
      "# comment\n"
      "dims = 2, 4\n"
      "power_dbw = 0,20.5\n"
      "rho = 0.01 , 0.03\n"
      "trials = 7\n"
      "seed = 99\n"
      "methods = robust_optimal, nonrobust\n"
      "noise_var = 0.5\n");
  EXPECT_EQ(cfg.dims, (std::vector<int>{2, 4}));
  EXPECT_EQ(cfg.power_dbw, (std::vector<double>{0.0, 20.5}));
  EXPECT_EQ(cfg.rho, (std::vector<double>{0.01, 0.03}));
  EXPECT_EQ(cfg.trials, 7);
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.methods, (std::vector<Method>{Method::robust_optimal, Method::nonrobust}));
  EXPECT_EQ(cfg.noise_var, 0.5);
  const BenchConfig again = parse_config(format_config(cfg));
  EXPECT_EQ(format_config(again), format_config(cfg));
  EXPECT_EQ(again.rho, cfg.rho);
}

TEST(BenchConfig, DefaultsAndErrors) {
  const BenchConfig cfg = parse_config("");
  EXPECT_EQ(cfg.trials, 100);
  EXPECT_EQ(cfg.noise_var, 1.0);
  EXPECT_THROW(parse_config("rho = 1.0\n"), PreconditionError);
  EXPECT_THROW(parse_config("trials = 0\n"), PreconditionError);
  EXPECT_THROW(parse_config("colour = red\n"), PreconditionError);
  EXPECT_THROW(parse_config("dims 2\n"), PreconditionError);
  EXPECT_THROW(parse_config("dims = two\n"), PreconditionError);
  EXPECT_THROW(parse_config("methods = robust_optimal, magic\n"), PreconditionError);
  EXPECT_THROW(load_config("/nonexistent/bench.cfg"), PreconditionError);
}

TEST(DbwConversion, TenLogTen) {
  EXPECT_NEAR(dbw_to_linear(20.0), 100.0, 1e-12);
  EXPECT_NEAR(dbw_to_linear(0.0), 1.0, 1e-15);
}

TEST(RunExperiment, RowCountHeaderAndOrder) {
  BenchConfig cfg;
  cfg.dims = {2};
  cfg.power_dbw = {20.0};
  cfg.rho = {0.01};
  cfg.trials = 3;
  std::ostringstream rows, summary;
  const auto records = run_experiment(cfg, &rows, &summary);
  ASSERT_EQ(records.size(), 15u);
  const auto row_lines = lines_of(rows.str());
  ASSERT_EQ(row_lines.size(), 16u);
  EXPECT_EQ(row_lines[0], kRowsHeader);
  const auto summary_lines = lines_of(summary.str());
  ASSERT_EQ(summary_lines.size(), 6u);
  EXPECT_EQ(summary_lines[0], kSummaryHeader);
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].trial, static_cast<int>(i / 5));
    EXPECT_EQ(records[i].method, cfg.methods[i % 5]);
    EXPECT_TRUE(records[i].usable()) << records[i].status;
    EXPECT_GE(records[i].worst_case_mse, records[i].nominal_mse - 1e-9);
  }
}

TEST(RunExperiment, ZeroRhoRobustEqualsNonrobust) {
  BenchConfig cfg;
  cfg.rho = {0.0};
  cfg.trials = 5;
  cfg.methods = {Method::robust_optimal, Method::nonrobust};
  const auto records = run_experiment(cfg);
  for (std::size_t i = 0; i < records.size(); i += 2) {
    EXPECT_NEAR(records[i].worst_case_mse, records[i + 1].worst_case_mse, 1e-6);
  }
}

TEST(RunExperiment, MeanWorstCaseGrowsWithRho) {
  BenchConfig cfg;
  cfg.rho = {0.0, 0.01, 0.02, 0.04};
  cfg.trials = 8;
  cfg.methods = {Method::robust_optimal, Method::alternating_II, Method::nonrobust};
  const auto records = run_experiment(cfg);
  const auto cells = summarize(cfg, records);
  ASSERT_EQ(cells.size(), 12u);
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t r = 1; r < 4; ++r) {
      EXPECT_GE(cells[r * 3 + m].mean_worst_case_mse, cells[(r - 1) * 3 + m].mean_worst_case_mse - 1e-9)
          << to_string(cells[r * 3 + m].method);
    }
  }
}

TEST(RunExperiment, DeterministicApartFromWallTime) {
  BenchConfig cfg;
  cfg.dims = {2, 3};
  cfg.trials = 2;
  std::ostringstream a, b;
  run_experiment(cfg, &a);
  run_experiment(cfg, &b);
  const auto la = lines_of(a.str());
  const auto lb = lines_of(b.str());
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) EXPECT_EQ(drop_column(la[i], 9), drop_column(lb[i], 9));
}

TEST(RunExperiment, FailuresAreRecordedNotThrown) {
  TrialRecord rec;
  BenchConfig cfg;
  // More streams than the channel rank.
  const DesignProblem p{ComplexMatrix::Identity(2, 2) * 0.0, 0.1, 1.0, 1.0, 1};
  run_method(p, Method::robust_optimal, cfg, {}, rec);
  EXPECT_EQ(rec.status, "precondition_failure");
  EXPECT_TRUE(std::isnan(rec.worst_case_mse));
  EXPECT_NE(format_row(rec).find(",nan,nan,"), std::string::npos);
}
