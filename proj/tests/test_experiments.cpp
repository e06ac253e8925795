#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "schedopt/experiments.hpp"

using namespace schedopt;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("schedopt_test_" + name);
  fs::remove_all(p);
  return p;
}

json minimal(const std::string& experiment) { return {{"version", 1}, {"experiment", experiment}}; }

}  // namespace

TEST(BudgetAllocation, Examples) {
  EXPECT_EQ(run_budget_allocation(1.0, 2.0), std::make_pair(1.0, 0.0));
  EXPECT_EQ(run_budget_allocation(2.0, 1.0), std::make_pair(0.0, 1.0));
  EXPECT_EQ(run_budget_allocation(1.0, 1.0), std::make_pair(0.5, 0.5));
  EXPECT_THROW(run_budget_allocation(0.0, 1.0), InvalidParameter);
}

TEST(OptimalTau, Examples) {
  EXPECT_NEAR(optimal_tau_dopt(1.0, 1.0 / (1.0 + std::exp(3.0))), 3.0, 1e-12);
  EXPECT_EQ(optimal_tau_dopt(2.7, 0.5), 0.0);
  EXPECT_NEAR(optimal_tau_dopt(2.0, 0.1), 0.5 * optimal_tau_dopt(1.0, 0.1), 1e-15);
  EXPECT_THROW(optimal_tau_dopt(1.0, 1.0), InvalidParameter);
}

TEST(Config, DefaultsAndRoundTrip) {
  ExperimentConfig c = config_from_json(minimal("logistic"));
  EXPECT_EQ(c.iterations(), 15);
  EXPECT_EQ(c.replicates(), 1);
  EXPECT_NEAR(optimal_tau_dopt(c.logistic.x0, c.logistic.z0), 3.0, 1e-12);
  EXPECT_EQ(config_from_json(minimal("linear2d")).iterations(), 100);

  c.seed = 7;
  c.logistic.gamma = 0.3;
  c.compare.schedules = {{1.0, 0.2}, {2.0, 0.4}};
  const ExperimentConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, RejectsUnknownKeysAndVersions) {
  json j = minimal("logistic");
  j["colour"] = 1;
  EXPECT_THROW(config_from_json(j), ConfigurationError);
  j = minimal("logistic");
  j["logistic"] = {{"gama", 0.1}};
  EXPECT_THROW(config_from_json(j), ConfigurationError);
  j = minimal("logistic");
  j["version"] = 2;
  EXPECT_THROW(config_from_json(j), ConfigurationError);
  j.erase("version");
  EXPECT_THROW(config_from_json(j), ConfigurationError);
  EXPECT_THROW(config_from_json(minimal("bogus")), ConfigurationError);
  j = minimal("logistic");
  j["seed"] = "abc";
  EXPECT_THROW(config_from_json(j), ConfigurationError);
}

TEST(Config, LoadsShippedConfigs) {
  for (const auto& name : experiment_names()) {
    const fs::path path = fs::path(SCHEDOPT_SOURCE_DIR) / "configs" / (name + ".json");
    ASSERT_TRUE(fs::exists(path)) << path;
    EXPECT_EQ(load_config(path).experiment, name);
  }
}

TEST(CompareSchedules, DuplicatesScoreIdentically) {
  LogisticParams p;
  const NonlinearProblem problem = logistic_problem(p);
  const SensorSchedule s = gaussian_schedule(3.0, 0.5, problem.grid());
  const auto scores = compare_schedules(problem, {s, s}, 5, 3);
  EXPECT_EQ(scores[0].mean_kl, scores[1].mean_kl);
}

TEST(CompareSchedules, ScheduleNearSensitivityPeakRanksFirst) {
  const NonlinearProblem problem = logistic_problem(LogisticParams{});
  std::vector<SensorSchedule> schedules;
  for (int i = 0; i < 4; ++i) schedules.push_back(gaussian_schedule(1.5 + i, std::sqrt(0.5), problem.grid()));
  const auto scores = compare_schedules(problem, schedules, 50, 20240601);
  // The x-sensitivity t g (1 - g) of the logistic curve peaks a little after tau* = 3.
  EXPECT_EQ(scores[2].rank, 1);
  EXPECT_EQ(scores[0].rank, 4);
}

TEST(CompareSchedules, InformativeTimeBeatsLateTime) {
  const NonlinearProblem problem = logistic_problem(LogisticParams{});
  const auto scores = compare_schedules(
      problem, {gaussian_schedule(3.0, 0.05, problem.grid()), gaussian_schedule(5.9, 0.05, problem.grid())}, 50, 11);
  EXPECT_GT(scores[0].mean_kl, scores[1].mean_kl);
}

TEST(GradientComparison, DominantCells) {
  const TimeGrid g(1.0, 4);
  const GradientField adj(g, Eigen::Vector4d(1.0, -2.0, 0.05, 0.5));
  const GradientField fd(g, Eigen::Vector4d(1.01, -2.0, 1.0, NAN));
  const GradientComparison c = compare_gradients(adj, fd, 0.1);
  EXPECT_EQ(c.dominant_cells, 2);
  EXPECT_NEAR(c.max_relative_error, 0.01, 1e-12);
}

TEST(Experiments, LogisticWithZeroIterationsReportsBaseline) {
  ExperimentConfig c = config_from_json(minimal("logistic"));
  c.output_dir = scratch_dir("logistic0").string();
  c.optimizer.iterations = 0;
  c.optimizer.final_evaluation_seeds = 3;
  const json report = run_experiment(c);
  EXPECT_EQ(report["iterations_completed"], 0);
  EXPECT_EQ(report["mean_kl_uniform"], report["mean_kl_final"]);
  const csv::Table evolution = csv::read_file(fs::path(c.output_dir) / "schedule_evolution.csv");
  EXPECT_EQ(evolution.header.size(), 2u);
  for (const char* f : {"objective.csv", "observations.csv", "posterior.csv", "report.json", "objective.svg",
                        "posterior.svg", "schedule_evolution.svg", "observations.svg"}) {
    EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / f)) << f;
  }
}

TEST(Experiments, Linear2dIsReproducibleAndRoundTrips) {
  ExperimentConfig c = config_from_json(minimal("linear2d"));
  c.optimizer.iterations = 5;
  c.output_dir = scratch_dir("linear2d_a").string();
  const json a = run_experiment(c);
  c.output_dir = scratch_dir("linear2d_b").string();
  const json b = run_experiment(c);
  EXPECT_EQ(a["utility_uniform"], b["utility_uniform"]);
  EXPECT_EQ(a["utility_final"], b["utility_final"]);
  EXPECT_EQ(a["config"]["seed"], c.seed);

  const csv::Table evolution = csv::read_file(fs::path(c.output_dir) / "schedule_evolution.csv");
  const LinearGaussianProblem problem = linear2d_problem(c.linear2d);
  const OptimizationTrace trace = optimize(OedProblem(problem), uniform_schedule(problem.grid()), 5, c.step_size(), c.seed);
  const csv::Table expected = schedule_matrix_table(trace);
  EXPECT_EQ(evolution.header, expected.header);
  EXPECT_EQ(evolution.columns, expected.columns);
}

TEST(Experiments, BudgetAndTauReports) {
  ExperimentConfig c = config_from_json(minimal("budget"));
  c.output_dir = scratch_dir("budget").string();
  json r = run_experiment(c);
  EXPECT_EQ(r["alpha1"], 1.0);
  EXPECT_EQ(r["alpha2"], 0.0);
  c = config_from_json(minimal("tau"));
  c.output_dir = scratch_dir("tau").string();
  r = run_experiment(c);
  EXPECT_NEAR(r["tau"].get<double>(), 3.0, 1e-12);
  std::ifstream is(fs::path(c.output_dir) / "report.json");
  EXPECT_EQ(json::parse(is)["tau"], r["tau"]);
}
