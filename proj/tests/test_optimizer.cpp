#include <cmath>
#include <memory>
#include <sstream>

#include <gtest/gtest.h>

#include "schedopt/csv.hpp"
#include "schedopt/models.hpp"
#include "schedopt/optimizer.hpp"

using namespace schedopt;

namespace {

LinearGaussianModel static_scalar(double gamma) {
  LinearGaussianModel m;
  m.L = [](double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(1, 1); };
  m.Sigma = [](double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(1, 1); };
  m.H = [](double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Identity(1, 1); };
  m.Gamma = [gamma](double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Constant(1, 1, gamma * gamma); };
  m.m0 = Eigen::VectorXd::Zero(1);
  m.C0 = Eigen::MatrixXd::Identity(1, 1);
  return m;
}

NonlinearProblem uninformative_problem() {
  LogisticParams p;
  const SpaceGrid space(p.x_min, p.x_max, p.n_space);
  ObservationModel flat;
  flat.g = [](const Eigen::VectorXd&, double) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(1, 0.5); };
  flat.gamma = [](double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Constant(1, 1, 0.01); };
  return NonlinearProblem(logistic_signal(p), flat, space, gaussian_density(space, p.x0, 0.0625),
                          NonlinearUtility::kl_final(), TimeGrid(p.t_end, 60));
}

Linear2dParams switching() { return {0.2, 0.5, 1.0, 3.0, 6.0, 600}; }

}  // namespace

TEST(Gradient, LinearGaussianIgnoresSeed) {
  const OedProblem problem(linear2d_problem(switching()));
  const SensorSchedule xi = uniform_schedule(problem.grid());
  EXPECT_EQ(gradient(problem, xi, 1).values, gradient(problem, xi, 2).values);
}

TEST(Gradient, NonlinearSameSeedIsIdentical) {
  const OedProblem problem(logistic_problem(LogisticParams{}));
  const SensorSchedule xi = uniform_schedule(problem.grid());
  EXPECT_EQ(gradient(problem, xi, 4).values, gradient(problem, xi, 4).values);
}

TEST(Gradient, StaticScalarTraceIsNegative) {
  const OedProblem problem(LinearGaussianProblem(static_scalar(0.5), MatrixUtility::TraceFinal(), TimeGrid(3.0, 30)));
  EXPECT_LT(gradient(problem, gaussian_schedule(1.0, 0.5, problem.grid()), 0).values.maxCoeff(), 0.0);
}

TEST(Optimize, ZeroGradientIsAFixedPoint) {
  LinearGaussianModel blind = static_scalar(0.5);
  blind.H = [](double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(1, 1); };
  const OedProblem problem(LinearGaussianProblem(blind, MatrixUtility::TraceFinal(), TimeGrid(3.0, 30)));
  const SensorSchedule xi0 = gaussian_schedule(2.0, 1.0, problem.grid());
  ASSERT_EQ(gradient(problem, xi0, 0).max_abs(), 0.0);
  const OptimizationTrace trace = optimize(problem, xi0, 4, 0.5, 1);
  ASSERT_EQ(trace.records.size(), 4u);
  for (const auto& r : trace.records) EXPECT_EQ(r.schedule.density(), xi0.density());
}

TEST(Optimize, UninformativeObservationsLeaveScheduleUnchanged) {
  const OedProblem problem(uninformative_problem());
  const SensorSchedule xi0 = gaussian_schedule(2.0, 1.0, problem.grid());
  const OptimizationTrace trace = optimize(problem, xi0, 3, 0.5, 1);
  ASSERT_EQ(trace.records.size(), 3u);
  for (const auto& r : trace.records) EXPECT_LE((r.schedule.density() - xi0.density()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Optimize, LinearGaussianDescent) {
  const OedProblem problem(linear2d_problem(switching()));
  const SensorSchedule uniform = uniform_schedule(problem.grid());
  const OptimizationTrace trace = optimize(problem, uniform, 100, 1e-2, 0);
  ASSERT_EQ(trace.records.size(), 100u);
  EXPECT_FALSE(trace.aborted);
  EXPECT_LT(trace.final_objective(), trace.initial_objective);
  double previous = trace.initial_objective;
  for (const auto& r : trace.records) {
    EXPECT_LE(r.objective, previous);
    previous = r.objective;
    EXPECT_NEAR(r.schedule.total_mass(), 1.0, 1e-12);
    EXPECT_GE(r.schedule.density().minCoeff(), 0.0);
  }
}

TEST(Optimize, TracesAreBitIdentical) {
  const OedProblem problem(logistic_problem(LogisticParams{}));
  const SensorSchedule uniform = uniform_schedule(problem.grid());
  const OptimizationTrace a = optimize(problem, uniform, 3, 0.02, 8);
  const OptimizationTrace b = optimize(problem, uniform, 3, 0.02, 8);
  ASSERT_EQ(a.records.size(), b.records.size());
  EXPECT_EQ(a.initial_objective, b.initial_objective);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].schedule.density(), b.records[i].schedule.density());
    EXPECT_EQ(a.records[i].objective, b.records[i].objective);
    EXPECT_EQ(a.records[i].gradient_norm, b.records[i].gradient_norm);
  }
}

TEST(Optimize, LogisticIteratesStayValidAndMoveTowardTheMiddle) {
  const OedProblem problem(logistic_problem(LogisticParams{}));
  const OptimizationTrace trace = optimize(problem, uniform_schedule(problem.grid()), 15, 0.02, 20240601);
  ASSERT_EQ(trace.records.size(), 15u);
  for (const auto& r : trace.records) {
    EXPECT_NEAR(r.schedule.total_mass(), 1.0, 1e-12);
    EXPECT_GE(r.schedule.density().minCoeff(), 0.0);
  }
  EXPECT_NEAR(trace.final_schedule().mean_time(), 3.0, 0.75);
}

TEST(Optimize, RejectsBadArguments) {
  const OedProblem problem(linear2d_problem(switching()));
  const SensorSchedule xi = uniform_schedule(problem.grid());
  EXPECT_THROW(optimize(problem, xi, 1, 0.0, 0), InvalidParameter);
  EXPECT_THROW(optimize(problem, xi, -1, 0.1, 0), InvalidParameter);
  EXPECT_THROW(optimize(problem, uniform_schedule(TimeGrid(6.0, 60)), 1, 0.1, 0), GridMismatch);
}

TEST(Optimize, AbortsWithPartialTraceOnBlowup) {
  LogisticParams p;
  const SpaceGrid space(p.x_min, p.x_max, p.n_space);
  SignalModel runaway = logistic_signal(p);
  // States start far off the filter grid; after the evaluation set and one gradient have been
  // simulated, the drift there turns non-finite.
  auto calls = std::make_shared<int>(0);
  runaway.drift = [calls](const Eigen::VectorXd& x, double) -> Eigen::VectorXd {
    if (std::abs(x[0]) < 100.0) return Eigen::VectorXd::Zero(1);
    return Eigen::VectorXd::Constant(1, ++*calls > 120 ? NAN : 0.0);
  };
  runaway.initial_sampler = [](std::uint64_t) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(1, 1e3); };
  const OedProblem problem(NonlinearProblem(runaway, logistic_observation(p), space,
                                            gaussian_density(space, p.x0, 0.0625), NonlinearUtility::kl_final(),
                                            TimeGrid(p.t_end, 60)));
  OptimizerOptions options;
  options.evaluation_replicates = 1;
  const OptimizationTrace trace = optimize(problem, uniform_schedule(problem.grid()), 5, 0.02, 0, options);
  EXPECT_TRUE(trace.aborted);
  EXPECT_EQ(trace.records.size(), 1u);
  EXPECT_NE(trace.abort_reason.find("iteration 2"), std::string::npos);
}

TEST(FiniteDifference, MatchesAdjointOnLinearGaussian) {
  const OedProblem problem(linear2d_problem(switching()));
  const SensorSchedule xi = uniform_schedule(problem.grid());
  const GradientField adj = gradient(problem, xi, 0).tangent();
  const GradientField fd = finite_difference_gradient(problem, xi, 1e-5, 0);
  for (int k = 0; k < adj.values.size(); ++k) {
    if (std::abs(adj.values[k]) < 0.1 * adj.max_abs()) continue;
    EXPECT_NEAR(fd.values[k], adj.values[k], 1e-3 * std::abs(adj.values[k])) << "cell " << k;
  }
}

TEST(FiniteDifference, SecondOrderInStep) {
  Linear2dParams p = switching();
  p.n_steps = 40;
  const OedProblem problem(linear2d_problem(p));
  const SensorSchedule xi = gaussian_schedule(2.0, 1.5, problem.grid());
  // Steps stay below every cell mass so the re-projection is linear.
  const std::vector<int> cells{5, 12, 20};
  const GradientField fine = finite_difference_gradient(problem, xi, 1e-5, 0, NoiseCoupling::kBrownian, cells);
  const GradientField h1 = finite_difference_gradient(problem, xi, 4e-3, 0, NoiseCoupling::kBrownian, cells);
  const GradientField h2 = finite_difference_gradient(problem, xi, 2e-3, 0, NoiseCoupling::kBrownian, cells);
  for (int k : cells) {
    const double e1 = std::abs(h1.values[k] - fine.values[k]);
    const double e2 = std::abs(h2.values[k] - fine.values[k]);
    EXPECT_NEAR(e1 / e2, 4.0, 0.4) << "cell " << k;
  }
  EXPECT_TRUE(std::isnan(fine.values[0]));
}

TEST(Tables, ObjectiveAndScheduleMatrixRoundTrip) {
  const OedProblem problem(linear2d_problem(switching()));
  const OptimizationTrace trace = optimize(problem, uniform_schedule(problem.grid()), 3, 1e-2, 0);
  for (const csv::Table& ref : {objective_table(trace), schedule_matrix_table(trace)}) {
    std::stringstream ss;
    csv::write(ss, ref);
    const csv::Table back = csv::read(ss);
    EXPECT_EQ(back.header, ref.header);
    ASSERT_EQ(back.columns.size(), ref.columns.size());
    for (std::size_t c = 0; c < ref.columns.size(); ++c) {
      for (std::size_t r = 0; r < ref.columns[c].size(); ++r) {
        if (std::isnan(ref.columns[c][r])) {
          EXPECT_TRUE(std::isnan(back.columns[c][r]));
        } else {
          EXPECT_EQ(back.columns[c][r], ref.columns[c][r]);
        }
      }
    }
  }
  EXPECT_EQ(objective_table(trace).columns[0].size(), 4u);
}
