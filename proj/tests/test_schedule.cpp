#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "schedopt/csv.hpp"
#include "schedopt/schedule.hpp"

using namespace schedopt;

TEST(TimeGrid, RejectsBadParameters) {
  EXPECT_THROW(TimeGrid(0.0, 10), InvalidParameter);
  EXPECT_THROW(TimeGrid(1.0, 1), InvalidParameter);
  const TimeGrid g(6.0, 600);
  EXPECT_DOUBLE_EQ(g.dt(), 0.01);
  EXPECT_EQ(g.node(600), 6.0);
  EXPECT_EQ(g.cell_of(6.0), 599);
}

TEST(SensorSchedule, RejectsInvalidDensities) {
  const TimeGrid g(1.0, 2);
  EXPECT_THROW(SensorSchedule(g, Eigen::Vector2d(2.0, 0.5)), InvalidInput);
  EXPECT_THROW(SensorSchedule(g, Eigen::Vector2d(2.5, -0.5)), InvalidInput);
  EXPECT_THROW(SensorSchedule(g, Eigen::Vector3d(1.0, 1.0, 1.0)), InvalidInput);
  EXPECT_THROW(SensorSchedule(g, Eigen::Vector2d(NAN, 1.0)), InvalidInput);
}

TEST(UniformSchedule, ConstantDensity) {
  const SensorSchedule s = uniform_schedule(TimeGrid(6.0, 600));
  EXPECT_NEAR(s.total_mass(), 1.0, 1e-12);
  for (int k = 0; k < 600; ++k) EXPECT_NEAR(s[k], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(schedule_mass(s, 2.0, 3.0), 1.0 / 6.0, 1e-12);

  const SensorSchedule t = uniform_schedule(TimeGrid(1.0, 2));
  EXPECT_DOUBLE_EQ(t[0], 1.0);
  EXPECT_DOUBLE_EQ(t[1], 1.0);
}

TEST(GaussianSchedule, MassAndMean) {
  const TimeGrid g(6.0, 600);
  const SensorSchedule s = gaussian_schedule(2.5, 0.5, g);
  EXPECT_NEAR(s.total_mass(), 1.0, 1e-12);
  EXPECT_NEAR(s.mean_time(), 2.5, 0.02);
  // P(|Z| <= 2) for a standard normal.
  EXPECT_NEAR(schedule_mass(s, 1.5, 3.5), std::erf(2.0 / std::sqrt(2.0)), 2e-3);
  EXPECT_THROW(gaussian_schedule(2.5, 0.0, g), InvalidParameter);
}

TEST(GaussianSchedule, MirrorSymmetry) {
  const TimeGrid g(6.0, 600);
  const SensorSchedule a = gaussian_schedule(1.5, 0.5, g);
  const SensorSchedule b = gaussian_schedule(4.5, 0.5, g);
  for (int k = 0; k < 600; ++k) EXPECT_NEAR(a[k], b[599 - k], 1e-12);
}

TEST(ScheduleMass, FullHorizonAndErrors) {
  const TimeGrid g(6.0, 60);
  const SensorSchedule s = gaussian_schedule(2.0, 1.0, g);
  EXPECT_NEAR(schedule_mass(s, 0.0, 6.0), 1.0, 1e-12);
  EXPECT_THROW(schedule_mass(s, 3.0, 2.0), InvalidRange);
  // Partial cells contribute proportionally.
  const SensorSchedule u = uniform_schedule(g);
  EXPECT_NEAR(schedule_mass(u, 0.05, 0.1), 0.05 / 6.0, 1e-14);
}

TEST(Projection, TwoCellExample) {
  const TimeGrid g(1.0, 2);
  const SensorSchedule s = project_to_simplex(Eigen::Vector2d(1.5, -0.5), g);
  EXPECT_NEAR(s[0], 2.0, 1e-14);
  EXPECT_NEAR(s[1], 0.0, 1e-14);
}

TEST(Projection, ZeroInputGivesUniform) {
  const TimeGrid g(6.0, 7);
  const SensorSchedule s = project_to_simplex(Eigen::VectorXd::Zero(7), g);
  for (int k = 0; k < 7; ++k) EXPECT_NEAR(s[k], 1.0 / 6.0, 1e-14);
}

TEST(Projection, IdempotentOnValidSchedules) {
  const TimeGrid g(6.0, 60);
  const SensorSchedule s = gaussian_schedule(3.0, 0.7, g);
  const SensorSchedule p = project_to_simplex(s.density(), g);
  EXPECT_LE((p.density() - s.density()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Projection, MatchesBruteForceQuadraticProgram) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.2, 0.6);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd v(5);
    for (int i = 0; i < 5; ++i) v[i] = normal(rng);
    const Eigen::VectorXd w = project_masses_to_simplex(v);
    const Eigen::VectorXd oracle = oracles::brute_force_simplex_projection(v);
    EXPECT_LE((w - oracle).cwiseAbs().maxCoeff(), 1e-12) << "trial " << trial;
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);
  }
}

TEST(Projection, RejectsNaN) {
  const TimeGrid g(1.0, 2);
  EXPECT_THROW(project_to_simplex(Eigen::Vector2d(NAN, 1.0), g), InvalidInput);
}

TEST(GradientField, TangentHasZeroMean) {
  const TimeGrid g(1.0, 4);
  const GradientField f(g, Eigen::Vector4d(1.0, 2.0, 3.0, 6.0));
  const GradientField t = f.tangent();
  EXPECT_NEAR(t.values.sum(), 0.0, 1e-14);
  EXPECT_DOUBLE_EQ(t.values[3], 3.0);
}

TEST(ScheduleTable, RoundTripsExactly) {
  const TimeGrid g(6.0, 37);
  const SensorSchedule s = gaussian_schedule(2.1, 0.37, g);
  std::stringstream ss;
  csv::write(ss, to_table(s));
  const SensorSchedule r = schedule_from_table(csv::read(ss));
  EXPECT_TRUE(r.grid() == g);
  for (int k = 0; k < 37; ++k) EXPECT_EQ(r[k], s[k]);
}
