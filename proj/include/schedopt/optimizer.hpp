#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "schedopt/adjoint.hpp"
#include "schedopt/csv.hpp"
#include "schedopt/error.hpp"
#include "schedopt/kalman_bucy.hpp"
#include "schedopt/rng.hpp"
#include "schedopt/schedule.hpp"

namespace schedopt {

/// Either a deterministic linear-Gaussian problem or a Monte-Carlo nonlinear one.
class OedProblem {
 public:
  OedProblem(LinearGaussianProblem p) : problem_(std::move(p)) {}
  OedProblem(NonlinearProblem p) : problem_(std::move(p)) {}

  bool is_linear_gaussian() const { return std::holds_alternative<LinearGaussianProblem>(problem_); }
  const LinearGaussianProblem& linear_gaussian() const { return std::get<LinearGaussianProblem>(problem_); }
  const NonlinearProblem& nonlinear() const { return std::get<NonlinearProblem>(problem_); }
  NonlinearProblem& nonlinear() { return std::get<NonlinearProblem>(problem_); }

  const TimeGrid& grid() const {
    return std::visit([](const auto& p) -> const TimeGrid& { return p.grid(); }, problem_);
  }

 private:
  std::variant<LinearGaussianProblem, NonlinearProblem> problem_;
};

/// Density of D_xi V, where V is the minimized objective. The seed is ignored for linear-Gaussian problems.
inline GradientField gradient(const OedProblem& problem, const SensorSchedule& xi, std::uint64_t seed) {
  require_same_grid(problem.grid(), xi.grid(), "gradient");
  if (problem.is_linear_gaussian()) return problem.linear_gaussian().gradient(xi);
  const auto& p = problem.nonlinear();
  return monte_carlo_gradient(p, xi, p.n_replicates(), seed);
}

/// Objective on a fixed replicate set. Deterministic problems ignore the replicates.
inline double objective(const OedProblem& problem, const SensorSchedule& xi, const std::vector<Replicate>& replicates,
                        NoiseCoupling coupling = NoiseCoupling::kBrownian) {
  if (problem.is_linear_gaussian()) return problem.linear_gaussian().objective(xi);
  return nonlinear_objective(problem.nonlinear(), xi, replicates, coupling);
}

struct IterationRecord {
  int iteration;
  SensorSchedule schedule;
  double objective;
  double gradient_norm;  // of the gradient that produced this iterate
  double wall_seconds;
};

struct OptimizationTrace {
  SensorSchedule initial;
  double initial_objective;
  std::vector<IterationRecord> records;
  bool aborted = false;
  std::string abort_reason;

  const SensorSchedule& final_schedule() const { return records.empty() ? initial : records.back().schedule; }
  double final_objective() const { return records.empty() ? initial_objective : records.back().objective; }
};

struct OptimizerOptions {
  /// Replicates in the fixed evaluation set (nonlinear problems only).
  int evaluation_replicates = 8;
};

/// Projected gradient descent on cell masses: w <- Pi(w - step * eta * dt).
inline OptimizationTrace optimize(const OedProblem& problem, const SensorSchedule& xi0, int n_iters, double step_size,
                                  std::uint64_t master_seed, const OptimizerOptions& options = {}) {
  detail::require<InvalidParameter>(n_iters >= 0, "optimize: n_iters must be nonnegative");
  detail::require<InvalidParameter>(std::isfinite(step_size) && step_size > 0.0, "optimize: step size must be positive");
  require_same_grid(problem.grid(), xi0.grid(), "optimize");
  const TimeGrid& grid = xi0.grid();

  std::vector<Replicate> evaluation;
  if (!problem.is_linear_gaussian()) {
    detail::require<InvalidParameter>(options.evaluation_replicates >= 1, "optimize: need evaluation replicates");
    evaluation = draw_replicates(problem.nonlinear(), xi0, options.evaluation_replicates,
                                 sub_seed(master_seed, 0, Stream::kEvaluation));
  }

  OptimizationTrace trace{xi0, objective(problem, xi0, evaluation), {}, false, {}};
  SensorSchedule xi = xi0;
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < n_iters; ++i) {
    std::optional<GradientField> computed;
    try {
      computed = gradient(problem, xi, sub_seed(master_seed, static_cast<std::uint64_t>(i), Stream::kGradient));
    } catch (const NumericalBlowup& e) {
      trace.aborted = true;
      trace.abort_reason = "iteration " + std::to_string(i + 1) + ": " + e.what();
      break;
    }
    const GradientField& eta = *computed;
    if (!eta.is_finite()) {
      trace.aborted = true;
      trace.abort_reason = "non-finite gradient at iteration " + std::to_string(i + 1);
      break;
    }
    if (!(eta.values.array() == 0.0).all()) {
      xi = SensorSchedule::from_masses(grid, project_masses_to_simplex(xi.masses() - step_size * grid.dt() * eta.values));
    }
    const double value = objective(problem, xi, evaluation);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.records.push_back({i + 1, xi, value, eta.values.norm() * std::sqrt(grid.dt()), elapsed});
    if (!std::isfinite(value)) {
      trace.aborted = true;
      trace.abort_reason = "non-finite objective at iteration " + std::to_string(i + 1);
      break;
    }
  }
  return trace;
}

/// Central differences of the seed-fixed objective; cell k is perturbed by +-h in mass and re-projected.
/// Re-projection turns the perturbation into e_k - 1/n, so the result estimates gradient(...).tangent().
/// Cells not listed in `cells` are NaN.
inline GradientField finite_difference_gradient(const OedProblem& problem, const SensorSchedule& xi, double h,
                                                std::uint64_t master_seed,
                                                NoiseCoupling coupling = NoiseCoupling::kBrownian,
                                                const std::optional<std::vector<int>>& cells = std::nullopt) {
  detail::require<InvalidParameter>(std::isfinite(h) && h > 0.0, "finite_difference_gradient: h must be positive");
  require_same_grid(problem.grid(), xi.grid(), "finite_difference_gradient");
  const TimeGrid& grid = xi.grid();
  std::vector<Replicate> replicates;
  if (!problem.is_linear_gaussian()) {
    const auto& p = problem.nonlinear();
    replicates = draw_replicates(p, xi, p.n_replicates(), master_seed);
  }
  std::vector<int> which;
  if (cells) {
    which = *cells;
  } else {
    for (int k = 0; k < grid.n_steps(); ++k) which.push_back(k);
  }
  Eigen::VectorXd fd = Eigen::VectorXd::Constant(grid.n_steps(), std::numeric_limits<double>::quiet_NaN());
  const Eigen::VectorXd w = xi.masses();
  for (int k : which) {
    detail::require<InvalidInput>(k >= 0 && k < grid.n_steps(), "finite_difference_gradient: cell out of range");
    Eigen::VectorXd plus = w, minus = w;
    plus[k] += h;
    minus[k] -= h;
    const SensorSchedule xp = SensorSchedule::from_masses(grid, project_masses_to_simplex(plus));
    const SensorSchedule xm = SensorSchedule::from_masses(grid, project_masses_to_simplex(minus));
    fd[k] = (objective(problem, xp, replicates, coupling) - objective(problem, xm, replicates, coupling)) / (2.0 * h);
  }
  return {grid, fd};
}

/// Rows (iter, objective, grad_norm, wall_seconds); iteration 0 is the starting schedule.
inline csv::Table objective_table(const OptimizationTrace& trace) {
  csv::Table t{{"iter", "objective", "grad_norm", "wall_seconds"}, {{}, {}, {}, {}}};
  auto add = [&](double iter, double value, double norm, double secs) {
    t.columns[0].push_back(iter);
    t.columns[1].push_back(value);
    t.columns[2].push_back(norm);
    t.columns[3].push_back(secs);
  };
  add(0, trace.initial_objective, std::numeric_limits<double>::quiet_NaN(), 0.0);
  for (const auto& r : trace.records) add(r.iteration, r.objective, r.gradient_norm, r.wall_seconds);
  return t;
}

/// One column per iterate (density), rows by cell center.
inline csv::Table schedule_matrix_table(const OptimizationTrace& trace) {
  const TimeGrid& grid = trace.initial.grid();
  csv::Table t;
  t.header.push_back("t_cell_center");
  t.header.push_back("iter0");
  for (const auto& r : trace.records) t.header.push_back("iter" + std::to_string(r.iteration));
  t.columns.resize(t.header.size());
  for (int k = 0; k < grid.n_steps(); ++k) {
    t.columns[0].push_back(grid.cell_center(k));
    t.columns[1].push_back(trace.initial[k]);
    for (std::size_t i = 0; i < trace.records.size(); ++i) t.columns[i + 2].push_back(trace.records[i].schedule[k]);
  }
  return t;
}

}  // namespace schedopt
