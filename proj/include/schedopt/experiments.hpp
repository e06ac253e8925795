#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "schedopt/adjoint.hpp"
#include "schedopt/csv.hpp"
#include "schedopt/error.hpp"
#include "schedopt/kalman_bucy.hpp"
#include "schedopt/models.hpp"
#include "schedopt/optimizer.hpp"
#include "schedopt/rng.hpp"
#include "schedopt/schedule.hpp"
#include "schedopt/sde.hpp"
#include "schedopt/svg.hpp"
#include "schedopt/zakai.hpp"

namespace schedopt {

using json = nlohmann::json;

/// All mass on the sensor with the smaller noise level; a tie splits the budget evenly.
inline std::pair<double, double> run_budget_allocation(double gamma1, double gamma2) {
  detail::require<InvalidParameter>(std::isfinite(gamma1) && gamma1 > 0.0 && std::isfinite(gamma2) && gamma2 > 0.0,
                                    "run_budget_allocation: noise levels must be positive");
  if (gamma1 < gamma2) return {1.0, 0.0};
  if (gamma2 < gamma1) return {0.0, 1.0};
  return {0.5, 0.5};
}

/// D-optimal single observation time log(1/z0 - 1) / x0.
inline double optimal_tau_dopt(double x0, double z0) {
  detail::require<InvalidParameter>(std::isfinite(x0) && x0 != 0.0, "optimal_tau_dopt: x0 must be nonzero");
  detail::require<InvalidParameter>(z0 > 0.0 && z0 < 1.0, "optimal_tau_dopt: z0 must lie in (0, 1)");
  return std::log(1.0 / z0 - 1.0) / x0;
}

struct OptimizerConfig {
  std::optional<int> iterations;
  std::optional<double> step_size;
  std::optional<int> replicates;
  int evaluation_replicates = 8;
  int final_evaluation_seeds = 20;
};

struct GaussianScheduleSpec {
  double mean;
  double std;
};

struct CompareConfig {
  std::vector<GaussianScheduleSpec> schedules{
      {1.5, std::sqrt(0.5)}, {2.5, std::sqrt(0.5)}, {3.5, std::sqrt(0.5)}, {4.5, std::sqrt(0.5)}};
  int seeds = 50;
};

struct GradcheckConfig {
  double h = 1e-5;
  int lg_n_steps = 6000;
  int replicates = 50;
  double lg_tolerance = 1e-3;
  double nonlinear_tolerance = 0.05;
  double dominant_fraction = 0.1;
};

struct BudgetConfig {
  double gamma1 = 1.0;
  double gamma2 = 2.0;
};

struct ExperimentConfig {
  static constexpr int kVersion = 1;

  std::string experiment = "logistic";
  std::uint64_t seed = 20240601;
  std::string output_dir = "out";
  LogisticParams logistic;
  Linear2dParams linear2d{0.2, 0.5, 1.0, 3.0, 6.0, 600};
  OptimizerConfig optimizer;
  CompareConfig compare;
  GradcheckConfig gradcheck;
  BudgetConfig budget;

  int iterations() const { return optimizer.iterations.value_or(experiment == "linear2d" ? 100 : 15); }
  double step_size() const { return optimizer.step_size.value_or(experiment == "linear2d" ? 1e-2 : 2e-2); }
  int replicates() const { return optimizer.replicates.value_or(1); }
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"logistic", "linear2d", "compare", "budget", "tau", "gradcheck"};
  return names;
}

namespace detail {

inline void require_known_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigurationError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigurationError("config: unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read_key(const json& j, const char* key, T& target, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigurationError("config: bad value for '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

template <class T>
void read_key(const json& j, const char* key, std::optional<T>& target, const std::string& where) {
  if (!j.contains(key)) return;
  T value{};
  read_key(j, key, value, where);
  target = value;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  using detail::read_key;
  detail::require_known_keys(j, {"version", "experiment", "seed", "output_dir", "logistic", "linear2d", "optimizer",
                                 "compare", "gradcheck", "budget"},
                             "config");
  if (!j.contains("version")) throw ConfigurationError("config: missing 'version'");
  int version = 0;
  read_key(j, "version", version, "config");
  if (version != ExperimentConfig::kVersion) {
    throw ConfigurationError("config: unsupported version " + std::to_string(version));
  }
  ExperimentConfig c;
  read_key(j, "experiment", c.experiment, "config");
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end()) {
    throw ConfigurationError("config: unknown experiment '" + c.experiment + "'");
  }
  read_key(j, "seed", c.seed, "config");
  read_key(j, "output_dir", c.output_dir, "config");
  if (j.contains("logistic")) {
    const json& s = j.at("logistic");
    detail::require_known_keys(
        s, {"x0", "z0", "prior_std", "gamma", "t_end", "n_steps", "x_min", "x_max", "n_space"}, "logistic");
    auto& p = c.logistic;
    read_key(s, "x0", p.x0, "logistic");
    read_key(s, "z0", p.z0, "logistic");
    read_key(s, "prior_std", p.prior_std, "logistic");
    read_key(s, "gamma", p.gamma, "logistic");
    read_key(s, "t_end", p.t_end, "logistic");
    read_key(s, "n_steps", p.n_steps, "logistic");
    read_key(s, "x_min", p.x_min, "logistic");
    read_key(s, "x_max", p.x_max, "logistic");
    read_key(s, "n_space", p.n_space, "logistic");
  }
  if (j.contains("linear2d")) {
    const json& s = j.at("linear2d");
    detail::require_known_keys(s, {"sigma", "gamma", "prior_var", "t_switch", "t_end", "n_steps"}, "linear2d");
    auto& p = c.linear2d;
    read_key(s, "sigma", p.sigma, "linear2d");
    read_key(s, "gamma", p.gamma, "linear2d");
    read_key(s, "prior_var", p.prior_var, "linear2d");
    read_key(s, "t_switch", p.t_switch, "linear2d");
    read_key(s, "t_end", p.t_end, "linear2d");
    read_key(s, "n_steps", p.n_steps, "linear2d");
  }
  if (j.contains("optimizer")) {
    const json& s = j.at("optimizer");
    detail::require_known_keys(
        s, {"iterations", "step_size", "replicates", "evaluation_replicates", "final_evaluation_seeds"}, "optimizer");
    auto& o = c.optimizer;
    read_key(s, "iterations", o.iterations, "optimizer");
    read_key(s, "step_size", o.step_size, "optimizer");
    read_key(s, "replicates", o.replicates, "optimizer");
    read_key(s, "evaluation_replicates", o.evaluation_replicates, "optimizer");
    read_key(s, "final_evaluation_seeds", o.final_evaluation_seeds, "optimizer");
  }
  if (j.contains("compare")) {
    const json& s = j.at("compare");
    detail::require_known_keys(s, {"schedules", "seeds"}, "compare");
    read_key(s, "seeds", c.compare.seeds, "compare");
    if (s.contains("schedules")) {
      if (!s.at("schedules").is_array()) throw ConfigurationError("config: compare.schedules must be an array");
      c.compare.schedules.clear();
      for (const auto& item : s.at("schedules")) {
        detail::require_known_keys(item, {"mean", "std"}, "compare.schedules");
        GaussianScheduleSpec spec{0.0, 1.0};
        read_key(item, "mean", spec.mean, "compare.schedules");
        read_key(item, "std", spec.std, "compare.schedules");
        c.compare.schedules.push_back(spec);
      }
    }
  }
  if (j.contains("gradcheck")) {
    const json& s = j.at("gradcheck");
    detail::require_known_keys(
        s, {"h", "lg_n_steps", "replicates", "lg_tolerance", "nonlinear_tolerance", "dominant_fraction"}, "gradcheck");
    auto& g = c.gradcheck;
    read_key(s, "h", g.h, "gradcheck");
    read_key(s, "lg_n_steps", g.lg_n_steps, "gradcheck");
    read_key(s, "replicates", g.replicates, "gradcheck");
    read_key(s, "lg_tolerance", g.lg_tolerance, "gradcheck");
    read_key(s, "nonlinear_tolerance", g.nonlinear_tolerance, "gradcheck");
    read_key(s, "dominant_fraction", g.dominant_fraction, "gradcheck");
  }
  if (j.contains("budget")) {
    const json& s = j.at("budget");
    detail::require_known_keys(s, {"gamma1", "gamma2"}, "budget");
    read_key(s, "gamma1", c.budget.gamma1, "budget");
    read_key(s, "gamma2", c.budget.gamma2, "budget");
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigurationError("config: cannot open " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigurationError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["version"] = ExperimentConfig::kVersion;
  j["experiment"] = c.experiment;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  const auto& l = c.logistic;
  j["logistic"] = {{"x0", l.x0},       {"z0", l.z0},       {"prior_std", l.prior_std},
                   {"gamma", l.gamma}, {"t_end", l.t_end}, {"n_steps", l.n_steps},
                   {"x_min", l.x_min}, {"x_max", l.x_max}, {"n_space", l.n_space}};
  const auto& m = c.linear2d;
  j["linear2d"] = {{"sigma", m.sigma},       {"gamma", m.gamma}, {"prior_var", m.prior_var},
                   {"t_switch", m.t_switch}, {"t_end", m.t_end}, {"n_steps", m.n_steps}};
  j["optimizer"] = {{"iterations", c.iterations()},
                    {"step_size", c.step_size()},
                    {"replicates", c.replicates()},
                    {"evaluation_replicates", c.optimizer.evaluation_replicates},
                    {"final_evaluation_seeds", c.optimizer.final_evaluation_seeds}};
  json schedules = json::array();
  for (const auto& s : c.compare.schedules) schedules.push_back({{"mean", s.mean}, {"std", s.std}});
  j["compare"] = {{"schedules", schedules}, {"seeds", c.compare.seeds}};
  const auto& g = c.gradcheck;
  j["gradcheck"] = {{"h", g.h},
                    {"lg_n_steps", g.lg_n_steps},
                    {"replicates", g.replicates},
                    {"lg_tolerance", g.lg_tolerance},
                    {"nonlinear_tolerance", g.nonlinear_tolerance},
                    {"dominant_fraction", g.dominant_fraction}};
  j["budget"] = {{"gamma1", c.budget.gamma1}, {"gamma2", c.budget.gamma2}};
  return j;
}

/// Relative error of a finite-difference gradient against the simplex-tangent adjoint gradient,
/// on cells where the adjoint value reaches `fraction` of its maximum modulus.
struct GradientComparison {
  int dominant_cells = 0;
  double max_relative_error = 0.0;
  Eigen::VectorXd relative_error;
  std::vector<bool> dominant;
};

inline GradientComparison compare_gradients(const GradientField& adjoint_tangent, const GradientField& fd,
                                            double fraction) {
  require_same_grid(adjoint_tangent.grid, fd.grid, "compare_gradients");
  GradientComparison c;
  const auto n = adjoint_tangent.values.size();
  c.relative_error = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  c.dominant.assign(n, false);
  const double threshold = fraction * adjoint_tangent.max_abs();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double a = adjoint_tangent.values[k];
    if (!std::isfinite(fd.values[k])) continue;
    c.relative_error[k] = std::abs(fd.values[k] - a) / std::max(std::abs(a), std::numeric_limits<double>::min());
    if (std::abs(a) >= threshold && threshold > 0.0) {
      c.dominant[k] = true;
      ++c.dominant_cells;
      c.max_relative_error = std::max(c.max_relative_error, c.relative_error[k]);
    }
  }
  return c;
}

namespace detail {

inline std::filesystem::path prepare_output(const ExperimentConfig& c) {
  std::filesystem::path out(c.output_dir);
  std::filesystem::create_directories(out);
  return out;
}

inline void write_report(const std::filesystem::path& out, const json& report) {
  std::ofstream os(out / "report.json");
  if (!os) throw InvalidInput("cannot write " + (out / "report.json").string());
  os << report.dump(2) << '\n';
}

inline json base_report(const ExperimentConfig& c) {
  return {{"experiment", c.experiment}, {"seed", c.seed}, {"config", to_json(c)}};
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline std::string schedule_evolution_svg(const OptimizationTrace& trace, const std::string& title) {
  const TimeGrid& grid = trace.initial.grid();
  std::vector<double> t(grid.n_steps());
  for (int k = 0; k < grid.n_steps(); ++k) t[k] = grid.cell_center(k);
  std::vector<svg::Series> series;
  const double n = std::max<double>(1.0, static_cast<double>(trace.records.size()));
  series.push_back({t, to_std(trace.initial.density()), svg::ramp_color(0.0), "iter 0"});
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const bool last = i + 1 == trace.records.size();
    series.push_back({t, to_std(trace.records[i].schedule.density()), svg::ramp_color((i + 1) / n),
                      last ? "iter " + std::to_string(trace.records[i].iteration) : ""});
  }
  return svg::line_plot(title, "t", "schedule density", series);
}

inline std::string objective_svg(const OptimizationTrace& trace, const std::string& ylabel) {
  const csv::Table t = objective_table(trace);
  return svg::line_plot("objective over iterations", "iteration", ylabel,
                        {{t.column("iter"), t.column("objective"), "#b22222", ""}});
}

}  // namespace detail

/// Realized KL(q_T || q_0) averaged over `seeds` replicates drawn once and shared by every schedule.
struct ScheduleScore {
  int index;
  double mean_kl;
  int rank;  // 1 = largest information gain
};

inline std::vector<ScheduleScore> compare_schedules(const NonlinearProblem& problem,
                                                    const std::vector<SensorSchedule>& schedules, int seeds,
                                                    std::uint64_t master_seed) {
  detail::require<InvalidParameter>(schedules.size() >= 2, "compare_schedules: need at least two schedules");
  detail::require<InvalidParameter>(seeds >= 1, "compare_schedules: need at least one seed");
  const std::vector<Replicate> reps = draw_replicates(problem, schedules.front(), seeds, master_seed);
  std::vector<ScheduleScore> scores;
  for (std::size_t i = 0; i < schedules.size(); ++i) {
    const double v = nonlinear_objective(problem, schedules[i], reps, NoiseCoupling::kBrownian);
    scores.push_back({static_cast<int>(i), -v, 0});
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a].mean_kl > scores[b].mean_kl; });
  for (std::size_t r = 0; r < order.size(); ++r) scores[order[r]].rank = static_cast<int>(r + 1);
  return scores;
}

inline json run_compare(const ExperimentConfig& c) {
  const NonlinearProblem problem = logistic_problem(c.logistic);
  const TimeGrid& grid = problem.grid();
  std::vector<SensorSchedule> schedules;
  for (const auto& s : c.compare.schedules) schedules.push_back(gaussian_schedule(s.mean, s.std, grid));
  const auto scores = compare_schedules(problem, schedules, c.compare.seeds, c.seed);
  const auto out = detail::prepare_output(c);
  csv::Table table{{"index", "mean", "std", "mean_kl", "rank"}, {{}, {}, {}, {}, {}}};
  std::vector<std::string> labels;
  std::vector<double> values;
  json rows = json::array();
  for (const auto& s : scores) {
    const auto& spec = c.compare.schedules[s.index];
    table.columns[0].push_back(s.index);
    table.columns[1].push_back(spec.mean);
    table.columns[2].push_back(spec.std);
    table.columns[3].push_back(s.mean_kl);
    table.columns[4].push_back(s.rank);
    labels.push_back("N(" + svg::detail::num(spec.mean) + ", " + svg::detail::num(spec.std) + ")");
    values.push_back(s.mean_kl);
    rows.push_back({{"index", s.index}, {"mean", spec.mean}, {"std", spec.std}, {"mean_kl", s.mean_kl}, {"rank", s.rank}});
  }
  csv::write_file(out / "compare.csv", table);
  svg::write_file(out / "compare.svg", svg::bar_chart("mean KL(q_T || q_0)", "KL", labels, values));
  std::vector<svg::Series> series;
  std::vector<double> t(grid.n_steps());
  for (int k = 0; k < grid.n_steps(); ++k) t[k] = grid.cell_center(k);
  for (std::size_t i = 0; i < schedules.size(); ++i) {
    series.push_back({t, detail::to_std(schedules[i].density()),
                      svg::ramp_color(i / std::max(1.0, schedules.size() - 1.0)), labels[i]});
  }
  svg::write_file(out / "compare_schedules.svg", svg::line_plot("candidate schedules", "t", "density", series));
  json report = detail::base_report(c);
  report["schedules"] = rows;
  detail::write_report(out, report);
  return report;
}

inline json run_budget(const ExperimentConfig& c) {
  const auto [a1, a2] = run_budget_allocation(c.budget.gamma1, c.budget.gamma2);
  json report = detail::base_report(c);
  report["gamma1"] = c.budget.gamma1;
  report["gamma2"] = c.budget.gamma2;
  report["alpha1"] = a1;
  report["alpha2"] = a2;
  detail::write_report(detail::prepare_output(c), report);
  return report;
}

inline json run_tau(const ExperimentConfig& c) {
  json report = detail::base_report(c);
  report["x0"] = c.logistic.x0;
  report["z0"] = c.logistic.z0;
  report["tau"] = optimal_tau_dopt(c.logistic.x0, c.logistic.z0);
  detail::write_report(detail::prepare_output(c), report);
  return report;
}

/// Projected gradient descent on the logistic model from the uniform schedule.
inline json run_logistic_experiment(const ExperimentConfig& c) {
  NonlinearProblem problem = logistic_problem(c.logistic);
  problem.set_n_replicates(c.replicates());
  const TimeGrid& grid = problem.grid();
  const SensorSchedule uniform = uniform_schedule(grid);
  const auto out = detail::prepare_output(c);
  OptimizerOptions options;
  options.evaluation_replicates = c.optimizer.evaluation_replicates;
  const OedProblem oed(problem);
  const OptimizationTrace trace = optimize(oed, uniform, c.iterations(), c.step_size(), c.seed, options);

  // Written first so an aborted run still leaves its history behind.
  csv::write_file(out / "schedule_evolution.csv", schedule_matrix_table(trace));
  csv::write_file(out / "objective.csv", objective_table(trace));
  svg::write_file(out / "schedule_evolution.svg", detail::schedule_evolution_svg(trace, "sensor schedule iterates"));
  svg::write_file(out / "objective.svg", detail::objective_svg(trace, "-mean KL on evaluation set"));

  const SensorSchedule& final_schedule = trace.final_schedule();
  const std::vector<Replicate> fresh =
      draw_replicates(problem, uniform, c.optimizer.final_evaluation_seeds, sub_seed(c.seed, 1, Stream::kEvaluation));
  const double kl_uniform = -nonlinear_objective(problem, uniform, fresh, NoiseCoupling::kBrownian);
  const double kl_final = -nonlinear_objective(problem, final_schedule, fresh, NoiseCoupling::kBrownian);

  // One realization under both schedules for the observation and posterior plots.
  const Replicate& rep = fresh.front();
  const ObservationPath obs_uniform = observe_replicate(problem, rep, uniform, NoiseCoupling::kBrownian);
  const ObservationPath obs_final = observe_replicate(problem, rep, final_schedule, NoiseCoupling::kBrownian);
  csv::Table obs_table{{"t_cell", "dz_uniform", "dz_final", "z_uniform", "z_final"}, {{}, {}, {}, {}, {}}};
  double zu = 0.0, zf = 0.0;
  for (int k = 0; k < grid.n_steps(); ++k) {
    zu += obs_uniform.increments[k][0];
    zf += obs_final.increments[k][0];
    obs_table.columns[0].push_back(grid.node(k));
    obs_table.columns[1].push_back(obs_uniform.increments[k][0]);
    obs_table.columns[2].push_back(obs_final.increments[k][0]);
    obs_table.columns[3].push_back(zu);
    obs_table.columns[4].push_back(zf);
  }
  csv::write_file(out / "observations.csv", obs_table);
  svg::write_file(out / "observations.svg",
                  svg::line_plot("observation process Z(t)", "t", "Z",
                                 {{obs_table.columns[0], obs_table.columns[3], svg::ramp_color(0.0), "uniform"},
                                  {obs_table.columns[0], obs_table.columns[4], svg::ramp_color(1.0), "optimized"}}));

  const auto& disc = problem.discretization();
  const DensityField q_uniform = normalize(run_filter(disc, uniform, obs_uniform, problem.log_prior()).final());
  const DensityField q_final = normalize(run_filter(disc, final_schedule, obs_final, problem.log_prior()).final());
  const SpaceGrid& space = problem.space();
  csv::Table post{{"x", "prior", "q_uniform", "q_final"}, {{}, {}, {}, {}}};
  for (int j = 0; j < space.n_points(); ++j) {
    post.columns[0].push_back(space.x(j));
    post.columns[1].push_back(problem.prior().values[j]);
    post.columns[2].push_back(q_uniform.values[j]);
    post.columns[3].push_back(q_final.values[j]);
  }
  csv::write_file(out / "posterior.csv", post);
  svg::Series prior_series{post.columns[0], post.columns[1], "#555555", "prior"};
  prior_series.dashed = true;
  svg::write_file(out / "posterior.svg",
                  svg::line_plot("final filtering density", "x", "density",
                                 {prior_series,
                                  {post.columns[0], post.columns[2], svg::ramp_color(0.0), "uniform"},
                                  {post.columns[0], post.columns[3], svg::ramp_color(1.0), "optimized"}}));

  json report = detail::base_report(c);
  report["iterations_completed"] = trace.records.size();
  report["aborted"] = trace.aborted;
  if (trace.aborted) report["abort_reason"] = trace.abort_reason;
  report["final_schedule_mean"] = final_schedule.mean_time();
  report["tau_dopt"] = optimal_tau_dopt(c.logistic.x0, c.logistic.z0);
  report["mean_kl_uniform"] = kl_uniform;
  report["mean_kl_final"] = kl_final;
  report["evaluation_seeds"] = c.optimizer.final_evaluation_seeds;
  report["initial_objective"] = trace.initial_objective;
  report["final_objective"] = trace.final_objective();
  detail::write_report(out, report);
  if (trace.aborted) throw NumericalBlowup("logistic experiment aborted: " + trace.abort_reason, grid.t_end());
  return report;
}

/// Deterministic descent on int_0^T trace C(t) dt for the switching two-dimensional model.
inline json run_linear2d_experiment(const ExperimentConfig& c) {
  const LinearGaussianProblem problem = linear2d_problem(c.linear2d);
  const TimeGrid& grid = problem.grid();
  const SensorSchedule uniform = uniform_schedule(grid);
  const auto out = detail::prepare_output(c);
  const OptimizationTrace trace = optimize(OedProblem(problem), uniform, c.iterations(), c.step_size(), c.seed);

  csv::write_file(out / "schedule_evolution.csv", schedule_matrix_table(trace));
  csv::write_file(out / "objective.csv", objective_table(trace));
  svg::write_file(out / "schedule_evolution.svg", detail::schedule_evolution_svg(trace, "sensor schedule iterates"));
  svg::write_file(out / "objective.svg", detail::objective_svg(trace, "integrated trace of C"));

  const SensorSchedule& final_schedule = trace.final_schedule();
  const CovariancePath cov_uniform = problem.covariance(uniform);
  const CovariancePath cov_final = problem.covariance(final_schedule);
  csv::Table traces{{"t", "trace_uniform", "trace_optimized"}, {{}, {}, {}}};
  for (int k = 0; k < grid.n_nodes(); ++k) {
    traces.columns[0].push_back(grid.node(k));
    traces.columns[1].push_back(cov_uniform.C[k].trace());
    traces.columns[2].push_back(cov_final.C[k].trace());
  }
  csv::write_file(out / "trace_curves.csv", traces);
  svg::write_file(out / "trace_curves.svg",
                  svg::line_plot("trace of the filtering covariance", "t", "trace C(t)",
                                 {{traces.columns[0], traces.columns[1], svg::ramp_color(0.0), "uniform"},
                                  {traces.columns[0], traces.columns[2], svg::ramp_color(1.0), "optimized"}}));

  // One filtered sample path under the optimized schedule.
  const LinearGaussianModel& model = problem.model();
  const SignalPath signal = simulate_signal(to_signal_model(model), grid, sub_seed(c.seed, 0, Stream::kSignalNoise));
  const ObservationPath obs = simulate_observations(signal, to_observation_model(model), final_schedule,
                                                    sub_seed(c.seed, 0, Stream::kObservationNoise));
  const std::vector<Eigen::VectorXd> mean = integrate_mean(model, final_schedule, obs, cov_final);
  csv::Table path{{"t", "x0", "x1", "m0", "m1", "sd0", "sd1"}, std::vector<std::vector<double>>(7)};
  for (int k = 0; k < grid.n_nodes(); ++k) {
    path.columns[0].push_back(grid.node(k));
    path.columns[1].push_back(signal.states[k][0]);
    path.columns[2].push_back(signal.states[k][1]);
    path.columns[3].push_back(mean[k][0]);
    path.columns[4].push_back(mean[k][1]);
    path.columns[5].push_back(std::sqrt(std::max(0.0, cov_final.C[k](0, 0))));
    path.columns[6].push_back(std::sqrt(std::max(0.0, cov_final.C[k](1, 1))));
  }
  csv::write_file(out / "filtered_path.csv", path);
  for (int i = 0; i < 2; ++i) {
    std::vector<double> lo, hi;
    for (std::size_t k = 0; k < path.columns[0].size(); ++k) {
      lo.push_back(path.columns[3 + i][k] - 2.0 * path.columns[5 + i][k]);
      hi.push_back(path.columns[3 + i][k] + 2.0 * path.columns[5 + i][k]);
    }
    svg::Series lo_s{path.columns[0], lo, "#888888", "mean - 2 sd"}, hi_s{path.columns[0], hi, "#888888", "mean + 2 sd"};
    lo_s.dashed = hi_s.dashed = true;
    svg::write_file(out / ("filtered_path_x" + std::to_string(i) + ".svg"),
                    svg::line_plot("component " + std::to_string(i), "t", "x",
                                   {{path.columns[0], path.columns[1 + i], "#000000", "signal"},
                                    {path.columns[0], path.columns[3 + i], "#b22222", "filter mean"},
                                    lo_s,
                                    hi_s}));
  }

  bool monotone = true;
  double previous = trace.initial_objective;
  for (const auto& r : trace.records) {
    if (r.objective > previous) monotone = false;
    previous = r.objective;
  }
  json report = detail::base_report(c);
  report["iterations_completed"] = trace.records.size();
  report["aborted"] = trace.aborted;
  if (trace.aborted) report["abort_reason"] = trace.abort_reason;
  report["utility_uniform"] = trace.initial_objective;
  report["utility_final"] = trace.final_objective();
  report["utility_non_increasing"] = monotone;
  report["mass_in_0_1_and_3_4"] = schedule_mass(final_schedule, 0.0, 1.0) + schedule_mass(final_schedule, 3.0, 4.0);
  report["final_schedule_mean"] = final_schedule.mean_time();
  detail::write_report(out, report);
  if (trace.aborted) throw NumericalBlowup("linear2d experiment aborted: " + trace.abort_reason, grid.t_end());
  return report;
}

/// Finite-difference validation of both adjoint gradients at the uniform schedule.
inline json run_gradcheck(const ExperimentConfig& c) {
  const auto& g = c.gradcheck;
  const auto out = detail::prepare_output(c);
  csv::Table table{{"case", "t", "adjoint", "fd", "rel_err", "dominant"}, std::vector<std::vector<double>>(6)};
  json cases = json::array();
  auto record = [&](int id, const std::string& name, const GradientField& adj, const GradientField& fd,
                    double tolerance) {
    const GradientComparison cmp = compare_gradients(adj, fd, g.dominant_fraction);
    for (int k = 0; k < adj.grid.n_steps(); ++k) {
      table.columns[0].push_back(id);
      table.columns[1].push_back(adj.grid.cell_center(k));
      table.columns[2].push_back(adj.values[k]);
      table.columns[3].push_back(fd.values[k]);
      table.columns[4].push_back(cmp.relative_error[k]);
      table.columns[5].push_back(cmp.dominant[k] ? 1.0 : 0.0);
    }
    cases.push_back({{"case", id},
                     {"name", name},
                     {"dominant_cells", cmp.dominant_cells},
                     {"max_relative_error", cmp.max_relative_error},
                     {"tolerance", tolerance},
                     {"pass", cmp.dominant_cells > 0 && cmp.max_relative_error <= tolerance}});
  };

  Linear2dParams lp = c.linear2d;
  lp.n_steps = g.lg_n_steps;
  const OedProblem lg(linear2d_problem(lp));
  const SensorSchedule lg_uniform = uniform_schedule(lg.grid());
  record(0, "linear2d", gradient(lg, lg_uniform, c.seed).tangent(), finite_difference_gradient(lg, lg_uniform, g.h, c.seed),
         g.lg_tolerance);

  LogisticParams np = c.logistic;
  NonlinearProblem nl = logistic_problem(np);
  nl.set_n_replicates(g.replicates);
  const OedProblem nonlinear(nl);
  const SensorSchedule nl_uniform = uniform_schedule(nonlinear.grid());
  const GradientField nl_adjoint = gradient(nonlinear, nl_uniform, c.seed).tangent();
  record(1, "logistic_brownian_crn", nl_adjoint,
         finite_difference_gradient(nonlinear, nl_uniform, g.h, c.seed, NoiseCoupling::kBrownian),
         g.nonlinear_tolerance);
  record(2, "logistic_frozen_noise", nl_adjoint,
         finite_difference_gradient(nonlinear, nl_uniform, g.h, c.seed, NoiseCoupling::kFrozenMeasurementNoise),
         g.nonlinear_tolerance);

  csv::write_file(out / "gradcheck.csv", table);
  json report = detail::base_report(c);
  report["cases"] = cases;
  detail::write_report(out, report);
  return report;
}

inline json run_experiment(const ExperimentConfig& c) {
  if (c.experiment == "logistic") return run_logistic_experiment(c);
  if (c.experiment == "linear2d") return run_linear2d_experiment(c);
  if (c.experiment == "compare") return run_compare(c);
  if (c.experiment == "budget") return run_budget(c);
  if (c.experiment == "tau") return run_tau(c);
  if (c.experiment == "gradcheck") return run_gradcheck(c);
  throw ConfigurationError("unknown experiment '" + c.experiment + "'");
}

}  // namespace schedopt
