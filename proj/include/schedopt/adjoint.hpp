#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "schedopt/error.hpp"
#include "schedopt/rng.hpp"
#include "schedopt/schedule.hpp"
#include "schedopt/sde.hpp"
#include "schedopt/zakai.hpp"

namespace schedopt {

/// lambda_t on the space grid.
struct AdjointField {
  SpaceGrid space;
  Eigen::VectorXd values;
};

/// lambda at every node time, index-aligned with FilterTrajectory.
struct AdjointTrajectory {
  SpaceGrid space;
  TimeGrid grid;
  std::vector<Eigen::VectorXd> values;

  AdjointField at(int k) const { return {space, values.at(k)}; }
};

/// Integral utility U(p) = int u_final(x, p_T(x)) dx + int_0^T int u_int(x, p_t(x)) dx dt.
///
/// Utilities are information measures: the schedule optimizer minimizes V = -E U, and every
/// gradient in this module is the density of D_xi V.
class NonlinearUtility {
 public:
  enum class Kind { kKlFinal, kCustom };
  using Integrand = std::function<double(double x, double p)>;

  /// U = KL(q_T || q_0) on the normalized filter.
  static NonlinearUtility kl_final() { return NonlinearUtility(Kind::kKlFinal); }

  /// Local integrands of the unnormalized density, each with its p-derivative. The derivatives are
  /// spot-checked against central differences on random points of [x_min, x_max] x [p_min, p_max].
  static NonlinearUtility custom(Integrand u_final, Integrand du_final, Integrand u_int, Integrand du_int,
                                 double x_min, double x_max, double p_min = 0.05, double p_max = 2.0) {
    NonlinearUtility u(Kind::kCustom);
    u.u_final_ = std::move(u_final);
    u.du_final_ = std::move(du_final);
    u.u_int_ = std::move(u_int);
    u.du_int_ = std::move(du_int);
    detail::require<InvalidParameter>(u.u_final_ && u.du_final_, "NonlinearUtility: final integrand required");
    detail::require<InvalidParameter>(static_cast<bool>(u.u_int_) == static_cast<bool>(u.du_int_),
                                      "NonlinearUtility: running integrand needs its derivative");
    check_derivative(u.u_final_, u.du_final_, x_min, x_max, p_min, p_max, "final");
    if (u.u_int_) check_derivative(u.u_int_, u.du_int_, x_min, x_max, p_min, p_max, "running");
    return u;
  }

  Kind kind() const { return kind_; }
  bool has_running_term() const { return kind_ == Kind::kCustom && static_cast<bool>(u_int_); }

  /// U evaluated on a filter trajectory; the running term uses the left-point rule in time.
  double value(const FilterTrajectory& traj, const DensityField& prior) const {
    if (kind_ == Kind::kKlFinal) return kl_divergence(normalize(traj.final()), prior);
    const SpaceGrid& space = traj.space;
    const Eigen::VectorXd w = space.weights();
    auto integrate = [&](const Integrand& u, const Eigen::VectorXd& l) {
      double s = 0.0;
      for (int j = 0; j < space.n_points(); ++j) s += w[j] * u(space.x(j), std::exp(l[j]));
      return s;
    };
    double total = integrate(u_final_, traj.log_values.back());
    if (u_int_) {
      const double dt = traj.grid.dt();
      for (std::size_t k = 0; k + 1 < traj.log_values.size(); ++k) total += dt * integrate(u_int_, traj.log_values[k]);
    }
    return total;
  }

  /// p D_p u_final(x, p) at each node.
  Eigen::VectorXd final_source(const SpaceGrid& space, const Eigen::VectorXd& l) const {
    return source(du_final_, space, l);
  }

  /// p D_p u_int(x, p) at each node (zero without a running term).
  Eigen::VectorXd running_source(const SpaceGrid& space, const Eigen::VectorXd& l) const {
    if (!has_running_term()) return Eigen::VectorXd::Zero(space.n_points());
    return source(du_int_, space, l);
  }

 private:
  explicit NonlinearUtility(Kind kind) : kind_(kind) {}

  static Eigen::VectorXd source(const Integrand& du, const SpaceGrid& space, const Eigen::VectorXd& l) {
    Eigen::VectorXd s(space.n_points());
    for (int j = 0; j < space.n_points(); ++j) {
      const double p = std::exp(l[j]);
      s[j] = p * du(space.x(j), p);
    }
    return s;
  }

  static void check_derivative(const Integrand& u, const Integrand& du, double x_min, double x_max, double p_min,
                               double p_max, const char* which) {
    std::mt19937_64 rng(0x5eedULL);
    std::uniform_real_distribution<double> ux(x_min, x_max), up(p_min, p_max);
    for (int i = 0; i < 16; ++i) {
      const double x = ux(rng), p = up(rng);
      const double h = 1e-6 * std::max(1.0, std::abs(p));
      const double fd = (u(x, p + h) - u(x, p - h)) / (2.0 * h);
      const double an = du(x, p);
      if (!(std::abs(fd - an) <= 1e-5 * (1.0 + std::abs(an)))) {
        throw InvalidParameter(std::string("NonlinearUtility: ") + which +
                               " derivative disagrees with finite differences at x=" + std::to_string(x) +
                               ", p=" + std::to_string(p));
      }
    }
  }

  Kind kind_;
  Integrand u_final_, du_final_, u_int_, du_int_;
};

/// lambda_T = p_T D u_final. For KL this is q_T [log(q_T/q_0) - KL(q_T||q_0)], which integrates to zero.
inline AdjointField terminal_adjoint(const LogDensityField& p_final, const DensityField& prior,
                                     const NonlinearUtility& utility) {
  require_same_space(p_final.space, prior.space, "terminal_adjoint");
  if (utility.kind() == NonlinearUtility::Kind::kCustom) {
    return {p_final.space, utility.final_source(p_final.space, p_final.log_values)};
  }
  const DensityField q = normalize(p_final);
  const int n = q.space.n_points();
  Eigen::VectorXd log_ratio = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (q.values[j] == 0.0) continue;
    if (!(prior.values[j] > 0.0)) throw SupportError("terminal_adjoint: prior vanishes where q_T > 0");
    log_ratio[j] = std::log(q.values[j] / prior.values[j]);
  }
  const Eigen::VectorXd w = q.space.weights();
  const double kl = (w.array() * q.values.array() * log_ratio.array()).sum();
  Eigen::VectorXd lam = (q.values.array() * (log_ratio.array() - kl)).matrix();
  // Remove the rounding residue so the centering holds to machine precision.
  lam -= q.values * w.dot(lam);
  return {q.space, lam};
}

/// One backward step of d lambda/dt = -p D u_int - div(lambda [f - Sigma grad log p] + Sigma grad lambda / 2),
/// from node k+1 to node k, where `coefficients` and `log_p` belong to node k.
inline Eigen::VectorXd adjoint_step_backward(const Eigen::VectorXd& lam, const Eigen::VectorXd& log_p,
                                             const StepCoefficients& coefficients, const SpaceGrid& space,
                                             const NonlinearUtility& utility, double dt) {
  Eigen::VectorXd next = lam;
  if (!coefficients.generator.is_zero) {
    next += dt * detail::generator_ratio_adjoint(coefficients.generator, log_p, lam, space.weights());
  }
  if (utility.has_running_term()) next += dt * utility.running_source(space, log_p);
  if (!next.allFinite()) throw NumericalBlowup("adjoint step produced non-finite values", coefficients.t);
  return next;
}

/// Convenience overload on fields; marches lambda from t to t - dt with the filter state at t - dt.
inline AdjointField adjoint_step_backward(const AdjointField& lam, const LogDensityField& p_prev,
                                          const SignalModel& signal, const ObservationModel& obs,
                                          const NonlinearUtility& utility, double t, double dt) {
  require_same_space(lam.space, p_prev.space, "adjoint_step_backward");
  const StepCoefficients c = step_coefficients(signal, obs, lam.space, t - dt, dt);
  return {lam.space, adjoint_step_backward(lam.values, p_prev.log_values, c, lam.space, utility, dt)};
}

inline AdjointTrajectory solve_adjoint(const ZakaiDiscretization& disc, const FilterTrajectory& traj,
                                       const DensityField& prior, const NonlinearUtility& utility) {
  require_same_grid(disc.grid(), traj.grid, "solve_adjoint");
  const int n = traj.grid.n_steps();
  detail::require<GridMismatch>(static_cast<int>(traj.log_values.size()) == n + 1,
                                "solve_adjoint: filter trajectory does not cover the horizon");
  AdjointTrajectory adj{traj.space, traj.grid, std::vector<Eigen::VectorXd>(n + 1)};
  adj.values[n] = terminal_adjoint(traj.final(), prior, utility).values;
  for (int k = n - 1; k >= 0; --k) {
    adj.values[k] = adjoint_step_backward(adj.values[k + 1], traj.log_values[k], disc.cell(k), traj.space, utility,
                                          traj.grid.dt());
  }
  return adj;
}

/// Single-replicate gradient density:
/// eta_k = int lambda(x) ( -g(x)^T Gamma^{-1} g(X(t_k)) + |g(x)|^2_{Gamma^{-1}} / 2 ) dx, with lambda taken
/// just after cell k is assimilated (node k+1), which is where the cell's data enters the filter.
inline GradientField gradient_replicate(const AdjointTrajectory& adj, const FilterTrajectory& traj,
                                        const SignalPath& signal, const ObservationModel& obs,
                                        const ZakaiDiscretization& disc) {
  require_same_grid(adj.grid, traj.grid, "gradient_replicate");
  require_same_grid(adj.grid, signal.grid, "gradient_replicate");
  require_same_grid(adj.grid, disc.grid(), "gradient_replicate");
  require_same_space(adj.space, traj.space, "gradient_replicate");
  const int n = adj.grid.n_steps();
  detail::require<GridMismatch>(static_cast<int>(adj.values.size()) == n + 1 &&
                                    static_cast<int>(traj.log_values.size()) == n + 1,
                                "gradient_replicate: trajectories are not aligned");
  const Eigen::VectorXd w = adj.space.weights();
  Eigen::VectorXd eta(n);
  for (int k = 0; k < n; ++k) {
    const StepCoefficients& c = disc.cell(k);
    const Eigen::VectorXd g_true = obs.g(signal.states[k], c.t);
    const Eigen::VectorXd integrand = -(c.weighted_g.transpose() * g_true) + c.half_norm;
    eta[k] = (w.array() * adj.values[k + 1].array() * integrand.array()).sum();
  }
  return {adj.grid, eta};
}

/// How finite-difference perturbations of the schedule reuse randomness.
enum class NoiseCoupling {
  /// Reuse the standard normals eps_k; the observation noise sqrt(xi dt) Gamma^{1/2} eps_k follows xi.
  kBrownian,
  /// Reuse the realized measurement-noise increments of the base schedule; only g(X) xi dt follows xi.
  kFrozenMeasurementNoise,
};

/// Nonlinear scheduling problem on a one-dimensional state space.
class NonlinearProblem {
 public:
  NonlinearProblem(SignalModel signal, ObservationModel obs, SpaceGrid space, DensityField prior,
                   NonlinearUtility utility, TimeGrid grid, int n_replicates = 1)
      : signal_(std::move(signal)),
        obs_(std::move(obs)),
        prior_(std::move(prior)),
        utility_(std::move(utility)),
        n_replicates_(n_replicates),
        disc_(std::make_shared<ZakaiDiscretization>(signal_, obs_, space, grid)) {
    require_same_space(space, prior_.space, "NonlinearProblem");
    detail::require<InvalidParameter>(prior_.values.minCoeff() > 0.0, "NonlinearProblem: prior must be positive");
    detail::require<InvalidParameter>(n_replicates >= 1, "NonlinearProblem: need at least one replicate");
    log_prior_ = prior_.values.array().log().matrix();
  }

  const SignalModel& signal() const { return signal_; }
  const ObservationModel& obs() const { return obs_; }
  const SpaceGrid& space() const { return disc_->space(); }
  const TimeGrid& grid() const { return disc_->grid(); }
  const DensityField& prior() const { return prior_; }
  LogDensityField log_prior() const { return {space(), log_prior_}; }
  const NonlinearUtility& utility() const { return utility_; }
  const ZakaiDiscretization& discretization() const { return *disc_; }
  int n_replicates() const { return n_replicates_; }
  void set_n_replicates(int n) {
    detail::require<InvalidParameter>(n >= 1, "NonlinearProblem: need at least one replicate");
    n_replicates_ = n;
  }

 private:
  SignalModel signal_;
  ObservationModel obs_;
  DensityField prior_;
  NonlinearUtility utility_;
  int n_replicates_;
  std::shared_ptr<const ZakaiDiscretization> disc_;
  Eigen::VectorXd log_prior_;
};

/// Signal path and observation noise of one Monte-Carlo replicate.
struct Replicate {
  SignalPath signal;
  ObservationPath noise;
  std::uint64_t noise_seed;
};

inline Replicate draw_replicate(const NonlinearProblem& problem, const SensorSchedule& xi, std::uint64_t master_seed,
                                std::uint64_t index) {
  const std::uint64_t noise_seed = sub_seed(master_seed, index, Stream::kObservationNoise);
  return {simulate_signal(problem.signal(), problem.grid(), sub_seed(master_seed, index, Stream::kSignalNoise)),
          simulate_observation_noise(problem.obs(), xi, noise_seed), noise_seed};
}

/// Observations of `xi` on a replicate drawn for some base schedule, under the given coupling.
inline ObservationPath observe_replicate(const NonlinearProblem& problem, const Replicate& rep,
                                         const SensorSchedule& xi, NoiseCoupling coupling) {
  if (coupling == NoiseCoupling::kFrozenMeasurementNoise) return observe(rep.signal, problem.obs(), xi, rep.noise);
  return observe(rep.signal, problem.obs(), xi, simulate_observation_noise(problem.obs(), xi, rep.noise_seed));
}

struct ReplicateResult {
  FilterTrajectory filter;
  double utility;
  GradientField gradient;
};

inline ReplicateResult solve_replicate(const NonlinearProblem& problem, const SensorSchedule& xi,
                                       const Replicate& rep) {
  const auto& disc = problem.discretization();
  const ObservationPath path = observe(rep.signal, problem.obs(), xi, rep.noise);
  FilterTrajectory traj = run_filter(disc, xi, path, problem.log_prior());
  const double u = problem.utility().value(traj, problem.prior());
  const AdjointTrajectory adj = solve_adjoint(disc, traj, problem.prior(), problem.utility());
  GradientField eta = gradient_replicate(adj, traj, rep.signal, problem.obs(), disc);
  return {std::move(traj), u, std::move(eta)};
}

/// Plain Monte-Carlo average of single-replicate gradients, summed in replicate order.
inline GradientField monte_carlo_gradient(const NonlinearProblem& problem, const SensorSchedule& xi,
                                          int n_replicates, std::uint64_t master_seed,
                                          std::vector<GradientField>* per_replicate = nullptr) {
  detail::require<InvalidParameter>(n_replicates >= 1, "monte_carlo_gradient: need at least one replicate");
  require_same_grid(problem.grid(), xi.grid(), "monte_carlo_gradient");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(xi.grid().n_steps());
  for (int n = 0; n < n_replicates; ++n) {
    const Replicate rep = draw_replicate(problem, xi, master_seed, static_cast<std::uint64_t>(n));
    ReplicateResult r = solve_replicate(problem, xi, rep);
    sum += r.gradient.values;
    if (per_replicate) per_replicate->push_back(std::move(r.gradient));
  }
  return {xi.grid(), sum / static_cast<double>(n_replicates)};
}

/// Seed-fixed Monte-Carlo objective V = -(1/N) sum_n U(p^(n)) for `xi` on replicates drawn at `base`.
inline double nonlinear_objective(const NonlinearProblem& problem, const SensorSchedule& xi,
                                  const std::vector<Replicate>& replicates, NoiseCoupling coupling) {
  double sum = 0.0;
  for (const auto& rep : replicates) {
    const ObservationPath path = observe_replicate(problem, rep, xi, coupling);
    const FilterTrajectory traj = run_filter(problem.discretization(), xi, path, problem.log_prior());
    sum += problem.utility().value(traj, problem.prior());
  }
  return -sum / static_cast<double>(replicates.size());
}

inline std::vector<Replicate> draw_replicates(const NonlinearProblem& problem, const SensorSchedule& xi, int n,
                                              std::uint64_t master_seed) {
  std::vector<Replicate> reps;
  reps.reserve(n);
  for (int i = 0; i < n; ++i) reps.push_back(draw_replicate(problem, xi, master_seed, static_cast<std::uint64_t>(i)));
  return reps;
}

inline csv::Table to_table(const AdjointTrajectory& adj, int stride = 1) {
  csv::Table t{{"t", "x", "lambda"}, {{}, {}, {}}};
  for (std::size_t k = 0; k < adj.values.size(); k += stride) {
    for (int j = 0; j < adj.space.n_points(); ++j) {
      t.columns[0].push_back(adj.grid.node(static_cast<int>(k)));
      t.columns[1].push_back(adj.space.x(j));
      t.columns[2].push_back(adj.values[k][j]);
    }
  }
  return t;
}

}  // namespace schedopt
