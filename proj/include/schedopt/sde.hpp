#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "schedopt/csv.hpp"
#include "schedopt/error.hpp"
#include "schedopt/rng.hpp"
#include "schedopt/schedule.hpp"

namespace schedopt {

/// dX = f(X, t) dt + Sigma^{1/2}(t) dB with X(0) drawn from a prior.
struct SignalModel {
  int dim = 1;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> drift;
  /// n x m matrix; the process noise covariance is Sigma = S S^T.
  std::function<Eigen::MatrixXd(double)> diffusion_sqrt;
  std::function<Eigen::VectorXd(std::uint64_t)> initial_sampler;
  /// Optional state-dependent diffusion; only simulation honours it, filters and gradients reject it.
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> state_diffusion;

  Eigen::MatrixXd sigma(double t) const {
    const Eigen::MatrixXd s = diffusion_sqrt(t);
    return s * s.transpose();
  }
};

/// dZ = g(X, t) xi(t) dt + sqrt(xi(t)) Gamma^{1/2}(t) dW.
struct ObservationModel {
  int obs_dim = 1;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> g;
  std::function<Eigen::MatrixXd(double)> gamma;

  /// Symmetric square root; tolerates a singular (noiseless) Gamma.
  Eigen::MatrixXd gamma_sqrt(double t) const {
    const Eigen::MatrixXd G = gamma(t);
    if (G.size() == 1) return Eigen::MatrixXd::Constant(1, 1, std::sqrt(std::max(0.0, G(0, 0))));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()));
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  }

  /// Inverse of Gamma(t); throws unless Gamma is symmetric positive definite.
  Eigen::MatrixXd gamma_inv(double t) const {
    const Eigen::MatrixXd G = gamma(t);
    detail::require<InvalidParameter>(G.rows() == obs_dim && G.cols() == obs_dim, "ObservationModel: Gamma has wrong shape");
    detail::require<InvalidParameter>((G - G.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + G.cwiseAbs().maxCoeff()),
                                      "ObservationModel: Gamma is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success || G.diagonal().minCoeff() <= 0.0) {
      throw InvalidParameter("ObservationModel: Gamma is not positive definite at t=" + std::to_string(t));
    }
    return llt.solve(Eigen::MatrixXd::Identity(obs_dim, obs_dim));
  }
};

struct SignalPath {
  TimeGrid grid;
  std::vector<Eigen::VectorXd> states;  // one per node
};

struct ObservationPath {
  TimeGrid grid;
  std::vector<Eigen::VectorXd> increments;  // one per cell: Z(t_{k+1}) - Z(t_k)
};

namespace detail {

inline void require_finite(const Eigen::MatrixXd& m, const char* what, double t) {
  if (!m.allFinite()) throw NumericalBlowup(what, t);
}

}  // namespace detail

/// Fixed-step Euler-Maruyama on the grid; deterministic in the seed.
inline SignalPath simulate_signal(const SignalModel& model, const TimeGrid& grid, std::uint64_t seed) {
  detail::require<InvalidParameter>(model.dim >= 1 && model.drift && model.initial_sampler,
                                    "simulate_signal: incomplete signal model");
  detail::require<InvalidParameter>(model.diffusion_sqrt || model.state_diffusion, "simulate_signal: no diffusion");
  SignalPath path{grid, {}};
  path.states.reserve(grid.n_nodes());
  Eigen::VectorXd x = model.initial_sampler(sub_seed(seed, 0, Stream::kInitialState));
  detail::require<InvalidParameter>(x.size() == model.dim, "simulate_signal: prior sample has wrong dimension");
  path.states.push_back(x);
  NormalSource normal(sub_seed(seed, 0, Stream::kSignalNoise));
  const double dt = grid.dt();
  const double sqrt_dt = std::sqrt(dt);
  for (int k = 0; k < grid.n_steps(); ++k) {
    const double t = grid.node(k);
    const Eigen::VectorXd f = model.drift(x, t);
    const Eigen::MatrixXd s = model.state_diffusion ? model.state_diffusion(x, t) : model.diffusion_sqrt(t);
    detail::require_finite(f, "simulate_signal: non-finite drift", t);
    detail::require_finite(s, "simulate_signal: non-finite diffusion", t);
    x = x + f * dt + s * normal.vector(s.cols()) * sqrt_dt;
    detail::require_finite(x, "simulate_signal: state blew up", grid.node(k + 1));
    path.states.push_back(x);
  }
  return path;
}

/// Noise part of the observation increments, sqrt(xi_k dt) Gamma^{1/2}(t_k) eps_k.
inline ObservationPath simulate_observation_noise(const ObservationModel& obs, const SensorSchedule& xi,
                                                  std::uint64_t seed) {
  const TimeGrid& grid = xi.grid();
  ObservationPath noise{grid, {}};
  noise.increments.reserve(grid.n_steps());
  NormalSource normal(seed);
  for (int k = 0; k < grid.n_steps(); ++k) {
    const double t = grid.node(k);
    // Draw even where xi vanishes so the stream stays aligned across schedules.
    const Eigen::VectorXd eps = normal.vector(obs.obs_dim);
    if (xi[k] == 0.0) {
      noise.increments.push_back(Eigen::VectorXd::Zero(obs.obs_dim));
    } else {
      noise.increments.push_back(std::sqrt(xi[k] * grid.dt()) * (obs.gamma_sqrt(t) * eps));
    }
  }
  return noise;
}

/// Adds the signal-driven drift g(X(t_k), t_k) xi_k dt to given noise increments.
inline ObservationPath observe(const SignalPath& signal, const ObservationModel& obs, const SensorSchedule& xi,
                               const ObservationPath& noise) {
  require_same_grid(signal.grid, xi.grid(), "observe");
  require_same_grid(noise.grid, xi.grid(), "observe");
  const TimeGrid& grid = xi.grid();
  ObservationPath path{grid, {}};
  path.increments.reserve(grid.n_steps());
  for (int k = 0; k < grid.n_steps(); ++k) {
    const double t = grid.node(k);
    if (xi[k] == 0.0) {
      path.increments.push_back(Eigen::VectorXd::Zero(obs.obs_dim));
      continue;
    }
    const Eigen::VectorXd gx = obs.g(signal.states[k], t);
    detail::require_finite(gx, "observe: non-finite observation map", t);
    path.increments.push_back(gx * (xi[k] * grid.dt()) + noise.increments[k]);
  }
  return path;
}

inline ObservationPath simulate_observations(const SignalPath& signal, const ObservationModel& obs,
                                             const SensorSchedule& xi, std::uint64_t seed) {
  require_same_grid(signal.grid, xi.grid(), "simulate_observations");
  return observe(signal, obs, xi, simulate_observation_noise(obs, xi, seed));
}

/// Unbiased sample covariance of the cumulative increments at T across paths.
inline Eigen::MatrixXd empirical_increment_covariance(const std::vector<ObservationPath>& paths) {
  detail::require<InvalidInput>(paths.size() >= 2, "empirical_increment_covariance: need at least two paths");
  const auto dim = paths.front().increments.front().size();
  std::vector<Eigen::VectorXd> totals;
  totals.reserve(paths.size());
  for (const auto& p : paths) {
    require_same_grid(p.grid, paths.front().grid, "empirical_increment_covariance");
    Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
    for (const auto& inc : p.increments) total += inc;
    totals.push_back(std::move(total));
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& v : totals) mean += v;
  mean /= static_cast<double>(totals.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& v : totals) cov += (v - mean) * (v - mean).transpose();
  return cov / static_cast<double>(totals.size() - 1);
}

inline csv::Table to_table(const SignalPath& path) {
  csv::Table t;
  t.header.push_back("t");
  const auto dim = path.states.front().size();
  for (Eigen::Index i = 0; i < dim; ++i) t.header.push_back("x" + std::to_string(i));
  t.columns.resize(t.header.size());
  for (int k = 0; k < path.grid.n_nodes(); ++k) {
    t.columns[0].push_back(path.grid.node(k));
    for (Eigen::Index i = 0; i < dim; ++i) t.columns[i + 1].push_back(path.states[k][i]);
  }
  return t;
}

inline csv::Table to_table(const ObservationPath& path) {
  csv::Table t;
  t.header.push_back("t_cell");
  const auto dim = path.increments.front().size();
  for (Eigen::Index i = 0; i < dim; ++i) t.header.push_back("dz" + std::to_string(i));
  t.columns.resize(t.header.size());
  for (int k = 0; k < path.grid.n_steps(); ++k) {
    t.columns[0].push_back(path.grid.node(k));
    for (Eigen::Index i = 0; i < dim; ++i) t.columns[i + 1].push_back(path.increments[k][i]);
  }
  return t;
}

}  // namespace schedopt
