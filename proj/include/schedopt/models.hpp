#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "schedopt/adjoint.hpp"
#include "schedopt/error.hpp"
#include "schedopt/kalman_bucy.hpp"
#include "schedopt/rng.hpp"
#include "schedopt/schedule.hpp"
#include "schedopt/sde.hpp"
#include "schedopt/zakai.hpp"

namespace schedopt {

/// Constant unknown growth rate X = x0 observed through g(x, t) = e^{xt} / (1/z0 - 1 + e^{xt}).
struct LogisticParams {
  double x0 = 1.0;                        // prior mean of the growth rate
  double z0 = 1.0 / (1.0 + std::exp(3.0));  // initial concentration
  double prior_std = 0.25;
  double gamma = 0.1;
  double t_end = 6.0;
  int n_steps = 120;
  double x_min = -0.5;
  double x_max = 2.5;
  int n_space = 151;
  int replicates = 1;

  void validate() const {
    detail::require<InvalidParameter>(z0 > 0.0 && z0 < 1.0, "logistic: z0 must lie in (0, 1)");
    detail::require<InvalidParameter>(prior_std > 0.0, "logistic: prior_std must be positive");
    detail::require<InvalidParameter>(gamma > 0.0, "logistic: gamma must be positive");
    detail::require<InvalidParameter>(x_min < x0 && x0 < x_max, "logistic: prior mean outside the space grid");
  }
};

/// Logistic curve, written to stay finite for large x t.
inline double logistic_curve(double x, double t, double z0) {
  return 1.0 / (1.0 + (1.0 / z0 - 1.0) * std::exp(-x * t));
}

inline SignalModel logistic_signal(const LogisticParams& p) {
  SignalModel s;
  s.dim = 1;
  s.drift = [](const Eigen::VectorXd& x, double) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(x.size()); };
  s.diffusion_sqrt = [](double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(1, 1); };
  const double mean = p.x0, std = p.prior_std;
  s.initial_sampler = [mean, std](std::uint64_t seed) -> Eigen::VectorXd {
    NormalSource normal(seed);
    return Eigen::VectorXd::Constant(1, mean + std * normal());
  };
  return s;
}

inline ObservationModel logistic_observation(const LogisticParams& p) {
  ObservationModel o;
  o.obs_dim = 1;
  const double z0 = p.z0;
  o.g = [z0](const Eigen::VectorXd& x, double t) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(1, logistic_curve(x[0], t, z0));
  };
  const double var = p.gamma * p.gamma;
  o.gamma = [var](double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Constant(1, 1, var); };
  return o;
}

inline NonlinearProblem logistic_problem(const LogisticParams& p) {
  p.validate();
  const SpaceGrid space(p.x_min, p.x_max, p.n_space);
  return NonlinearProblem(logistic_signal(p), logistic_observation(p), space,
                          gaussian_density(space, p.x0, p.prior_std * p.prior_std), NonlinearUtility::kl_final(),
                          TimeGrid(p.t_end, p.n_steps), p.replicates);
}

/// Two independent random walks; H = (1, 0) before t_switch and (0, 1) from t_switch on.
struct Linear2dParams {
  double sigma = 1.0;
  double gamma = 0.5;
  double prior_var = 1.0;
  double t_switch = 3.0;
  double t_end = 6.0;
  int n_steps = 600;
};

inline LinearGaussianModel linear2d_model(const Linear2dParams& p) {
  detail::require<InvalidParameter>(p.sigma >= 0.0 && p.gamma > 0.0 && p.prior_var > 0.0,
                                    "linear2d: sigma >= 0, gamma > 0 and prior_var > 0 required");
  LinearGaussianModel m;
  m.dim = 2;
  m.obs_dim = 1;
  m.L = [](double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(2, 2); };
  const double s2 = p.sigma * p.sigma;
  m.Sigma = [s2](double) -> Eigen::MatrixXd { return s2 * Eigen::MatrixXd::Identity(2, 2); };
  const double ts = p.t_switch;
  m.H = [ts](double t) -> Eigen::MatrixXd {
    Eigen::MatrixXd h(1, 2);
    if (t < ts) {
      h << 1.0, 0.0;
    } else {
      h << 0.0, 1.0;
    }
    return h;
  };
  const double g2 = p.gamma * p.gamma;
  m.Gamma = [g2](double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Constant(1, 1, g2); };
  m.m0 = Eigen::VectorXd::Zero(2);
  m.C0 = p.prior_var * Eigen::MatrixXd::Identity(2, 2);
  return m;
}

inline LinearGaussianProblem linear2d_problem(const Linear2dParams& p) {
  return LinearGaussianProblem(linear2d_model(p), MatrixUtility::TraceIntegrated(), TimeGrid(p.t_end, p.n_steps));
}

}  // namespace schedopt
