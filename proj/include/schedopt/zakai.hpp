#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "schedopt/error.hpp"
#include "schedopt/schedule.hpp"
#include "schedopt/sde.hpp"

namespace schedopt {

/// Uniform nodes x_0 = x_min, ..., x_{n-1} = x_max.
class SpaceGrid {
 public:
  SpaceGrid(double x_min, double x_max, int n_points) : x_min_(x_min), x_max_(x_max), n_points_(n_points) {
    detail::require<InvalidParameter>(std::isfinite(x_min) && std::isfinite(x_max) && x_min < x_max,
                                      "SpaceGrid: need x_min < x_max");
    detail::require<InvalidParameter>(n_points >= 8, "SpaceGrid: need at least 8 points");
  }

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  int n_points() const { return n_points_; }
  double dx() const { return (x_max_ - x_min_) / (n_points_ - 1); }
  double x(int j) const { return j == n_points_ - 1 ? x_max_ : x_min_ + j * dx(); }

  Eigen::VectorXd nodes() const {
    Eigen::VectorXd v(n_points_);
    for (int j = 0; j < n_points_; ++j) v[j] = x(j);
    return v;
  }

  /// Trapezoid quadrature weights.
  Eigen::VectorXd weights() const {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n_points_, dx());
    w[0] *= 0.5;
    w[n_points_ - 1] *= 0.5;
    return w;
  }

  double integrate(const Eigen::VectorXd& values) const { return weights().dot(values); }

  friend bool operator==(const SpaceGrid& a, const SpaceGrid& b) {
    return a.x_min_ == b.x_min_ && a.x_max_ == b.x_max_ && a.n_points_ == b.n_points_;
  }

 private:
  double x_min_;
  double x_max_;
  int n_points_;
};

inline void require_same_space(const SpaceGrid& a, const SpaceGrid& b, const char* where) {
  if (!(a == b)) throw GridMismatch(std::string(where) + ": space grids differ");
}

/// log p_t on the space grid; p_t is unnormalized.
struct LogDensityField {
  LogDensityField(SpaceGrid space, Eigen::VectorXd log_values) : space(space), log_values(std::move(log_values)) {
    detail::require<InvalidInput>(this->log_values.size() == space.n_points(), "LogDensityField: one value per node");
  }

  SpaceGrid space;
  Eigen::VectorXd log_values;
};

/// Normalized density: nonnegative with unit trapezoid integral.
struct DensityField {
  DensityField(SpaceGrid space, Eigen::VectorXd values) : space(space), values(std::move(values)) {
    detail::require<InvalidInput>(this->values.size() == space.n_points(), "DensityField: one value per node");
    detail::require<InvalidInput>(this->values.allFinite() && this->values.minCoeff() >= 0.0,
                                  "DensityField: values must be finite and nonnegative");
    detail::require<InvalidInput>(std::abs(space.integrate(this->values) - 1.0) <= 1e-8,
                                  "DensityField: integral must be one");
  }

  SpaceGrid space;
  Eigen::VectorXd values;
};

struct Moments {
  double mean;
  double variance;
};

inline LogDensityField gaussian_log_density(const SpaceGrid& space, double mean, double variance) {
  detail::require<InvalidParameter>(variance > 0.0, "gaussian_log_density: variance must be positive");
  Eigen::VectorXd v(space.n_points());
  for (int j = 0; j < space.n_points(); ++j) {
    const double d = space.x(j) - mean;
    v[j] = -0.5 * d * d / variance;
  }
  return {space, v};
}

/// exp(log p - max) divided by its trapezoid integral; invariant under constant shifts of log p.
inline DensityField normalize(const LogDensityField& logp) {
  const auto& l = logp.log_values;
  detail::require<InvalidInput>(!l.hasNaN(), "normalize: NaN in log density");
  const double top = l.maxCoeff();
  if (!std::isfinite(top)) throw DegenerateDensity("normalize: log density has no finite maximum");
  Eigen::VectorXd q = (l.array() - top).exp().matrix();
  const double z = logp.space.integrate(q);
  if (!(z > 0.0) || !std::isfinite(z)) throw DegenerateDensity("normalize: zero or infinite mass");
  return {logp.space, q / z};
}

inline DensityField gaussian_density(const SpaceGrid& space, double mean, double variance) {
  return normalize(gaussian_log_density(space, mean, variance));
}

/// KL(q || q0) by trapezoid quadrature with 0 log 0 = 0.
inline double kl_divergence(const DensityField& q, const DensityField& q0) {
  require_same_space(q.space, q0.space, "kl_divergence");
  const Eigen::VectorXd w = q.space.weights();
  double kl = 0.0;
  for (int j = 0; j < q.space.n_points(); ++j) {
    if (q.values[j] == 0.0) continue;
    if (!(q0.values[j] > 0.0)) throw SupportError("kl_divergence: reference density vanishes where q > 0");
    kl += w[j] * q.values[j] * std::log(q.values[j] / q0.values[j]);
  }
  return kl;
}

inline Moments moments(const DensityField& q) {
  const Eigen::VectorXd w = q.space.weights();
  const Eigen::VectorXd x = q.space.nodes();
  const Eigen::ArrayXd wq = (w.array() * q.values.array());
  const double mean = (wq * x.array()).sum();
  const double variance = (wq * (x.array() - mean).square()).sum();
  return {mean, variance};
}

namespace detail {

/// Tridiagonal finite-volume discretization M of the Fokker-Planck operator L*.
/// (M p)_j = sum_i M_ji p_i with lower_j = M_{j,j-1}, upper_j = M_{j,j+1}.
struct Tridiagonal {
  Eigen::VectorXd lower;
  Eigen::VectorXd diag;
  Eigen::VectorXd upper;
  bool is_zero = true;
};

inline void require_scalar_signal(const SignalModel& signal) {
  detail::require<InvalidParameter>(signal.dim == 1, "log-Zakai filter: only one-dimensional signals are supported");
  detail::require<InvalidParameter>(!signal.state_diffusion,
                                    "log-Zakai filter: state-dependent diffusion is not supported");
  detail::require<InvalidParameter>(static_cast<bool>(signal.drift) && static_cast<bool>(signal.diffusion_sqrt),
                                    "log-Zakai filter: incomplete signal model");
}

/// Upwind advection and central diffusion with zero-flux boundaries; node j controls a cell of
/// trapezoid width w_j so the scheme conserves the trapezoid integral of p.
inline Tridiagonal fokker_planck_operator(const SignalModel& signal, const SpaceGrid& space, double t, double dt) {
  require_scalar_signal(signal);
  const int n = space.n_points();
  const double dx = space.dx();
  const Eigen::VectorXd w = space.weights();
  const double sigma = signal.sigma(t)(0, 0);
  if (!std::isfinite(sigma) || sigma < 0.0) throw NumericalBlowup("fokker_planck_operator: invalid diffusion", t);

  Eigen::VectorXd a(n - 1), b(n - 1);  // flux_{j+1/2} = a_j p_j + b_j p_{j+1}
  double max_speed = 0.0;
  for (int j = 0; j + 1 < n; ++j) {
    Eigen::VectorXd xm(1);
    xm[0] = 0.5 * (space.x(j) + space.x(j + 1));
    const double f = signal.drift(xm, t)[0];
    if (!std::isfinite(f)) throw NumericalBlowup("fokker_planck_operator: non-finite drift", t);
    max_speed = std::max(max_speed, std::abs(f));
    a[j] = std::max(f, 0.0) + 0.5 * sigma / dx;
    b[j] = std::min(f, 0.0) - 0.5 * sigma / dx;
  }
  if (max_speed * dt / dx > 1.0) {
    throw ConfigurationError("log-Zakai filter: advection CFL violated (max|f| dt/dx = " +
                             std::to_string(max_speed * dt / dx) + ")");
  }
  if (sigma > 0.0 && sigma * dt / (dx * dx) > 0.5) {
    throw ConfigurationError("log-Zakai filter: diffusion CFL violated (Sigma dt/dx^2 = " +
                             std::to_string(sigma * dt / (dx * dx)) + ")");
  }

  Tridiagonal m{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), true};
  for (int j = 0; j < n; ++j) {
    if (j > 0) {
      m.lower[j] = a[j - 1] / w[j];
      m.diag[j] += b[j - 1] / w[j];
    }
    if (j + 1 < n) {
      m.diag[j] -= a[j] / w[j];
      m.upper[j] = -b[j] / w[j];
    }
  }
  m.is_zero = m.lower.isZero(0.0) && m.diag.isZero(0.0) && m.upper.isZero(0.0);
  return m;
}

/// (L* p)_j / p_j evaluated through ratios p_i / p_j = exp(l_i - l_j), which equals the
/// max-shifted computation but never divides by an underflowed p_j.
inline Eigen::VectorXd generator_ratio(const Tridiagonal& m, const Eigen::VectorXd& l) {
  const auto n = l.size();
  Eigen::VectorXd r = m.diag;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j > 0) r[j] += m.lower[j] * std::exp(l[j - 1] - l[j]);
    if (j + 1 < n) r[j] += m.upper[j] * std::exp(l[j + 1] - l[j]);
  }
  return r;
}

/// Transpose (in the trapezoid inner product) of the linearization of generator_ratio at l, applied to lam.
/// This is the discrete form of div(lam [f - Sigma grad log p] + Sigma grad lam / 2).
inline Eigen::VectorXd generator_ratio_adjoint(const Tridiagonal& m, const Eigen::VectorXd& l,
                                               const Eigen::VectorXd& lam, const Eigen::VectorXd& w) {
  const auto n = l.size();
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;   // sum over rows j != i of J_ji w_j lam_j
    double self = 0.0;  // -sum_{m != i} M_im exp(l_m - l_i)
    if (i > 0) {
      off += m.upper[i - 1] * std::exp(l[i] - l[i - 1]) * w[i - 1] * lam[i - 1];
      self -= m.lower[i] * std::exp(l[i - 1] - l[i]);
    }
    if (i + 1 < n) {
      off += m.lower[i + 1] * std::exp(l[i] - l[i + 1]) * w[i + 1] * lam[i + 1];
      self -= m.upper[i] * std::exp(l[i + 1] - l[i]);
    }
    out[i] = (off + self * w[i] * lam[i]) / w[i];
  }
  return out;
}

}  // namespace detail

/// Everything a log-Zakai step needs at one time node, precomputed once per problem.
struct StepCoefficients {
  double t = 0.0;
  detail::Tridiagonal generator;
  Eigen::MatrixXd g;           // obs_dim x n_points, g(x_j, t)
  Eigen::MatrixXd gamma_inv;   // obs_dim x obs_dim
  Eigen::MatrixXd weighted_g;  // Gamma^{-1} g
  Eigen::VectorXd half_norm;   // g_j^T Gamma^{-1} g_j / 2
};

inline StepCoefficients step_coefficients(const SignalModel& signal, const ObservationModel& obs,
                                          const SpaceGrid& space, double t, double dt) {
  StepCoefficients c;
  c.t = t;
  c.generator = detail::fokker_planck_operator(signal, space, t, dt);
  c.gamma_inv = obs.gamma_inv(t);
  c.g.resize(obs.obs_dim, space.n_points());
  Eigen::VectorXd x(1);
  for (int j = 0; j < space.n_points(); ++j) {
    x[0] = space.x(j);
    const Eigen::VectorXd gj = obs.g(x, t);
    detail::require<InvalidParameter>(gj.size() == obs.obs_dim, "observation map returned wrong dimension");
    if (!gj.allFinite()) throw NumericalBlowup("log-Zakai filter: non-finite observation map", t);
    c.g.col(j) = gj;
  }
  c.weighted_g = c.gamma_inv * c.g;
  c.half_norm = 0.5 * (c.g.array() * c.weighted_g.array()).colwise().sum().transpose();
  return c;
}

/// Explicit Euler log-Zakai update with precomputed coefficients.
inline Eigen::VectorXd apply_log_zakai_step(const StepCoefficients& c, const Eigen::VectorXd& l,
                                            const Eigen::VectorXd& dz, double xi_k, double dt) {
  Eigen::VectorXd next = l - (xi_k * dt) * c.half_norm + c.weighted_g.transpose() * dz;
  if (!c.generator.is_zero) next += dt * detail::generator_ratio(c.generator, l);
  if (!next.allFinite()) throw NumericalBlowup("log-Zakai step produced non-finite values", c.t + dt);
  return next;
}

/// One step of d log p = (L* p / p) dt - |g|^2_{Gamma^{-1}} xi dt / 2 + g^T Gamma^{-1} dZ.
inline LogDensityField log_zakai_step(const LogDensityField& logp, const Eigen::VectorXd& dz, double xi_k,
                                      const SignalModel& signal, const ObservationModel& obs, double t, double dt) {
  detail::require<InvalidInput>(logp.log_values.allFinite(), "log_zakai_step: non-finite log density");
  detail::require<InvalidInput>(dz.allFinite() && std::isfinite(xi_k), "log_zakai_step: non-finite data");
  const StepCoefficients c = step_coefficients(signal, obs, logp.space, t, dt);
  return {logp.space, apply_log_zakai_step(c, logp.log_values, dz, xi_k, dt)};
}

/// Precomputed per-cell coefficients of the filter on fixed space and time grids.
class ZakaiDiscretization {
 public:
  ZakaiDiscretization(const SignalModel& signal, const ObservationModel& obs, SpaceGrid space, TimeGrid grid)
      : space_(space), grid_(grid) {
    detail::require_scalar_signal(signal);
    cells_.reserve(grid.n_steps());
    for (int k = 0; k < grid.n_steps(); ++k) {
      cells_.push_back(step_coefficients(signal, obs, space, grid.node(k), grid.dt()));
    }
  }

  const SpaceGrid& space() const { return space_; }
  const TimeGrid& grid() const { return grid_; }
  const StepCoefficients& cell(int k) const { return cells_[k]; }

 private:
  SpaceGrid space_;
  TimeGrid grid_;
  std::vector<StepCoefficients> cells_;
};

/// log p at every node time, kept for the backward pass.
struct FilterTrajectory {
  SpaceGrid space;
  TimeGrid grid;
  std::vector<Eigen::VectorXd> log_values;

  LogDensityField at(int k) const { return {space, log_values.at(k)}; }
  LogDensityField final() const { return {space, log_values.back()}; }
};

inline FilterTrajectory run_filter(const ZakaiDiscretization& disc, const SensorSchedule& xi,
                                   const ObservationPath& path, const LogDensityField& log_prior,
                                   std::optional<int> n_cells = std::nullopt) {
  require_same_grid(disc.grid(), xi.grid(), "run_filter");
  require_same_grid(path.grid, xi.grid(), "run_filter");
  require_same_space(disc.space(), log_prior.space, "run_filter");
  detail::require<InvalidInput>(log_prior.log_values.allFinite(), "run_filter: prior must be positive on the grid");
  const int cells = n_cells.value_or(xi.grid().n_steps());
  detail::require<InvalidParameter>(cells >= 0 && cells <= xi.grid().n_steps(), "run_filter: bad cell count");
  FilterTrajectory traj{disc.space(), disc.grid(), {}};
  traj.log_values.reserve(cells + 1);
  traj.log_values.push_back(log_prior.log_values);
  const double dt = xi.grid().dt();
  for (int k = 0; k < cells; ++k) {
    traj.log_values.push_back(
        apply_log_zakai_step(disc.cell(k), traj.log_values.back(), path.increments[k], xi[k], dt));
  }
  return traj;
}

inline FilterTrajectory run_filter(const SignalModel& signal, const ObservationModel& obs, const SensorSchedule& xi,
                                   const ObservationPath& path, const DensityField& prior,
                                   std::optional<int> n_cells = std::nullopt) {
  detail::require<InvalidInput>(prior.values.minCoeff() > 0.0, "run_filter: prior must be positive on the grid");
  const ZakaiDiscretization disc(signal, obs, prior.space, xi.grid());
  return run_filter(disc, xi, path, LogDensityField(prior.space, prior.values.array().log().matrix()), n_cells);
}

/// Rows (t, x, q_t(x)) for plotting.
inline csv::Table to_table(const FilterTrajectory& traj, int stride = 1) {
  csv::Table t{{"t", "x", "q"}, {{}, {}, {}}};
  for (std::size_t k = 0; k < traj.log_values.size(); k += stride) {
    const DensityField q = normalize(traj.at(static_cast<int>(k)));
    for (int j = 0; j < traj.space.n_points(); ++j) {
      t.columns[0].push_back(traj.grid.node(static_cast<int>(k)));
      t.columns[1].push_back(traj.space.x(j));
      t.columns[2].push_back(q.values[j]);
    }
  }
  return t;
}

inline csv::Table to_table(const DensityField& q) {
  csv::Table t{{"x", "q"}, {{}, {}}};
  for (int j = 0; j < q.space.n_points(); ++j) {
    t.columns[0].push_back(q.space.x(j));
    t.columns[1].push_back(q.values[j]);
  }
  return t;
}

}  // namespace schedopt
