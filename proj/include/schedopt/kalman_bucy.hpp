#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "schedopt/csv.hpp"
#include "schedopt/error.hpp"
#include "schedopt/rng.hpp"
#include "schedopt/schedule.hpp"
#include "schedopt/sde.hpp"

namespace schedopt {

/// dX = L(t) X dt + Sigma^{1/2}(t) dB,  dZ = xi(t) H(t) X dt + sqrt(xi(t)) Gamma^{1/2}(t) dW,  X(0) ~ N(m0, C0).
struct LinearGaussianModel {
  int dim = 1;
  int obs_dim = 1;
  std::function<Eigen::MatrixXd(double)> L;
  std::function<Eigen::MatrixXd(double)> Sigma;
  std::function<Eigen::MatrixXd(double)> H;
  std::function<Eigen::MatrixXd(double)> Gamma;
  Eigen::VectorXd m0;
  Eigen::MatrixXd C0;

  /// H^T Gamma^{-1} H.
  Eigen::MatrixXd A(double t) const {
    const Eigen::MatrixXd h = H(t);
    const Eigen::MatrixXd g = Gamma(t);
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) {
      throw InvalidParameter("LinearGaussianModel: Gamma is not positive definite at t=" + std::to_string(t));
    }
    return h.transpose() * llt.solve(h);
  }

  void validate() const {
    detail::require<InvalidParameter>(dim >= 1 && obs_dim >= 1, "LinearGaussianModel: bad dimensions");
    detail::require<InvalidParameter>(L && Sigma && H && Gamma, "LinearGaussianModel: missing coefficient");
    detail::require<InvalidParameter>(m0.size() == dim, "LinearGaussianModel: m0 has wrong size");
    detail::require<InvalidParameter>(C0.rows() == dim && C0.cols() == dim, "LinearGaussianModel: C0 has wrong shape");
    detail::require<InvalidParameter>((C0 - C0.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
                                      "LinearGaussianModel: C0 must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(C0);
    detail::require<InvalidParameter>(llt.info() == Eigen::Success, "LinearGaussianModel: C0 must be positive definite");
  }
};

/// <<M, N>> = sum_ij M_ij N_ij.
inline double frobenius(const Eigen::MatrixXd& M, const Eigen::MatrixXd& N) {
  detail::require<InvalidInput>(M.rows() == N.rows() && M.cols() == N.cols(), "frobenius: shape mismatch");
  return (M.array() * N.array()).sum();
}

/// Covariance utility: a weighted combination of trace(C(T)), log det C(T) and int_0^T trace(C(t)) dt.
struct MatrixUtility {
  double trace_final = 0.0;
  double logdet_final = 0.0;
  double trace_integrated = 0.0;

  static MatrixUtility TraceFinal() { return {1.0, 0.0, 0.0}; }
  static MatrixUtility LogDetFinal() { return {0.0, 1.0, 0.0}; }
  static MatrixUtility TraceIntegrated() { return {0.0, 0.0, 1.0}; }

  bool has_running_term() const { return trace_integrated != 0.0; }

  double final_value(const Eigen::MatrixXd& C) const {
    double u = trace_final * C.trace();
    if (logdet_final != 0.0) {
      Eigen::LLT<Eigen::MatrixXd> llt(C);
      if (llt.info() != Eigen::Success) throw InvalidInput("MatrixUtility: log det of a singular covariance");
      u += logdet_final * 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }
    return u;
  }

  double running_value(const Eigen::MatrixXd& C) const { return trace_integrated * C.trace(); }
};

/// Derivative of U_final in the symmetric-matrix convention: each off-diagonal entry carries the
/// derivative along the symmetric pair (E_ij + E_ji). trace -> I, log det -> 2 C^{-1} - C^{-1} o I.
inline Eigen::MatrixXd utility_derivative(const Eigen::MatrixXd& C, const MatrixUtility& utility) {
  const auto n = C.rows();
  Eigen::MatrixXd d = utility.trace_final * Eigen::MatrixXd::Identity(n, n);
  if (utility.logdet_final != 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
    if (!lu.isInvertible()) throw InvalidInput("utility_derivative: log det of a singular covariance");
    const Eigen::MatrixXd inv = lu.inverse();
    const Eigen::MatrixXd hadamard_identity = inv.diagonal().asDiagonal();
    d += utility.logdet_final * (2.0 * inv - hadamard_identity);
  }
  return d;
}

/// Derivative of U_int in the same convention.
inline Eigen::MatrixXd running_utility_derivative(const Eigen::MatrixXd& C, const MatrixUtility& utility) {
  return utility.trace_integrated * Eigen::MatrixXd::Identity(C.rows(), C.cols());
}

/// Converts a symmetric-convention derivative D into the matrix G with <<G, dC>> = dU for symmetric dC.
inline Eigen::MatrixXd frobenius_gradient(const Eigen::MatrixXd& D) {
  Eigen::MatrixXd g = 0.5 * D;
  g.diagonal() = D.diagonal();
  return g;
}

/// Spot-checks utility_derivative against central differences along symmetric perturbations.
inline void check_utility_derivative(const MatrixUtility& utility, int n, double tolerance = 1e-6) {
  std::mt19937_64 rng(0xc0ffeeULL);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = normal(rng);
  const Eigen::MatrixXd C = B * B.transpose() + n * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd D = utility_derivative(C, utility);
  const double h = 1e-5;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, n);
      E(i, j) = E(j, i) = 1.0;
      const double fd = (utility.final_value(C + h * E) - utility.final_value(C - h * E)) / (2.0 * h);
      if (std::abs(fd - D(i, j)) > tolerance * (1.0 + std::abs(fd))) {
        throw InvalidParameter("MatrixUtility: derivative fails the finite-difference check at (" +
                               std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

struct CovariancePath {
  TimeGrid grid;
  std::vector<Eigen::MatrixXd> C;  // one per node
  std::vector<Eigen::VectorXd> m;  // optional, one per node
};

struct MatrixAdjointPath {
  TimeGrid grid;
  std::vector<Eigen::MatrixXd> Lambda;  // one per node
};

namespace detail {

/// Model coefficients held constant over cell k, sampled at the cell midpoint.
struct CellCoefficients {
  Eigen::MatrixXd L, Sigma, A;
};

inline CellCoefficients cell_coefficients(const LinearGaussianModel& model, const TimeGrid& grid, int k) {
  const double t = grid.cell_center(k);
  return {model.L(t), model.Sigma(t), model.A(t)};
}

inline std::vector<CellCoefficients> all_cell_coefficients(const LinearGaussianModel& model, const TimeGrid& grid) {
  std::vector<CellCoefficients> cells;
  cells.reserve(grid.n_steps());
  for (int k = 0; k < grid.n_steps(); ++k) cells.push_back(cell_coefficients(model, grid, k));
  return cells;
}

/// dC/dt = L C + C L^T + Sigma - xi C A C.
inline void riccati_rhs(const CellCoefficients& c, double xi, const Eigen::MatrixXd& C, Eigen::MatrixXd& out,
                        Eigen::MatrixXd& scratch) {
  scratch.noalias() = C * c.A;
  out.noalias() = c.L * C;
  out.noalias() += C * c.L.transpose();
  out += c.Sigma;
  out.noalias() -= xi * (scratch * C);
}

/// -dLambda/dt = L^T Lambda + Lambda L - xi (A C Lambda + Lambda C A) + D_C U_int.
inline void adjoint_rhs(const CellCoefficients& c, double xi, const Eigen::MatrixXd& C, const Eigen::MatrixXd& Lam,
                        const Eigen::MatrixXd& running, Eigen::MatrixXd& out, Eigen::MatrixXd& scratch) {
  scratch.noalias() = c.A * C;
  out.noalias() = c.L.transpose() * Lam;
  out.noalias() += Lam * c.L;
  out.noalias() -= xi * (scratch * Lam);
  out.noalias() -= xi * (Lam * scratch.transpose());
  out += running;
}

/// Cubic Hermite value at the midpoint of a cell.
inline Eigen::MatrixXd hermite_midpoint(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& da,
                                        const Eigen::MatrixXd& db, double dt) {
  return 0.5 * (a + b) + (dt / 8.0) * (da - db);
}

}  // namespace detail

namespace detail {

/// RK4 march of the Riccati equation; `visit(k, C)` sees every node.
template <class Visit>
void march_riccati(const std::vector<CellCoefficients>& cells, const Eigen::MatrixXd& C0, const SensorSchedule& xi,
                   Visit&& visit) {
  const TimeGrid& grid = xi.grid();
  detail::require<GridMismatch>(static_cast<int>(cells.size()) == grid.n_steps(),
                                "integrate_riccati: coefficients do not match the grid");
  const double dt = grid.dt();
  const auto n = C0.rows();
  Eigen::MatrixXd C = C0, k1(n, n), k2(n, n), k3(n, n), k4(n, n), stage(n, n), scratch(n, n);
  Eigen::LLT<Eigen::MatrixXd> llt(n);
  const Eigen::MatrixXd jitter = 1e-8 * Eigen::MatrixXd::Identity(n, n);
  visit(0, C);
  for (int k = 0; k < grid.n_steps(); ++k) {
    const auto& c = cells[k];
    const double x = xi[k];
    riccati_rhs(c, x, C, k1, scratch);
    stage = C + 0.5 * dt * k1;
    riccati_rhs(c, x, stage, k2, scratch);
    stage = C + 0.5 * dt * k2;
    riccati_rhs(c, x, stage, k3, scratch);
    stage = C + dt * k3;
    riccati_rhs(c, x, stage, k4, scratch);
    C += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    scratch = C.transpose();
    C = 0.5 * (C + scratch);
    const double t = grid.node(k + 1);
    if (!C.allFinite()) throw NumericalBlowup("integrate_riccati: covariance blew up", t);
    llt.compute(C + jitter);
    if (llt.info() != Eigen::Success) {
      throw NumericalBlowup("integrate_riccati: covariance lost positive semidefiniteness", t);
    }
    visit(k + 1, C);
  }
}

}  // namespace detail

inline CovariancePath integrate_riccati(const std::vector<detail::CellCoefficients>& cells, const Eigen::MatrixXd& C0,
                                        const SensorSchedule& xi) {
  CovariancePath path{xi.grid(), {}, {}};
  path.C.reserve(xi.grid().n_nodes());
  detail::march_riccati(cells, C0, xi, [&](int, const Eigen::MatrixXd& C) { path.C.push_back(C); });
  return path;
}

/// Classical RK4 for the scheduled Riccati equation with xi and the model piecewise constant per cell.
inline CovariancePath integrate_riccati(const LinearGaussianModel& model, const SensorSchedule& xi) {
  model.validate();
  return integrate_riccati(detail::all_cell_coefficients(model, xi.grid()), model.C0, xi);
}

/// Euler-Maruyama for dm = L m dt + C H^T Gamma^{-1} (dZ - H m xi dt), coefficients at the cell's left node.
inline std::vector<Eigen::VectorXd> integrate_mean(const LinearGaussianModel& model, const SensorSchedule& xi,
                                                   const ObservationPath& obs_path, const CovariancePath& cov) {
  require_same_grid(xi.grid(), obs_path.grid, "integrate_mean");
  require_same_grid(xi.grid(), cov.grid, "integrate_mean");
  const TimeGrid& grid = xi.grid();
  const double dt = grid.dt();
  std::vector<Eigen::VectorXd> m;
  m.reserve(grid.n_nodes());
  m.push_back(model.m0);
  for (int k = 0; k < grid.n_steps(); ++k) {
    const double t = grid.node(k);
    const Eigen::MatrixXd h = model.H(t);
    const Eigen::MatrixXd gain = cov.C[k] * h.transpose() * model.Gamma(t).llt().solve(Eigen::MatrixXd::Identity(model.obs_dim, model.obs_dim));
    const Eigen::VectorXd& mk = m.back();
    Eigen::VectorXd next = mk + model.L(t) * mk * dt + gain * (obs_path.increments[k] - h * mk * (xi[k] * dt));
    if (!next.allFinite()) throw NumericalBlowup("integrate_mean: mean blew up", grid.node(k + 1));
    m.push_back(std::move(next));
  }
  return m;
}

/// Backward RK4 for the matrix adjoint from Lambda(T) = D_C U_final(C(T)) (as a Frobenius gradient).
/// C at stage midpoints comes from cubic Hermite interpolation of the stored forward path.
inline MatrixAdjointPath adjoint_matrix_backward(const std::vector<detail::CellCoefficients>& cells,
                                                 const CovariancePath& cov, const SensorSchedule& xi,
                                                 const MatrixUtility& utility) {
  require_same_grid(cov.grid, xi.grid(), "adjoint_matrix_backward");
  const TimeGrid& grid = xi.grid();
  const int steps = grid.n_steps();
  detail::require<GridMismatch>(static_cast<int>(cov.C.size()) == steps + 1,
                                "adjoint_matrix_backward: covariance path does not cover the horizon");
  detail::require<GridMismatch>(static_cast<int>(cells.size()) == steps, "adjoint_matrix_backward: coefficients do not match the grid");
  const double dt = grid.dt();
  const auto n = cov.C.front().rows();
  MatrixAdjointPath adj{grid, std::vector<Eigen::MatrixXd>(steps + 1)};
  Eigen::MatrixXd Lam = frobenius_gradient(utility_derivative(cov.C.back(), utility));
  adj.Lambda[steps] = Lam;
  Eigen::MatrixXd k1(n, n), k2(n, n), k3(n, n), k4(n, n), stage(n, n), scratch(n, n), dc_a(n, n), dc_b(n, n);
  for (int k = steps - 1; k >= 0; --k) {
    const auto& c = cells[k];
    const double x = xi[k];
    const Eigen::MatrixXd& Ca = cov.C[k];
    const Eigen::MatrixXd& Cb = cov.C[k + 1];
    detail::riccati_rhs(c, x, Ca, dc_a, scratch);
    detail::riccati_rhs(c, x, Cb, dc_b, scratch);
    const Eigen::MatrixXd Cm = detail::hermite_midpoint(Ca, Cb, dc_a, dc_b, dt);
    const Eigen::MatrixXd ra = frobenius_gradient(running_utility_derivative(Ca, utility));
    const Eigen::MatrixXd rm = frobenius_gradient(running_utility_derivative(Cm, utility));
    const Eigen::MatrixXd rb = frobenius_gradient(running_utility_derivative(Cb, utility));
    // In reversed time s = T - t the adjoint obeys dLambda/ds = rhs.
    detail::adjoint_rhs(c, x, Cb, Lam, rb, k1, scratch);
    stage = Lam + 0.5 * dt * k1;
    detail::adjoint_rhs(c, x, Cm, stage, rm, k2, scratch);
    stage = Lam + 0.5 * dt * k2;
    detail::adjoint_rhs(c, x, Cm, stage, rm, k3, scratch);
    stage = Lam + dt * k3;
    detail::adjoint_rhs(c, x, Ca, stage, ra, k4, scratch);
    Lam += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    scratch = Lam.transpose();
    Lam = 0.5 * (Lam + scratch);
    if (!Lam.allFinite()) throw NumericalBlowup("adjoint_matrix_backward: adjoint blew up", grid.node(k));
    adj.Lambda[k] = Lam;
  }
  return adj;
}

inline MatrixAdjointPath adjoint_matrix_backward(const CovariancePath& cov, const SensorSchedule& xi,
                                                 const LinearGaussianModel& model, const MatrixUtility& utility) {
  return adjoint_matrix_backward(detail::all_cell_coefficients(model, xi.grid()), cov, xi, utility);
}

/// Pointwise gradient density -<<Lambda, C A C>>.
inline double lg_gradient_density(const Eigen::MatrixXd& Lambda, const Eigen::MatrixXd& C, const Eigen::MatrixXd& A) {
  return -frobenius(Lambda, C * A * C);
}

/// Cell averages of -<<Lambda(t), C(t) A C(t)>> by Simpson's rule, with Hermite midpoints of C and Lambda.
/// The average over cell k is the derivative of the utility with respect to the cell's mass.
inline GradientField lg_gradient(const std::vector<detail::CellCoefficients>& cells, const MatrixAdjointPath& adj,
                                 const CovariancePath& cov, const SensorSchedule& xi, const MatrixUtility& utility) {
  require_same_grid(adj.grid, cov.grid, "lg_gradient");
  require_same_grid(adj.grid, xi.grid(), "lg_gradient");
  const TimeGrid& grid = adj.grid;
  const int steps = grid.n_steps();
  detail::require<GridMismatch>(static_cast<int>(adj.Lambda.size()) == steps + 1 &&
                                    static_cast<int>(cov.C.size()) == steps + 1,
                                "lg_gradient: paths are not aligned");
  detail::require<GridMismatch>(static_cast<int>(cells.size()) == steps, "lg_gradient: coefficients do not match the grid");
  const double dt = grid.dt();
  const auto n = cov.C.front().rows();
  Eigen::MatrixXd dc_a(n, n), dc_b(n, n), dl_a(n, n), dl_b(n, n), scratch(n, n);
  Eigen::VectorXd eta(steps);
  for (int k = 0; k < steps; ++k) {
    const auto& c = cells[k];
    const double x = xi[k];
    const Eigen::MatrixXd &Ca = cov.C[k], &Cb = cov.C[k + 1];
    const Eigen::MatrixXd &La = adj.Lambda[k], &Lb = adj.Lambda[k + 1];
    detail::riccati_rhs(c, x, Ca, dc_a, scratch);
    detail::riccati_rhs(c, x, Cb, dc_b, scratch);
    detail::adjoint_rhs(c, x, Ca, La, frobenius_gradient(running_utility_derivative(Ca, utility)), dl_a, scratch);
    detail::adjoint_rhs(c, x, Cb, Lb, frobenius_gradient(running_utility_derivative(Cb, utility)), dl_b, scratch);
    // adjoint_rhs is -dLambda/dt.
    const Eigen::MatrixXd Cm = detail::hermite_midpoint(Ca, Cb, dc_a, dc_b, dt);
    const Eigen::MatrixXd Lm = detail::hermite_midpoint(La, Lb, -dl_a, -dl_b, dt);
    eta[k] = (lg_gradient_density(La, Ca, c.A) + 4.0 * lg_gradient_density(Lm, Cm, c.A) +
              lg_gradient_density(Lb, Cb, c.A)) /
             6.0;
  }
  return {grid, eta};
}

inline GradientField lg_gradient(const MatrixAdjointPath& adj, const CovariancePath& cov, const SensorSchedule& xi,
                                 const LinearGaussianModel& model, const MatrixUtility& utility) {
  return lg_gradient(detail::all_cell_coefficients(model, xi.grid()), adj, cov, xi, utility);
}

/// U_final(C(T)) + trapezoid rule in time for int U_int(C(t)) dt.
inline double utility_value(const CovariancePath& cov, const MatrixUtility& utility) {
  double u = utility.final_value(cov.C.back());
  if (utility.has_running_term()) {
    const double dt = cov.grid.dt();
    const std::size_t n = cov.C.size();
    for (std::size_t k = 0; k < n; ++k) {
      const double weight = (k == 0 || k + 1 == n) ? 0.5 * dt : dt;
      u += weight * utility.running_value(cov.C[k]);
    }
  }
  return u;
}

/// Linear-Gaussian design problem; its objective is deterministic in xi.
class LinearGaussianProblem {
 public:
  LinearGaussianProblem(LinearGaussianModel model, MatrixUtility utility, TimeGrid grid)
      : model_(std::move(model)), utility_(utility), grid_(grid) {
    model_.validate();
    check_utility_derivative(utility_, model_.dim);
    cells_ = detail::all_cell_coefficients(model_, grid_);
  }

  const LinearGaussianModel& model() const { return model_; }
  const MatrixUtility& utility() const { return utility_; }
  const TimeGrid& grid() const { return grid_; }

  CovariancePath covariance(const SensorSchedule& xi) const {
    require_same_grid(grid_, xi.grid(), "LinearGaussianProblem");
    return integrate_riccati(cells_, model_.C0, xi);
  }

  /// Same value as utility_value(covariance(xi)) without storing the path.
  double objective(const SensorSchedule& xi) const {
    require_same_grid(grid_, xi.grid(), "LinearGaussianProblem");
    const int last = grid_.n_steps();
    const double dt = grid_.dt();
    double running = 0.0;
    double final_value = 0.0;
    detail::march_riccati(cells_, model_.C0, xi, [&](int k, const Eigen::MatrixXd& C) {
      if (utility_.has_running_term()) running += ((k == 0 || k == last) ? 0.5 * dt : dt) * utility_.running_value(C);
      if (k == last) final_value = utility_.final_value(C);
    });
    return final_value + running;
  }

  GradientField gradient(const SensorSchedule& xi) const {
    const CovariancePath cov = covariance(xi);
    const MatrixAdjointPath adj = adjoint_matrix_backward(cells_, cov, xi, utility_);
    return lg_gradient(cells_, adj, cov, xi, utility_);
  }

 private:
  LinearGaussianModel model_;
  MatrixUtility utility_;
  TimeGrid grid_;
  std::vector<detail::CellCoefficients> cells_;
};

/// Signal and observation models of a linear-Gaussian system, for simulation and grid filtering.
inline SignalModel to_signal_model(const LinearGaussianModel& model) {
  SignalModel s;
  s.dim = model.dim;
  auto L = model.L;
  auto Sigma = model.Sigma;
  s.drift = [L](const Eigen::VectorXd& x, double t) -> Eigen::VectorXd { return L(t) * x; };
  s.diffusion_sqrt = [Sigma](double t) -> Eigen::MatrixXd {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma(t));
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  };
  const Eigen::VectorXd m0 = model.m0;
  const Eigen::MatrixXd chol = model.C0.llt().matrixL();
  s.initial_sampler = [m0, chol](std::uint64_t seed) -> Eigen::VectorXd {
    NormalSource normal(seed);
    return m0 + chol * normal.vector(m0.size());
  };
  return s;
}

inline ObservationModel to_observation_model(const LinearGaussianModel& model) {
  ObservationModel o;
  o.obs_dim = model.obs_dim;
  auto H = model.H;
  o.g = [H](const Eigen::VectorXd& x, double t) -> Eigen::VectorXd { return H(t) * x; };
  o.gamma = model.Gamma;
  return o;
}

/// Rows (t, C entries row-major, trace).
inline csv::Table to_table(const CovariancePath& cov) {
  csv::Table t;
  const auto n = cov.C.front().rows();
  t.header.push_back("t");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) t.header.push_back("C" + std::to_string(i) + std::to_string(j));
  t.header.push_back("trace");
  t.columns.resize(t.header.size());
  for (int k = 0; k < cov.grid.n_nodes(); ++k) {
    std::size_t c = 0;
    t.columns[c++].push_back(cov.grid.node(k));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) t.columns[c++].push_back(cov.C[k](i, j));
    t.columns[c].push_back(cov.C[k].trace());
  }
  return t;
}

inline csv::Table to_table(const MatrixAdjointPath& adj) {
  csv::Table t;
  const auto n = adj.Lambda.front().rows();
  t.header.push_back("t");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) t.header.push_back("Lambda" + std::to_string(i) + std::to_string(j));
  t.header.push_back("trace");
  t.columns.resize(t.header.size());
  for (int k = 0; k < adj.grid.n_nodes(); ++k) {
    std::size_t c = 0;
    t.columns[c++].push_back(adj.grid.node(k));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) t.columns[c++].push_back(adj.Lambda[k](i, j));
    t.columns[c].push_back(adj.Lambda[k].trace());
  }
  return t;
}

}  // namespace schedopt
