#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "schedopt/csv.hpp"
#include "schedopt/error.hpp"

namespace schedopt {

/// Uniform grid on [0, T] with n_steps cells.
class TimeGrid {
 public:
  TimeGrid(double t_end, int n_steps) : t_end_(t_end), n_steps_(n_steps) {
    detail::require<InvalidParameter>(std::isfinite(t_end) && t_end > 0.0, "TimeGrid: t_end must be positive");
    detail::require<InvalidParameter>(n_steps >= 2, "TimeGrid: need at least two steps");
  }

  double t_end() const { return t_end_; }
  int n_steps() const { return n_steps_; }
  int n_nodes() const { return n_steps_ + 1; }
  double dt() const { return t_end_ / n_steps_; }
  double node(int k) const { return k == n_steps_ ? t_end_ : k * dt(); }
  double cell_center(int k) const { return (k + 0.5) * dt(); }

  /// Index of the cell containing t; t = T maps to the last cell.
  int cell_of(double t) const {
    return std::clamp(static_cast<int>(std::floor(t / dt())), 0, n_steps_ - 1);
  }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.t_end_ == b.t_end_ && a.n_steps_ == b.n_steps_;
  }

 private:
  double t_end_;
  int n_steps_;
};

inline void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* where) {
  if (!(a == b)) throw GridMismatch(std::string(where) + ": time grids differ");
}

/// Piecewise-constant probability density on a TimeGrid (the design variable).
class SensorSchedule {
 public:
  static constexpr double kMassTolerance = 1e-9;

  SensorSchedule(TimeGrid grid, Eigen::VectorXd density) : grid_(grid), density_(std::move(density)) {
    detail::require<InvalidInput>(density_.size() == grid_.n_steps(), "SensorSchedule: one density value per cell");
    detail::require<InvalidInput>(density_.allFinite(), "SensorSchedule: non-finite density");
    detail::require<InvalidInput>(density_.minCoeff() >= 0.0, "SensorSchedule: negative density");
    detail::require<InvalidInput>(std::abs(total_mass() - 1.0) <= kMassTolerance, "SensorSchedule: mass must be one");
  }

  static SensorSchedule from_masses(TimeGrid grid, const Eigen::VectorXd& masses) {
    return SensorSchedule(grid, masses / grid.dt());
  }

  const TimeGrid& grid() const { return grid_; }
  const Eigen::VectorXd& density() const { return density_; }
  double operator[](int k) const { return density_[k]; }
  Eigen::VectorXd masses() const { return density_ * grid_.dt(); }
  double total_mass() const { return density_.sum() * grid_.dt(); }

  /// Mean time under the schedule, using cell centers.
  double mean_time() const {
    double m = 0.0;
    for (int k = 0; k < grid_.n_steps(); ++k) m += grid_.cell_center(k) * density_[k];
    return m * grid_.dt();
  }

 private:
  TimeGrid grid_;
  Eigen::VectorXd density_;
};

/// Per-cell density of a Frechet derivative with respect to the schedule.
struct GradientField {
  GradientField(TimeGrid grid, Eigen::VectorXd values) : grid(grid), values(std::move(values)) {
    detail::require<InvalidInput>(this->values.size() == grid.n_steps(), "GradientField: one value per cell");
  }

  bool is_finite() const { return values.allFinite(); }
  double max_abs() const { return values.cwiseAbs().maxCoeff(); }

  /// Component tangent to the simplex: removes the mean, which a mass-preserving step cannot follow.
  GradientField tangent() const {
    return GradientField(grid, (values.array() - values.mean()).matrix());
  }

  TimeGrid grid;
  Eigen::VectorXd values;
};

inline SensorSchedule uniform_schedule(const TimeGrid& grid) {
  return SensorSchedule(grid, Eigen::VectorXd::Constant(grid.n_steps(), 1.0 / grid.t_end()));
}

/// Gaussian bump evaluated at cell centers, truncated to [0, T] and renormalized.
inline SensorSchedule gaussian_schedule(double mean, double std, const TimeGrid& grid) {
  detail::require<InvalidParameter>(std::isfinite(std) && std > 0.0, "gaussian_schedule: std must be positive");
  detail::require<InvalidParameter>(std::isfinite(mean), "gaussian_schedule: mean must be finite");
  Eigen::VectorXd d(grid.n_steps());
  for (int k = 0; k < grid.n_steps(); ++k) {
    const double z = (grid.cell_center(k) - mean) / std;
    d[k] = std::exp(-0.5 * z * z);
  }
  const double mass = d.sum() * grid.dt();
  detail::require<InvalidParameter>(mass > 0.0, "gaussian_schedule: bump has no mass on the grid");
  return SensorSchedule(grid, d / mass);
}

/// Euclidean projection of a vector onto the probability simplex (sort and threshold).
inline Eigen::VectorXd project_masses_to_simplex(const Eigen::VectorXd& v) {
  const auto n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  Eigen::VectorXd w = (v.array() - theta).max(0.0).matrix();
  // Rounding in the threshold leaves the sum off by a few ulps; fold it back onto the support.
  const double excess = w.sum() - 1.0;
  const auto support = (w.array() > 0.0).count();
  if (support > 0 && excess != 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (w[i] > 0.0) w[i] = std::max(0.0, w[i] - excess / static_cast<double>(support));
    }
  }
  return w;
}

/// Projects raw per-cell densities: masses density*dt go to the nearest point of the simplex.
inline SensorSchedule project_to_simplex(const Eigen::VectorXd& raw, const TimeGrid& grid) {
  detail::require<InvalidInput>(raw.size() == grid.n_steps(), "project_to_simplex: one value per cell");
  detail::require<InvalidInput>(raw.allFinite(), "project_to_simplex: non-finite input");
  return SensorSchedule::from_masses(grid, project_masses_to_simplex(raw * grid.dt()));
}

/// Fraction of the sensor budget spent in [a, b].
inline double schedule_mass(const SensorSchedule& s, double a, double b) {
  const auto& g = s.grid();
  detail::require<InvalidRange>(a <= b, "schedule_mass: a > b");
  detail::require<InvalidRange>(a >= 0.0 && b <= g.t_end(), "schedule_mass: interval outside [0, T]");
  double mass = 0.0;
  for (int k = 0; k < g.n_steps(); ++k) {
    const double lo = std::max(a, g.node(k));
    const double hi = std::min(b, g.node(k + 1));
    if (hi > lo) mass += s[k] * (hi - lo);
  }
  return std::clamp(mass, 0.0, 1.0);
}

inline csv::Table to_table(const SensorSchedule& s) {
  csv::Table t{{"t_cell_center", "density"}, {{}, {}}};
  for (int k = 0; k < s.grid().n_steps(); ++k) {
    t.columns[0].push_back(s.grid().cell_center(k));
    t.columns[1].push_back(s[k]);
  }
  return t;
}

/// Rebuilds a schedule from its CSV table; the grid is inferred from the cell centers.
inline SensorSchedule schedule_from_table(const csv::Table& t) {
  const auto& centers = t.column("t_cell_center");
  const auto& density = t.column("density");
  detail::require<InvalidInput>(centers.size() >= 2, "schedule csv: need at least two cells");
  const int n = static_cast<int>(centers.size());
  // First and last centers sit half a cell inside 0 and T.
  const TimeGrid grid(centers.front() + centers.back(), n);
  return SensorSchedule(grid, Eigen::Map<const Eigen::VectorXd>(density.data(), n));
}

inline csv::Table to_table(const GradientField& g) {
  csv::Table t{{"t", "eta"}, {{}, {}}};
  for (int k = 0; k < g.grid.n_steps(); ++k) {
    t.columns[0].push_back(g.grid.cell_center(k));
    t.columns[1].push_back(g.values[k]);
  }
  return t;
}

}  // namespace schedopt
