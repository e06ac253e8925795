#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracles {

/// Euclidean projection onto the simplex by enumerating supports; exact for small n.
inline Eigen::VectorXd brute_force_simplex_projection(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  Eigen::VectorXd best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << n); ++mask) {
    double sum = 0.0;
    int size = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) {
        sum += v[i];
        ++size;
      }
    }
    const double theta = (sum - 1.0) / size;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    bool feasible = true;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) {
        w[i] = v[i] - theta;
        if (w[i] < 0.0) feasible = false;
      }
    }
    if (!feasible) continue;
    const double d = (w - v).squaredNorm();
    if (d < best_dist) {
      best_dist = d;
      best = w;
    }
  }
  return best;
}

/// KL(N(m1, v1) || N(m0, v0)).
inline double gaussian_kl(double m1, double v1, double m0, double v0) {
  return 0.5 * (std::log(v0 / v1) + (v1 + (m1 - m0) * (m1 - m0)) / v0 - 1.0);
}

}  // namespace oracles
