#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace schedopt {

/// Independent random streams derived from one master seed.
enum class Stream : std::uint64_t {
  kInitialState = 0,
  kSignalNoise = 1,
  kObservationNoise = 2,
  kGradient = 3,    // per optimizer iteration
  kEvaluation = 4,  // fixed evaluation replicate set
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based sub-seed for (master seed, replicate, stream).
inline std::uint64_t sub_seed(std::uint64_t master, std::uint64_t replicate, Stream stream) {
  return splitmix64(splitmix64(splitmix64(master) ^ replicate) ^ static_cast<std::uint64_t>(stream));
}

/// Standard-normal generator over a 64-bit Mersenne twister.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : engine_(seed) {}

  double operator()() { return normal_(engine_); }

  Eigen::VectorXd vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = (*this)();
    return v;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace schedopt
