#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

namespace idmvae {

/// Derives a child seed from (base, tag) via splitmix64. Children with
/// distinct tags produce statistically independent streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

/// Deterministic random stream. All randomness in the library flows through
/// instances of this class so that runs are reproducible given a seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  double uniform();  // [0, 1)
  double normal();   // N(0, 1), Box-Muller
  int uniform_int(int n);  // [0, n)

  Eigen::VectorXd normal_vector(int d);
  Eigen::MatrixXd normal_matrix(int rows, int cols);
  Eigen::MatrixXd uniform_matrix(int rows, int cols);

  /// k distinct values in [1, max_exclusive), order as drawn.
  std::vector<int> distinct_offsets(int k, int max_exclusive);
  std::vector<int> permutation(int n);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Source of the stochastic draws made inside loss construction. Tests swap
/// in deterministic implementations to freeze expectations.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual Eigen::MatrixXd normal(int rows, int cols) = 0;
  virtual int uniform_int(int n) = 0;
};

class RngNoise final : public NoiseSource {
 public:
  explicit RngNoise(std::uint64_t seed) : rng_(seed) {}
  explicit RngNoise(RngStream rng) : rng_(std::move(rng)) {}
  Eigen::MatrixXd normal(int rows, int cols) override { return rng_.normal_matrix(rows, cols); }
  int uniform_int(int n) override { return rng_.uniform_int(n); }

 private:
  RngStream rng_;
};

/// All-zero noise: reparameterized samples collapse to posterior means.
class ZeroNoise final : public NoiseSource {
 public:
  Eigen::MatrixXd normal(int rows, int cols) override { return Eigen::MatrixXd::Zero(rows, cols); }
  int uniform_int(int) override { return 0; }
};

/// Replays a fixed sequence of values (cycled); integer draws likewise.
class ScriptedNoise final : public NoiseSource {
 public:
  ScriptedNoise(std::vector<double> values, std::vector<int> ints)
      : values_(std::move(values)), ints_(std::move(ints)) {}
  Eigen::MatrixXd normal(int rows, int cols) override;
  int uniform_int(int n) override;

 private:
  std::vector<double> values_;
  std::vector<int> ints_;
  std::size_t vi_ = 0, ii_ = 0;
};

}  // namespace idmvae
