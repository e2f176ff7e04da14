#include "idmvae/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace idmvae {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  // splitmix64 over the combined word
  std::uint64_t x = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

double RngStream::uniform() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

int RngStream::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
}

Eigen::VectorXd RngStream::normal_vector(int d) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = normal();
  return v;
}

Eigen::MatrixXd RngStream::normal_matrix(int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

Eigen::MatrixXd RngStream::uniform_matrix(int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = uniform();
  return m;
}

std::vector<int> RngStream::distinct_offsets(int k, int max_exclusive) {
  if (k >= max_exclusive)
    throw std::invalid_argument("distinct_offsets: need k < max_exclusive");
  std::vector<int> out;
  out.reserve(k);
  while (static_cast<int>(out.size()) < k) {
    const int c = 1 + uniform_int(max_exclusive - 1);
    bool seen = false;
    for (int v : out) seen = seen || (v == c);
    if (!seen) out.push_back(c);
  }
  return out;
}

std::vector<int> RngStream::permutation(int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = uniform_int(i + 1);
    std::swap(p[i], p[j]);
  }
  return p;
}

Eigen::MatrixXd ScriptedNoise::normal(int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      m(i, j) = values_[vi_ % values_.size()];
      ++vi_;
    }
  return m;
}

int ScriptedNoise::uniform_int(int n) {
  const int v = ints_.empty() ? 0 : ints_[ii_ % ints_.size()];
  ++ii_;
  return v % n;
}

}  // namespace idmvae
