#include "idmvae/distributions.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace idmvae {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

void check_dims(int a, int b, const char* op) {
  if (a != b) throw std::invalid_argument(std::string(op) + ": dimension mismatch");
}
}  // namespace

DiagGaussian::DiagGaussian(Eigen::VectorXd mean_in, Eigen::VectorXd log_var_in)
    : mean(std::move(mean_in)), log_var(std::move(log_var_in)) {
  if (mean.size() != log_var.size())
    throw std::invalid_argument("DiagGaussian: mean/log_var length mismatch");
  if (mean.size() < 1) throw std::invalid_argument("DiagGaussian: dim must be >= 1");
  if (!mean.allFinite() || !log_var.allFinite())
    throw std::invalid_argument("DiagGaussian: non-finite parameters");
  log_var = log_var.array().max(kLogVarMin).min(kLogVarMax);
}

MoEPosterior::MoEPosterior(std::vector<DiagGaussian> comps) : components(std::move(comps)) {
  if (components.size() < 2)
    throw std::invalid_argument("MoEPosterior: needs at least 2 components");
  for (const auto& c : components)
    check_dims(c.dim(), components[0].dim(), "MoEPosterior");
}

Eigen::VectorXd sample_reparam(const DiagGaussian& g, const Eigen::VectorXd& noise) {
  check_dims(static_cast<int>(noise.size()), g.dim(), "sample_reparam");
  return g.mean.array() + (0.5 * g.log_var.array()).exp() * noise.array();
}

double log_prob(const DiagGaussian& g, const Eigen::VectorXd& z) {
  check_dims(static_cast<int>(z.size()), g.dim(), "log_prob");
  const Eigen::ArrayXd diff = z.array() - g.mean.array();
  return (-0.5 * kLog2Pi - 0.5 * g.log_var.array() -
          0.5 * diff.square() / g.log_var.array().exp())
      .sum();
}

double entropy(const DiagGaussian& g) {
  const double d = static_cast<double>(g.dim());
  return 0.5 * d * (1.0 + kLog2Pi) + 0.5 * g.log_var.sum();
}

double kl_gaussian(const DiagGaussian& q, const DiagGaussian& p) {
  check_dims(q.dim(), p.dim(), "kl_gaussian");
  const Eigen::ArrayXd lq = q.log_var.array(), lp = p.log_var.array();
  const Eigen::ArrayXd dmu = q.mean.array() - p.mean.array();
  return 0.5 * ((lq - lp).exp() + dmu.square() / lp.exp() - 1.0 + lp - lq).sum();
}

double moe_log_prob(std::span<const DiagGaussian> components, const Eigen::VectorXd& z) {
  if (components.empty()) throw std::invalid_argument("moe_log_prob: no components");
  const std::size_t m = components.size();
  Eigen::VectorXd lps(m);
  for (std::size_t i = 0; i < m; ++i) lps[static_cast<int>(i)] = log_prob(components[i], z);
  const double mx = lps.maxCoeff();
  const double lse = mx + std::log((lps.array() - mx).exp().sum());
  return lse - std::log(static_cast<double>(m));
}

double moe_log_prob(const MoEPosterior& moe, const Eigen::VectorXd& z) {
  return moe_log_prob(std::span<const DiagGaussian>(moe.components), z);
}

double cross_entropy_std_normal(const DiagGaussian& q) {
  return 0.5 * (kLog2Pi + q.mean.array().square() + q.log_var.array().exp()).sum();
}

}  // namespace idmvae
