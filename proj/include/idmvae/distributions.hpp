#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace idmvae {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

/// Diagonal Gaussian over R^d, parameterized by mean and log-variance.
/// log_var is clamped to [-10, 10] at construction.
struct DiagGaussian {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_var;

  DiagGaussian(Eigen::VectorXd mean_in, Eigen::VectorXd log_var_in);
  int dim() const { return static_cast<int>(mean.size()); }

  static DiagGaussian standard(int d) {
    return DiagGaussian(Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d));
  }
};

/// Uniform mixture of per-modality shared posteriors, q(z|X) = (1/M) sum_m q(z|x_m).
struct MoEPosterior {
  std::vector<DiagGaussian> components;
  explicit MoEPosterior(std::vector<DiagGaussian> comps);
};

Eigen::VectorXd sample_reparam(const DiagGaussian& g, const Eigen::VectorXd& noise);
double log_prob(const DiagGaussian& g, const Eigen::VectorXd& z);
double entropy(const DiagGaussian& g);
double kl_gaussian(const DiagGaussian& q, const DiagGaussian& p);

/// log q(z|X) for a uniform mixture; stable log-sum-exp. Accepts a single
/// component, in which case it coincides with log_prob.
double moe_log_prob(std::span<const DiagGaussian> components, const Eigen::VectorXd& z);
double moe_log_prob(const MoEPosterior& moe, const Eigen::VectorXd& z);

/// E_q[-log N(z; 0, I)], closed form. Together with entropy() this gives the
/// same KL(q || N(0,I)) as kl_gaussian, via the entropy + cross-entropy route.
double cross_entropy_std_normal(const DiagGaussian& q);

}  // namespace idmvae
