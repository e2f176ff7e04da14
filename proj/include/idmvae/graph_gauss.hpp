#pragma once

#include <span>

#include "idmvae/tape.hpp"

namespace idmvae {

/// Batched diagonal Gaussian on a tape; mean and log_var are n x d nodes.
/// log_var nodes are expected to be clamped already (encoders clamp in-graph).
struct GaussNodes {
  Var mean;
  Var log_var;
  int rows() const { return mean.rows(); }
  int dim() const { return mean.cols(); }
};

/// mean + exp(0.5 * log_var) .* noise, one row per batch element.
Var reparam(const GaussNodes& g, Var noise);
Var reparam(const GaussNodes& g, const Eigen::MatrixXd& noise);

Var gauss_log_prob_rows(const GaussNodes& g, Var z);  // n x 1
Var std_normal_log_prob_rows(Var z);                  // n x 1
Var gauss_entropy_rows(const GaussNodes& g);          // n x 1
Var cross_entropy_std_normal_rows(const GaussNodes& g);

/// log[(1/M) sum_m q_m(z)] rowwise via stable log-sum-exp.
Var moe_log_prob_rows(std::span<const GaussNodes> components, Var z);

/// Rowwise cosine similarity with eps-regularized norms; throws on a row
/// with exactly zero squared norm.
Var cosine_rows(Var a, Var b, double eps = 1e-12);

}  // namespace idmvae
