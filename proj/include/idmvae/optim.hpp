#pragma once

#include <vector>

#include "idmvae/tape.hpp"

namespace idmvae {

/// Adam over a fixed parameter set; state is keyed by position.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<Parameter*> params, double lr = 1e-3,
                         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (Parameter* p : params_) {
      m_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    }
  }

  /// Clips the global gradient norm to `max_norm` first (0 disables).
  void step(double max_norm = 0.0);
  void zero_grads();
  double lr() const { return lr_; }
  const std::vector<Parameter*>& params() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Eigen::MatrixXd> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace idmvae
