#pragma once

#include <vector>

#include "idmvae/model.hpp"
#include "idmvae/rng.hpp"
#include "idmvae/tape.hpp"

namespace idmvae {

struct DiffusionSchedule {
  int T = 0;
  Eigen::VectorXd betas;
  Eigen::VectorXd alphas_bar;
};

/// Linear beta schedule; alphas_bar[t] = prod_{s<=t} (1 - beta_s).
DiffusionSchedule make_schedule(int T, double beta_start, double beta_end);

/// sqrt(abar_t) z0 + sqrt(1 - abar_t) noise
Eigen::VectorXd forward_marginal(const DiffusionSchedule& s, const Eigen::VectorXd& z0, int t,
                                 const Eigen::VectorXd& noise);

struct DiffusionConfig {
  int T = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::vector<int> hidden = {128, 128};
  int t_embed_dim = 32;
};

/// DDPM over the shared latent: epsilon-prediction feedforward denoiser with
/// a sinusoidal time embedding, simple (uniform-t) training loss, ancestral
/// sampling with DDPM posterior variance and no noise at the final step.
class DiffusionPrior {
 public:
  DiffusionPrior(DiffusionConfig cfg, int d_z, std::uint64_t seed);

  /// mean_i || eps_i - net(z_t_i, t_i) ||^2 with t_i uniform over steps.
  /// Draw order from `noise`: n ints (t per row), then one n x d_z matrix.
  /// Gradients flow into the net and into z0.
  Var denoise_loss_graph(Tape& t, Var z0, NoiseSource& noise) const;

  Eigen::MatrixXd sample_prior(int n, RngStream& rng) const;

  Eigen::MatrixXd predict(const Eigen::MatrixXd& z_t, const std::vector<int>& t) const;
  Eigen::MatrixXd time_embedding(const std::vector<int>& t) const;

  const DiffusionSchedule& schedule() const { return sched_; }
  const DiffusionConfig& config() const { return cfg_; }
  int latent_dim() const { return d_z_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

 private:
  DiffusionConfig cfg_;
  DiffusionSchedule sched_;
  int d_z_;
  ParamStore store_;
  Mlp net_;
};

}  // namespace idmvae
