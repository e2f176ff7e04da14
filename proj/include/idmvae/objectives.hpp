#pragma once

#include <optional>
#include <vector>

#include "idmvae/diffusion.hpp"
#include "idmvae/model.hpp"
#include "idmvae/rng.hpp"

namespace idmvae {

enum class GenAugVariant { Contrastive, Lsq };

struct LossConfig {
  double lambda1 = 8.0;         // weight of the cross-view MI loss
  double lambda2 = 2.0;         // weight of the generative-augmentation loss
  double beta = 2.5;            // KL coefficient
  GenAugVariant genaug_variant = GenAugVariant::Contrastive;
  int k_negatives = 16;
  double diffusion_weight = 1.0;  // 0 disables the diffusion prior
};

struct LossBreakdown {
  double total = 0.0;
  double mmvae_plus = 0.0;
  double cross_mi = 0.0;
  double gen_aug = 0.0;
  double diffusion = 0.0;
  std::vector<double> recon_per_modality;  // mean self-reconstruction NLL
};

/// Aligned minibatch: one matrix per modality, equal row counts.
using BatchInputs = std::vector<Eigen::MatrixXd>;

void validate_batch(const MultimodalModel& model, const BatchInputs& batch);

/// Per-modality posteriors computed once per step and shared by all losses.
struct PosteriorSet {
  std::vector<MultimodalModel::PosteriorNodes> per_modality;
};
PosteriorSet encode_all(Tape& t, const MultimodalModel& model, const BatchInputs& batch);

/// k distinct cyclic offsets in [1, n); consumes one uniform_int per pick.
std::vector<int> draw_distinct_offsets(NoiseSource& noise, int k, int n);

/// log[ phi(a,p) / (phi(a,p) + sum_j phi(a,n_j)) ], phi = exp(cosine), rowwise.
Var contrast_rows(Var anchors, Var positives, const std::vector<Var>& negatives);
double contrast(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                const std::vector<Eigen::VectorXd>& negatives);

/// MMVAE+ objective (negated, minimized). Per modality m draws one z and one
/// w sample plus one auxiliary-prior sample per cross modality, in this
/// order: for m ascending {eps_z (n x d_z), eps_w (n x d_w), then for each
/// n != m ascending eps_wtilde (n x d_w)}. With `entropy_route` the z terms
/// log p(z) - log q(z|X) are replaced by the closed-form entropy of
/// q(z|x_m); the E_q[-log p(z)] surrogate is added separately by total_loss.
Var mmvae_plus_loss_graph(Tape& t, const MultimodalModel& model, const BatchInputs& batch,
                          const PosteriorSet& posts, NoiseSource& noise, double beta,
                          bool entropy_route, std::vector<Var>* z_samples_out = nullptr,
                          std::vector<double>* recon_out = nullptr);
double mmvae_plus_loss(const MultimodalModel& model, const BatchInputs& batch,
                       NoiseSource& noise, double beta = 2.5,
                       std::vector<double>* recon_out = nullptr);

/// Average InfoNCE over unordered modality pairs, negated:
/// -(2 / (M (M-1))) sum_{m<n} mean_i Contrast(z_m_i, z_n_i).
/// Draw order: k offset picks, then per pair (m, n) ascending eps for z_m
/// then z_n.
Var cross_mi_loss_graph(Tape& t, const MultimodalModel& model, const PosteriorSet& posts,
                        NoiseSource& noise, int k_negatives);
double cross_mi_loss(const MultimodalModel& model, const BatchInputs& batch,
                     NoiseSource& noise, int k_negatives);

/// Cycle-consistency via model-generated augmentations, averaged over the w
/// and z branches and modalities. Pairs x with the batch rolled by one.
/// Draw order: k offset picks (contrastive only), then per modality
/// {eps_z, eps_w', [eps_w''], eps_z', eps_w, [eps_z'']}.
Var gen_aug_loss_graph(Tape& t, const MultimodalModel& model, const BatchInputs& batch,
                       const PosteriorSet& posts, NoiseSource& noise, GenAugVariant variant,
                       int k_negatives);
double gen_aug_loss(const MultimodalModel& model, const BatchInputs& batch,
                    GenAugVariant variant, NoiseSource& noise, int k_negatives);

/// total = mmvae_plus + lambda1 * cross_mi + lambda2 * gen_aug
///       + diffusion_weight * diffusion   (exact arithmetic identity).
/// When diffusion_weight > 0 the mmvae term uses the entropy route and the
/// diffusion term is the denoising loss over the pooled z samples.
Var total_loss_graph(Tape& t, const MultimodalModel& model, const DiffusionPrior* diffusion,
                     const BatchInputs& batch, const LossConfig& cfg, NoiseSource& noise,
                     LossBreakdown* breakdown = nullptr);
LossBreakdown total_loss(const MultimodalModel& model, const DiffusionPrior* diffusion,
                         const BatchInputs& batch, const LossConfig& cfg, NoiseSource& noise);

void validate_loss_config(const LossConfig& cfg);

}  // namespace idmvae
