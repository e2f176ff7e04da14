#include "idmvae/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "idmvae/errors.hpp"

namespace idmvae {

using namespace ag;

void validate_batch(const MultimodalModel& model, const BatchInputs& batch) {
  const int M = model.num_modalities();
  if (static_cast<int>(batch.size()) != M)
    throw std::invalid_argument("batch: expected one input matrix per modality");
  const auto n = batch[0].rows();
  for (int m = 0; m < M; ++m) {
    if (batch[m].rows() != n)
      throw std::invalid_argument("batch: misaligned sample counts across modalities");
    if (batch[m].cols() != model.config().modalities[m].input_dim)
      throw std::invalid_argument("batch: input dim mismatch for modality " + std::to_string(m));
  }
  if (n < 2) throw std::invalid_argument("batch: need at least 2 samples");
}

void validate_loss_config(const LossConfig& cfg) {
  if (cfg.lambda1 < 0 || cfg.lambda2 < 0 || cfg.beta < 0 || cfg.diffusion_weight < 0)
    throw ConfigError("LossConfig: weights must be non-negative");
  if (cfg.k_negatives < 1) throw ConfigError("LossConfig: k_negatives must be >= 1");
}

PosteriorSet encode_all(Tape& t, const MultimodalModel& model, const BatchInputs& batch) {
  PosteriorSet posts;
  for (int m = 0; m < model.num_modalities(); ++m)
    posts.per_modality.push_back(model.encode_rows(t, m, batch[m]));
  return posts;
}

std::vector<int> draw_distinct_offsets(NoiseSource& noise, int k, int n) {
  if (k >= n) throw std::invalid_argument("draw_distinct_offsets: need k < batch size");
  std::vector<int> avail(n - 1);
  for (int i = 0; i < n - 1; ++i) avail[i] = i + 1;
  std::vector<int> out;
  out.reserve(k);
  for (int j = 0; j < k; ++j) {
    const int idx = noise.uniform_int(static_cast<int>(avail.size()));
    out.push_back(avail[idx]);
    avail.erase(avail.begin() + idx);
  }
  return out;
}

Var contrast_rows(Var anchors, Var positives, const std::vector<Var>& negatives) {
  if (negatives.empty()) throw std::invalid_argument("contrast: need k >= 1 negatives");
  std::vector<Var> cols;
  cols.reserve(negatives.size() + 1);
  Var pos_cos = cosine_rows(anchors, positives);
  cols.push_back(pos_cos);
  for (Var neg : negatives) cols.push_back(cosine_rows(anchors, neg));
  Var lse = row_logsumexp(concat_cols(cols));
  return sub(pos_cos, lse);
}

double contrast(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                const std::vector<Eigen::VectorXd>& negatives) {
  if (negatives.empty()) throw std::invalid_argument("contrast: need k >= 1 negatives");
  if (positive.size() != anchor.size())
    throw std::invalid_argument("contrast: dim mismatch");
  for (const auto& nvec : negatives)
    if (nvec.size() != anchor.size()) throw std::invalid_argument("contrast: dim mismatch");
  Tape t;
  Var a = t.constant(anchor.transpose());
  Var p = t.constant(positive.transpose());
  std::vector<Var> negs;
  negs.reserve(negatives.size());
  for (const auto& nvec : negatives) negs.push_back(t.constant(nvec.transpose()));
  return contrast_rows(a, p, negs).value()(0, 0);
}

namespace {

GaussNodes rolled(const GaussNodes& g, int offset) {
  return {roll_rows(g.mean, offset), roll_rows(g.log_var, offset)};
}

Var mean_rows(Var rows) { return mean_all(rows); }

}  // namespace

Var mmvae_plus_loss_graph(Tape& t, const MultimodalModel& model, const BatchInputs& batch,
                          const PosteriorSet& posts, NoiseSource& noise, double beta,
                          bool entropy_route, std::vector<Var>* z_samples_out,
                          std::vector<double>* recon_out) {
  const int M = model.num_modalities();
  const int n = static_cast<int>(batch[0].rows());
  const int d_z = model.config().latent.d_z;
  const int d_w = model.config().latent.d_w;

  std::vector<GaussNodes> z_comps;
  for (const auto& p : posts.per_modality) z_comps.push_back(p.z);

  if (recon_out) recon_out->assign(M, 0.0);

  Var acc;  // sum over m of per-sample objective rows, n x 1
  for (int m = 0; m < M; ++m) {
    const auto& post = posts.per_modality[m];
    Var z = reparam(post.z, noise.normal(n, d_z));
    Var w = reparam(post.w, noise.normal(n, d_w));
    if (z_samples_out) z_samples_out->push_back(z);

    Var x_m = t.constant(batch[m]);
    Var recon = model.log_likelihood_rows(t, m, model.decode_rows(t, m, z, w), x_m);
    if (recon_out) (*recon_out)[m] = -recon.value().mean();
    Var rows = recon;
    for (int nn = 0; nn < M; ++nn) {
      if (nn == m) continue;
      Var w_tilde = model.aux_prior_sample_rows(t, nn, noise.normal(n, d_w));
      Var cross = model.log_likelihood_rows(t, nn, model.decode_rows(t, nn, z, w_tilde),
                                            t.constant(batch[nn]));
      rows = add(rows, cross);
    }

    Var z_part = entropy_route
                     ? gauss_entropy_rows(post.z)
                     : sub(std_normal_log_prob_rows(z),
                           moe_log_prob_rows(std::span<const GaussNodes>(z_comps), z));
    Var w_part = sub(std_normal_log_prob_rows(w), gauss_log_prob_rows(post.w, w));
    rows = add(rows, scale(add(z_part, w_part), beta));

    acc = (m == 0) ? rows : add(acc, rows);
  }
  return scale(mean_rows(acc), -1.0 / M);
}

double mmvae_plus_loss(const MultimodalModel& model, const BatchInputs& batch,
                       NoiseSource& noise, double beta, std::vector<double>* recon_out) {
  validate_batch(model, batch);
  Tape t;
  PosteriorSet posts = encode_all(t, model, batch);
  Var loss =
      mmvae_plus_loss_graph(t, model, batch, posts, noise, beta, false, nullptr, recon_out);
  return loss.value()(0, 0);
}

Var cross_mi_loss_graph(Tape& t, const MultimodalModel& model, const PosteriorSet& posts,
                        NoiseSource& noise, int k_negatives) {
  const int M = model.num_modalities();
  const int n = posts.per_modality[0].z.rows();
  const int d_z = model.config().latent.d_z;
  if (n <= k_negatives)
    throw std::invalid_argument("cross_mi_loss: batch size must exceed k_negatives");

  const std::vector<int> offsets = draw_distinct_offsets(noise, k_negatives, n);

  Var acc;
  bool first = true;
  for (int m = 0; m < M; ++m) {
    for (int nn = m + 1; nn < M; ++nn) {
      Var z_a = reparam(posts.per_modality[m].z, noise.normal(n, d_z));
      Var z_b = reparam(posts.per_modality[nn].z, noise.normal(n, d_z));
      std::vector<Var> negs;
      negs.reserve(offsets.size());
      for (int off : offsets) negs.push_back(roll_rows(z_b, off));
      Var c = mean_rows(contrast_rows(z_a, z_b, negs));
      acc = first ? c : add(acc, c);
      first = false;
    }
  }
  return scale(acc, -2.0 / (M * (M - 1.0)));
}

double cross_mi_loss(const MultimodalModel& model, const BatchInputs& batch,
                     NoiseSource& noise, int k_negatives) {
  validate_batch(model, batch);
  Tape t;
  PosteriorSet posts = encode_all(t, model, batch);
  return cross_mi_loss_graph(t, model, posts, noise, k_negatives).value()(0, 0);
}

Var gen_aug_loss_graph(Tape& t, const MultimodalModel& model, const BatchInputs& batch,
                       const PosteriorSet& posts, NoiseSource& noise, GenAugVariant variant,
                       int k_negatives) {
  const int M = model.num_modalities();
  const int n = static_cast<int>(batch[0].rows());
  const int d_z = model.config().latent.d_z;
  const int d_w = model.config().latent.d_w;
  if (n < 2) throw std::invalid_argument("gen_aug_loss: batch size must be >= 2");

  std::vector<int> offsets;
  if (variant == GenAugVariant::Contrastive) {
    if (n <= k_negatives)
      throw std::invalid_argument("gen_aug_loss: batch size must exceed k_negatives");
    offsets = draw_distinct_offsets(noise, k_negatives, n);
  }

  auto branch = [&](int m, bool swap_roles) -> Var {
    // swap_roles=false: vary w (keep z of x, take w of x'), match w posteriors.
    // swap_roles=true: vary z, match z posteriors.
    const auto& post = posts.per_modality[m];
    GaussNodes kept = swap_roles ? post.w : post.z;          // from x
    GaussNodes swapped_src = swap_roles ? post.z : post.w;   // from x'
    GaussNodes swapped = rolled(swapped_src, 1);

    Var kept_sample, swapped_sample;
    if (swap_roles) {
      swapped_sample = reparam(swapped, noise.normal(n, d_z));
      kept_sample = reparam(kept, noise.normal(n, d_w));
    } else {
      kept_sample = reparam(kept, noise.normal(n, d_z));
      swapped_sample = reparam(swapped, noise.normal(n, d_w));
    }
    Var z_in = swap_roles ? swapped_sample : kept_sample;
    Var w_in = swap_roles ? kept_sample : swapped_sample;
    Var x_plus = model.relaxed_sample_rows(t, m, model.decode_rows(t, m, z_in, w_in));
    auto re_enc = model.encode_rows(t, m, x_plus);
    GaussNodes matched = swap_roles ? re_enc.z : re_enc.w;

    if (variant == GenAugVariant::Lsq)
      return mean_rows(row_sum(square(sub(matched.mean, swapped.mean))));

    Var anchor = reparam(matched, noise.normal(n, swap_roles ? d_z : d_w));
    std::vector<Var> negs;
    negs.reserve(offsets.size());
    for (int off : offsets) negs.push_back(roll_rows(anchor, off));
    return neg(mean_rows(contrast_rows(anchor, swapped_sample, negs)));
  };

  Var acc;
  for (int m = 0; m < M; ++m) {
    Var term = add(branch(m, false), branch(m, true));
    acc = (m == 0) ? term : add(acc, term);
  }
  return scale(acc, 1.0 / (2.0 * M));
}

double gen_aug_loss(const MultimodalModel& model, const BatchInputs& batch,
                    GenAugVariant variant, NoiseSource& noise, int k_negatives) {
  validate_batch(model, batch);
  Tape t;
  PosteriorSet posts = encode_all(t, model, batch);
  return gen_aug_loss_graph(t, model, batch, posts, noise, variant, k_negatives)
      .value()(0, 0);
}

Var total_loss_graph(Tape& t, const MultimodalModel& model, const DiffusionPrior* diffusion,
                     const BatchInputs& batch, const LossConfig& cfg, NoiseSource& noise,
                     LossBreakdown* breakdown) {
  validate_loss_config(cfg);
  validate_batch(model, batch);
  const bool use_diffusion = cfg.diffusion_weight > 0.0;
  if (use_diffusion && diffusion == nullptr)
    throw ConfigError("total_loss: diffusion_weight > 0 but no diffusion prior");

  PosteriorSet posts = encode_all(t, model, batch);

  std::vector<Var> z_samples;
  std::vector<double> recon;
  Var mmvae = mmvae_plus_loss_graph(t, model, batch, posts, noise, cfg.beta, use_diffusion,
                                    &z_samples, &recon);
  Var total = mmvae;

  Var cmi, ga, diff;
  if (cfg.lambda1 > 0.0) {
    cmi = cross_mi_loss_graph(t, model, posts, noise, cfg.k_negatives);
    total = add(total, scale(cmi, cfg.lambda1));
  }
  if (cfg.lambda2 > 0.0) {
    ga = gen_aug_loss_graph(t, model, batch, posts, noise, cfg.genaug_variant,
                            cfg.k_negatives);
    total = add(total, scale(ga, cfg.lambda2));
  }
  if (use_diffusion) {
    diff = diffusion->denoise_loss_graph(t, concat_rows(z_samples), noise);
    total = add(total, scale(diff, cfg.diffusion_weight));
  }

  if (breakdown) {
    breakdown->total = total.value()(0, 0);
    breakdown->mmvae_plus = mmvae.value()(0, 0);
    breakdown->cross_mi = cmi.valid() ? cmi.value()(0, 0) : 0.0;
    breakdown->gen_aug = ga.valid() ? ga.value()(0, 0) : 0.0;
    breakdown->diffusion = diff.valid() ? diff.value()(0, 0) : 0.0;
    breakdown->recon_per_modality = recon;
  }
  return total;
}

LossBreakdown total_loss(const MultimodalModel& model, const DiffusionPrior* diffusion,
                         const BatchInputs& batch, const LossConfig& cfg, NoiseSource& noise) {
  Tape t;
  LossBreakdown bd;
  total_loss_graph(t, model, diffusion, batch, cfg, noise, &bd);
  return bd;
}

}  // namespace idmvae
