#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "idmvae/distributions.hpp"
#include "idmvae/graph_gauss.hpp"
#include "idmvae/rng.hpp"
#include "idmvae/tape.hpp"

namespace idmvae {

enum class Likelihood { GaussianFixedSigma, Bernoulli };

struct LatentSpec {
  int d_z = 8;
  int d_w = 16;
  int M = 2;
};

struct ModalitySpec {
  int input_dim = 0;
  Likelihood likelihood = Likelihood::GaussianFixedSigma;
  double decoder_sigma = 1.0;
};

struct ModelConfig {
  LatentSpec latent;
  std::vector<ModalitySpec> modalities;
  std::vector<int> hidden = {128, 128};
  bool separate_encoders = true;
};

/// Owns Parameters with stable addresses and stable registration order.
class ParamStore {
 public:
  Parameter& create(const std::string& name, int rows, int cols);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  void zero_grads();

 private:
  std::deque<Parameter> params_;
};

/// Plain feedforward stack; layer l maps via x * W[l] + b[l], tanh between
/// layers. `activate_last` controls whether the final layer is also followed
/// by tanh (used for encoder trunks). With no layers, forward is the identity.
struct Mlp {
  std::vector<Parameter*> weights;
  std::vector<Parameter*> biases;
  bool activate_last = false;

  static Mlp create(ParamStore& store, const std::string& prefix, int in_dim,
                    const std::vector<int>& layer_dims, bool activate_last);
  void init(RngStream& rng, double last_scale = 1.0);
  Var forward(Tape& t, Var x) const;
  Eigen::MatrixXd forward_plain(const Eigen::MatrixXd& x) const;
};

/// M encoder/decoder pairs over the factorized latent (z shared, w_m private),
/// with per-modality auxiliary priors r(w~_m) of learnable log-variance.
class MultimodalModel {
 public:
  MultimodalModel(ModelConfig cfg, std::uint64_t seed);

  struct PosteriorNodes {
    GaussNodes z;
    GaussNodes w;
  };

  // graph surface (batched; one row per sample)
  PosteriorNodes encode_rows(Tape& t, int m, Var x) const;
  PosteriorNodes encode_rows(Tape& t, int m, const Eigen::MatrixXd& x) const;
  Var decode_rows(Tape& t, int m, Var z, Var w) const;
  Var log_likelihood_rows(Tape& t, int m, Var params, Var x) const;
  /// Differentiable sample used for generative augmentation: likelihood mean
  /// for gaussian modalities, probabilities for bernoulli ones.
  Var relaxed_sample_rows(Tape& t, int m, Var params) const;
  Var aux_prior_sample_rows(Tape& t, int m, const Eigen::MatrixXd& noise) const;

  // plain surface
  std::pair<DiagGaussian, DiagGaussian> encode(int m, const Eigen::VectorXd& x) const;
  Eigen::VectorXd decode(int m, const Eigen::VectorXd& z, const Eigen::VectorXd& w) const;
  double log_likelihood(int m, const Eigen::VectorXd& params, const Eigen::VectorXd& x) const;
  Eigen::VectorXd generate(int m, const Eigen::VectorXd& z, const Eigen::VectorXd& w,
                           bool deterministic, RngStream* rng = nullptr) const;
  Eigen::VectorXd sample_aux_prior(int m, const Eigen::VectorXd& noise) const;

  // batched plain encode used by evaluation (means and log-vars per row)
  struct BatchPosterior {
    Eigen::MatrixXd z_mean, z_log_var, w_mean, w_log_var;
  };
  BatchPosterior encode_batch(int m, const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd decode_batch(int m, const Eigen::MatrixXd& z, const Eigen::MatrixXd& w) const;
  Eigen::MatrixXd generate_batch(int m, const Eigen::MatrixXd& z, const Eigen::MatrixXd& w,
                                 bool deterministic, RngStream* rng = nullptr) const;

  const ModelConfig& config() const { return cfg_; }
  int num_modalities() const { return cfg_.latent.M; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  Parameter& aux_log_var(int m) { return *aux_log_var_[m]; }
  const Parameter& aux_log_var(int m) const { return *aux_log_var_[m]; }

 private:
  struct ModalityNets {
    Mlp z_trunk, w_trunk;  // w_trunk unused when separate_encoders is false
    Mlp z_mean, z_log_var, w_mean, w_log_var;
    Mlp decoder;
  };

  void check_modality(int m) const;
  std::pair<Var, Var> encoder_trunks(Tape& t, int m, Var x) const;

  ModelConfig cfg_;
  ParamStore store_;
  std::vector<ModalityNets> nets_;
  std::vector<Parameter*> aux_log_var_;
};

}  // namespace idmvae
