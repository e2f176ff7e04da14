#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "idmvae/data.hpp"
#include "idmvae/diffusion.hpp"
#include "idmvae/model.hpp"

namespace idmvae {

/// Multinomial logistic regression probe.
struct LinearProbe {
  Eigen::MatrixXd weight;  // classes x feature_dim
  Eigen::VectorXd bias;

  Eigen::VectorXi predict(const Eigen::MatrixXd& features) const;
  double accuracy(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels) const;
};

/// Full-batch fit to gradient norm < 1e-5 or 500 iterations; zero init, so
/// the result is deterministic in the inputs.
LinearProbe fit_linear_probe(const Eigen::MatrixXd& features, const Eigen::VectorXi& labels,
                             int n_classes, double reg = 1e-4);

struct LatentClassification {
  double z_to_shared = 0, z_to_private = 0, w_to_private = 0, w_to_shared = 0;
  double chance_shared = 0, chance_private = 0;
};

/// Table-1 protocol: probes fit on train-split posterior features, accuracy
/// on the test split, averaged over modalities. `use_samples` draws one
/// posterior sample per datum; otherwise posterior means are used.
LatentClassification latent_classification(const MultimodalModel& model, const Dataset& ds,
                                           bool use_samples, std::uint64_t seed = 17);

/// Small supervised MLP with its own parameters.
class RefClassifier {
 public:
  RefClassifier(int input_dim, int n_classes, std::vector<int> hidden, std::uint64_t seed);
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXi& y, int epochs, int batch_size,
           double lr, std::uint64_t seed);
  Eigen::VectorXi predict(const Eigen::MatrixXd& x) const;
  double accuracy(const Eigen::MatrixXd& x, const Eigen::VectorXi& y) const;
  int n_classes() const { return n_classes_; }

 private:
  std::unique_ptr<ParamStore> store_;
  Mlp net_;
  int n_classes_;
};

/// Per-modality shared-label and private-label classifiers trained on
/// original training images and gated at >= 0.98 validation accuracy.
struct ReferenceClassifiers {
  std::vector<std::unique_ptr<RefClassifier>> shared;   // per modality
  std::vector<std::unique_ptr<RefClassifier>> private_; // per modality
  std::vector<double> shared_gate_acc, private_gate_acc;
};

ReferenceClassifiers train_reference_classifiers(const Dataset& ds, std::uint64_t seed = 23,
                                                 double gate = 0.98);

enum class LatentSource { Posterior, Prior };

/// Generate modality t combining z from modality s (posterior or prior) with
/// w of modality t (posterior or prior); classify with the reference nets and
/// score against the aligned test sample's labels. Prior z uses the diffusion
/// sampler when one is supplied.
std::pair<double, double> conditional_coherence(
    const MultimodalModel& model, const DiffusionPrior* diffusion,
    const ReferenceClassifiers& refs, const Dataset& ds, int s, int t,
    LatentSource z_source, LatentSource w_source, int n, std::uint64_t seed = 29);

/// Fraction of prior-sampled multimodal sets on which all M shared-label
/// classifiers agree.
double unconditional_coherence(const MultimodalModel& model, const DiffusionPrior* diffusion,
                               const ReferenceClassifiers& refs, int n,
                               std::uint64_t seed = 31);

struct MetricsReport {
  LatentClassification latent;
  bool use_samples = true;
  // coherence cells, averaged over modality pairs; self is s == t, cross s != t
  double self_zq_wp_shared = 0, self_zq_wp_private = 0;
  double self_zp_wq_shared = 0, self_zp_wq_private = 0;
  double cross_zq_wp_shared = 0, cross_zq_wp_private = 0;
  double uncond = 0;
  int n_eval = 0;

  std::string to_json() const;
  /// Rows {self-gen, cross-gen, uncond} mirroring the coherence table layout.
  std::string to_table_csv() const;
};

MetricsReport compute_metrics(const MultimodalModel& model, const DiffusionPrior* diffusion,
                              const ReferenceClassifiers& refs, const Dataset& ds,
                              bool use_samples, int n_eval, std::uint64_t seed = 37);

struct ProjectionTable {
  Eigen::MatrixXd coords;  // (n_posterior + n_prior) x 2
  Eigen::VectorXi labels;  // shared labels; -1 for prior rows
  std::vector<int> is_prior;
  double variance_explained = 0;

  std::string to_csv() const;
};

/// Top-2 PCA of z posterior means (modality 0, test split) with prior
/// samples projected into the same plane.
ProjectionTable latent_projection(const MultimodalModel& model, const DiffusionPrior* diffusion,
                                  const Dataset& ds, int n_posterior, int n_prior,
                                  std::uint64_t seed = 41);

}  // namespace idmvae
