#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "idmvae/model.hpp"
#include "idmvae/rng.hpp"

namespace idmvae {

/// Co-occurring samples across M modalities with ground-truth labels.
struct AlignedBatch {
  std::vector<Eigen::MatrixXd> x;               // per modality, n x input_dim
  Eigen::VectorXi shared_label;                 // n
  std::vector<Eigen::VectorXi> private_labels;  // per modality, n

  int size() const { return static_cast<int>(shared_label.size()); }
  int modalities() const { return static_cast<int>(x.size()); }
  AlignedBatch rows(const std::vector<int>& idx) const;
};

struct FactorsDatasetConfig {
  int M = 2;
  int n_shared_classes = 10;
  int n_private_classes = 4;
  int input_dim = 50;
  double noise_sigma = 0.05;
  int mixing_depth = 2;
  int n_train = 4000;
  int n_val = 1000;
  int n_test = 2000;
  std::uint64_t seed = 1;
};

struct QuadrantGlyphConfig {
  int M = 3;
  int canvas = 16;  // square; glyphs are 8x8 and fill one quadrant
  double bg_scale = 0.3;
  int n_train = 4000;
  int n_val = 1000;
  int n_test = 2000;
  std::uint64_t seed = 1;

  int input_dim() const { return canvas * canvas; }
};

struct Dataset {
  std::string kind;  // "factors" | "glyphs"
  int M = 0;
  std::vector<int> input_dims;
  int n_shared_classes = 0;
  int n_private_classes = 0;
  Likelihood likelihood = Likelihood::GaussianFixedSigma;
  std::string config_json;  // generator config echo, for the manifest
  AlignedBatch train, val, test;

  const AlignedBatch& split(const std::string& name) const;
};

Dataset make_factors_dataset(const FactorsDatasetConfig& cfg);
Dataset make_quadrant_glyphs(const QuadrantGlyphConfig& cfg);

/// Private-label recovery for glyph images: argmax over quadrants of summed
/// (pixel - nominal background) mass. Throws on an exact tie.
int quadrant_of(const Eigen::VectorXd& image, const QuadrantGlyphConfig& cfg, int modality);

/// Nominal background texture of one modality, canvas x canvas flattened.
Eigen::VectorXd glyph_background(const QuadrantGlyphConfig& cfg, int modality);
/// The fixed 8x8 bitmap of one glyph class, flattened row-major (0/1).
Eigen::VectorXd glyph_bitmap(int cls);

void save_dataset(const Dataset& ds, const std::string& dir, bool force = false,
                  const std::string& format = "dir");
Dataset load_dataset(const std::string& dir);

}  // namespace idmvae
