#pragma once

#include <optional>
#include <string>
#include <vector>

#include "idmvae/checkpoint.hpp"
#include "idmvae/data.hpp"
#include "idmvae/eval.hpp"
#include "idmvae/objectives.hpp"

namespace idmvae {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 10.0;
  std::uint64_t seed = 1;
  int eval_every = 10;  // epochs between metric snapshots/checkpoints; 0 disables
  LossConfig loss;
};

void validate_train_config(const TrainConfig& cfg);

struct StepRecord {
  long step = 0;
  LossBreakdown loss;
  double lr = 0.0;
};

struct RunRecord {
  std::vector<StepRecord> steps;
  std::vector<std::pair<long, LatentClassification>> snapshots;
  double wall_seconds = 0.0;
  std::string config_hash;
};

struct TrainResult {
  bool aborted = false;
  std::string abort_reason;
  std::string final_checkpoint;
  double wall_seconds = 0.0;
  long steps_run = 0;
};

/// Joint end-to-end training of the model and (optionally) the diffusion
/// prior. Deterministic given cfg.seed. Writes run_record.jsonl, metrics
/// snapshots, and checkpoints under out_dir. On a non-finite total loss,
/// aborts retaining the last written checkpoint and names the first
/// non-finite breakdown component.
TrainResult train(MultimodalModel& model, DiffusionPrior* diffusion, const Dataset& ds,
                  const TrainConfig& cfg, const std::string& out_dir);

struct SweepCell {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double diffusion_weight = 0.0;
  GenAugVariant genaug_variant = GenAugVariant::Contrastive;
};

struct SweepCellResult {
  SweepCell cell;
  double val_z_to_shared = 0.0;
  std::string run_dir;
};

struct SweepResult {
  std::vector<SweepCellResult> cells;
  int best_index = -1;
};

/// Trains every cell (fresh model per cell, disjoint derived seeds),
/// evaluates validation z->shared probe accuracy, returns the argmax with
/// ties broken by smaller lambda2 then smaller lambda1. `jobs` > 1 runs
/// cells in parallel threads.
SweepResult sweep(const std::vector<SweepCell>& grid, const Dataset& ds,
                  const ModelConfig& model_cfg, const DiffusionConfig& diff_cfg,
                  const TrainConfig& base_cfg, const std::string& out_dir, int jobs = 1);

}  // namespace idmvae
