#pragma once

#include <memory>
#include <optional>
#include <string>

#include "idmvae/diffusion.hpp"
#include "idmvae/model.hpp"
#include "idmvae/objectives.hpp"

namespace idmvae {

/// Everything needed to resume or evaluate a run: model (+ optional
/// diffusion prior), loss config, training seed and step counter.
struct Checkpoint {
  std::unique_ptr<MultimodalModel> model;
  std::unique_ptr<DiffusionPrior> diffusion;  // null when trained without one
  LossConfig loss;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
};

/// Single-archive format: "IDMV" magic, u32 version, u64 manifest length,
/// JSON manifest (specs + named tensor table with shapes and offsets), then
/// raw little-endian float32 tensor payloads in manifest order.
void save_checkpoint(const std::string& path, const MultimodalModel& model,
                     const DiffusionPrior* diffusion, const LossConfig& loss,
                     std::uint64_t seed, std::int64_t step);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace idmvae
