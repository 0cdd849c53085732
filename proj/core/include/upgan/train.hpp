// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "upgan/augment.hpp"
#include "upgan/checkpoint.hpp"
#include "upgan/losses.hpp"
#include "upgan/model.hpp"

namespace upgan {

struct TrainConfig {
    int steps = 2000;
    int batch_size = 8;
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int d_steps_per_g_step = 1;
    std::uint64_t seed = 0;
    int scale = 32;
    LossWeights weights;
    AugmentConfig augment;
    int checkpoint_every = 500;
    int sample_every = 500;
    bool normalize_losses = false;
    int perceptual_epochs = 30;
    double perceptual_target_accuracy = 0.9;
    std::vector<int> perceptual_layers{0, 1, 2, 3};

    void validate() const;
    /// Flat object holding every key.
    nlohmann::json to_json() const;
    /// Missing keys take defaults; unknown keys are a ConfigError.
    static TrainConfig from_json(const nlohmann::json& j);
    static TrainConfig load(const std::filesystem::path& path);
    bool operator==(const TrainConfig&) const = default;
};

/// Owns the networks and optimizer state of one run. Not copyable because
/// the optimizers hold references into the parameter sets.
class Trainer {
public:
    /// Pretrains the perceptual network unless `resume` carries one.
    Trainer(std::span<const FaceRecord> corpus, const TrainConfig& cfg, const Checkpoint* resume = nullptr);
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    /// One iteration: discriminator update(s), then a generator update.
    LossBreakdown step();

    /// Single optimizer updates; step() is built from these.
    double discriminator_update(const LossBatch& batch);
    LossBreakdown generator_update(const LossBatch& batch);

    Checkpoint snapshot() const;
    std::int64_t steps_done() const { return step_; }

    /// Generated images for the 16 fixed probes, tiled 4x4.
    ImageTensor sample_grid() const;

    /// The batch used at a given step and discriminator sub-step.
    LossBatch batch_for(std::int64_t step, int sub_step) const;

    const TrainConfig& config() const { return cfg_; }
    const ModelConfig& model_config() const { return model_cfg_; }
    model::Generator& generator() { return g_; }
    model::Discriminator& discriminator() { return d_; }
    const model::PerceptualConfig& perceptual() const { return perceptual_; }

private:
    TrainConfig cfg_;
    ModelConfig model_cfg_;
    std::vector<FaceRecord> corpus_;
    model::Generator g_;
    model::Discriminator d_;
    model::PerceptualConfig perceptual_;
    nn::Adam adam_g_;
    nn::Adam adam_d_;
    nn::Tensor probes_;
    std::int64_t step_ = 0;
};

struct TrainOptions {
    std::optional<std::filesystem::path> resume_from;
    std::function<void(std::int64_t, const LossBreakdown&)> on_step;
};

struct TrainResult {
    std::filesystem::path final_checkpoint;
    std::vector<LossBreakdown> metrics;  // steps run in this call
    std::int64_t steps = 0;
};

/// Runs to cfg.steps writing metrics.jsonl, checkpoints/ and samples/ under
/// out_dir. A non-finite loss aborts with a TrainingError naming the last
/// good checkpoint.
TrainResult train(std::span<const FaceRecord> corpus, const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  const TrainOptions& options = {});

/// Generator restored from a training checkpoint.
model::Generator load_generator(const Checkpoint& ckpt);
model::Generator load_generator(const std::filesystem::path& path);

/// Frozen perceptual network stored alongside the generator.
model::IdentityNet load_perceptual_net(const Checkpoint& ckpt);

/// Pure inference from a checkpoint. `expected` guards against loading a
/// checkpoint built for another architecture.
std::pair<ImageTensor, MaskProbabilities> generate(const AttributeVector& va, const LandmarkVector& vl,
                                                   const std::filesystem::path& checkpoint,
                                                   const std::optional<ModelConfig>& expected = std::nullopt);

ImageTensor tile_grid(std::span<const ImageTensor> tiles, int columns);

}  // namespace upgan
