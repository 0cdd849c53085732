// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "upgan/dataset.hpp"
#include "upgan/image.hpp"
#include "upgan/nn/ops.hpp"
#include "upgan/nn/params.hpp"

namespace upgan {

/// Architecture knobs. The generator starts from a 4×4 map and doubles it
/// log2(image_size / 4) times; the discriminator mirrors that with stride-2
/// convolutions.
struct ModelConfig {
    int image_size = kModelImageSize;
    int fc_hidden = 1024;
    int gen_base_channels = 512;   // channels of the 4×4 map; halved per block
    int disc_base_channels = 16;   // doubled per stride-2 convolution
    int perc_base_channels = 16;   // doubled per perceptual block
    int perc_feature_dim = 64;     // penultimate width (FID features)
    double leaky_slope = 0.2;
    int pool_kernel = 3;           // stride-1 max pool before the heads

    /// Presets for 8, 16, 32, 64 and 128 pixel outputs.
    static ModelConfig for_scale(int image_size);

    int upsample_blocks() const;
    std::vector<int> generator_channels() const;  // 4×4 map followed by each block
    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    bool operator==(const ModelConfig&) const = default;
};

namespace model {

/// NCHW batch from interleaved images.
nn::Tensor to_batch(std::span<const ImageTensor> images);
nn::Tensor to_batch(const ImageTensor& image);
ImageTensor image_from_batch(const nn::Tensor& t, int index);
MaskProbabilities mask_from_batch(const nn::Tensor& t, int index);

/// [N,17] condition batch.
nn::Tensor condition_batch(std::span<const AttributeVector> attributes, std::span<const LandmarkVector> landmarks);

struct GeneratorOutput {
    nn::Tensor image;  // [N,3,S,S], sigmoid
    nn::Tensor mask;   // [N,2,S,S], softmax over channels
};

/// FC -> FC -> 4×4 map -> (upsample, conv5, conv3) blocks -> stride-1 max
/// pool -> image and mask heads.
class Generator {
public:
    Generator(const ModelConfig& cfg, std::uint64_t seed);

    /// Throws ShapeError unless cond is [N,17]. When `trace` is given the
    /// shape after every stage is appended to it.
    GeneratorOutput forward(const nn::Tensor& cond, std::vector<nn::Shape>* trace = nullptr) const;

    nn::ParamSet& params() { return params_; }
    const nn::ParamSet& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }

private:
    ModelConfig cfg_;
    nn::ParamSet params_;
};

/// Stride-2 k=4 convolutions with leaky activations, then a sigmoid head.
class Discriminator {
public:
    Discriminator(const ModelConfig& cfg, std::uint64_t seed);

    /// [N,3,S,S] -> [N,1] probabilities.
    nn::Tensor forward(const nn::Tensor& images) const;

    nn::ParamSet& params() { return params_; }
    const nn::ParamSet& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }

private:
    ModelConfig cfg_;
    nn::ParamSet params_;
    int convs_ = 0;
};

/// Small convolutional identity classifier: four stride-2 conv blocks, a
/// penultimate dense layer and a logit layer. Serves as the perceptual
/// network and as the attacker in threat-model experiments.
class IdentityNet {
public:
    static constexpr int kBlocks = 4;

    IdentityNet(const ModelConfig& cfg, int num_classes, std::uint64_t seed);

    struct Activations {
        std::vector<nn::Tensor> blocks;  // post-activation output of each conv block
        nn::Tensor penultimate;
        nn::Tensor logits;
    };
    Activations forward(const nn::Tensor& images) const;

    int num_classes() const { return num_classes_; }
    int input_size() const { return cfg_.image_size; }
    nn::ParamSet& params() { return params_; }
    const nn::ParamSet& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }

private:
    ModelConfig cfg_;
    int num_classes_;
    nn::ParamSet params_;
};

/// Frozen perceptual network and its tapped layer set Ω (block indices).
struct PerceptualConfig {
    std::shared_ptr<IdentityNet> network;
    std::vector<int> layer_set{0, 1, 2, 3};

    /// Throws ConfigError on an empty Ω or an invalid block index.
    void validate() const;
};

// Single-sample entry points over domain types.

std::pair<ImageTensor, MaskProbabilities> generator_forward(const AttributeVector& va, const LandmarkVector& vl,
                                                            const Generator& g);
/// Same, from raw vectors; checks dimensionality before computing anything.
std::pair<ImageTensor, MaskProbabilities> generator_forward(std::span<const double> va, std::span<const double> vl,
                                                            const Generator& g);

double discriminator_forward(const ImageTensor& image, const Discriminator& d);

/// One activation tensor per entry of Ω, in Ω order.
std::vector<nn::Tensor> perceptual_features(const ImageTensor& image, const PerceptualConfig& cfg);

struct ClassifierTrainConfig {
    int epochs = 30;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double target_accuracy = 0.9;
    std::uint64_t seed = 1;
};

struct ClassifierTrainResult {
    double train_accuracy = 0.0;
    int epochs_run = 0;
};

/// Trains an IdentityNet with softmax cross entropy. Images are resized to
/// the network input size. Stops early once an epoch reaches the target
/// accuracy; returns the final training accuracy.
ClassifierTrainResult train_classifier(IdentityNet& net, std::span<const ImageTensor> images,
                                       std::span<const int> labels, const ClassifierTrainConfig& cfg);

/// Top-1 predictions of a classifier over images (resized to its input).
std::vector<int> classify(const IdentityNet& net, std::span<const ImageTensor> images);

/// Penultimate-layer features, one row per image.
std::vector<std::vector<double>> embed(const IdentityNet& net, std::span<const ImageTensor> images);

/// Trains the perceptual network as an identity classifier on a labeled
/// corpus. Needs at least 2 identities with 2 images each; raises
/// TrainingError with the final accuracy when the target is not reached.
PerceptualConfig pretrain_perceptual(std::span<const FaceRecord> corpus, const ModelConfig& cfg,
                                     const ClassifierTrainConfig& train_cfg);

/// Stable label indices for identity strings (sorted order).
std::vector<std::string> identity_labels(std::span<const FaceRecord> corpus);

}  // namespace model
}  // namespace upgan
