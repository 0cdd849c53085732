// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "upgan/dataset.hpp"
#include "upgan/image.hpp"
#include "upgan/model.hpp"

namespace upgan {

/// Clipping applied to every probability that enters a logarithm.
inline constexpr double kProbabilityEpsilon = 1e-7;

struct LossWeights {
    double lambda1 = 5.0;  // reconstruction
    double lambda2 = 1.0;  // mask
    double lambda3 = 1.0;  // perceptual

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

struct LossBreakdown {
    double adv_g = 0.0;
    double recon_l2 = 0.0;
    double mask_bce = 0.0;
    double perceptual = 0.0;
    double total_g = 0.0;
    double total_d = 0.0;

    nlohmann::json to_json() const;
    static LossBreakdown from_json(const nlohmann::json& j);
    bool operator==(const LossBreakdown&) const = default;
};

/// One training batch at generator resolution.
struct LossBatch {
    nn::Tensor conditions;             // [N,17]
    nn::Tensor real;                   // [N,3,S,S]
    std::vector<double> mask_targets;  // N·S·S face labels in {0,1}

    int size() const { return conditions.dim(0); }
};

/// Builds a batch from records, resizing images and masks to `image_size`.
LossBatch make_loss_batch(std::span<const FaceRecord> records, int image_size);

namespace losses {

/// Squared L2 norm of the pixel difference (a sum, not a mean).
double recon_l2(const ImageTensor& real, const ImageTensor& fake);

/// Mean binary cross entropy of the face channel against a binary mask.
double mask_bce(const MaskProbabilities& pred, const BinaryMask& truth);

/// Sum over Ω of squared feature differences.
double perceptual_loss(const ImageTensor& fake, const ImageTensor& real, const model::PerceptualConfig& cfg);

// Graph forms. Expectations over the batch are batch means.

nn::Tensor recon_l2(const nn::Tensor& real, const nn::Tensor& fake, bool normalize = false);
nn::Tensor mask_bce(const nn::Tensor& mask_probs, const std::vector<double>& truth);
nn::Tensor perceptual_loss(const nn::Tensor& fake, const nn::Tensor& real, const model::PerceptualConfig& cfg,
                           bool normalize = false);

/// Non-saturating generator adversarial term, -E[log D(G(v))].
nn::Tensor adversarial_generator(const nn::Tensor& d_fake);

/// -(E[log D(real)] + E[log(1 - D(fake))]).
nn::Tensor adversarial_discriminator(const nn::Tensor& d_real, const nn::Tensor& d_fake);

struct GeneratorLossGraph {
    nn::Tensor adv;
    nn::Tensor recon;
    nn::Tensor mask;
    nn::Tensor perceptual;
    nn::Tensor total;
    model::GeneratorOutput output;
    LossBreakdown values;  // total_d left at 0
};

/// Full generator objective; throws NumericalError naming any non-finite term.
GeneratorLossGraph generator_loss_graph(const LossBatch& batch, const model::Generator& g,
                                        const model::Discriminator& d, const model::PerceptualConfig& perceptual,
                                        const LossWeights& weights, bool normalize = false);

LossBreakdown generator_loss(const LossBatch& batch, const model::Generator& g, const model::Discriminator& d,
                             const model::PerceptualConfig& perceptual, const LossWeights& weights,
                             bool normalize = false);

/// Discriminator objective. Generated images enter as constants, so no
/// gradient reaches the generator.
nn::Tensor discriminator_loss_graph(const LossBatch& batch, const model::Generator& g, const model::Discriminator& d);
double discriminator_loss(const LossBatch& batch, const model::Generator& g, const model::Discriminator& d);

}  // namespace losses
}  // namespace upgan
