// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/losses.hpp"

#include <cmath>

#include "upgan/error.hpp"

namespace upgan {

void LossWeights::validate() const {
    if (!(lambda1 >= 0 && lambda2 >= 0 && lambda3 >= 0)) throw ConfigError("loss weights must be non-negative");
}

nlohmann::json LossBreakdown::to_json() const {
    return {{"adv_g", adv_g},   {"recon_l2", recon_l2}, {"mask_bce", mask_bce},
            {"perceptual", perceptual}, {"total_g", total_g}, {"total_d", total_d}};
}

LossBreakdown LossBreakdown::from_json(const nlohmann::json& j) {
    return {j.at("adv_g").get<double>(),      j.at("recon_l2").get<double>(), j.at("mask_bce").get<double>(),
            j.at("perceptual").get<double>(), j.at("total_g").get<double>(),  j.at("total_d").get<double>()};
}

LossBatch make_loss_batch(std::span<const FaceRecord> records, int image_size) {
    if (records.empty()) throw ShapeError("make_loss_batch: empty batch");
    std::vector<AttributeVector> attrs;
    std::vector<LandmarkVector> lms;
    std::vector<ImageTensor> images;
    LossBatch batch;
    for (const auto& r : records) {
        if (!r.mask) throw ValidationError("record '" + r.id + "' has no mask");
        attrs.push_back(r.attributes);
        lms.push_back(r.landmarks);
        images.push_back(resize_to(r.image, image_size));
        const BinaryMask m = resize_mask_to(*r.mask, image_size);
        batch.mask_targets.insert(batch.mask_targets.end(), m.labels.begin(), m.labels.end());
    }
    batch.conditions = model::condition_batch(attrs, lms);
    batch.real = model::to_batch(images);
    return batch;
}

namespace losses {

using nn::Tensor;

double recon_l2(const ImageTensor& real, const ImageTensor& fake) {
    if (!real.same_shape(fake)) throw ShapeError("recon_l2: image shapes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < real.data.size(); ++i) {
        const double d = real.data[i] - fake.data[i];
        acc += d * d;
    }
    return acc;
}

double mask_bce(const MaskProbabilities& pred, const BinaryMask& truth) {
    if (pred.height != truth.height || pred.width != truth.width) throw ShapeError("mask_bce: mask sizes differ");
    if (!truth.is_binary()) throw ValidationError("mask_bce: ground truth is not binary");
    Tensor p = Tensor::zeros({1, 1, pred.height, pred.width});
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x) p.data()[static_cast<std::size_t>(y) * pred.width + x] = pred.face(y, x);
    return nn::binary_cross_entropy(p, std::vector<double>(truth.labels.begin(), truth.labels.end()),
                                    kProbabilityEpsilon)
        .item();
}

double perceptual_loss(const ImageTensor& fake, const ImageTensor& real, const model::PerceptualConfig& cfg) {
    if (!fake.same_shape(real)) throw ShapeError("perceptual_loss: image shapes differ");
    const int size = cfg.network->input_size();
    return perceptual_loss(model::to_batch(resize_to(fake, size)), model::to_batch(resize_to(real, size)), cfg).item();
}

Tensor recon_l2(const Tensor& real, const Tensor& fake, bool normalize) {
    const int n = real.dim(0);
    const double per = normalize ? static_cast<double>(real.size()) : static_cast<double>(n);
    return nn::scale(nn::sum_squared_error(real, fake), 1.0 / per);
}

Tensor mask_bce(const Tensor& mask_probs, const std::vector<double>& truth) {
    for (double t : truth)
        if (t != 0.0 && t != 1.0) throw ValidationError("mask_bce: ground truth is not binary");
    return nn::binary_cross_entropy(nn::select_channel(mask_probs, 1), truth, kProbabilityEpsilon);
}

Tensor perceptual_loss(const Tensor& fake, const Tensor& real, const model::PerceptualConfig& cfg, bool normalize) {
    cfg.validate();
    const auto f = cfg.network->forward(fake);
    const auto r = cfg.network->forward(real.detach());
    const int n = fake.dim(0);
    std::vector<std::pair<Tensor, double>> terms;
    for (int l : cfg.layer_set) {
        const auto& a = f.blocks[static_cast<std::size_t>(l)];
        const auto& b = r.blocks[static_cast<std::size_t>(l)];
        const double per = normalize ? static_cast<double>(a.size()) : static_cast<double>(n);
        terms.emplace_back(nn::sum_squared_error(a, b), 1.0 / per);
    }
    return nn::weighted_sum(terms);
}

Tensor adversarial_generator(const Tensor& d_fake) { return nn::scale(nn::mean_log(d_fake, kProbabilityEpsilon), -1.0); }

Tensor adversarial_discriminator(const Tensor& d_real, const Tensor& d_fake) {
    return nn::weighted_sum({{nn::mean_log(d_real, kProbabilityEpsilon), -1.0},
                             {nn::mean_log1m(d_fake, kProbabilityEpsilon), -1.0}});
}

namespace {

void check_finite(double v, const char* term) {
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite loss term '") + term + "'");
}

}  // namespace

GeneratorLossGraph generator_loss_graph(const LossBatch& batch, const model::Generator& g,
                                        const model::Discriminator& d, const model::PerceptualConfig& perceptual,
                                        const LossWeights& weights, bool normalize) {
    weights.validate();
    GeneratorLossGraph out;
    out.output = g.forward(batch.conditions);
    out.adv = adversarial_generator(d.forward(out.output.image));
    out.recon = recon_l2(batch.real, out.output.image, normalize);
    out.mask = mask_bce(out.output.mask, batch.mask_targets);
    out.perceptual = perceptual_loss(out.output.image, batch.real, perceptual, normalize);
    out.total = nn::weighted_sum(
        {{out.adv, 1.0}, {out.recon, weights.lambda1}, {out.mask, weights.lambda2}, {out.perceptual, weights.lambda3}});
    out.values.adv_g = out.adv.item();
    out.values.recon_l2 = out.recon.item();
    out.values.mask_bce = out.mask.item();
    out.values.perceptual = out.perceptual.item();
    out.values.total_g = out.total.item();
    check_finite(out.values.adv_g, "adv_g");
    check_finite(out.values.recon_l2, "recon_l2");
    check_finite(out.values.mask_bce, "mask_bce");
    check_finite(out.values.perceptual, "perceptual");
    check_finite(out.values.total_g, "total_g");
    return out;
}

LossBreakdown generator_loss(const LossBatch& batch, const model::Generator& g, const model::Discriminator& d,
                             const model::PerceptualConfig& perceptual, const LossWeights& weights, bool normalize) {
    return generator_loss_graph(batch, g, d, perceptual, weights, normalize).values;
}

Tensor discriminator_loss_graph(const LossBatch& batch, const model::Generator& g, const model::Discriminator& d) {
    const Tensor fake = g.forward(batch.conditions).image.detach();
    Tensor loss = adversarial_discriminator(d.forward(batch.real), d.forward(fake));
    check_finite(loss.item(), "total_d");
    return loss;
}

double discriminator_loss(const LossBatch& batch, const model::Generator& g, const model::Discriminator& d) {
    return discriminator_loss_graph(batch, g, d).item();
}

}  // namespace losses
}  // namespace upgan
