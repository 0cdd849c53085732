// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/model.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>

#include "upgan/error.hpp"
#include "upgan/rng.hpp"

namespace upgan {

ModelConfig ModelConfig::for_scale(int image_size) {
    ModelConfig c;
    c.image_size = image_size;
    switch (image_size) {
        case 8:
            c.fc_hidden = 16, c.gen_base_channels = 8, c.disc_base_channels = 2, c.perc_base_channels = 2,
            c.perc_feature_dim = 8;
            break;
        case 16:
            c.fc_hidden = 64, c.gen_base_channels = 16, c.disc_base_channels = 4, c.perc_base_channels = 4,
            c.perc_feature_dim = 16;
            break;
        case 32:
            c.fc_hidden = 256, c.gen_base_channels = 64, c.disc_base_channels = 8, c.perc_base_channels = 8,
            c.perc_feature_dim = 64;
            break;
        case 64:
            c.fc_hidden = 512, c.gen_base_channels = 128, c.disc_base_channels = 8, c.perc_base_channels = 8,
            c.perc_feature_dim = 64;
            break;
        case 128:
            break;
        default:
            throw ConfigError("no preset for image size " + std::to_string(image_size) + " (use 8, 16, 32, 64 or 128)");
    }
    return c;
}

int ModelConfig::upsample_blocks() const { return std::countr_zero(static_cast<unsigned>(image_size / 4)); }

std::vector<int> ModelConfig::generator_channels() const {
    std::vector<int> ch{gen_base_channels};
    for (int i = 0; i < upsample_blocks(); ++i) ch.push_back(std::max(1, ch.back() / 2));
    return ch;
}

void ModelConfig::validate() const {
    if (image_size < 8 || image_size % 4 != 0 || !std::has_single_bit(static_cast<unsigned>(image_size / 4)))
        throw ConfigError("image_size must be 4·2^k with k >= 1, got " + std::to_string(image_size));
    if (fc_hidden <= 0 || gen_base_channels <= 0 || disc_base_channels <= 0 || perc_base_channels <= 0 ||
        perc_feature_dim <= 0)
        throw ConfigError("model widths must be positive");
    if (pool_kernel < 1 || pool_kernel % 2 == 0) throw ConfigError("pool_kernel must be odd");
}

nlohmann::json ModelConfig::to_json() const {
    return {{"image_size", image_size},         {"fc_hidden", fc_hidden},
            {"gen_base_channels", gen_base_channels}, {"disc_base_channels", disc_base_channels},
            {"perc_base_channels", perc_base_channels}, {"perc_feature_dim", perc_feature_dim},
            {"leaky_slope", leaky_slope},       {"pool_kernel", pool_kernel}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c = for_scale(j.at("image_size").get<int>());
    c.fc_hidden = j.value("fc_hidden", c.fc_hidden);
    c.gen_base_channels = j.value("gen_base_channels", c.gen_base_channels);
    c.disc_base_channels = j.value("disc_base_channels", c.disc_base_channels);
    c.perc_base_channels = j.value("perc_base_channels", c.perc_base_channels);
    c.perc_feature_dim = j.value("perc_feature_dim", c.perc_feature_dim);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.pool_kernel = j.value("pool_kernel", c.pool_kernel);
    c.validate();
    return c;
}

namespace model {

using nn::Shape;
using nn::Tensor;

Tensor to_batch(std::span<const ImageTensor> images) {
    if (images.empty()) throw ShapeError("to_batch: empty image list");
    const int n = static_cast<int>(images.size()), c = images[0].channels, h = images[0].height, w = images[0].width;
    Tensor t = Tensor::zeros({n, c, h, w});
    auto d = t.data();
    for (int s = 0; s < n; ++s) {
        if (!images[s].same_shape(images[0])) throw ShapeError("to_batch: images differ in shape");
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int k = 0; k < c; ++k)
                    d[((static_cast<std::size_t>(s) * c + k) * h + y) * w + x] = images[s].at(y, x, k);
    }
    return t;
}

Tensor to_batch(const ImageTensor& image) { return to_batch(std::span<const ImageTensor>(&image, 1)); }

ImageTensor image_from_batch(const Tensor& t, int index) {
    const int c = t.dim(1), h = t.dim(2), w = t.dim(3);
    ImageTensor img(h, w, c);
    const auto d = t.data();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < c; ++k) img.at(y, x, k) = d[((static_cast<std::size_t>(index) * c + k) * h + y) * w + x];
    return img;
}

MaskProbabilities mask_from_batch(const Tensor& t, int index) {
    if (t.dim(1) != 2) throw ShapeError("mask tensor must have 2 channels");
    const int h = t.dim(2), w = t.dim(3);
    MaskProbabilities m(h, w);
    const auto d = t.data();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < 2; ++k)
                m.data[(static_cast<std::size_t>(y) * w + x) * 2 + k] =
                    d[((static_cast<std::size_t>(index) * 2 + k) * h + y) * w + x];
    return m;
}

Tensor condition_batch(std::span<const AttributeVector> attributes, std::span<const LandmarkVector> landmarks) {
    if (attributes.size() != landmarks.size()) throw ShapeError("condition_batch: attribute/landmark count mismatch");
    const int n = static_cast<int>(attributes.size());
    Tensor t = Tensor::zeros({n, kConditionDim});
    for (int s = 0; s < n; ++s) {
        const auto v = condition_vector(attributes[s], landmarks[s]);
        std::copy(v.begin(), v.end(), t.data().begin() + static_cast<std::ptrdiff_t>(s) * kConditionDim);
    }
    return t;
}

Generator::Generator(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    const auto ch = cfg_.generator_channels();
    params_.add_weight("fc1.w", {cfg_.fc_hidden, kConditionDim}, kConditionDim, seed);
    params_.add_zeros("fc1.b", {cfg_.fc_hidden});
    params_.add_weight("fc2.w", {ch[0] * 16, cfg_.fc_hidden}, cfg_.fc_hidden, seed);
    params_.add_zeros("fc2.b", {ch[0] * 16});
    for (int i = 0; i < cfg_.upsample_blocks(); ++i) {
        const std::string p = "block" + std::to_string(i);
        params_.add_weight(p + ".deconv.w", {ch[i + 1], ch[i], 5, 5}, ch[i] * 25, seed);
        params_.add_zeros(p + ".deconv.b", {ch[i + 1]});
        params_.add_weight(p + ".conv.w", {ch[i + 1], ch[i + 1], 3, 3}, ch[i + 1] * 9, seed);
        params_.add_zeros(p + ".conv.b", {ch[i + 1]});
    }
    params_.add_weight("head_image.w", {3, ch.back(), 3, 3}, ch.back() * 9, seed, 0.5);
    params_.add_zeros("head_image.b", {3});
    params_.add_weight("head_mask.w", {2, ch.back(), 3, 3}, ch.back() * 9, seed, 0.5);
    params_.add_zeros("head_mask.b", {2});
}

GeneratorOutput Generator::forward(const Tensor& cond, std::vector<Shape>* trace) const {
    if (cond.rank() != 2 || cond.dim(1) != kConditionDim)
        throw ShapeError("generator input must be [N,17], got " + nn::to_string(cond.shape()));
    auto record = [trace](const Tensor& t) {
        if (trace) trace->push_back(t.shape());
    };
    const double slope = cfg_.leaky_slope;
    const auto ch = cfg_.generator_channels();
    const int n = cond.dim(0);
    Tensor x = nn::leaky_relu(nn::linear(cond, params_.at("fc1.w"), params_.at("fc1.b")), slope);
    record(x);
    x = nn::leaky_relu(nn::linear(x, params_.at("fc2.w"), params_.at("fc2.b")), slope);
    record(x);
    x = nn::reshape(x, {n, ch[0], 4, 4});
    record(x);
    for (int i = 0; i < cfg_.upsample_blocks(); ++i) {
        const std::string p = "block" + std::to_string(i);
        x = nn::upsample2x(x);
        x = nn::leaky_relu(nn::conv2d(x, params_.at(p + ".deconv.w"), params_.at(p + ".deconv.b"), 1, 2), slope);
        record(x);
        x = nn::leaky_relu(nn::conv2d(x, params_.at(p + ".conv.w"), params_.at(p + ".conv.b"), 1, 1), slope);
        record(x);
    }
    x = nn::max_pool2d(x, cfg_.pool_kernel, 1, cfg_.pool_kernel / 2);
    record(x);
    GeneratorOutput out;
    out.image = nn::sigmoid(nn::conv2d(x, params_.at("head_image.w"), params_.at("head_image.b"), 1, 1));
    out.mask = nn::softmax_channels(nn::conv2d(x, params_.at("head_mask.w"), params_.at("head_mask.b"), 1, 1));
    record(out.image);
    record(out.mask);
    return out;
}

Discriminator::Discriminator(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    convs_ = cfg_.upsample_blocks();
    int in = 3;
    for (int i = 0; i < convs_; ++i) {
        const int out = cfg_.disc_base_channels << i;
        const std::string p = "conv" + std::to_string(i);
        params_.add_weight(p + ".w", {out, in, 4, 4}, in * 16, seed);
        params_.add_zeros(p + ".b", {out});
        in = out;
    }
    params_.add_weight("head.w", {1, in * 16}, in * 16, seed, 0.5);
    params_.add_zeros("head.b", {1});
}

Tensor Discriminator::forward(const Tensor& images) const {
    if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != cfg_.image_size ||
        images.dim(3) != cfg_.image_size)
        throw ShapeError("discriminator input must be [N,3," + std::to_string(cfg_.image_size) + "," +
                         std::to_string(cfg_.image_size) + "], got " + nn::to_string(images.shape()));
    Tensor x = images;
    for (int i = 0; i < convs_; ++i) {
        const std::string p = "conv" + std::to_string(i);
        x = nn::leaky_relu(nn::conv2d(x, params_.at(p + ".w"), params_.at(p + ".b"), 2, 1), cfg_.leaky_slope);
    }
    x = nn::reshape(x, {x.dim(0), static_cast<int>(x.size() / x.dim(0))});
    return nn::sigmoid(nn::linear(x, params_.at("head.w"), params_.at("head.b")));
}

IdentityNet::IdentityNet(const ModelConfig& cfg, int num_classes, std::uint64_t seed)
    : cfg_(cfg), num_classes_(num_classes) {
    cfg_.validate();
    if (num_classes < 2) throw ConfigError("identity network needs at least 2 classes");
    int in = 3, size = cfg_.image_size;
    for (int i = 0; i < kBlocks; ++i) {
        const int out = cfg_.perc_base_channels << i;
        const std::string p = "block" + std::to_string(i);
        params_.add_weight(p + ".w", {out, in, 3, 3}, in * 9, seed);
        params_.add_zeros(p + ".b", {out});
        in = out;
        size = (size - 1) / 2 + 1;
    }
    const int flat = in * size * size;
    params_.add_weight("penultimate.w", {cfg_.perc_feature_dim, flat}, flat, seed);
    params_.add_zeros("penultimate.b", {cfg_.perc_feature_dim});
    params_.add_weight("logits.w", {num_classes, cfg_.perc_feature_dim}, cfg_.perc_feature_dim, seed, 0.5);
    params_.add_zeros("logits.b", {num_classes});
}

IdentityNet::Activations IdentityNet::forward(const Tensor& images) const {
    if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != cfg_.image_size ||
        images.dim(3) != cfg_.image_size)
        throw ShapeError("identity network input must be [N,3," + std::to_string(cfg_.image_size) + "," +
                         std::to_string(cfg_.image_size) + "], got " + nn::to_string(images.shape()));
    Activations a;
    Tensor x = images;
    for (int i = 0; i < kBlocks; ++i) {
        const std::string p = "block" + std::to_string(i);
        x = nn::leaky_relu(nn::conv2d(x, params_.at(p + ".w"), params_.at(p + ".b"), 2, 1), cfg_.leaky_slope);
        a.blocks.push_back(x);
    }
    x = nn::reshape(x, {x.dim(0), static_cast<int>(x.size() / x.dim(0))});
    a.penultimate = nn::leaky_relu(nn::linear(x, params_.at("penultimate.w"), params_.at("penultimate.b")),
                                   cfg_.leaky_slope);
    a.logits = nn::linear(a.penultimate, params_.at("logits.w"), params_.at("logits.b"));
    return a;
}

void PerceptualConfig::validate() const {
    if (!network) throw ConfigError("perceptual config has no network");
    if (layer_set.empty()) throw ConfigError("perceptual layer set is empty");
    for (int l : layer_set)
        if (l < 0 || l >= IdentityNet::kBlocks)
            throw ConfigError("perceptual layer index " + std::to_string(l) + " is not a valid block (0-" +
                              std::to_string(IdentityNet::kBlocks - 1) + ")");
}

std::pair<ImageTensor, MaskProbabilities> generator_forward(const AttributeVector& va, const LandmarkVector& vl,
                                                            const Generator& g) {
    const auto out = g.forward(condition_batch(std::span(&va, 1), std::span(&vl, 1)));
    return {image_from_batch(out.image, 0), mask_from_batch(out.mask, 0)};
}

std::pair<ImageTensor, MaskProbabilities> generator_forward(std::span<const double> va, std::span<const double> vl,
                                                            const Generator& g) {
    return generator_forward(AttributeVector::from_values(va), LandmarkVector::from_values(vl), g);
}

double discriminator_forward(const ImageTensor& image, const Discriminator& d) {
    return d.forward(to_batch(image)).item();
}

std::vector<Tensor> perceptual_features(const ImageTensor& image, const PerceptualConfig& cfg) {
    cfg.validate();
    const auto acts = cfg.network->forward(to_batch(resize_to(image, cfg.network->input_size())));
    std::vector<Tensor> out;
    for (int l : cfg.layer_set) out.push_back(acts.blocks[static_cast<std::size_t>(l)]);
    return out;
}

namespace {

std::vector<ImageTensor> resized(std::span<const ImageTensor> images, int size) {
    std::vector<ImageTensor> out;
    out.reserve(images.size());
    for (const auto& im : images) out.push_back(resize_to(im, size));
    return out;
}

template <typename Fn>
void for_each_batch(std::size_t n, std::size_t batch, Fn&& fn) {
    for (std::size_t start = 0; start < n; start += batch) fn(start, std::min(n, start + batch));
}

}  // namespace

ClassifierTrainResult train_classifier(IdentityNet& net, std::span<const ImageTensor> images,
                                       std::span<const int> labels, const ClassifierTrainConfig& cfg) {
    if (images.size() != labels.size() || images.empty())
        throw ConfigError("train_classifier: image/label count mismatch or empty set");
    const auto inputs = resized(images, net.input_size());
    nn::Adam opt(net.params(), {cfg.learning_rate, 0.9, 0.999, 1e-8});
    std::vector<std::size_t> order(inputs.size());
    ClassifierTrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch)}));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        std::size_t correct = 0;
        for_each_batch(order.size(), static_cast<std::size_t>(cfg.batch_size), [&](std::size_t b, std::size_t e) {
            std::vector<ImageTensor> batch;
            std::vector<int> y;
            for (std::size_t i = b; i < e; ++i) {
                batch.push_back(inputs[order[i]]);
                y.push_back(labels[order[i]]);
            }
            net.params().zero_grad();
            const auto acts = net.forward(to_batch(batch));
            const int k = net.num_classes();
            for (std::size_t s = 0; s < y.size(); ++s) {
                const auto row = acts.logits.data().subspan(s * k, k);
                if (std::max_element(row.begin(), row.end()) - row.begin() == y[s]) ++correct;
            }
            nn::backward(nn::cross_entropy(acts.logits, y));
            opt.step();
        });
        result.epochs_run = epoch + 1;
        result.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
        if (result.train_accuracy >= cfg.target_accuracy) break;
    }
    return result;
}

std::vector<int> classify(const IdentityNet& net, std::span<const ImageTensor> images) {
    std::vector<int> out;
    const auto inputs = resized(images, net.input_size());
    for_each_batch(inputs.size(), 32, [&](std::size_t b, std::size_t e) {
        const auto acts = net.forward(to_batch(std::span(inputs).subspan(b, e - b)));
        const int k = net.num_classes();
        for (std::size_t s = 0; s < e - b; ++s) {
            const auto row = acts.logits.data().subspan(s * k, k);
            out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
        }
    });
    return out;
}

std::vector<std::vector<double>> embed(const IdentityNet& net, std::span<const ImageTensor> images) {
    std::vector<std::vector<double>> out;
    const auto inputs = resized(images, net.input_size());
    for_each_batch(inputs.size(), 32, [&](std::size_t b, std::size_t e) {
        const auto acts = net.forward(to_batch(std::span(inputs).subspan(b, e - b)));
        const int f = acts.penultimate.dim(1);
        for (std::size_t s = 0; s < e - b; ++s) {
            const auto row = acts.penultimate.data().subspan(s * f, f);
            out.emplace_back(row.begin(), row.end());
        }
    });
    return out;
}

std::vector<std::string> identity_labels(std::span<const FaceRecord> corpus) {
    std::vector<std::string> ids;
    for (const auto& r : corpus)
        if (r.identity) ids.push_back(*r.identity);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

PerceptualConfig pretrain_perceptual(std::span<const FaceRecord> corpus, const ModelConfig& cfg,
                                     const ClassifierTrainConfig& train_cfg) {
    const auto ids = identity_labels(corpus);
    std::map<std::string, int> counts;
    for (const auto& r : corpus)
        if (r.identity) ++counts[*r.identity];
    const bool enough = ids.size() >= 2 && std::all_of(counts.begin(), counts.end(), [](const auto& kv) {
                            return kv.second >= 2;
                        });
    if (!enough) throw ConfigError("perceptual pretraining needs >= 2 identities with >= 2 images each");

    std::vector<ImageTensor> images;
    std::vector<int> labels;
    for (const auto& r : corpus) {
        if (!r.identity) continue;
        images.push_back(resize_to(r.image, cfg.image_size));
        labels.push_back(static_cast<int>(std::lower_bound(ids.begin(), ids.end(), *r.identity) - ids.begin()));
    }
    auto net = std::make_shared<IdentityNet>(cfg, static_cast<int>(ids.size()), derive_seed(train_cfg.seed, {0x9e7u}));
    const auto result = train_classifier(*net, images, labels, train_cfg);
    if (result.train_accuracy < train_cfg.target_accuracy)
        throw TrainingError("perceptual network reached training accuracy " + std::to_string(result.train_accuracy) +
                            " after " + std::to_string(result.epochs_run) + " epochs (target " +
                            std::to_string(train_cfg.target_accuracy) + ")");
    net->params().set_requires_grad(false);
    PerceptualConfig pc;
    pc.network = std::move(net);
    return pc;
}

}  // namespace model
}  // namespace upgan
