// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "grad_check.hpp"
#include "test_support.hpp"
#include "upgan/error.hpp"
#include "upgan/model.hpp"

using namespace upgan;
using nn::Tensor;

namespace {

AttributeVector some_attributes() { return {34.0 / kAgeDivisor, 1.0, 0.5}; }

Tensor single_condition() {
    const AttributeVector a = some_attributes();
    const LandmarkVector l = test::default_landmarks();
    return model::condition_batch(std::span(&a, 1), std::span(&l, 1));
}

}  // namespace

TEST(Generator, FullScaleShapeTrace) {
    const auto cfg = ModelConfig::for_scale(128);
    model::Generator g(cfg, 1);
    std::vector<nn::Shape> trace;
    auto out = g.forward(single_condition(), &trace);
    EXPECT_EQ(out.image.shape(), (nn::Shape{1, 3, 128, 128}));
    EXPECT_EQ(out.mask.shape(), (nn::Shape{1, 2, 128, 128}));
    std::vector<int> spatial;
    for (const auto& s : trace)
        if (s.size() == 4 && (spatial.empty() || spatial.back() != s[2])) spatial.push_back(s[2]);
    EXPECT_EQ(spatial, (std::vector<int>{4, 8, 16, 32, 64, 128}));
    EXPECT_EQ(cfg.upsample_blocks(), 5);
}

TEST(Generator, TypedOutputsInRangeAndNormalized) {
    model::Generator g(ModelConfig::for_scale(128), 2);
    auto [img, mask] = model::generator_forward(some_attributes(), test::default_landmarks(), g);
    EXPECT_EQ(img.height, 128);
    EXPECT_EQ(img.width, 128);
    EXPECT_EQ(img.channels, 3);
    EXPECT_EQ(mask.height, 128);
    EXPECT_TRUE(img.in_unit_range());
    EXPECT_LE(mask.max_normalization_error(), 1e-5);
}

TEST(Generator, ParameterCountIsPureFunctionOfConfig) {
    const auto cfg = ModelConfig::for_scale(32);
    model::Generator a(cfg, 1), b(cfg, 99);
    EXPECT_EQ(a.params().parameter_count(), b.params().parameter_count());
    std::vector<nn::Shape> ta, tb;
    a.forward(single_condition(), &ta);
    b.forward(single_condition(), &tb);
    EXPECT_EQ(ta, tb);
}

TEST(Generator, ZeroParamsGiveConstantHalfImage) {
    model::Generator g(ModelConfig::for_scale(32), 3);
    g.params().fill(0.0);
    auto [img, mask] = model::generator_forward(some_attributes(), test::default_landmarks(), g);
    for (double v : img.data) EXPECT_EQ(v, 0.5);
    for (double v : mask.data) EXPECT_EQ(v, 0.5);
}

TEST(Generator, DeterministicForward) {
    model::Generator g(ModelConfig::for_scale(32), 4);
    auto a = model::generator_forward(some_attributes(), test::default_landmarks(), g);
    auto b = model::generator_forward(some_attributes(), test::default_landmarks(), g);
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second.data, b.second.data);
}

TEST(Generator, WrongInputDimensionThrows) {
    model::Generator g(ModelConfig::for_scale(8), 5);
    EXPECT_THROW(g.forward(Tensor::zeros({1, 16})), ShapeError);
    const std::vector<double> va(3, 0.5), vl(13, 0.5);
    EXPECT_THROW(model::generator_forward(va, vl, g), ShapeError);
}

TEST(Discriminator, OutputOpenUnitIntervalAndDeterministic) {
    model::Discriminator d(ModelConfig::for_scale(128), 6);
    const auto img = test::random_image(128, 128, 3, 7);
    const double p = model::discriminator_forward(img, d);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    EXPECT_EQ(p, model::discriminator_forward(img, d));
    d.params().fill(0.0);
    EXPECT_EQ(model::discriminator_forward(img, d), 0.5);
    EXPECT_THROW(model::discriminator_forward(test::random_image(64, 64, 3, 1), d), ShapeError);
}

TEST(Perceptual, FeatureListFollowsLayerSet) {
    const auto cfg = ModelConfig::for_scale(32);
    model::PerceptualConfig pc{std::make_shared<model::IdentityNet>(cfg, 5, 8), {0, 2, 3}};
    const auto img = test::random_image(32, 32, 3, 9);
    const auto f = model::perceptual_features(img, pc);
    ASSERT_EQ(f.size(), 3u);
    const auto g = model::perceptual_features(img, pc);
    for (std::size_t i = 0; i < f.size(); ++i)
        EXPECT_TRUE(std::equal(f[i].data().begin(), f[i].data().end(), g[i].data().begin()));
}

TEST(Perceptual, InvalidLayerSetThrows) {
    const auto cfg = ModelConfig::for_scale(32);
    auto net = std::make_shared<model::IdentityNet>(cfg, 5, 8);
    EXPECT_THROW((model::PerceptualConfig{net, {}}.validate()), ConfigError);
    EXPECT_THROW((model::PerceptualConfig{net, {4}}.validate()), ConfigError);
    EXPECT_THROW(model::perceptual_features(test::random_image(32, 32, 3, 1), model::PerceptualConfig{net, {-1}}),
                 ConfigError);
}

TEST(Perceptual, SmallPerturbationGivesSmallNonzeroChange) {
    const auto cfg = ModelConfig::for_scale(32);
    model::PerceptualConfig pc{std::make_shared<model::IdentityNet>(cfg, 5, 10)};
    auto img = test::random_image(32, 32, 3, 11, 0.1, 0.9);
    const auto base = model::perceptual_features(img, pc);
    for (double& v : img.data) v += 1e-4;
    const auto moved = model::perceptual_features(img, pc);
    double diff = 0.0, norm = 0.0;
    for (std::size_t l = 0; l < base.size(); ++l)
        for (std::size_t i = 0; i < base[l].size(); ++i) {
            diff += std::abs(base[l].data()[i] - moved[l].data()[i]);
            norm += std::abs(base[l].data()[i]);
        }
    EXPECT_TRUE(std::isfinite(diff));
    EXPECT_GT(diff, 0.0);
    EXPECT_LT(diff, 1e-2 * norm);
}

TEST(GradCheck, TinyGeneratorAllParameters) {
    model::Generator g(ModelConfig::for_scale(8), 12);
    const Tensor cond = single_condition();
    std::vector<Tensor*> inputs;
    for (auto& t : g.params().tensors()) inputs.push_back(&t);
    Rng rng(13);
    Tensor target_img = Tensor::zeros({1, 3, 8, 8}), target_mask = Tensor::zeros({1, 2, 8, 8});
    for (double& v : target_img.data()) v = rng.uniform();
    for (double& v : target_mask.data()) v = rng.uniform();
    auto r = test::grad_check(inputs, [&] {
        auto out = g.forward(cond);
        return nn::weighted_sum({{nn::sum_squared_error(out.image, target_img), 1.0},
                                 {nn::sum_squared_error(out.mask, target_mask), 1.0}});
    }, 6);
    EXPECT_LE(r.max_rel_error, 1e-3) << r.worst;
    EXPECT_GT(r.checked, 50);
}

TEST(GradCheck, TinyDiscriminatorAllParameters) {
    model::Discriminator d(ModelConfig::for_scale(8), 14);
    Tensor img = model::to_batch(test::random_image(8, 8, 3, 15));
    std::vector<Tensor*> inputs{&img};
    for (auto& t : d.params().tensors()) inputs.push_back(&t);
    auto r = test::grad_check(inputs, [&] { return nn::mean_log(d.forward(img), 1e-7); }, 8);
    EXPECT_LE(r.max_rel_error, 1e-3) << r.worst;
}

TEST(Config, JsonRoundTripAndValidation) {
    for (int s : {8, 16, 32, 64, 128}) {
        const auto cfg = ModelConfig::for_scale(s);
        EXPECT_EQ(ModelConfig::from_json(cfg.to_json()), cfg);
    }
    EXPECT_THROW(ModelConfig::for_scale(48), ConfigError);
}

TEST(Pretrain, TooFewIdentitiesIsConfigError) {
    dataset::SynthCorpusSpec spec;
    spec.records = 4;
    spec.identities = 1;
    spec.size = 32;
    spec.seed = 3;
    const auto corpus = dataset::make_synthetic_corpus(spec);
    EXPECT_THROW(model::pretrain_perceptual(corpus, ModelConfig::for_scale(32), {}), ConfigError);
}

TEST(Pretrain, ReachesTargetOnToyCorpus) {
    dataset::SynthCorpusSpec spec;
    spec.records = 24;
    spec.identities = 4;
    spec.size = 32;
    spec.seed = 5;
    const auto corpus = dataset::make_synthetic_corpus(spec);
    model::ClassifierTrainConfig tc;
    tc.epochs = 40;
    tc.batch_size = 8;
    const auto pc = model::pretrain_perceptual(corpus, ModelConfig::for_scale(32), tc);
    std::vector<ImageTensor> imgs;
    for (const auto& r : corpus) imgs.push_back(r.image);
    const auto names = model::identity_labels(corpus);
    const auto pred = model::classify(*pc.network, imgs);
    int hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += names[static_cast<std::size_t>(pred[i])] == *corpus[i].identity;
    EXPECT_GE(hits / static_cast<double>(pred.size()), 0.9);
}
