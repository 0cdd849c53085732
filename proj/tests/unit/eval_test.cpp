// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "upgan/error.hpp"
#include "upgan/eval.hpp"

using namespace upgan;

namespace {

std::vector<std::vector<double>> gaussian_sample(int n, double mx, double my, double sd, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> out;
    for (int i = 0; i < n; ++i) out.push_back({rng.normal(mx, sd), rng.normal(my, sd)});
    return out;
}

std::vector<FaceRecord> corpus(int records, int identities, int size, std::uint64_t seed) {
    dataset::SynthCorpusSpec spec;
    spec.records = records;
    spec.identities = identities;
    spec.size = size;
    spec.seed = seed;
    return dataset::make_synthetic_corpus(spec);
}

}  // namespace

TEST(Fid, IdenticalSetsGiveZero) {
    const auto a = gaussian_sample(500, 0.3, -0.2, 1.5, 1);
    EXPECT_NEAR(eval::fid(a, a), 0.0, 1e-6);
}

TEST(Fid, ClosedFormMeanShift) {
    const auto a = gaussian_sample(10000, 0, 0, 1, 2), b = gaussian_sample(10000, 1, 0, 1, 3);
    EXPECT_NEAR(eval::fid(a, b), 1.0, 0.1);
}

TEST(Fid, ClosedFormScaleChange) {
    const auto a = gaussian_sample(10000, 0, 0, 1, 4), b = gaussian_sample(10000, 0, 0, 2, 5);
    EXPECT_NEAR(eval::fid(a, b), 2.0, 0.2);
}

TEST(Fid, SymmetricAndNonNegative) {
    const auto a = gaussian_sample(300, 0, 1, 1, 6), b = gaussian_sample(400, 0.5, 0, 0.7, 7);
    const double ab = eval::fid(a, b), ba = eval::fid(b, a);
    EXPECT_NEAR(ab, ba, 1e-6);
    EXPECT_GE(ab, 0.0);
}

TEST(Fid, TooFewSamplesIsSampleSizeError) {
    const auto a = gaussian_sample(2, 0, 0, 1, 8);
    EXPECT_THROW(eval::fid(a, a), SampleSizeError);
}

TEST(Identifiers, ConstantAndRandom) {
    std::vector<ImageTensor> imgs(1000, ImageTensor(2, 2));
    std::vector<int> all_a(1000, 3);
    EXPECT_EQ(eval::identification_accuracy(eval::ConstantIdentifier(3), imgs, all_a), 1.0);
    std::vector<int> mixed(1000);
    for (int i = 0; i < 1000; ++i) mixed[static_cast<std::size_t>(i)] = i % 10;
    EXPECT_NEAR(eval::identification_accuracy(eval::RandomIdentifier(10, 9), imgs, mixed), 0.1, 0.04);
    EXPECT_THROW(eval::identification_accuracy(eval::ConstantIdentifier(0), {}, {}), SampleSizeError);
}

TEST(Identifiers, LookupOnKSameRespectsOneOverK) {
    const auto c = corpus(100, 100, 16, 10);
    const auto ks = baselines::k_same(c, {10});
    std::vector<int> labels(100);
    for (int i = 0; i < 100; ++i) labels[static_cast<std::size_t>(i)] = i;
    const eval::LookupIdentifier lookup(ks, labels);
    std::vector<ImageTensor> obscured;
    for (int i = 0; i < 100; ++i) obscured.push_back(ks.surrogate_for(i));
    EXPECT_LE(eval::identification_accuracy(lookup, obscured, labels), 0.1 + 0.03);
    EXPECT_EQ(lookup.predict(c[0].image), -1);
}

TEST(Obscure, MethodParsingAndLabels) {
    EXPECT_EQ(ObscurationMethod::parse("gaussian:15").label(), "Gaussian-15");
    EXPECT_EQ(ObscurationMethod::parse("pixelate:8").label(), "Pixelation-8");
    EXPECT_EQ(ObscurationMethod::parse("ksame").param, 10);
    EXPECT_EQ(ObscurationMethod::parse("upgan").label(), "UP-GAN");
    EXPECT_THROW(ObscurationMethod::parse("gaussian:4"), ArgumentError);
    EXPECT_THROW(ObscurationMethod::parse("blur"), ArgumentError);
    EXPECT_THROW(ObscurationMethod::parse("none:3"), ArgumentError);
    EXPECT_THROW(ObscurationMethod::parse("pixelate:x"), ArgumentError);
}

TEST(Obscure, MetadataAndUpganNeedsGenerator) {
    const auto c = corpus(3, 3, 32, 11);
    const auto r = eval::obscure(c, ObscurationMethod::parse("gaussian:5"));
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[1].metadata.at("source_id"), c[1].id);
    EXPECT_NEAR(r[1].metadata.at("sigma").get<double>(), 1.1, 1e-12);
    EXPECT_THROW(eval::obscure(c, ObscurationMethod::parse("upgan")), ConfigError);
}

TEST(Obscure, UpganSwapKeepsBackground) {
    const auto c = corpus(2, 2, 32, 12);
    model::Generator g(ModelConfig::for_scale(32), 13);
    ObscureContext ctx;
    ctx.generator = &g;
    const auto r = eval::obscure(c, ObscurationMethod::parse("upgan"), ctx);
    EXPECT_EQ(r[0].image.at(0, 0, 0), c[0].image.at(0, 0, 0));
    EXPECT_TRUE(r[0].image.in_unit_range());
}

TEST(Split, PerIdentityDisjointAndDegenerate) {
    const auto c = corpus(20, 4, 16, 14);
    const auto s = eval::split_by_identity(c, 0.6);
    EXPECT_EQ(s.train.size() + s.test.size(), 20u);
    EXPECT_EQ(s.train.size(), 12u);
    for (int t : s.test) EXPECT_EQ(std::count(s.train.begin(), s.train.end(), t), 0);
    EXPECT_THROW(eval::split_by_identity(corpus(4, 4, 16, 15), 0.5), SplitError);
}

TEST(Report, TextTableLayoutAndJsonRoundTrip) {
    eval::MetricsReport rep;
    rep.rows = {{"None", 0.955, 0.955, 0.0}, {"Pixelation-16", 0.003, 0.412, 123.456}};
    const auto text = rep.to_text();
    std::istringstream is(text);
    std::string header, rule, row1;
    std::getline(is, header);
    std::getline(is, rule);
    std::getline(is, row1);
    EXPECT_EQ(header.find("Method"), 0u);
    EXPECT_NE(header.find("Threat Model I"), std::string::npos);
    EXPECT_NE(header.find("Threat Model II"), std::string::npos);
    EXPECT_EQ(header.size(), row1.size());
    EXPECT_EQ(header.rfind("FID") + 3, header.size());
    EXPECT_NE(text.find("0.955"), std::string::npos);
    const auto back = eval::MetricsReport::from_json(rep.to_json());
    EXPECT_EQ(back.row("Pixelation-16").accuracy_ii, 0.412);
}

TEST(Identifier, ModelTwoStreamDoublesTrainingData) {
    const auto c = corpus(12, 3, 16, 16);
    std::vector<ImageTensor> clear, obs;
    std::vector<int> labels;
    const auto s = eval::split_by_identity(c, 0.5);
    for (int i : s.train) {
        clear.push_back(c[static_cast<std::size_t>(i)].image);
        obs.push_back(baselines::pixelate(c[static_cast<std::size_t>(i)].image, 4));
        labels.push_back(s.labels[static_cast<std::size_t>(i)]);
    }
    eval::ThreatScenario sc;
    sc.model = eval::ThreatModel::II;
    eval::IdentifierConfig ic;
    ic.image_size = 16;
    ic.epochs = 2;
    EXPECT_NO_THROW(eval::train_identifier(clear, obs, labels, 3, sc, ic));
    EXPECT_THROW(eval::train_identifier(clear, std::span(obs).first(1), labels, 3, sc, ic), SplitError);
}
