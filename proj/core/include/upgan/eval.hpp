// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "upgan/baselines.hpp"
#include "upgan/model.hpp"
#include "upgan/rng.hpp"
#include "upgan/swap.hpp"

namespace upgan {

enum class MethodKind { none, gaussian, pixelate, ksame, upgan };

struct ObscurationMethod {
    MethodKind kind = MethodKind::none;
    int param = 0;  // kernel size, block size or k

    /// Table label, e.g. "Gaussian-5", "Pixelation-8", "k-same", "UP-GAN".
    std::string label() const;
    nlohmann::json to_json() const;
    /// Parses "none", "gaussian:5", "pixelate:8", "ksame:10", "upgan".
    static ObscurationMethod parse(const std::string& text);
    bool operator==(const ObscurationMethod&) const = default;
};

struct ObscurationResult {
    std::string source_id;
    ImageTensor image;
    nlohmann::json metadata;
};

struct ObscureContext {
    const model::Generator* generator = nullptr;  // required for UP-GAN
    BlendOptions blend;
};

namespace eval {

/// Obscures every record. k-same clusters the given records as one set.
std::vector<ObscurationResult> obscure(std::span<const FaceRecord> records, const ObscurationMethod& method,
                                       const ObscureContext& ctx = {});

enum class ThreatModel { I, II };
std::string to_string(ThreatModel m);

struct ThreatScenario {
    ThreatModel model = ThreatModel::I;
    ObscurationMethod method;
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
};

class Identifier {
public:
    virtual ~Identifier() = default;
    virtual int predict(const ImageTensor& image) const = 0;
    virtual std::vector<int> predict_all(std::span<const ImageTensor> images) const;
};

class ConstantIdentifier final : public Identifier {
public:
    explicit ConstantIdentifier(int label) : label_(label) {}
    int predict(const ImageTensor&) const override { return label_; }

private:
    int label_;
};

/// Uniform guesses over m classes from a seeded stream.
class RandomIdentifier final : public Identifier {
public:
    RandomIdentifier(int classes, std::uint64_t seed) : classes_(classes), rng_(seed) {}
    int predict(const ImageTensor&) const override;

private:
    int classes_;
    mutable Rng rng_;
};

/// Exact table lookup from surrogate image to the most frequent label of
/// its cluster members (lowest label on ties); -1 for unknown images.
class LookupIdentifier final : public Identifier {
public:
    LookupIdentifier(const KSameResult& clusters, std::span<const int> labels);
    int predict(const ImageTensor& image) const override;

private:
    std::vector<std::pair<ImageTensor, int>> table_;
};

/// Convolutional identity classifier.
class CnnIdentifier final : public Identifier {
public:
    explicit CnnIdentifier(std::shared_ptr<model::IdentityNet> net) : net_(std::move(net)) {}
    int predict(const ImageTensor& image) const override;
    std::vector<int> predict_all(std::span<const ImageTensor> images) const override;
    const model::IdentityNet& network() const { return *net_; }

private:
    std::shared_ptr<model::IdentityNet> net_;
};

struct IdentifierConfig {
    int image_size = 32;
    int epochs = 30;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double target_accuracy = 1.0;  // early stop once reached
};

/// Model I trains on clear images only; model II on a stream alternating
/// each clear training image with its obscured version.
CnnIdentifier train_identifier(std::span<const ImageTensor> clear, std::span<const ImageTensor> obscured,
                               std::span<const int> labels, int num_classes, const ThreatScenario& scenario,
                               const IdentifierConfig& cfg);

/// Top-1 accuracy. An empty test set is a SampleSizeError.
double identification_accuracy(const Identifier& identifier, std::span<const ImageTensor> images,
                               std::span<const int> labels);

/// Per-identity split in record order: the first ceil(fraction·n) images of
/// each identity train, the rest test. Throws SplitError if any identity
/// lacks a train or test image.
struct Split {
    std::vector<int> train;
    std::vector<int> test;
    std::vector<int> labels;  // record index -> class
    std::vector<std::string> identities;
};
Split split_by_identity(std::span<const FaceRecord> corpus, double train_fraction);

/// Frechet distance between Gaussian fits of two feature sets. Each set
/// must be larger than the feature dimension.
double fid(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b);

struct TableRow {
    std::string method;
    double accuracy_i = 0.0;
    double accuracy_ii = 0.0;
    double fid = 0.0;
};

struct MetricsReport {
    std::vector<TableRow> rows;
    nlohmann::json provenance;

    const TableRow& row(const std::string& method) const;
    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
    /// Aligned columns: Method, Threat Model I, Threat Model II, FID.
    std::string to_text() const;
};

struct TableConfig {
    std::vector<ObscurationMethod> methods;
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    IdentifierConfig identifier;

    /// None, Gaussian-5/15/25, Pixelation-4/8/16, k-same (k=10), UP-GAN.
    static std::vector<ObscurationMethod> default_methods();
    nlohmann::json to_json() const;
    static TableConfig from_json(const nlohmann::json& j);
};

/// Runs every method under both threat models. `generator` is needed only
/// for UP-GAN; `features` provides the FID embedding (penultimate layer).
MetricsReport run_table(std::span<const FaceRecord> corpus, const TableConfig& cfg, const model::Generator* generator,
                        const model::IdentityNet& features);

}  // namespace eval
}  // namespace upgan
