// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <Eigen/Dense>

#include "upgan/error.hpp"
#include "upgan/log.hpp"

namespace upgan {

std::string ObscurationMethod::label() const {
    switch (kind) {
        case MethodKind::none: return "None";
        case MethodKind::gaussian: return "Gaussian-" + std::to_string(param);
        case MethodKind::pixelate: return "Pixelation-" + std::to_string(param);
        case MethodKind::ksame: return "k-same";
        case MethodKind::upgan: return "UP-GAN";
    }
    return "?";
}

nlohmann::json ObscurationMethod::to_json() const {
    static const char* names[] = {"none", "gaussian", "pixelate", "ksame", "upgan"};
    nlohmann::json j = {{"method", names[static_cast<int>(kind)]}, {"label", label()}};
    if (kind == MethodKind::gaussian) {
        j["kernel_size"] = param;
        j["sigma"] = baselines::gaussian_sigma(param);
    } else if (kind == MethodKind::pixelate) {
        j["block_size"] = param;
    } else if (kind == MethodKind::ksame) {
        j["k"] = param;
    }
    return j;
}

ObscurationMethod ObscurationMethod::parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string name = text.substr(0, colon);
    std::optional<int> param;
    if (colon != std::string::npos) {
        const std::string p = text.substr(colon + 1);
        std::size_t used = 0;
        try {
            param = std::stoi(p, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != p.size()) throw ArgumentError("bad method parameter '" + p + "' in '" + text + "'");
    }
    auto need = [&](int fallback) { return param.value_or(fallback); };
    ObscurationMethod m;
    if (name == "none") {
        m.kind = MethodKind::none;
    } else if (name == "gaussian") {
        m = {MethodKind::gaussian, need(5)};
        baselines::gaussian_kernel(m.param);
    } else if (name == "pixelate" || name == "pixelation") {
        m = {MethodKind::pixelate, need(8)};
        if (m.param < 2) throw ArgumentError("pixelation block size must be >= 2");
    } else if (name == "ksame" || name == "k-same") {
        m = {MethodKind::ksame, need(10)};
        KSameConfig{m.param}.validate();
    } else if (name == "upgan") {
        m.kind = MethodKind::upgan;
    } else {
        throw ArgumentError("unknown obscuration method '" + name + "'");
    }
    if (param && (m.kind == MethodKind::none || m.kind == MethodKind::upgan))
        throw ArgumentError("method '" + name + "' takes no parameter");
    return m;
}

namespace eval {

std::vector<ObscurationResult> obscure(std::span<const FaceRecord> records, const ObscurationMethod& method,
                                       const ObscureContext& ctx) {
    std::vector<ObscurationResult> out;
    out.reserve(records.size());
    auto meta = [&](const FaceRecord& r) {
        auto j = method.to_json();
        j["source_id"] = r.id;
        return j;
    };
    if (method.kind == MethodKind::ksame) {
        const auto res = baselines::k_same(records, {method.param});
        for (std::size_t i = 0; i < records.size(); ++i) {
            auto j = meta(records[i]);
            j["cluster"] = res.cluster_of[i];
            out.push_back({records[i].id, res.surrogate_for(static_cast<int>(i)), j});
        }
        return out;
    }
    if (method.kind == MethodKind::upgan && !ctx.generator)
        throw ConfigError("UP-GAN obscuration needs a generator checkpoint");
    for (const auto& r : records) {
        ObscurationResult o{r.id, {}, meta(r)};
        switch (method.kind) {
            case MethodKind::none: o.image = r.image; break;
            case MethodKind::gaussian: o.image = baselines::gaussian_blur(r.image, method.param); break;
            case MethodKind::pixelate: o.image = baselines::pixelate(r.image, method.param); break;
            case MethodKind::upgan: {
                const auto [img, mask] = model::generator_forward(r.attributes, r.landmarks, *ctx.generator);
                const auto blended = swap::swap_face(r, img, mask, ctx.blend);
                o.image = blended.image;
                o.metadata["blend_converged"] = blended.converged;
                break;
            }
            case MethodKind::ksame: break;
        }
        out.push_back(std::move(o));
    }
    return out;
}

std::string to_string(ThreatModel m) { return m == ThreatModel::I ? "I" : "II"; }

std::vector<int> Identifier::predict_all(std::span<const ImageTensor> images) const {
    std::vector<int> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(predict(img));
    return out;
}

int RandomIdentifier::predict(const ImageTensor&) const {
    return static_cast<int>(rng_.below(static_cast<std::uint64_t>(classes_)));
}

LookupIdentifier::LookupIdentifier(const KSameResult& clusters, std::span<const int> labels) {
    for (std::size_t c = 0; c < clusters.clusters.size(); ++c) {
        std::map<int, int> votes;
        for (int i : clusters.clusters[c]) ++votes[labels[static_cast<std::size_t>(i)]];
        int best = -1, count = 0;
        for (const auto& [label, n] : votes)
            if (n > count) best = label, count = n;
        table_.emplace_back(clusters.surrogates[c], best);
    }
}

int LookupIdentifier::predict(const ImageTensor& image) const {
    for (const auto& [face, label] : table_)
        if (face == image) return label;
    return -1;
}

int CnnIdentifier::predict(const ImageTensor& image) const { return model::classify(*net_, std::span(&image, 1)).front(); }

std::vector<int> CnnIdentifier::predict_all(std::span<const ImageTensor> images) const {
    return model::classify(*net_, images);
}

CnnIdentifier train_identifier(std::span<const ImageTensor> clear, std::span<const ImageTensor> obscured,
                               std::span<const int> labels, int num_classes, const ThreatScenario& scenario,
                               const IdentifierConfig& cfg) {
    if (num_classes < 2) throw SplitError("identifier needs at least 2 identities");
    if (clear.size() != labels.size() || clear.empty()) throw SplitError("identifier training set is empty or mislabeled");
    std::vector<ImageTensor> stream;
    std::vector<int> y;
    for (std::size_t i = 0; i < clear.size(); ++i) {
        stream.push_back(clear[i]);
        y.push_back(labels[i]);
        if (scenario.model == ThreatModel::II) {
            if (obscured.size() != clear.size()) throw SplitError("model II needs one obscured image per clear image");
            stream.push_back(obscured[i]);
            y.push_back(labels[i]);
        }
    }
    auto net = std::make_shared<model::IdentityNet>(ModelConfig::for_scale(cfg.image_size), num_classes,
                                                    derive_seed(scenario.seed, {0x1de7u}));
    model::ClassifierTrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.target_accuracy = cfg.target_accuracy;
    tc.seed = derive_seed(scenario.seed, {0x7a1u});
    const auto r = model::train_classifier(*net, stream, y, tc);
    log::info("identifier " + to_string(scenario.model) + " " + scenario.method.label() + ": train accuracy " +
              std::to_string(r.train_accuracy) + " after " + std::to_string(r.epochs_run) + " epochs");
    net->params().set_requires_grad(false);
    return CnnIdentifier(net);
}

double identification_accuracy(const Identifier& identifier, std::span<const ImageTensor> images,
                               std::span<const int> labels) {
    if (images.empty()) throw SampleSizeError("identification accuracy needs a non-empty test set");
    if (images.size() != labels.size()) throw ShapeError("identification_accuracy: image/label count mismatch");
    const auto pred = identifier.predict_all(images);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

Split split_by_identity(std::span<const FaceRecord> corpus, double train_fraction) {
    if (!(train_fraction > 0 && train_fraction < 1)) throw SplitError("train fraction must lie in (0,1)");
    Split s;
    s.identities = model::identity_labels(corpus);
    if (s.identities.size() < 2) throw SplitError("split needs at least 2 labeled identities");
    std::vector<std::vector<int>> members(s.identities.size());
    s.labels.assign(corpus.size(), -1);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (!corpus[i].identity) throw SplitError("record '" + corpus[i].id + "' has no identity label");
        const auto it = std::lower_bound(s.identities.begin(), s.identities.end(), *corpus[i].identity);
        s.labels[i] = static_cast<int>(it - s.identities.begin());
        members[static_cast<std::size_t>(s.labels[i])].push_back(static_cast<int>(i));
    }
    for (std::size_t c = 0; c < members.size(); ++c) {
        const auto& m = members[c];
        const auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(m.size())));
        if (n_train == 0 || n_train >= m.size())
            throw SplitError("identity '" + s.identities[c] + "' has " + std::to_string(m.size()) +
                             " images; cannot split into train and test");
        s.train.insert(s.train.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(n_train));
        s.test.insert(s.test.end(), m.begin() + static_cast<std::ptrdiff_t>(n_train), m.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

namespace {

void moments(std::span<const std::vector<double>> x, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    const auto n = static_cast<Eigen::Index>(x.size());
    const auto d = static_cast<Eigen::Index>(x[0].size());
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(x[static_cast<std::size_t>(i)].size()) != d)
            throw ShapeError("fid: feature vectors differ in length");
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    mu = m.colwise().mean();
    const Eigen::MatrixXd c = m.rowwise() - mu.transpose();
    cov = (c.transpose() * c) / static_cast<double>(n - 1);
}

// Symmetric PSD square root via eigendecomposition.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& a, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -1e-6) throw NumericalError(std::string("fid: ") + what + " has eigenvalue " + std::to_string(ev(i)));
        ev(i) = std::sqrt(std::max(0.0, ev(i)));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b) {
    if (a.empty() || b.empty()) throw SampleSizeError("fid needs non-empty feature sets");
    const std::size_t d = a[0].size();
    if (a.size() <= d || b.size() <= d)
        throw SampleSizeError("fid needs more samples than feature dimensions (" + std::to_string(d) + "), got " +
                              std::to_string(a.size()) + " and " + std::to_string(b.size()));
    Eigen::VectorXd mu1, mu2;
    Eigen::MatrixXd s1, s2;
    moments(a, mu1, s1);
    moments(b, mu2, s2);
    if (mu1.size() != mu2.size()) throw ShapeError("fid: feature dimensions differ");
    const Eigen::MatrixXd r1 = sqrt_psd(s1, "first covariance");
    Eigen::MatrixXd m = r1 * s2 * r1;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    double trace_sqrt = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double ev = es.eigenvalues()(i);
        if (ev < -1e-6) throw NumericalError("fid: covariance product has eigenvalue " + std::to_string(ev));
        trace_sqrt += std::sqrt(std::max(0.0, ev));
    }
    const double value = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * trace_sqrt;
    return std::max(0.0, value);
}

const TableRow& MetricsReport::row(const std::string& method) const {
    for (const auto& r : rows)
        if (r.method == method) return r;
    throw ArgumentError("report has no row '" + method + "'");
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows)
        rs.push_back({{"method", r.method}, {"threat_model_i", r.accuracy_i}, {"threat_model_ii", r.accuracy_ii}, {"fid", r.fid}});
    return {{"rows", rs}, {"provenance", provenance}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    MetricsReport m;
    for (const auto& r : j.at("rows"))
        m.rows.push_back({r.at("method").get<std::string>(), r.at("threat_model_i").get<double>(),
                          r.at("threat_model_ii").get<double>(), r.at("fid").get<double>()});
    m.provenance = j.value("provenance", nlohmann::json::object());
    return m;
}

std::string MetricsReport::to_text() const {
    const std::vector<std::string> head{"Method", "Threat Model I", "Threat Model II", "FID"};
    std::vector<std::vector<std::string>> cells{head};
    auto fmt = [](double v, int prec) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(prec) << v;
        return os.str();
    };
    for (const auto& r : rows) cells.push_back({r.method, fmt(r.accuracy_i, 3), fmt(r.accuracy_ii, 3), fmt(r.fid, 4)});
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream os;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (std::size_t c = 0; c < cells[r].size(); ++c) {
            if (c == 0)
                os << std::left << std::setw(static_cast<int>(width[c])) << cells[r][c];
            else
                os << "  " << std::right << std::setw(static_cast<int>(width[c])) << cells[r][c];
        }
        os << '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w;
            os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
        }
    }
    return os.str();
}

std::vector<ObscurationMethod> TableConfig::default_methods() {
    return {{MethodKind::none, 0},      {MethodKind::gaussian, 5},  {MethodKind::gaussian, 15},
            {MethodKind::gaussian, 25}, {MethodKind::pixelate, 4},  {MethodKind::pixelate, 8},
            {MethodKind::pixelate, 16}, {MethodKind::ksame, 10},    {MethodKind::upgan, 0}};
}

nlohmann::json TableConfig::to_json() const {
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& m : methods) ms.push_back(m.to_json());
    return {{"methods", ms},
            {"train_fraction", train_fraction},
            {"seed", seed},
            {"identifier_size", identifier.image_size},
            {"identifier_epochs", identifier.epochs},
            {"identifier_batch_size", identifier.batch_size},
            {"identifier_learning_rate", identifier.learning_rate}};
}

TableConfig TableConfig::from_json(const nlohmann::json& j) {
    TableConfig c;
    if (!j.is_object()) throw ConfigError("eval config must be a JSON object");
    try {
        if (j.contains("methods")) {
            for (const auto& m : j.at("methods")) {
                if (m.is_string()) {
                    c.methods.push_back(ObscurationMethod::parse(m.get<std::string>()));
                } else {
                    std::string spec = m.at("method").get<std::string>();
                    for (const char* key : {"kernel_size", "block_size", "k"})
                        if (m.contains(key)) spec += ":" + std::to_string(m.at(key).get<int>());
                    c.methods.push_back(ObscurationMethod::parse(spec));
                }
            }
        } else {
            c.methods = default_methods();
        }
        c.train_fraction = j.value("train_fraction", c.train_fraction);
        c.seed = j.value("seed", c.seed);
        c.identifier.image_size = j.value("identifier_size", c.identifier.image_size);
        c.identifier.epochs = j.value("identifier_epochs", c.identifier.epochs);
        c.identifier.batch_size = j.value("identifier_batch_size", c.identifier.batch_size);
        c.identifier.learning_rate = j.value("identifier_learning_rate", c.identifier.learning_rate);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("eval config: ") + e.what());
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("eval config: ") + e.what());
    }
    ModelConfig::for_scale(c.identifier.image_size);
    return c;
}

namespace {

template <typename T>
std::vector<T> pick(std::span<const T> all, const std::vector<int>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(all[static_cast<std::size_t>(i)]);
    return out;
}

std::vector<ImageTensor> images_at(const std::vector<ObscurationResult>& r, int size) {
    std::vector<ImageTensor> out;
    for (const auto& o : r) out.push_back(resize_to(o.image, size));
    return out;
}

}  // namespace

MetricsReport run_table(std::span<const FaceRecord> corpus, const TableConfig& cfg, const model::Generator* generator,
                        const model::IdentityNet& features) {
    const Split split = split_by_identity(corpus, cfg.train_fraction);
    const auto train = pick(corpus, split.train), test = pick(corpus, split.test);
    const std::span<const int> all_labels(split.labels);
    const auto train_labels = pick(all_labels, split.train), test_labels = pick(all_labels, split.test);
    const int classes = static_cast<int>(split.identities.size());
    const int size = cfg.identifier.image_size;

    const ObscurationMethod none{MethodKind::none, 0};
    const auto clear_train = images_at(obscure(train, none), size);
    const auto clear_test = images_at(obscure(test, none), size);
    const auto clear_features = model::embed(features, clear_test);

    ThreatScenario base;
    base.seed = cfg.seed;
    base.train_fraction = cfg.train_fraction;
    base.method = none;
    const auto model_i = train_identifier(clear_train, {}, train_labels, classes, base, cfg.identifier);

    ObscureContext ctx;
    ctx.generator = generator;
    MetricsReport report;
    for (const auto& method : cfg.methods) {
        TableRow row;
        row.method = method.label();
        // k-same clusters the test and training sets independently.
        const auto obs_test = images_at(obscure(test, method, ctx), size);
        row.accuracy_i = identification_accuracy(model_i, obs_test, test_labels);
        if (method.kind == MethodKind::none) {
            row.accuracy_ii = row.accuracy_i;
        } else {
            const auto obs_train = images_at(obscure(train, method, ctx), size);
            ThreatScenario s = base;
            s.model = ThreatModel::II;
            s.method = method;
            const auto model_ii = train_identifier(clear_train, obs_train, train_labels, classes, s, cfg.identifier);
            row.accuracy_ii = identification_accuracy(model_ii, obs_test, test_labels);
        }
        row.fid = fid(clear_features, model::embed(features, obs_test));
        log::info(row.method + ": I=" + std::to_string(row.accuracy_i) + " II=" + std::to_string(row.accuracy_ii) +
                  " FID=" + std::to_string(row.fid));
        report.rows.push_back(row);
    }
    report.provenance = {{"records", corpus.size()},
                         {"identities", classes},
                         {"train_images", train.size()},
                         {"test_images", test.size()},
                         {"config", cfg.to_json()}};
    return report;
}

}  // namespace eval
}  // namespace upgan
