// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "upgan/error.hpp"
#include "upgan/log.hpp"
#include "upgan/rng.hpp"

namespace upgan {

namespace fs = std::filesystem;

namespace {

constexpr int kProbeCount = 16;
constexpr int kGridColumns = 4;

// Seed-path tags keep the independent random streams apart.
enum Stream : std::uint64_t { kBatchStream = 1, kAugmentStream = 2, kProbeStream = 3, kGenStream, kDiscStream, kPercStream };

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "steps",         "batch_size",      "learning_rate",    "beta1",
        "beta2",         "d_steps_per_g_step", "seed",          "scale",
        "lambda1",       "lambda2",         "lambda3",          "elastic_alpha",
        "elastic_sigma", "rotation_min",    "rotation_max",     "augment_seed",
        "checkpoint_every", "sample_every", "normalize_losses", "perceptual_epochs",
        "perceptual_target_accuracy",       "perceptual_layers"};
    return keys;
}

// Keys that may change between a checkpoint and its resumed run.
bool resumable_key(const std::string& k) { return k == "steps" || k == "checkpoint_every" || k == "sample_every"; }

std::string step_name(std::int64_t step, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "step_%06lld%s", static_cast<long long>(step), ext);
    return buf;
}

}  // namespace

void TrainConfig::validate() const {
    if (steps <= 0) throw ConfigError("steps must be > 0");
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("moment decays must lie in [0,1)");
    if (d_steps_per_g_step < 1) throw ConfigError("d_steps_per_g_step must be >= 1");
    if (checkpoint_every < 0 || sample_every < 0) throw ConfigError("schedules must be >= 0 (0 disables)");
    if (perceptual_epochs < 1) throw ConfigError("perceptual_epochs must be >= 1");
    ModelConfig::for_scale(scale);
    weights.validate();
    augment.validate();
}

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json j = {{"steps", steps},
                        {"batch_size", batch_size},
                        {"learning_rate", learning_rate},
                        {"beta1", beta1},
                        {"beta2", beta2},
                        {"d_steps_per_g_step", d_steps_per_g_step},
                        {"seed", seed},
                        {"scale", scale},
                        {"lambda1", weights.lambda1},
                        {"lambda2", weights.lambda2},
                        {"lambda3", weights.lambda3},
                        {"checkpoint_every", checkpoint_every},
                        {"sample_every", sample_every},
                        {"normalize_losses", normalize_losses},
                        {"perceptual_epochs", perceptual_epochs},
                        {"perceptual_target_accuracy", perceptual_target_accuracy},
                        {"perceptual_layers", perceptual_layers}};
    j.update(augment.to_json());
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!known_keys().count(k)) throw ConfigError("unknown train config key '" + k + "'");
    TrainConfig c;
    try {
        c.steps = j.value("steps", c.steps);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.d_steps_per_g_step = j.value("d_steps_per_g_step", c.d_steps_per_g_step);
        c.seed = j.value("seed", c.seed);
        c.scale = j.value("scale", c.scale);
        c.weights.lambda1 = j.value("lambda1", c.weights.lambda1);
        c.weights.lambda2 = j.value("lambda2", c.weights.lambda2);
        c.weights.lambda3 = j.value("lambda3", c.weights.lambda3);
        c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
        c.sample_every = j.value("sample_every", c.sample_every);
        c.normalize_losses = j.value("normalize_losses", c.normalize_losses);
        c.perceptual_epochs = j.value("perceptual_epochs", c.perceptual_epochs);
        c.perceptual_target_accuracy = j.value("perceptual_target_accuracy", c.perceptual_target_accuracy);
        c.perceptual_layers = j.value("perceptual_layers", c.perceptual_layers);
        c.augment = AugmentConfig::from_json(j);
    } catch (const nlohmann::json::type_error& e) {
        throw ConfigError(std::string("train config has a value of the wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path.string());
    try {
        return from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("config " + path.string() + ": " + e.what());
    }
}

namespace {

model::PerceptualConfig restore_perceptual(const Checkpoint& ckpt, const ModelConfig& mc) {
    const auto& h = ckpt.header;
    auto net = std::make_shared<model::IdentityNet>(mc, h.at("perceptual_classes").get<int>(), 0);
    net->params().import_from(ckpt.blobs, "perceptual/");
    net->params().set_requires_grad(false);
    return {net, h.at("perceptual_layers").get<std::vector<int>>()};
}

model::PerceptualConfig build_perceptual(std::span<const FaceRecord> corpus, const TrainConfig& cfg,
                                         const ModelConfig& mc, const Checkpoint* resume) {
    if (resume) return restore_perceptual(*resume, mc);
    bool labeled = std::all_of(corpus.begin(), corpus.end(), [](const FaceRecord& r) { return r.identity.has_value(); });
    if (!labeled) throw ConfigError("perceptual pretraining needs identity labels on every record");
    model::ClassifierTrainConfig tc;
    tc.epochs = cfg.perceptual_epochs;
    tc.target_accuracy = cfg.perceptual_target_accuracy;
    tc.seed = derive_seed(cfg.seed, {kPercStream});
    auto pc = model::pretrain_perceptual(corpus, mc, tc);
    pc.layer_set = cfg.perceptual_layers;
    pc.validate();
    return pc;
}

void check_resume_compatible(const Checkpoint& ckpt, const TrainConfig& cfg, const ModelConfig& mc) {
    const auto& h = ckpt.header;
    if (!h.contains("model_config") || !h.contains("train_config"))
        throw CheckpointError("checkpoint does not come from a training run");
    if (ModelConfig::from_json(h.at("model_config")) != mc)
        throw CheckpointError("checkpoint model config " + h.at("model_config").dump() + " does not match " +
                              mc.to_json().dump());
    const auto now = cfg.to_json();
    for (const auto& [k, v] : h.at("train_config").items())
        if (!resumable_key(k) && (!now.contains(k) || now.at(k) != v))
            throw CheckpointError("checkpoint train config key '" + k + "' differs from the resumed run");
}

}  // namespace

Trainer::Trainer(std::span<const FaceRecord> corpus, const TrainConfig& cfg, const Checkpoint* resume)
    : cfg_((cfg.validate(), cfg)),
      model_cfg_(ModelConfig::for_scale(cfg.scale)),
      corpus_(corpus.begin(), corpus.end()),
      g_(model_cfg_, derive_seed(cfg.seed, {kGenStream})),
      d_(model_cfg_, derive_seed(cfg.seed, {kDiscStream})),
      perceptual_(build_perceptual(corpus, cfg, model_cfg_, resume)),
      adam_g_(g_.params(), {cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8}),
      adam_d_(d_.params(), {cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8}) {
    if (corpus_.empty()) throw ConfigError("training corpus is empty");
    for (const auto& r : corpus_)
        if (!r.mask) throw ConfigError("record '" + r.id + "' has no mask");

    Rng rng(derive_seed(cfg_.seed, {kProbeStream}));
    std::vector<AttributeVector> attrs;
    std::vector<LandmarkVector> lms;
    for (int i = 0; i < kProbeCount; ++i) {
        const auto& r = corpus_[rng.below(corpus_.size())];
        attrs.push_back(r.attributes);
        lms.push_back(r.landmarks);
    }
    probes_ = model::condition_batch(attrs, lms);

    if (resume) {
        check_resume_compatible(*resume, cfg_, model_cfg_);
        g_.params().import_from(resume->blobs, "G/");
        d_.params().import_from(resume->blobs, "D/");
        adam_g_.import_from(resume->blobs, "adam_G/");
        adam_d_.import_from(resume->blobs, "adam_D/");
        step_ = resume->step;
    }
}

LossBatch Trainer::batch_for(std::int64_t step, int sub_step) const {
    const auto n = corpus_.size();
    const auto k = static_cast<std::size_t>(cfg_.batch_size);
    Rng rng(derive_seed(cfg_.seed, {kBatchStream, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(sub_step)}));
    std::vector<std::size_t> picks;
    if (k <= n) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
        picks.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
        for (std::size_t i = 0; i < k; ++i) picks.push_back(rng.below(n));
    }
    std::vector<FaceRecord> records;
    records.reserve(k);
    for (std::size_t s = 0; s < k; ++s) {
        const std::uint64_t seed = derive_seed(
            cfg_.seed, {kAugmentStream, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(sub_step), s});
        records.push_back(augment::augment_record(corpus_[picks[s]], cfg_.augment, seed).record);
    }
    return make_loss_batch(records, model_cfg_.image_size);
}

namespace {

// Holds a parameter set constant for the lifetime of the guard.
class Frozen {
public:
    explicit Frozen(nn::ParamSet& p) : p_(p) { p_.set_requires_grad(false); }
    ~Frozen() { p_.set_requires_grad(true); }
    Frozen(const Frozen&) = delete;
    Frozen& operator=(const Frozen&) = delete;

private:
    nn::ParamSet& p_;
};

}  // namespace

double Trainer::discriminator_update(const LossBatch& batch) {
    double value = 0.0;
    {
        const Frozen frozen(g_.params());
        d_.params().zero_grad();
        const auto loss = losses::discriminator_loss_graph(batch, g_, d_);
        nn::backward(loss);
        value = loss.item();
    }
    adam_d_.step();
    return value;
}

LossBreakdown Trainer::generator_update(const LossBatch& batch) {
    LossBreakdown out;
    {
        const Frozen frozen(d_.params());
        g_.params().zero_grad();
        auto terms = losses::generator_loss_graph(batch, g_, d_, perceptual_, cfg_.weights, cfg_.normalize_losses);
        nn::backward(terms.total);
        out = terms.values;
    }
    adam_g_.step();
    return out;
}

LossBreakdown Trainer::step() {
    LossBatch batch;
    double total_d = 0.0;
    for (int j = 0; j < cfg_.d_steps_per_g_step; ++j) {
        batch = batch_for(step_, j);
        total_d = discriminator_update(batch);
    }
    LossBreakdown out = generator_update(batch);
    out.total_d = total_d;
    ++step_;
    return out;
}

Checkpoint Trainer::snapshot() const {
    Checkpoint c;
    c.step = step_;
    c.header = {{"kind", "upgan-train"},
                {"train_config", cfg_.to_json()},
                {"model_config", model_cfg_.to_json()},
                {"perceptual_classes", perceptual_.network->num_classes()},
                {"perceptual_layers", perceptual_.layer_set},
                {"seed", cfg_.seed}};
    g_.params().export_to(c.blobs, "G/");
    d_.params().export_to(c.blobs, "D/");
    perceptual_.network->params().export_to(c.blobs, "perceptual/");
    adam_g_.export_to(c.blobs, "adam_G/");
    adam_d_.export_to(c.blobs, "adam_D/");
    return c;
}

ImageTensor Trainer::sample_grid() const {
    const auto out = g_.forward(probes_);
    std::vector<ImageTensor> tiles;
    for (int i = 0; i < kProbeCount; ++i) tiles.push_back(model::image_from_batch(out.image, i));
    return tile_grid(tiles, kGridColumns);
}

ImageTensor tile_grid(std::span<const ImageTensor> tiles, int columns) {
    if (tiles.empty() || columns < 1) throw ArgumentError("tile_grid needs tiles and a positive column count");
    const int h = tiles[0].height, w = tiles[0].width, c = tiles[0].channels;
    const int n = static_cast<int>(tiles.size());
    const int rows = (n + columns - 1) / columns;
    ImageTensor grid(rows * h, columns * w, c);
    for (int t = 0; t < n; ++t) {
        if (!tiles[static_cast<std::size_t>(t)].same_shape(tiles[0])) throw ShapeError("tile_grid: tiles differ in shape");
        const int oy = (t / columns) * h, ox = (t % columns) * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int ch = 0; ch < c; ++ch) grid.at(oy + y, ox + x, ch) = tiles[static_cast<std::size_t>(t)].at(y, x, ch);
    }
    return grid;
}

namespace {

// Keeps only metrics records up to and including `step`.
void truncate_metrics(const fs::path& path, std::int64_t step) {
    std::vector<std::string> kept;
    {
        std::ifstream is(path);
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (!j.is_discarded() && j.value("step", std::int64_t{0}) <= step) kept.push_back(line);
        }
    }
    std::ofstream os(path, std::ios::trunc);
    for (const auto& l : kept) os << l << '\n';
}

}  // namespace

TrainResult train(std::span<const FaceRecord> corpus, const TrainConfig& cfg, const fs::path& out_dir,
                  const TrainOptions& options) {
    std::optional<Checkpoint> resume;
    if (options.resume_from) resume = load_checkpoint(*options.resume_from);
    Trainer trainer(corpus, cfg, resume ? &*resume : nullptr);

    fs::create_directories(out_dir / "checkpoints");
    fs::create_directories(out_dir / "samples");
    const fs::path metrics_path = out_dir / "metrics.jsonl";
    if (resume)
        truncate_metrics(metrics_path, resume->step);
    else
        std::ofstream(metrics_path, std::ios::trunc);
    std::ofstream metrics(metrics_path, std::ios::app);
    if (!metrics) throw IoError("cannot open " + metrics_path.string());

    TrainResult result;
    std::optional<fs::path> last_good = options.resume_from;
    auto save = [&] {
        const fs::path p = out_dir / "checkpoints" / step_name(trainer.steps_done(), ".ckpt");
        save_checkpoint(p, trainer.snapshot());
        last_good = p;
        return p;
    };

    while (trainer.steps_done() < cfg.steps) {
        LossBreakdown b;
        try {
            b = trainer.step();
        } catch (const NumericalError& e) {
            throw TrainingError(std::string(e.what()) + " at step " + std::to_string(trainer.steps_done() + 1) +
                                "; last good checkpoint: " + (last_good ? last_good->string() : std::string("none")));
        }
        const std::int64_t s = trainer.steps_done();
        nlohmann::json rec = b.to_json();
        rec["step"] = s;
        metrics << rec.dump() << '\n';
        metrics.flush();
        if (!metrics) throw IoError("failed writing metrics to " + metrics_path.string() + " (disk full?)");
        result.metrics.push_back(b);
        if (options.on_step) options.on_step(s, b);
        if (cfg.sample_every > 0 && s % cfg.sample_every == 0)
            write_png(out_dir / "samples" / step_name(s, ".png"), trainer.sample_grid());
        if (cfg.checkpoint_every > 0 && s % cfg.checkpoint_every == 0 && s != cfg.steps) save();
    }
    result.final_checkpoint = save();
    result.steps = trainer.steps_done();
    log::info("training finished at step " + std::to_string(result.steps));
    return result;
}

model::Generator load_generator(const Checkpoint& ckpt) {
    if (!ckpt.header.contains("model_config")) throw CheckpointError("checkpoint carries no model config");
    model::Generator g(ModelConfig::from_json(ckpt.header.at("model_config")), 0);
    g.params().import_from(ckpt.blobs, "G/");
    g.params().set_requires_grad(false);
    return g;
}

model::Generator load_generator(const fs::path& path) { return load_generator(load_checkpoint(path)); }

model::IdentityNet load_perceptual_net(const Checkpoint& ckpt) {
    if (!ckpt.header.contains("model_config") || !ckpt.header.contains("perceptual_classes"))
        throw CheckpointError("checkpoint carries no perceptual network");
    model::IdentityNet net(ModelConfig::from_json(ckpt.header.at("model_config")),
                           ckpt.header.at("perceptual_classes").get<int>(), 0);
    net.params().import_from(ckpt.blobs, "perceptual/");
    net.params().set_requires_grad(false);
    return net;
}

std::pair<ImageTensor, MaskProbabilities> generate(const AttributeVector& va, const LandmarkVector& vl,
                                                   const fs::path& checkpoint, const std::optional<ModelConfig>& expected) {
    const auto ckpt = load_checkpoint(checkpoint);
    const auto g = load_generator(ckpt);
    if (expected && *expected != g.config())
        throw CheckpointError("checkpoint model config " + g.config().to_json().dump() + " does not match " +
                              expected->to_json().dump());
    return model::generator_forward(va, vl, g);
}

}  // namespace upgan
