// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "upgan/checkpoint.hpp"
#include "upgan/dataset.hpp"
#include "upgan/error.hpp"
#include "upgan/eval.hpp"
#include "upgan/log.hpp"
#include "upgan/train.hpp"

#ifndef UPGAN_VERSION
#define UPGAN_VERSION "unknown"
#endif

namespace upgan::cli {
namespace fs = std::filesystem;
using nlohmann::json;

fs::path resolve_output(const fs::path& path) {
    const char* root = std::getenv(kOutputRootEnv);
    if (!root || !*root || path.is_absolute()) return path;
    return fs::path(root) / path;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config, std::uint64_t seed) {
    const json manifest = {{"command", command}, {"config", config}, {"seed", seed}, {"version", UPGAN_VERSION}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in '" + dir.string() + "'");
    out << manifest.dump(2) << '\n';
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
    const fs::path root = fs::is_directory(dir / "images") ? dir / "images" : dir;
    std::vector<fs::path> out;
    for (const auto& de : fs::directory_iterator(root))
        if (de.is_regular_file() && de.path().extension() == ".png") out.push_back(de.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw IoError("no PNG images in '" + root.string() + "'");
    return out;
}

namespace {

fs::path prepare_dir(const fs::path& requested) {
    const fs::path dir = resolve_output(requested);
    fs::create_directories(dir);
    return dir;
}

std::vector<FaceRecord> load_records(const fs::path& path, const std::string& format) {
    if (!format.empty()) return dataset::load_corpus(path, dataset::parse_corpus_format(format));
    const bool manifest = fs::is_directory(path) ? fs::exists(path / "manifest.jsonl") : path.extension() == ".jsonl";
    return dataset::load_corpus(path, manifest ? dataset::CorpusFormat::synthetic_manifest
                                               : dataset::CorpusFormat::utkface);
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
}

std::vector<ImageTensor> read_images(const fs::path& dir) {
    std::vector<ImageTensor> out;
    for (const auto& p : list_images(dir)) out.push_back(read_png(p));
    return out;
}

json record_summary(const FaceRecord& r) {
    json j = {{"id", r.id},
              {"attributes", r.attributes.values()},
              {"landmarks", r.landmarks.values},
              {"width", r.image.width},
              {"height", r.image.height}};
    if (r.identity) j["identity"] = *r.identity;
    return j;
}

// UTKFace-style stem so ingested corpora load back with attributes intact.
std::string utkface_stem(const FaceRecord& r) {
    try {
        dataset::parse_attributes(r.id + ".png");
        return r.id;
    } catch (const Error&) {
        const int age = static_cast<int>(std::lround(r.attributes.age * kAgeDivisor));
        const int race = static_cast<int>(std::lround(r.attributes.skin_tone * (kSkinToneCategories - 1)));
        return std::to_string(age) + "_" + std::to_string(static_cast<int>(r.attributes.gender)) + "_" +
               std::to_string(race) + "_" + r.id;
    }
}

void write_obscured(const fs::path& dir, const std::vector<ObscurationResult>& results) {
    for (const auto& res : results) {
        write_png(dir / (res.source_id + ".png"), res.image);
        json meta = res.metadata;
        meta["source_id"] = res.source_id;
        write_text(dir / (res.source_id + ".json"), meta.dump(2) + "\n");
    }
}

struct Command {
    CLI::App* app = nullptr;
    std::function<void()> action;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Utility-preserving face obscuration toolkit", "upgan"};
    app.require_subcommand(1);
    app.set_version_flag("--version", UPGAN_VERSION);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Only print warnings and errors");

    std::vector<Command> commands;

    // synth-corpus
    dataset::SynthCorpusSpec synth;
    std::string synth_out;
    {
        auto* c = app.add_subcommand("synth-corpus", "Write a deterministic synthetic face corpus");
        c->add_option("--n", synth.records, "Number of records")->capture_default_str()->check(CLI::PositiveNumber);
        c->add_option("--identities", synth.identities, "Number of identities")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        c->add_option("--seed", synth.seed, "Corpus seed")->capture_default_str();
        c->add_option("--size", synth.size, "Image size in pixels")->capture_default_str();
        c->add_option("--out", synth_out, "Output directory")->required();
        commands.push_back({c, [&] {
                                const fs::path dir = prepare_dir(synth_out);
                                dataset::write_synthetic_corpus(dir, synth);
                                const json cfg = {{"n", synth.records},
                                                  {"identities", synth.identities},
                                                  {"size", synth.size}};
                                write_manifest(dir, "synth-corpus", cfg, synth.seed);
                                out << "wrote " << synth.records << " records to " << dir.string() << '\n';
                            }});
    }

    // ingest
    std::string ingest_in, ingest_out, ingest_format;
    {
        auto* c = app.add_subcommand("ingest", "Read an annotated corpus and write normalized records");
        c->add_option("--in", ingest_in, "Corpus directory or manifest")->required()->check(CLI::ExistingPath);
        c->add_option("--format", ingest_format, "utkface or synthetic (default: detect)")
            ->check(CLI::IsMember({"utkface", "synthetic", "synthetic-manifest"}));
        c->add_option("--out", ingest_out, "Output directory")->required();
        commands.push_back({c, [&] {
                                const auto records = load_records(ingest_in, ingest_format);
                                const fs::path dir = prepare_dir(ingest_out);
                                fs::create_directories(dir / "images");
                                fs::create_directories(dir / "masks");
                                std::ofstream index(dir / "records.jsonl");
                                if (!index) throw IoError("cannot write records.jsonl in '" + dir.string() + "'");
                                for (const auto& r : records) {
                                    const std::string stem = utkface_stem(r);
                                    write_png(dir / "images" / (stem + ".png"), r.image);
                                    if (r.landmarks68) dataset::write_landmarks68(dir / "images" / (stem + ".txt"), *r.landmarks68);
                                    if (r.mask) write_mask_png(dir / "masks" / (stem + ".png"), *r.mask);
                                    index << record_summary(r).dump() << '\n';
                                }
                                write_manifest(dir, "ingest", {{"in", ingest_in}, {"format", ingest_format}}, 0);
                                out << "ingested " << records.size() << " records into " << dir.string() << '\n';
                            }});
    }

    // train
    std::string train_config, train_out, train_corpus, train_format, train_resume;
    std::optional<std::uint64_t> train_seed;
    std::optional<int> train_steps;
    {
        auto* c = app.add_subcommand("train", "Train the conditional generator");
        c->add_option("--config", train_config, "Flat JSON TrainConfig")->check(CLI::ExistingFile);
        c->add_option("--corpus", train_corpus, "Training corpus")->required()->check(CLI::ExistingPath);
        c->add_option("--format", train_format, "utkface or synthetic (default: detect)")
            ->check(CLI::IsMember({"utkface", "synthetic", "synthetic-manifest"}));
        c->add_option("--out", train_out, "Run directory")->required();
        c->add_option("--seed", train_seed, "Overrides the config seed");
        c->add_option("--steps", train_steps, "Overrides the config step count");
        c->add_option("--resume", train_resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
        commands.push_back({c, [&] {
                                TrainConfig cfg = train_config.empty() ? TrainConfig{} : TrainConfig::load(train_config);
                                if (train_seed) cfg.seed = *train_seed;
                                if (train_steps) cfg.steps = *train_steps;
                                cfg.validate();
                                const auto corpus = load_records(train_corpus, train_format);
                                const fs::path dir = prepare_dir(train_out);
                                json echo = cfg.to_json();
                                echo["corpus"] = train_corpus;
                                write_manifest(dir, "train", echo, cfg.seed);
                                TrainOptions opts;
                                if (!train_resume.empty()) opts.resume_from = train_resume;
                                const auto result = train(corpus, cfg, dir, opts);
                                out << "trained " << result.steps << " steps; final checkpoint "
                                    << result.final_checkpoint.string() << '\n';
                            }});
    }

    // generate
    std::string gen_checkpoint, gen_in, gen_out, gen_format;
    {
        auto* c = app.add_subcommand("generate", "Generate a face and mask for every record's conditions");
        c->add_option("--checkpoint", gen_checkpoint, "Training checkpoint")->required()->check(CLI::ExistingFile);
        c->add_option("--in", gen_in, "Corpus supplying attributes and landmarks")->required()->check(CLI::ExistingPath);
        c->add_option("--format", gen_format, "utkface or synthetic (default: detect)")
            ->check(CLI::IsMember({"utkface", "synthetic", "synthetic-manifest"}));
        c->add_option("--out", gen_out, "Output directory")->required();
        commands.push_back({c, [&] {
                                const auto g = load_generator(gen_checkpoint);
                                const auto records = load_records(gen_in, gen_format);
                                const fs::path dir = prepare_dir(gen_out);
                                for (const auto& r : records) {
                                    const auto [image, mask] = model::generator_forward(r.attributes, r.landmarks, g);
                                    write_png(dir / (r.id + ".png"), image);
                                    write_mask_png(dir / (r.id + "_mask.png"), mask.binarize());
                                }
                                write_manifest(dir, "generate", {{"checkpoint", gen_checkpoint}, {"in", gen_in}}, 0);
                                out << "generated " << records.size() << " faces in " << dir.string() << '\n';
                            }});
    }

    // obscure
    std::string obs_method, obs_in, obs_out, obs_checkpoint, obs_format;
    std::optional<int> obs_param;
    {
        auto* c = app.add_subcommand("obscure", "Obscure every face of a corpus");
        c->add_option("--method", obs_method, "Obscuration method")
            ->required()
            ->check(CLI::IsMember({"none", "gaussian", "pixelate", "ksame", "upgan"}));
        c->add_option("--param", obs_param, "Kernel size, block size or k");
        c->add_option("--in", obs_in, "Input corpus")->required()->check(CLI::ExistingPath);
        c->add_option("--format", obs_format, "utkface or synthetic (default: detect)")
            ->check(CLI::IsMember({"utkface", "synthetic", "synthetic-manifest"}));
        c->add_option("--out", obs_out, "Output directory")->required();
        c->add_option("--checkpoint", obs_checkpoint, "Generator checkpoint (upgan only)")->check(CLI::ExistingFile);
        commands.push_back({c, [&] {
                                std::string spec = obs_method;
                                if (obs_param) spec += ":" + std::to_string(*obs_param);
                                const auto method = ObscurationMethod::parse(spec);
                                std::optional<model::Generator> g;
                                if (method.kind == MethodKind::upgan) {
                                    if (obs_checkpoint.empty())
                                        throw ArgumentError("method upgan needs --checkpoint");
                                    g.emplace(load_generator(obs_checkpoint));
                                }
                                const auto records = load_records(obs_in, obs_format);
                                ObscureContext ctx;
                                ctx.generator = g ? &*g : nullptr;
                                const auto results = eval::obscure(records, method, ctx);
                                const fs::path dir = prepare_dir(obs_out);
                                write_obscured(dir, results);
                                json cfg = method.to_json();
                                cfg["in"] = obs_in;
                                if (g) cfg["checkpoint"] = obs_checkpoint;
                                write_manifest(dir, "obscure", cfg, 0);
                                out << "obscured " << results.size() << " images with " << method.label() << '\n';
                            }});
    }

    // swap
    std::string swap_checkpoint, swap_in, swap_out, swap_format;
    {
        auto* c = app.add_subcommand("swap", "Replace every face with a generated one");
        c->add_option("--checkpoint", swap_checkpoint, "Generator checkpoint")->required()->check(CLI::ExistingFile);
        c->add_option("--in", swap_in, "Input corpus")->required()->check(CLI::ExistingPath);
        c->add_option("--format", swap_format, "utkface or synthetic (default: detect)")
            ->check(CLI::IsMember({"utkface", "synthetic", "synthetic-manifest"}));
        c->add_option("--out", swap_out, "Output directory")->required();
        commands.push_back({c, [&] {
                                const auto g = load_generator(swap_checkpoint);
                                const auto records = load_records(swap_in, swap_format);
                                ObscureContext ctx;
                                ctx.generator = &g;
                                const auto results = eval::obscure(records, {MethodKind::upgan, 0}, ctx);
                                const fs::path dir = prepare_dir(swap_out);
                                write_obscured(dir, results);
                                write_manifest(dir, "swap", {{"checkpoint", swap_checkpoint}, {"in", swap_in}}, 0);
                                out << "swapped " << results.size() << " faces\n";
                            }});
    }

    // eval
    std::string eval_config, eval_checkpoint, eval_out, eval_corpus, eval_format;
    std::optional<std::uint64_t> eval_seed;
    {
        auto* c = app.add_subcommand("eval", "Run every method under both threat models");
        c->add_option("--config", eval_config, "JSON table config")->check(CLI::ExistingFile);
        c->add_option("--checkpoint", eval_checkpoint, "Training checkpoint (generator and FID features)")
            ->required()
            ->check(CLI::ExistingFile);
        c->add_option("--corpus", eval_corpus, "Labeled corpus (overrides the config key 'corpus')");
        c->add_option("--format", eval_format, "utkface or synthetic (default: detect)")
            ->check(CLI::IsMember({"utkface", "synthetic", "synthetic-manifest"}));
        c->add_option("--seed", eval_seed, "Overrides the config seed");
        c->add_option("--out", eval_out, "Report path; .json and .txt files are written")->required();
        commands.push_back({c, [&] {
                                json raw = eval_config.empty() ? json::object() : read_json(eval_config);
                                if (!raw.is_object()) throw ConfigError("eval config must be a JSON object");
                                if (!eval_corpus.empty()) raw["corpus"] = eval_corpus;
                                if (!raw.contains("corpus")) throw ArgumentError("eval needs --corpus or a 'corpus' key");
                                const std::string corpus_path = raw.at("corpus").get<std::string>();
                                const std::string format =
                                    !eval_format.empty() ? eval_format : raw.value("corpus_format", std::string{});
                                eval::TableConfig cfg = eval::TableConfig::from_json(raw);
                                if (eval_seed) cfg.seed = *eval_seed;

                                const auto ckpt = load_checkpoint(eval_checkpoint);
                                const auto g = load_generator(ckpt);
                                const auto features = load_perceptual_net(ckpt);
                                const auto corpus = load_records(corpus_path, format);
                                auto report = eval::run_table(corpus, cfg, &g, features);
                                report.provenance["checkpoint"] = eval_checkpoint;
                                report.provenance["corpus"] = corpus_path;

                                fs::path target = resolve_output(eval_out);
                                if (target.has_parent_path()) fs::create_directories(target.parent_path());
                                fs::path stem = target;
                                stem.replace_extension();
                                write_text(fs::path(stem).concat(".json"), report.to_json().dump(2) + "\n");
                                write_text(fs::path(stem).concat(".txt"), report.to_text());
                                json echo = cfg.to_json();
                                echo["corpus"] = corpus_path;
                                echo["checkpoint"] = eval_checkpoint;
                                write_manifest(target.has_parent_path() ? target.parent_path() : fs::path("."), "eval",
                                               echo, cfg.seed);
                                out << report.to_text();
                            }});
    }

    // fid
    std::string fid_a, fid_b, fid_checkpoint;
    std::uint64_t fid_seed = 0;
    {
        auto* c = app.add_subcommand("fid", "Frechet distance between two image directories");
        c->add_option("--a", fid_a, "First image directory")->required()->check(CLI::ExistingDirectory);
        c->add_option("--b", fid_b, "Second image directory")->required()->check(CLI::ExistingDirectory);
        c->add_option("--checkpoint", fid_checkpoint, "Checkpoint whose perceptual net supplies features")
            ->check(CLI::ExistingFile);
        c->add_option("--seed", fid_seed, "Feature net seed when no checkpoint is given")->capture_default_str();
        commands.push_back({c, [&] {
                                const auto net = fid_checkpoint.empty()
                                                     ? model::IdentityNet(ModelConfig::for_scale(32), 2, fid_seed)
                                                     : load_perceptual_net(load_checkpoint(fid_checkpoint));
                                const auto fa = model::embed(net, read_images(fid_a));
                                const auto fb = model::embed(net, read_images(fid_b));
                                char buf[64];
                                std::snprintf(buf, sizeof buf, "%.6f", eval::fid(fa, fb));
                                out << buf << '\n';
                            }});
    }

    // report
    std::string report_in, report_out;
    {
        auto* c = app.add_subcommand("report", "Print the results table of one or more metric reports");
        c->add_option("--in", report_in, "Report file or directory of reports")->required()->check(CLI::ExistingPath);
        c->add_option("--out", report_out, "Directory for report.txt");
        commands.push_back({c, [&] {
                                std::vector<fs::path> files;
                                if (fs::is_directory(report_in)) {
                                    for (const auto& de : fs::directory_iterator(report_in))
                                        if (de.path().extension() == ".json" && de.path().filename() != "manifest.json")
                                            files.push_back(de.path());
                                    std::sort(files.begin(), files.end());
                                } else {
                                    files.push_back(report_in);
                                }
                                eval::MetricsReport merged;
                                for (const auto& f : files) {
                                    const json j = read_json(f);
                                    if (!j.is_object() || !j.contains("rows")) continue;
                                    const auto r = eval::MetricsReport::from_json(j);
                                    merged.rows.insert(merged.rows.end(), r.rows.begin(), r.rows.end());
                                }
                                if (merged.rows.empty())
                                    throw IoError("no metric reports found in '" + report_in + "'");
                                const std::string table = merged.to_text();
                                if (!report_out.empty()) {
                                    const fs::path dir = prepare_dir(report_out);
                                    write_text(dir / "report.txt", table);
                                    write_manifest(dir, "report", {{"in", report_in}}, 0);
                                }
                                out << table;
                            }});
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
        err << (sub ? sub->help() : app.help());
        return kExitUsage;
    }

    if (quiet) log::set_level(log::Level::warn);
    for (const auto& cmd : commands) {
        if (!cmd.app->parsed()) continue;
        try {
            cmd.action();
            return kExitOk;
        } catch (const Error& e) {
            err << json{{"error", {{"command", cmd.app->get_name()}, {"kind", e.kind()}, {"message", e.what()}}}}.dump()
                << '\n';
        } catch (const std::exception& e) {
            err << json{{"error", {{"command", cmd.app->get_name()}, {"kind", "internal"}, {"message", e.what()}}}}
                       .dump()
                << '\n';
        }
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace upgan::cli
