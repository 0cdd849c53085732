// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "upgan/cli.hpp"
#include "upgan/eval.hpp"

using namespace upgan;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    int code;
    std::string out, err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::string> relative_listing(const fs::path& root) {
    std::vector<std::string> names;
    for (const auto& de : fs::recursive_directory_iterator(root))
        if (de.is_regular_file()) names.push_back(fs::relative(de.path(), root).string());
    std::sort(names.begin(), names.end());
    return names;
}

std::vector<std::string> synth_args(const fs::path& out, int n = 24, int ids = 3) {
    return {"synth-corpus", "--n", std::to_string(n), "--identities", std::to_string(ids), "--seed", "7",
            "--size", "32", "--out", out.string()};
}

}  // namespace

TEST(Cli, SynthCorpusIsByteIdenticalAcrossRuns) {
    const auto dir = test::scratch_dir("cli_synth");
    ASSERT_EQ(run(synth_args(dir / "a")).code, 0);
    ASSERT_EQ(run(synth_args(dir / "b")).code, 0);
    const auto files = relative_listing(dir / "a");
    ASSERT_EQ(files, relative_listing(dir / "b"));
    EXPECT_GT(files.size(), 24u);
    for (const auto& f : files) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(Cli, ManifestEchoesConfigSeedAndVersion) {
    const auto dir = test::scratch_dir("cli_manifest");
    ASSERT_EQ(run(synth_args(dir / "c", 10, 2)).code, 0);
    const json m = read_json(dir / "c" / "manifest.json");
    EXPECT_EQ(m.at("command"), "synth-corpus");
    EXPECT_EQ(m.at("seed"), 7);
    EXPECT_EQ(m.at("config").at("n"), 10);
    EXPECT_EQ(m.at("config").at("identities"), 2);
    EXPECT_FALSE(m.at("version").get<std::string>().empty());
}

TEST(Cli, ManifestReplaysToTheSameCorpus) {
    const auto dir = test::scratch_dir("cli_replay");
    ASSERT_EQ(run(synth_args(dir / "orig", 12, 3)).code, 0);
    const json m = read_json(dir / "orig" / "manifest.json");
    const json& c = m.at("config");
    ASSERT_EQ(run({"synth-corpus", "--n", std::to_string(c.at("n").get<int>()), "--identities",
                   std::to_string(c.at("identities").get<int>()), "--seed",
                   std::to_string(m.at("seed").get<std::uint64_t>()), "--size",
                   std::to_string(c.at("size").get<int>()), "--out", (dir / "replay").string()})
                  .code,
              0);
    for (const auto& f : relative_listing(dir / "orig")) EXPECT_EQ(slurp(dir / "orig" / f), slurp(dir / "replay" / f));
}

TEST(Cli, FidOfADirectoryWithItselfIsZero) {
    const auto dir = test::scratch_dir("cli_fid");
    ASSERT_EQ(run(synth_args(dir / "d1", 80, 4)).code, 0);
    const auto r = run({"fid", "--a", (dir / "d1").string(), "--b", (dir / "d1").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(std::stod(r.out), 0.0, 1e-6);
}

TEST(Cli, FidSeesObscuration) {
    const auto dir = test::scratch_dir("cli_fid_obs");
    ASSERT_EQ(run(synth_args(dir / "d1", 80, 4)).code, 0);
    ASSERT_EQ(run({"obscure", "--method", "pixelate", "--param", "8", "--in", (dir / "d1").string(), "--out",
                   (dir / "px").string()})
                  .code,
              0);
    const auto r = run({"fid", "--a", (dir / "d1").string(), "--b", (dir / "px").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_GT(std::stod(r.out), 0.0);
}

TEST(Cli, ReportPrintsOneRowPerMethod) {
    const auto dir = test::scratch_dir("cli_report");
    eval::MetricsReport rep;
    for (const auto& m : eval::TableConfig::default_methods()) rep.rows.push_back({m.label(), 0.5, 0.25, 1.5});
    fs::create_directories(dir / "metrics");
    std::ofstream(dir / "metrics" / "report.json") << rep.to_json().dump();

    const auto r = run({"report", "--in", (dir / "metrics").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string header, rule, line;
    std::getline(lines, header);
    std::getline(lines, rule);
    const auto ti = header.find("Threat Model I"), tii = header.find("Threat Model II"), f = header.find("FID");
    ASSERT_NE(ti, std::string::npos);
    ASSERT_NE(tii, std::string::npos);
    ASSERT_NE(f, std::string::npos);
    EXPECT_LT(ti, tii);
    EXPECT_LT(tii, f);
    EXPECT_EQ(rule.find_first_not_of('-'), std::string::npos);
    std::vector<std::string> rows;
    while (std::getline(lines, line))
        if (!line.empty()) rows.push_back(line);
    ASSERT_EQ(rows.size(), rep.rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].rfind(rep.rows[i].method, 0), 0u) << rows[i];
}

TEST(Cli, ObscureWritesSidecarMetadata) {
    const auto dir = test::scratch_dir("cli_obscure");
    ASSERT_EQ(run(synth_args(dir / "d", 6, 2)).code, 0);
    ASSERT_EQ(run({"obscure", "--method", "gaussian", "--param", "5", "--in", (dir / "d").string(), "--out",
                   (dir / "o").string()})
                  .code,
              0);
    int sidecars = 0;
    for (const auto& de : fs::directory_iterator(dir / "o")) {
        if (de.path().extension() != ".json" || de.path().filename() == "manifest.json") continue;
        const json meta = read_json(de.path());
        EXPECT_EQ(meta.at("method"), "gaussian");
        EXPECT_EQ(meta.at("kernel_size"), 5);
        EXPECT_TRUE(fs::exists(fs::path(de.path()).replace_extension(".png")));
        EXPECT_EQ(meta.at("source_id").get<std::string>(), de.path().stem().string());
        ++sidecars;
    }
    EXPECT_EQ(sidecars, 6);
    EXPECT_TRUE(fs::exists(dir / "o" / "manifest.json"));
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run({}).code, cli::kExitUsage);
    EXPECT_EQ(run({"bogus"}).code, cli::kExitUsage);
    const auto r = run({"synth-corpus", "--n", "lots", "--out", "x"});
    EXPECT_EQ(r.code, cli::kExitUsage);
    EXPECT_NE(r.err.find("Usage:"), std::string::npos);
    EXPECT_EQ(run({"obscure", "--method", "sharpen", "--in", ".", "--out", "x"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"train", "--out", "x"}).code, cli::kExitUsage);  // --corpus missing
}

TEST(Cli, HelpExitsZero) {
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("synth-corpus"), std::string::npos);
}

TEST(Cli, RuntimeFailuresExitOneWithStructuredError) {
    const auto dir = test::scratch_dir("cli_runtime");
    ASSERT_EQ(run(synth_args(dir / "d", 6, 2)).code, 0);
    const auto r = run({"obscure", "--method", "gaussian", "--param", "4", "--in", (dir / "d").string(), "--out",
                        (dir / "o").string()});
    ASSERT_EQ(r.code, cli::kExitFailure);
    const json e = json::parse(r.err).at("error");
    EXPECT_EQ(e.at("command"), "obscure");
    EXPECT_EQ(e.at("kind"), "argument");
    EXPECT_FALSE(e.at("message").get<std::string>().empty());

    const auto u = run({"obscure", "--method", "upgan", "--in", (dir / "d").string(), "--out", (dir / "u").string()});
    EXPECT_EQ(u.code, cli::kExitFailure);
}

TEST(Cli, OutputRootOverridesRelativePaths) {
    const auto dir = test::scratch_dir("cli_root");
    ::setenv(cli::kOutputRootEnv, dir.c_str(), 1);
    const auto r = run(synth_args("rooted", 4, 2));
    ::unsetenv(cli::kOutputRootEnv);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "rooted" / "manifest.jsonl"));
    EXPECT_TRUE(fs::exists(dir / "rooted" / "manifest.json"));
    EXPECT_EQ(cli::resolve_output("/abs/path"), fs::path("/abs/path"));
}

TEST(Cli, IngestRoundTripsAttributesAndLandmarks) {
    const auto dir = test::scratch_dir("cli_ingest");
    ASSERT_EQ(run(synth_args(dir / "d", 6, 2)).code, 0);
    ASSERT_EQ(run({"ingest", "--in", (dir / "d").string(), "--out", (dir / "i").string()}).code, 0);
    const auto original = dataset::load_corpus(dir / "d", dataset::CorpusFormat::synthetic_manifest);
    const auto ingested = dataset::load_corpus(dir / "i", dataset::CorpusFormat::utkface);
    ASSERT_EQ(ingested.size(), original.size());
    std::ifstream index(dir / "i" / "records.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(index, line)) {
        const json j = json::parse(line);
        EXPECT_EQ(j.at("landmarks").size(), 14u);
        EXPECT_EQ(j.at("attributes").size(), 3u);
        ++n;
    }
    EXPECT_EQ(n, 6);
    for (const auto& r : ingested) {
        const auto it = std::find_if(original.begin(), original.end(),
                                     [&](const FaceRecord& o) { return r.id.ends_with(o.id); });
        ASSERT_NE(it, original.end()) << r.id;
        EXPECT_NEAR(r.attributes.age, it->attributes.age, 0.5 / kAgeDivisor);
        EXPECT_EQ(r.attributes.gender, it->attributes.gender);
        for (int k = 0; k < kLandmarkDim; ++k) EXPECT_NEAR(r.landmarks.values[k], it->landmarks.values[k], 1e-9);
    }
}

TEST(Cli, TrainGenerateSwapEvalPipeline) {
    const auto dir = test::scratch_dir("cli_pipeline");
    ASSERT_EQ(run(synth_args(dir / "d", 40, 4)).code, 0);
    std::ofstream(dir / "train.json") << json{{"steps", 2},
                                              {"scale", 8},
                                              {"batch_size", 2},
                                              {"checkpoint_every", 2},
                                              {"sample_every", 2},
                                              {"perceptual_epochs", 1},
                                              {"perceptual_target_accuracy", 0.0}}
                                              .dump();
    auto r = run({"-q", "train", "--config", (dir / "train.json").string(), "--corpus", (dir / "d").string(), "--out",
                  (dir / "run").string(), "--seed", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
    const fs::path ckpt = dir / "run" / "checkpoints" / "step_000002.ckpt";
    ASSERT_TRUE(fs::exists(ckpt));
    const json m = read_json(dir / "run" / "manifest.json");
    EXPECT_EQ(m.at("seed"), 5);
    EXPECT_EQ(m.at("config").at("steps"), 2);

    r = run({"-q", "generate", "--checkpoint", ckpt.string(), "--in", (dir / "d").string(), "--out",
             (dir / "gen").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_png(dir / "gen" / "id000_00000.png").width, 8);

    r = run({"-q", "swap", "--checkpoint", ckpt.string(), "--in", (dir / "d").string(), "--out",
             (dir / "swap").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_png(dir / "swap" / "id000_00000.png").width, 32);

    std::ofstream(dir / "eval.json") << json{{"methods", {"none", "pixelate:4"}},
                                             {"identifier_epochs", 1},
                                             {"corpus", (dir / "d").string()}}
                                            .dump();
    r = run({"-q", "eval", "--config", (dir / "eval.json").string(), "--checkpoint", ckpt.string(), "--out",
             (dir / "metrics" / "report.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "metrics" / "report.txt"));
    const auto rep = eval::MetricsReport::from_json(read_json(dir / "metrics" / "report.json"));
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_EQ(rep.rows[1].method, "Pixelation-4");
    EXPECT_TRUE(fs::exists(dir / "metrics" / "manifest.json"));
}
