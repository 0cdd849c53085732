// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace upgan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable naming a root for relative --out paths.
inline constexpr const char* kOutputRootEnv = "UPGAN_OUTPUT_ROOT";

/// Runs one subcommand. `args` excludes the program name. Usage problems
/// return kExitUsage, runtime failures kExitFailure with a JSON error line
/// on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Applies the output-root override to relative paths.
std::filesystem::path resolve_output(const std::filesystem::path& path);

/// Writes manifest.json (command, resolved config, seed, version) into dir.
void write_manifest(const std::filesystem::path& dir, const std::string& command, const nlohmann::json& config,
                    std::uint64_t seed);

/// PNG images of a directory in filename order. Corpus directories are
/// read through their images/ subdirectory.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace upgan::cli
