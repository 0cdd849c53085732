// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "upgan/nn/params.hpp"

namespace upgan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned binary container: magic, version, JSON header (config echo),
/// step counter, then named little-endian float64 blobs.
struct Checkpoint {
    nlohmann::json header;
    std::int64_t step = 0;
    nn::BlobMap blobs;
};

/// Writes through a temporary file and renames; throws IoError on failure.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws CheckpointError on a bad magic, unknown version or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace upgan
