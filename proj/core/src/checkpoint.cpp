// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "upgan/error.hpp"

namespace upgan {

namespace {

constexpr char kMagic[8] = {'U', 'P', 'G', 'A', 'N', 'C', 'K', 'P'};

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("truncated checkpoint " + path.string());
    return v;
}

std::string get_string(std::istream& is, std::uint64_t n, const std::filesystem::path& path) {
    std::string s(n, '\0');
    if (n && !is.read(s.data(), static_cast<std::streamsize>(n)))
        throw CheckpointError("truncated checkpoint " + path.string());
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os.write(kMagic, sizeof kMagic);
        put<std::uint32_t>(os, kCheckpointVersion);
        const std::string header = ckpt.header.dump();
        put<std::uint64_t>(os, header.size());
        os.write(header.data(), static_cast<std::streamsize>(header.size()));
        put<std::int64_t>(os, ckpt.step);
        put<std::uint64_t>(os, ckpt.blobs.size());
        for (const auto& [name, values] : ckpt.blobs) {
            put<std::uint64_t>(os, name.size());
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            put<std::uint64_t>(os, values.size());
            os.write(reinterpret_cast<const char*>(values.data()),
                     static_cast<std::streamsize>(values.size() * sizeof(double)));
        }
        os.flush();
        if (!os) {
            os.close();
            std::filesystem::remove(tmp, ec);
            throw IoError("failed writing checkpoint " + path.string() + " (disk full?)");
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
    char magic[sizeof kMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw CheckpointError(path.string() + " is not a checkpoint file");
    const auto version = get<std::uint32_t>(is, path);
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
    Checkpoint c;
    const auto header_len = get<std::uint64_t>(is, path);
    try {
        c.header = nlohmann::json::parse(get_string(is, header_len, path));
    } catch (const nlohmann::json::parse_error& e) {
        throw CheckpointError("corrupt checkpoint header in " + path.string() + ": " + e.what());
    }
    c.step = get<std::int64_t>(is, path);
    const auto count = get<std::uint64_t>(is, path);
    for (std::uint64_t b = 0; b < count; ++b) {
        const auto name = get_string(is, get<std::uint64_t>(is, path), path);
        const auto n = get<std::uint64_t>(is, path);
        std::vector<double> values(n);
        if (n && !is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double))))
            throw CheckpointError("truncated blob '" + name + "' in " + path.string());
        c.blobs.emplace(name, std::move(values));
    }
    return c;
}

}  // namespace upgan
