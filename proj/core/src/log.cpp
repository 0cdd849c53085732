// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace upgan::log {
namespace {

std::atomic<Level> g_level{Level::warn};
std::atomic<std::size_t> g_warnings{0};
std::mutex g_mutex;

void emit(Level at, std::string_view tag, std::string_view message) {
    if (at < g_level.load()) return;
    std::lock_guard<std::mutex> lock(g_mutex);
    std::cerr << "[upgan " << tag << "] " << message << '\n';
}

}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level.load(); }

void info(std::string_view message) { emit(Level::info, "info", message); }

void warn(std::string_view message) {
    ++g_warnings;
    emit(Level::warn, "warn", message);
}

void error(std::string_view message) { emit(Level::error, "error", message); }

std::size_t warning_count() { return g_warnings.load(); }
void reset_warning_count() { g_warnings = 0; }

}  // namespace upgan::log
