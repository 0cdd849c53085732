// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

namespace upgan::log {

enum class Level { debug, info, warn, error, off };

void set_level(Level level);
Level level();

void info(std::string_view message);
void warn(std::string_view message);
void error(std::string_view message);

/// Number of warnings emitted since process start (or the last reset).
/// Tests use this to check that an operation flagged a condition.
std::size_t warning_count();
void reset_warning_count();

}  // namespace upgan::log
