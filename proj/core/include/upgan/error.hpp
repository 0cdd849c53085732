// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace upgan {

/// Base of every error raised by the library. `kind()` is a stable tag used
/// by the CLI for structured error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define UPGAN_DEFINE_ERROR(Name, tag)                                        \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& message) : Error(tag, message) {}   \
    }

UPGAN_DEFINE_ERROR(ParseError, "parse");
UPGAN_DEFINE_ERROR(AnnotationError, "annotation");
UPGAN_DEFINE_ERROR(CorpusError, "corpus");
UPGAN_DEFINE_ERROR(ShapeError, "shape");
UPGAN_DEFINE_ERROR(ConfigError, "config");
UPGAN_DEFINE_ERROR(ArgumentError, "argument");
UPGAN_DEFINE_ERROR(ValidationError, "validation");
UPGAN_DEFINE_ERROR(NumericalError, "numerical");
UPGAN_DEFINE_ERROR(CheckpointError, "checkpoint");
UPGAN_DEFINE_ERROR(TrainingError, "training");
UPGAN_DEFINE_ERROR(BoundaryError, "boundary");
UPGAN_DEFINE_ERROR(SwapError, "swap");
UPGAN_DEFINE_ERROR(SplitError, "split");
UPGAN_DEFINE_ERROR(SampleSizeError, "sample_size");
UPGAN_DEFINE_ERROR(IoError, "io");

#undef UPGAN_DEFINE_ERROR

}  // namespace upgan
