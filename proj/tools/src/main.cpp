// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "upgan/cli.hpp"

int main(int argc, char** argv) {
    return upgan::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
