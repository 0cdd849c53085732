// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "upgan/nn/tensor.hpp"

namespace upgan::nn {

/// Named blobs of doubles, the unit stored in checkpoints.
using BlobMap = std::map<std::string, std::vector<double>>;

/// Ordered, named collection of trainable tensors.
class ParamSet {
public:
    /// He-normal weights (std = gain * sqrt(2 / fan_in)); seeded per name.
    Tensor& add_weight(const std::string& name, const Shape& shape, int fan_in, std::uint64_t seed, double gain = 1.0);
    Tensor& add_zeros(const std::string& name, const Shape& shape);

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;

    std::vector<Tensor>& tensors() { return tensors_; }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    const std::vector<std::string>& names() const { return names_; }

    std::size_t parameter_count() const;
    void zero_grad();
    void fill(double value);
    void set_requires_grad(bool on);

    /// Snapshot of all values, concatenated in declaration order.
    std::vector<double> flatten() const;

    void export_to(BlobMap& blobs, const std::string& prefix) const;
    /// Throws CheckpointError on a missing blob or a size mismatch.
    void import_from(const BlobMap& blobs, const std::string& prefix);

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

struct AdamConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive-moment optimizer bound to one ParamSet.
class Adam {
public:
    Adam(ParamSet& params, AdamConfig cfg);

    void step();
    std::int64_t steps_taken() const { return t_; }

    void export_to(BlobMap& blobs, const std::string& prefix) const;
    void import_from(const BlobMap& blobs, const std::string& prefix);

private:
    ParamSet* params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::int64_t t_ = 0;
};

}  // namespace upgan::nn
