// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/nn/params.hpp"

#include <algorithm>
#include <cmath>

#include "upgan/error.hpp"
#include "upgan/rng.hpp"

namespace upgan::nn {

Tensor& ParamSet::add_weight(const std::string& name, const Shape& shape, int fan_in, std::uint64_t seed, double gain) {
    std::vector<double> values(numel(shape));
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : name) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    Rng rng(derive_seed(seed, {h}));
    const double stddev = gain * std::sqrt(2.0 / std::max(fan_in, 1));
    for (double& v : values) v = rng.normal(0.0, stddev);
    names_.push_back(name);
    tensors_.push_back(Tensor::from(shape, std::move(values), true));
    return tensors_.back();
}

Tensor& ParamSet::add_zeros(const std::string& name, const Shape& shape) {
    names_.push_back(name);
    tensors_.push_back(Tensor::zeros(shape, true));
    return tensors_.back();
}

Tensor& ParamSet::at(const std::string& name) {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw ConfigError("no parameter named '" + name + "'");
    return tensors_[static_cast<std::size_t>(it - names_.begin())];
}

const Tensor& ParamSet::at(const std::string& name) const { return const_cast<ParamSet*>(this)->at(name); }

std::size_t ParamSet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

void ParamSet::zero_grad() {
    for (auto& t : tensors_) t.zero_grad();
}

void ParamSet::fill(double value) {
    for (auto& t : tensors_) std::fill(t.data().begin(), t.data().end(), value);
}

void ParamSet::set_requires_grad(bool on) {
    for (auto& t : tensors_) t.set_requires_grad(on);
}

std::vector<double> ParamSet::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& t : tensors_) out.insert(out.end(), t.data().begin(), t.data().end());
    return out;
}

void ParamSet::export_to(BlobMap& blobs, const std::string& prefix) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i)
        blobs[prefix + names_[i]] = std::vector<double>(tensors_[i].data().begin(), tensors_[i].data().end());
}

void ParamSet::import_from(const BlobMap& blobs, const std::string& prefix) {
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        const auto it = blobs.find(prefix + names_[i]);
        if (it == blobs.end()) throw CheckpointError("checkpoint is missing parameter '" + prefix + names_[i] + "'");
        if (it->second.size() != tensors_[i].size())
            throw CheckpointError("parameter '" + prefix + names_[i] + "' has " + std::to_string(it->second.size()) +
                                  " values, expected " + std::to_string(tensors_[i].size()));
        std::copy(it->second.begin(), it->second.end(), tensors_[i].data().begin());
    }
}

Adam::Adam(ParamSet& params, AdamConfig cfg) : params_(&params), cfg_(cfg) {
    for (const auto& t : params.tensors()) {
        m_.emplace_back(t.size(), 0.0);
        v_.emplace_back(t.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto& tensors = params_->tensors();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        auto values = tensors[k].data();
        const auto grads = tensors[k].grad();
        if (grads.size() != values.size()) continue;
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < values.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grads[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
            values[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
        }
    }
}

void Adam::export_to(BlobMap& blobs, const std::string& prefix) const {
    const auto& names = params_->names();
    for (std::size_t k = 0; k < names.size(); ++k) {
        blobs[prefix + "m/" + names[k]] = m_[k];
        blobs[prefix + "v/" + names[k]] = v_[k];
    }
    blobs[prefix + "t"] = {static_cast<double>(t_)};
}

void Adam::import_from(const BlobMap& blobs, const std::string& prefix) {
    const auto& names = params_->names();
    auto fetch = [&](const std::string& key, std::size_t size) -> const std::vector<double>& {
        const auto it = blobs.find(key);
        if (it == blobs.end()) throw CheckpointError("checkpoint is missing optimizer state '" + key + "'");
        if (it->second.size() != size) throw CheckpointError("optimizer state '" + key + "' has the wrong size");
        return it->second;
    };
    for (std::size_t k = 0; k < names.size(); ++k) {
        m_[k] = fetch(prefix + "m/" + names[k], m_[k].size());
        v_[k] = fetch(prefix + "v/" + names[k], v_[k].size());
    }
    t_ = static_cast<std::int64_t>(fetch(prefix + "t", 1)[0]);
}

}  // namespace upgan::nn
