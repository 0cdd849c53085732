// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace upgan::nn {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Graph node. Leaves with requires_grad set are parameters; interior nodes
/// keep their parents alive and know how to push their gradient back.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

/// Shared handle to a graph node. Copies alias the same storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor from(const Shape& shape, std::vector<double> values, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::size_t size() const { return node_->value.size(); }

    std::span<double> data() { return node_->value; }
    std::span<const double> data() const { return node_->value; }
    std::span<const double> grad() const { return node_->grad; }
    std::vector<double>& grad_storage() {
        node_->ensure_grad();
        return node_->grad;
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

    double item() const;

    /// New leaf holding a copy of the values, cut from the graph.
    Tensor detach() const;

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
    friend Tensor make_result(const Shape&, std::vector<std::shared_ptr<Node>>);
    std::shared_ptr<Node> node_;
};

/// Creates an op output whose requires_grad is inherited from its parents.
Tensor make_result(const Shape& shape, std::vector<std::shared_ptr<Node>> parents);

/// Reverse-mode sweep from a scalar. Gradients accumulate into every node
/// that requires them; callers zero parameter gradients beforehand.
void backward(const Tensor& loss);

}  // namespace upgan::nn
