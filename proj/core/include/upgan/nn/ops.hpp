// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "upgan/nn/tensor.hpp"

namespace upgan::nn {

// Layers. Feature maps are NCHW.

/// x [N,F], weight [O,F], bias [O] -> [N,O]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// x [N,C,H,W], weight [O,C,k,k], bias [O] -> [N,O,Ho,Wo]; zero padding.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int pad);

/// Nearest-neighbor upsampling by 2 along both spatial axes.
Tensor upsample2x(const Tensor& x);

/// Max pooling; padded cells never win.
Tensor max_pool2d(const Tensor& x, int kernel, int stride, int pad);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor sigmoid(const Tensor& x);

/// Softmax across the channel axis of an NCHW tensor.
Tensor softmax_channels(const Tensor& x);

Tensor reshape(const Tensor& x, const Shape& shape);

/// [N,C,H,W] -> [N,1,H,W] holding channel c.
Tensor select_channel(const Tensor& x, int c);

// Reductions to scalars.

/// Sum over all elements of (a - b)^2.
Tensor sum_squared_error(const Tensor& a, const Tensor& b);

/// Mean binary cross entropy of probabilities p against targets in {0,1};
/// p is clipped to [eps, 1-eps].
Tensor binary_cross_entropy(const Tensor& p, const std::vector<double>& targets, double eps);

/// Mean of log(clip(p)) and of log(1 - clip(p)).
Tensor mean_log(const Tensor& p, double eps);
Tensor mean_log1m(const Tensor& p, double eps);

/// Mean softmax cross entropy of logits [N,K] against class indices.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

Tensor scale(const Tensor& x, double factor);

/// sum_i w_i * t_i over scalar terms.
Tensor weighted_sum(const std::vector<std::pair<Tensor, double>>& terms);

}  // namespace upgan::nn
