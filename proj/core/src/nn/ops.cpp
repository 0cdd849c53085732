// Copyright (c) 2026, The UP-GAN Obscuration Authors
// SPDX-License-Identifier: Apache-2.0

#include "upgan/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "upgan/error.hpp"

namespace upgan::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_rank(const Tensor& t, int rank, const char* op) {
    if (t.rank() != rank)
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + to_string(t.shape()));
}

struct ConvGeometry {
    int channels, height, width, kernel, stride, pad, out_h, out_w;
    int col_rows() const { return channels * kernel * kernel; }
    int col_cols() const { return out_h * out_w; }
};

void im2col(const double* x, const ConvGeometry& g, double* col) {
    const int cols = g.col_cols();
    for (int c = 0; c < g.channels; ++c)
        for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) {
                double* row = col + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * cols;
                const double* plane = x + static_cast<std::size_t>(c) * g.height * g.width;
                for (int oy = 0; oy < g.out_h; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    double* dst = row + oy * g.out_w;
                    if (iy < 0 || iy >= g.height) {
                        std::fill(dst, dst + g.out_w, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(iy) * g.width;
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0;
                    }
                }
            }
}

void col2im(const double* col, const ConvGeometry& g, double* dx) {
    const int cols = g.col_cols();
    for (int c = 0; c < g.channels; ++c)
        for (int ky = 0; ky < g.kernel; ++ky)
            for (int kx = 0; kx < g.kernel; ++kx) {
                const double* row = col + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * cols;
                double* plane = dx + static_cast<std::size_t>(c) * g.height * g.width;
                for (int oy = 0; oy < g.out_h; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.height) continue;
                    double* dst = plane + static_cast<std::size_t>(iy) * g.width;
                    const double* src = row + oy * g.out_w;
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
                    }
                }
            }
}

double clip(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }

}  // namespace

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 2, "linear");
    require_rank(weight, 2, "linear");
    const int n = x.dim(0), f = x.dim(1), o = weight.dim(0);
    if (weight.dim(1) != f || static_cast<int>(bias.size()) != o)
        throw ShapeError("linear: input " + to_string(x.shape()) + " vs weight " + to_string(weight.shape()));
    Tensor out = make_result({n, o}, {x.ptr(), weight.ptr(), bias.ptr()});
    MapMat y(out.data().data(), n, o);
    y.noalias() = ConstMapMat(x.data().data(), n, f) * ConstMapMat(weight.data().data(), o, f).transpose();
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), o);
    if (out.requires_grad()) {
        Node* on = out.node();
        Node *xn = x.node(), *wn = weight.node(), *bn = bias.node();
        on->backward = [on, xn, wn, bn, n, f, o] {
            ConstMapMat dy(on->grad.data(), n, o);
            if (xn->requires_grad) MapMat(xn->grad.data(), n, f).noalias() += dy * ConstMapMat(wn->value.data(), o, f);
            if (wn->requires_grad)
                MapMat(wn->grad.data(), o, f).noalias() += dy.transpose() * ConstMapMat(xn->value.data(), n, f);
            // Plain loops keep the summation order independent of buffer alignment.
            if (bn->requires_grad)
                for (int r = 0; r < n; ++r)
                    for (int c = 0; c < o; ++c) bn->grad[static_cast<std::size_t>(c)] += dy(r, c);
        };
    }
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int pad) {
    require_rank(x, 4, "conv2d");
    require_rank(weight, 4, "conv2d");
    const int n = x.dim(0), o = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != x.dim(1) || weight.dim(3) != k || static_cast<int>(bias.size()) != o)
        throw ShapeError("conv2d: input " + to_string(x.shape()) + " vs weight " + to_string(weight.shape()));
    ConvGeometry g{x.dim(1), x.dim(2), x.dim(3), k, stride, pad, 0, 0};
    g.out_h = (g.height + 2 * pad - k) / stride + 1;
    g.out_w = (g.width + 2 * pad - k) / stride + 1;
    if (g.out_h <= 0 || g.out_w <= 0) throw ShapeError("conv2d: empty output for input " + to_string(x.shape()));

    Tensor out = make_result({n, o, g.out_h, g.out_w}, {x.ptr(), weight.ptr(), bias.ptr()});
    const int rows = g.col_rows(), cols = g.col_cols();
    std::vector<double> col(static_cast<std::size_t>(rows) * cols);
    const std::size_t in_stride = static_cast<std::size_t>(g.channels) * g.height * g.width;
    const std::size_t out_stride = static_cast<std::size_t>(o) * cols;
    ConstMapMat w(weight.data().data(), o, rows);
    const Eigen::Map<const Eigen::VectorXd> b(bias.data().data(), o);
    for (int s = 0; s < n; ++s) {
        im2col(x.data().data() + s * in_stride, g, col.data());
        MapMat y(out.data().data() + s * out_stride, o, cols);
        y.noalias() = w * ConstMapMat(col.data(), rows, cols);
        y.colwise() += b;
    }
    if (out.requires_grad()) {
        Node* on = out.node();
        Node *xn = x.node(), *wn = weight.node(), *bn = bias.node();
        on->backward = [on, xn, wn, bn, g, n, o, in_stride, out_stride] {
            const int rows = g.col_rows(), cols = g.col_cols();
            std::vector<double> col(static_cast<std::size_t>(rows) * cols);
            std::vector<double> dcol(wn->requires_grad || xn->requires_grad ? col.size() : 0);
            for (int s = 0; s < n; ++s) {
                ConstMapMat dy(on->grad.data() + s * out_stride, o, cols);
                if (bn->requires_grad)
                    for (int c = 0; c < o; ++c) {
                        double acc = 0.0;
                        for (int j = 0; j < cols; ++j) acc += dy(c, j);
                        bn->grad[static_cast<std::size_t>(c)] += acc;
                    }
                if (wn->requires_grad) {
                    im2col(xn->value.data() + s * in_stride, g, col.data());
                    MapMat(wn->grad.data(), o, rows).noalias() += dy * ConstMapMat(col.data(), rows, cols).transpose();
                }
                if (xn->requires_grad) {
                    MapMat(dcol.data(), rows, cols).noalias() = ConstMapMat(wn->value.data(), o, rows).transpose() * dy;
                    col2im(dcol.data(), g, xn->grad.data() + s * in_stride);
                }
            }
        };
    }
    return out;
}

Tensor upsample2x(const Tensor& x) {
    require_rank(x, 4, "upsample2x");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor out = make_result({n, c, 2 * h, 2 * w}, {x.ptr()});
    const double* src = x.data().data();
    double* dst = out.data().data();
    for (int p = 0; p < n * c; ++p)
        for (int y = 0; y < 2 * h; ++y)
            for (int xx = 0; xx < 2 * w; ++xx)
                dst[(static_cast<std::size_t>(p) * 2 * h + y) * 2 * w + xx] =
                    src[(static_cast<std::size_t>(p) * h + y / 2) * w + xx / 2];
    if (out.requires_grad()) {
        Node *on = out.node(), *xn = x.node();
        on->backward = [on, xn, n, c, h, w] {
            for (int p = 0; p < n * c; ++p)
                for (int y = 0; y < 2 * h; ++y)
                    for (int xx = 0; xx < 2 * w; ++xx)
                        xn->grad[(static_cast<std::size_t>(p) * h + y / 2) * w + xx / 2] +=
                            on->grad[(static_cast<std::size_t>(p) * 2 * h + y) * 2 * w + xx];
        };
    }
    return out;
}

Tensor max_pool2d(const Tensor& x, int kernel, int stride, int pad) {
    require_rank(x, 4, "max_pool2d");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = (h + 2 * pad - kernel) / stride + 1, ow = (w + 2 * pad - kernel) / stride + 1;
    Tensor out = make_result({n, c, oh, ow}, {x.ptr()});
    std::vector<std::size_t> argmax(out.size());
    const double* src = x.data().data();
    double* dst = out.data().data();
    for (int p = 0; p < n * c; ++p) {
        const std::size_t base = static_cast<std::size_t>(p) * h * w;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_i = base;
                for (int ky = 0; ky < kernel; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kernel; ++kx) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= w) continue;
                        const std::size_t i = base + static_cast<std::size_t>(iy) * w + ix;
                        if (src[i] > best) {
                            best = src[i];
                            best_i = i;
                        }
                    }
                }
                const std::size_t o = (static_cast<std::size_t>(p) * oh + oy) * ow + ox;
                dst[o] = best;
                argmax[o] = best_i;
            }
    }
    if (out.requires_grad()) {
        Node *on = out.node(), *xn = x.node();
        on->backward = [on, xn, argmax = std::move(argmax)] {
            for (std::size_t o = 0; o < argmax.size(); ++o) xn->grad[argmax[o]] += on->grad[o];
        };
    }
    return out;
}

Tensor leaky_relu(const Tensor& x, double slope) {
    Tensor out = make_result(x.shape(), {x.ptr()});
    const auto src = x.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0 ? src[i] : slope * src[i];
    if (out.requires_grad()) {
        Node *on = out.node(), *xn = x.node();
        on->backward = [on, xn, slope] {
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                xn->grad[i] += xn->value[i] > 0 ? on->grad[i] : slope * on->grad[i];
        };
    }
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = make_result(x.shape(), {x.ptr()});
    const auto src = x.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = src[i] >= 0 ? 1.0 / (1.0 + std::exp(-src[i])) : std::exp(src[i]) / (1.0 + std::exp(src[i]));
    if (out.requires_grad()) {
        Node *on = out.node(), *xn = x.node();
        on->backward = [on, xn] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                const double s = on->value[i];
                xn->grad[i] += on->grad[i] * s * (1.0 - s);
            }
        };
    }
    return out;
}

Tensor softmax_channels(const Tensor& x) {
    require_rank(x, 4, "softmax_channels");
    const int n = x.dim(0), c = x.dim(1);
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    Tensor out = make_result(x.shape(), {x.ptr()});
    const double* src = x.data().data();
    double* dst = out.data().data();
    for (int s = 0; s < n; ++s)
        for (std::size_t p = 0; p < hw; ++p) {
            const std::size_t base = static_cast<std::size_t>(s) * c * hw + p;
            double m = src[base];
            for (int k = 1; k < c; ++k) m = std::max(m, src[base + k * hw]);
            double z = 0.0;
            for (int k = 0; k < c; ++k) z += (dst[base + k * hw] = std::exp(src[base + k * hw] - m));
            for (int k = 0; k < c; ++k) dst[base + k * hw] /= z;
        }
    if (out.requires_grad()) {
        Node *on = out.node(), *xn = x.node();
        on->backward = [on, xn, n, c, hw] {
            for (int s = 0; s < n; ++s)
                for (std::size_t p = 0; p < hw; ++p) {
                    const std::size_t base = static_cast<std::size_t>(s) * c * hw + p;
                    double dot = 0.0;
                    for (int k = 0; k < c; ++k) dot += on->grad[base + k * hw] * on->value[base + k * hw];
                    for (int k = 0; k < c; ++k)
                        xn->grad[base + k * hw] += on->value[base + k * hw] * (on->grad[base + k * hw] - dot);
                }
        };
    }
    return out;
}

Tensor reshape(const Tensor& x, const Shape& shape) {
    if (numel(shape) != x.size())
        throw ShapeError("reshape " + to_string(x.shape()) + " -> " + to_string(shape));
    Tensor out = make_result(shape, {x.ptr()});
    std::copy(x.data().begin(), x.data().end(), out.data().begin());
    if (out.requires_grad()) {
        Node *on = out.node(), *xn = x.node();
        on->backward = [on, xn] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        };
    }
    return out;
}

Tensor select_channel(const Tensor& x, int c) {
    require_rank(x, 4, "select_channel");
    const int n = x.dim(0), channels = x.dim(1);
    if (c < 0 || c >= channels) throw ShapeError("select_channel: channel out of range");
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    Tensor out = make_result({n, 1, x.dim(2), x.dim(3)}, {x.ptr()});
    for (int s = 0; s < n; ++s)
        std::copy_n(x.data().data() + (static_cast<std::size_t>(s) * channels + c) * hw, hw, out.data().data() + s * hw);
    if (out.requires_grad()) {
        Node *on = out.node(), *xn = x.node();
        on->backward = [on, xn, n, channels, c, hw] {
            for (int s = 0; s < n; ++s)
                for (std::size_t p = 0; p < hw; ++p)
                    xn->grad[(static_cast<std::size_t>(s) * channels + c) * hw + p] += on->grad[s * hw + p];
        };
    }
    return out;
}

Tensor sum_squared_error(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("sum_squared_error: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    Tensor out = make_result({1}, {a.ptr(), b.ptr()});
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        acc += d * d;
    }
    out.data()[0] = acc;
    if (out.requires_grad()) {
        Node *on = out.node(), *an = a.node(), *bn = b.node();
        on->backward = [on, an, bn] {
            const double g = on->grad[0];
            for (std::size_t i = 0; i < an->value.size(); ++i) {
                const double d = 2.0 * g * (an->value[i] - bn->value[i]);
                if (an->requires_grad) an->grad[i] += d;
                if (bn->requires_grad) bn->grad[i] -= d;
            }
        };
    }
    return out;
}

Tensor binary_cross_entropy(const Tensor& p, const std::vector<double>& targets, double eps) {
    if (targets.size() != p.size()) throw ShapeError("binary_cross_entropy: target count mismatch");
    Tensor out = make_result({1}, {p.ptr()});
    const double inv_n = 1.0 / static_cast<double>(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = clip(p.data()[i], eps);
        acc -= targets[i] * std::log(q) + (1.0 - targets[i]) * std::log(1.0 - q);
    }
    out.data()[0] = acc * inv_n;
    if (out.requires_grad()) {
        Node *on = out.node(), *pn = p.node();
        on->backward = [on, pn, targets, eps, inv_n] {
            const double g = on->grad[0] * inv_n;
            for (std::size_t i = 0; i < pn->value.size(); ++i) {
                const double raw = pn->value[i];
                if (raw < eps || raw > 1.0 - eps) continue;
                pn->grad[i] += g * (-(targets[i] / raw) + (1.0 - targets[i]) / (1.0 - raw));
            }
        };
    }
    return out;
}

Tensor mean_log(const Tensor& p, double eps) {
    Tensor out = make_result({1}, {p.ptr()});
    const double inv_n = 1.0 / static_cast<double>(p.size());
    double acc = 0.0;
    for (double v : p.data()) acc += std::log(clip(v, eps));
    out.data()[0] = acc * inv_n;
    if (out.requires_grad()) {
        Node *on = out.node(), *pn = p.node();
        on->backward = [on, pn, eps, inv_n] {
            for (std::size_t i = 0; i < pn->value.size(); ++i) {
                const double v = pn->value[i];
                if (v >= eps && v <= 1.0 - eps) pn->grad[i] += on->grad[0] * inv_n / v;
            }
        };
    }
    return out;
}

Tensor mean_log1m(const Tensor& p, double eps) {
    Tensor out = make_result({1}, {p.ptr()});
    const double inv_n = 1.0 / static_cast<double>(p.size());
    double acc = 0.0;
    for (double v : p.data()) acc += std::log(1.0 - clip(v, eps));
    out.data()[0] = acc * inv_n;
    if (out.requires_grad()) {
        Node *on = out.node(), *pn = p.node();
        on->backward = [on, pn, eps, inv_n] {
            for (std::size_t i = 0; i < pn->value.size(); ++i) {
                const double v = pn->value[i];
                if (v >= eps && v <= 1.0 - eps) pn->grad[i] -= on->grad[0] * inv_n / (1.0 - v);
            }
        };
    }
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    require_rank(logits, 2, "cross_entropy");
    const int n = logits.dim(0), k = logits.dim(1);
    if (static_cast<int>(labels.size()) != n) throw ShapeError("cross_entropy: label count mismatch");
    Tensor out = make_result({1}, {logits.ptr()});
    std::vector<double> probs(logits.size());
    double acc = 0.0;
    for (int s = 0; s < n; ++s) {
        const double* z = logits.data().data() + static_cast<std::size_t>(s) * k;
        double* q = probs.data() + static_cast<std::size_t>(s) * k;
        const double m = *std::max_element(z, z + k);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += (q[j] = std::exp(z[j] - m));
        for (int j = 0; j < k; ++j) q[j] /= sum;
        if (labels[s] < 0 || labels[s] >= k) throw ShapeError("cross_entropy: label out of range");
        acc -= z[labels[s]] - m - std::log(sum);
    }
    out.data()[0] = acc / n;
    if (out.requires_grad()) {
        Node *on = out.node(), *ln = logits.node();
        on->backward = [on, ln, labels, probs = std::move(probs), n, k] {
            const double g = on->grad[0] / n;
            for (int s = 0; s < n; ++s)
                for (int j = 0; j < k; ++j) {
                    const std::size_t i = static_cast<std::size_t>(s) * k + j;
                    ln->grad[i] += g * (probs[i] - (labels[s] == j ? 1.0 : 0.0));
                }
        };
    }
    return out;
}

Tensor scale(const Tensor& x, double factor) {
    Tensor out = make_result(x.shape(), {x.ptr()});
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] * factor;
    if (out.requires_grad()) {
        Node *on = out.node(), *xn = x.node();
        on->backward = [on, xn, factor] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += factor * on->grad[i];
        };
    }
    return out;
}

Tensor weighted_sum(const std::vector<std::pair<Tensor, double>>& terms) {
    std::vector<std::shared_ptr<Node>> parents;
    std::vector<double> weights;
    double acc = 0.0;
    for (const auto& [t, w] : terms) {
        if (t.size() != 1) throw ShapeError("weighted_sum: terms must be scalars");
        parents.push_back(t.ptr());
        weights.push_back(w);
        acc += w * t.item();
    }
    Tensor out = make_result({1}, parents);
    out.data()[0] = acc;
    if (out.requires_grad()) {
        Node* on = out.node();
        std::vector<Node*> raw;
        for (const auto& p : parents) raw.push_back(p.get());
        on->backward = [on, raw, weights] {
            for (std::size_t i = 0; i < raw.size(); ++i)
                if (raw[i]->requires_grad) raw[i]->grad[0] += weights[i] * on->grad[0];
        };
    }
    return out;
}

}  // namespace upgan::nn
