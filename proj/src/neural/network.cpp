#include "cmpx/neural/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <Eigen/Dense>

namespace cmpx {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMapRM = Eigen::Map<const RowMajor>;

// Eigen's vectorized products peel differently depending on the operand address, which changes
// the summation order. Products therefore run on Eigen-owned (aligned) copies only.
RowMajor owned(const double* p, int rows, int cols)
{
    return CMapRM(p, rows, cols);
}

std::vector<int> with_batch(int b, const std::vector<int>& s)
{
    std::vector<int> out{b};
    out.insert(out.end(), s.begin(), s.end());
    return out;
}

// y[b][o] = bias[o] + sum_i x[b][i] * W[i][o], accumulated in ascending i for every element
// so that a row's result does not depend on the rest of the batch.
void linear_forward(const double* x, const double* W, const double* bias, double* y, int batch, int in, int out)
{
    constexpr int kRows = 4;
    constexpr int kCols = 256;
    alignas(64) double acc[kRows * kCols];
    for (int b0 = 0; b0 < batch; b0 += kRows) {
        const int rows = std::min(kRows, batch - b0);
        for (int o0 = 0; o0 < out; o0 += kCols) {
            const int oc = std::min(kCols, out - o0);
            for (int r = 0; r < rows; ++r)
                std::copy(bias + o0, bias + o0 + oc, acc + r * kCols);
            for (int i = 0; i < in; ++i) {
                const double* w = W + static_cast<std::size_t>(i) * out + o0;
                for (int r = 0; r < rows; ++r) {
                    const double xi = x[static_cast<std::size_t>(b0 + r) * in + i];
                    double* a = acc + r * kCols;
                    for (int o = 0; o < oc; ++o)
                        a[o] += xi * w[o];
                }
            }
            for (int r = 0; r < rows; ++r)
                std::copy(acc + r * kCols, acc + r * kCols + oc, y + static_cast<std::size_t>(b0 + r) * out + o0);
        }
    }
}

// Column matrix [cin*k*k][oh*ow] for one sample.
void im2col(const double* x, int cin, int h, int w, int k, int stride, int oh, int ow, double* col)
{
    for (int c = 0; c < cin; ++c)
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                const int row = (c * k + ki) * k + kj;
                double* dst = col + static_cast<std::size_t>(row) * oh * ow;
                for (int oi = 0; oi < oh; ++oi) {
                    const double* src = x + (static_cast<std::size_t>(c) * h + oi * stride + ki) * w + kj;
                    for (int oj = 0; oj < ow; ++oj)
                        dst[oi * ow + oj] = src[oj * stride];
                }
            }
}

void col2im(const double* col, int cin, int h, int w, int k, int stride, int oh, int ow, double* dx)
{
    for (int c = 0; c < cin; ++c)
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                const int row = (c * k + ki) * k + kj;
                const double* src = col + static_cast<std::size_t>(row) * oh * ow;
                for (int oi = 0; oi < oh; ++oi) {
                    double* dst = dx + (static_cast<std::size_t>(c) * h + oi * stride + ki) * w + kj;
                    for (int oj = 0; oj < ow; ++oj)
                        dst[oj * stride] += src[oi * ow + oj];
                }
            }
}

}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), data(shape_product(shape), 0.0) {}

std::size_t Tensor::row_size() const
{
    if (shape.empty() || shape[0] == 0)
        return 0;
    return data.size() / static_cast<std::size_t>(shape[0]);
}

std::size_t shape_product(const std::vector<int>& shape)
{
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0)
            throw ContractError("tensor shape has a negative dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string to_string(LayerKind k)
{
    switch (k) {
    case LayerKind::Linear:
        return "linear";
    case LayerKind::PReLU:
        return "prelu";
    case LayerKind::Dropout:
        return "dropout";
    case LayerKind::Conv2d:
        return "conv2d";
    case LayerKind::MaxPool2d:
        return "maxpool2d";
    case LayerKind::Flatten:
        return "flatten";
    }
    return "unknown";
}

LayerKind parse_layer_kind(const std::string& s)
{
    for (LayerKind k : {LayerKind::Linear, LayerKind::PReLU, LayerKind::Dropout, LayerKind::Conv2d,
                        LayerKind::MaxPool2d, LayerKind::Flatten})
        if (to_string(k) == s)
            return k;
    throw ContractError("unknown layer kind '" + s + "'");
}

LayerSpec LayerSpec::linear(int in, int out)
{
    LayerSpec s;
    s.kind = LayerKind::Linear;
    s.in = in;
    s.out = out;
    return s;
}

LayerSpec LayerSpec::prelu()
{
    LayerSpec s;
    s.kind = LayerKind::PReLU;
    return s;
}

LayerSpec LayerSpec::dropout(double p)
{
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.drop = p;
    return s;
}

LayerSpec LayerSpec::conv2d(int in_channels, int out_channels, int kernel, int stride)
{
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.in = in_channels;
    s.out = out_channels;
    s.kernel = kernel;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::maxpool2d(int kernel)
{
    LayerSpec s;
    s.kind = LayerKind::MaxPool2d;
    s.kernel = kernel;
    return s;
}

LayerSpec LayerSpec::flatten()
{
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
}

bool DropoutSource::keep(int row, double p)
{
    Rng& rng = per_row_ ? per_row_->at(static_cast<std::size_t>(row)) : *shared_;
    return uniform01(rng) >= p;
}

Network::Network(std::vector<int> input_shape, std::vector<LayerSpec> layers) : layers_(std::move(layers))
{
    shapes_.push_back(std::move(input_shape));
    std::size_t offset = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& L = layers_[i];
        const std::vector<int>& s = shapes_.back();
        std::vector<int> next = s;
        std::size_t count = 0;
        const std::string where = "layer " + std::to_string(i) + " (" + to_string(L.kind) + ")";
        switch (L.kind) {
        case LayerKind::Linear:
            if (s.size() != 1 || s[0] != L.in || L.out < 1)
                throw ContractError(where + ": input shape does not match in-features");
            next = {L.out};
            count = static_cast<std::size_t>(L.in) * L.out + L.out;
            break;
        case LayerKind::PReLU:
            count = 1;
            break;
        case LayerKind::Dropout:
            if (!(L.drop >= 0.0 && L.drop < 1.0))
                throw ContractError(where + ": drop probability must be in [0, 1)");
            break;
        case LayerKind::Conv2d: {
            if (s.size() != 3 || s[0] != L.in || L.kernel < 1 || L.stride < 1 || L.out < 1)
                throw ContractError(where + ": expects [channels, h, w] input with matching channels");
            const int oh = (s[1] - L.kernel) / L.stride + 1;
            const int ow = (s[2] - L.kernel) / L.stride + 1;
            if (s[1] < L.kernel || s[2] < L.kernel)
                throw ContractError(where + ": kernel larger than input");
            next = {L.out, oh, ow};
            count = static_cast<std::size_t>(L.out) * L.in * L.kernel * L.kernel + L.out;
            break;
        }
        case LayerKind::MaxPool2d:
            if (s.size() != 3 || L.kernel < 1 || s[1] < L.kernel || s[2] < L.kernel)
                throw ContractError(where + ": expects [channels, h, w] input at least one window large");
            next = {s[0], s[1] / L.kernel, s[2] / L.kernel};
            break;
        case LayerKind::Flatten:
            next = {static_cast<int>(shape_product(s))};
            break;
        }
        offsets_.push_back(offset);
        offset += count;
        shapes_.push_back(std::move(next));
    }
    offsets_.push_back(offset);
    params_.assign(offset, 0.0);
}

std::size_t Network::layer_param_count(std::size_t i) const
{
    return offsets_.at(i + 1) - offsets_.at(i);
}

void Network::init(Rng& rng)
{
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& L = layers_[i];
        double* p = params_.data() + offsets_[i];
        if (L.kind == LayerKind::Linear) {
            const double a = std::sqrt(6.0 / (L.in + L.out));
            const std::size_t nw = static_cast<std::size_t>(L.in) * L.out;
            for (std::size_t j = 0; j < nw; ++j)
                p[j] = uniform(rng, -a, a);
            std::fill(p + nw, p + nw + L.out, 0.0);
        } else if (L.kind == LayerKind::Conv2d) {
            const int kk = L.kernel * L.kernel;
            const double a = std::sqrt(6.0 / (L.in * kk + L.out * kk));
            const std::size_t nw = static_cast<std::size_t>(L.out) * L.in * kk;
            for (std::size_t j = 0; j < nw; ++j)
                p[j] = uniform(rng, -a, a);
            std::fill(p + nw, p + nw + L.out, 0.0);
        } else if (L.kind == LayerKind::PReLU) {
            p[0] = 0.25;
        }
    }
}

bool Network::same_architecture(const Network& other) const
{
    return layers_ == other.layers_ && shapes_.front() == other.shapes_.front();
}

Tensor Network::forward(const Tensor& x, Mode mode, DropoutSource* dropout, ForwardCache* cache) const
{
    if (x.shape.size() != shapes_.front().size() + 1 ||
        !std::equal(shapes_.front().begin(), shapes_.front().end(), x.shape.begin() + 1))
        throw ContractError("Network::forward: input shape mismatch");
    const int B = x.batch();
    const bool stochastic = mode != Mode::DeterministicInfer;
    if (stochastic && !dropout &&
        std::any_of(layers_.begin(), layers_.end(), [](const LayerSpec& l) { return l.kind == LayerKind::Dropout; }))
        throw ContractError("Network::forward: dropout source required in stochastic modes");
    if (cache) {
        cache->inputs.assign(layers_.size(), Tensor{});
        cache->masks.assign(layers_.size(), {});
        cache->argmax.assign(layers_.size(), {});
    }

    Tensor cur = x;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const LayerSpec& L = layers_[li];
        const std::vector<int>& in_s = shapes_[li];
        Tensor next(with_batch(B, shapes_[li + 1]));
        const double* p = params_.data() + offsets_[li];
        switch (L.kind) {
        case LayerKind::Linear:
            linear_forward(cur.data.data(), p, p + static_cast<std::size_t>(L.in) * L.out, next.data.data(), B, L.in,
                           L.out);
            break;
        case LayerKind::PReLU: {
            const double a = p[0];
            for (std::size_t j = 0; j < cur.size(); ++j)
                next.data[j] = cur.data[j] > 0.0 ? cur.data[j] : a * cur.data[j];
            break;
        }
        case LayerKind::Dropout: {
            if (!stochastic || L.drop == 0.0) {
                next.data = cur.data;
                if (cache)
                    cache->masks[li].assign(cur.size(), 1.0);
                break;
            }
            const double scale = 1.0 / (1.0 - L.drop);
            const std::size_t rs = cur.row_size();
            std::vector<double> mask(cache ? cur.size() : 0);
            for (int b = 0; b < B; ++b)
                for (std::size_t j = 0; j < rs; ++j) {
                    const std::size_t idx = static_cast<std::size_t>(b) * rs + j;
                    const double m = dropout->keep(b, L.drop) ? scale : 0.0;
                    next.data[idx] = cur.data[idx] * m;
                    if (cache)
                        mask[idx] = m;
                }
            if (cache)
                cache->masks[li] = std::move(mask);
            break;
        }
        case LayerKind::Conv2d: {
            const int cin = in_s[0], h = in_s[1], w = in_s[2];
            const int oh = shapes_[li + 1][1], ow = shapes_[li + 1][2];
            const int kk = L.kernel * L.kernel;
            const int rows = cin * kk, cols = oh * ow;
            RowMajor col(rows, cols);
            RowMajor out(L.out, cols);
            const RowMajor W = owned(p, L.out, rows);
            const double* bias = p + static_cast<std::size_t>(L.out) * rows;
            for (int b = 0; b < B; ++b) {
                im2col(cur.row(b), cin, h, w, L.kernel, L.stride, oh, ow, col.data());
                out.noalias() = W * col;
                double* dst = next.row(b);
                for (int o = 0; o < L.out; ++o)
                    for (int j = 0; j < cols; ++j)
                        dst[static_cast<std::size_t>(o) * cols + j] = out(o, j) + bias[o];
            }
            break;
        }
        case LayerKind::MaxPool2d: {
            const int c = in_s[0], h = in_s[1], w = in_s[2];
            const int oh = shapes_[li + 1][1], ow = shapes_[li + 1][2];
            std::vector<std::size_t> arg(cache ? next.size() : 0);
            for (int b = 0; b < B; ++b) {
                const double* src = cur.row(b);
                double* dst = next.row(b);
                for (int ch = 0; ch < c; ++ch)
                    for (int oi = 0; oi < oh; ++oi)
                        for (int oj = 0; oj < ow; ++oj) {
                            std::size_t best = (static_cast<std::size_t>(ch) * h + oi * L.kernel) * w + oj * L.kernel;
                            for (int ki = 0; ki < L.kernel; ++ki)
                                for (int kj = 0; kj < L.kernel; ++kj) {
                                    const std::size_t idx =
                                        (static_cast<std::size_t>(ch) * h + oi * L.kernel + ki) * w + oj * L.kernel + kj;
                                    if (src[idx] > src[best])
                                        best = idx;
                                }
                            const std::size_t o = (static_cast<std::size_t>(ch) * oh + oi) * ow + oj;
                            dst[o] = src[best];
                            if (cache)
                                arg[static_cast<std::size_t>(b) * next.row_size() + o] = best;
                        }
            }
            if (cache)
                cache->argmax[li] = std::move(arg);
            break;
        }
        case LayerKind::Flatten:
            next.data = cur.data;
            break;
        }
        if (cache)
            cache->inputs[li] = std::move(cur);
        cur = std::move(next);
    }
    return cur;
}

Tensor Network::backward(const ForwardCache& cache, const Tensor& dy, std::span<double> grad) const
{
    if (grad.size() != params_.size())
        throw ContractError("Network::backward: gradient buffer has the wrong length");
    if (cache.inputs.size() != layers_.size())
        throw ContractError("Network::backward: cache does not come from this network");
    const int B = dy.batch();
    Tensor g = dy;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const LayerSpec& L = layers_[li];
        const Tensor& x = cache.inputs[li];
        if (x.batch() != B)
            throw ContractError("Network::backward: batch size mismatch");
        Tensor dx(x.shape);
        const double* p = params_.data() + offsets_[li];
        double* gp = grad.data() + offsets_[li];
        switch (L.kind) {
        case LayerKind::Linear: {
            const RowMajor X = owned(x.data.data(), B, L.in);
            const RowMajor G = owned(g.data.data(), B, L.out);
            const RowMajor W = owned(p, L.in, L.out);
            const RowMajor dW = X.transpose() * G;
            const std::size_t nw = static_cast<std::size_t>(L.in) * L.out;
            for (std::size_t j = 0; j < nw; ++j)
                gp[j] += dW.data()[j];
            double* db = gp + nw;
            for (int b = 0; b < B; ++b)
                for (int o = 0; o < L.out; ++o)
                    db[o] += G(b, o);
            const RowMajor dX = G * W.transpose();
            std::copy(dX.data(), dX.data() + dX.size(), dx.data.begin());
            break;
        }
        case LayerKind::PReLU: {
            const double a = p[0];
            double da = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) {
                if (x.data[j] > 0.0) {
                    dx.data[j] = g.data[j];
                } else {
                    dx.data[j] = a * g.data[j];
                    da += g.data[j] * x.data[j];
                }
            }
            gp[0] += da;
            break;
        }
        case LayerKind::Dropout: {
            const std::vector<double>& m = cache.masks[li];
            for (std::size_t j = 0; j < x.size(); ++j)
                dx.data[j] = g.data[j] * m[j];
            break;
        }
        case LayerKind::Conv2d: {
            const std::vector<int>& in_s = shapes_[li];
            const int cin = in_s[0], h = in_s[1], w = in_s[2];
            const int oh = shapes_[li + 1][1], ow = shapes_[li + 1][2];
            const int rows = cin * L.kernel * L.kernel, cols = oh * ow;
            RowMajor col(rows, cols);
            RowMajor dcol(rows, cols);
            const RowMajor W = owned(p, L.out, rows);
            RowMajor dW = RowMajor::Zero(L.out, rows);
            double* db = gp + static_cast<std::size_t>(L.out) * rows;
            for (int b = 0; b < B; ++b) {
                im2col(x.row(b), cin, h, w, L.kernel, L.stride, oh, ow, col.data());
                const RowMajor G = owned(g.row(b), L.out, cols);
                dW.noalias() += G * col.transpose();
                for (int o = 0; o < L.out; ++o)
                    for (int j = 0; j < cols; ++j)
                        db[o] += G(o, j);
                dcol.noalias() = W.transpose() * G;
                col2im(dcol.data(), cin, h, w, L.kernel, L.stride, oh, ow, dx.row(b));
            }
            for (Eigen::Index j = 0; j < dW.size(); ++j)
                gp[j] += dW.data()[j];
            break;
        }
        case LayerKind::MaxPool2d: {
            const std::vector<std::size_t>& arg = cache.argmax[li];
            const std::size_t out_rs = g.row_size();
            for (int b = 0; b < B; ++b) {
                double* d = dx.row(b);
                const double* gg = g.row(b);
                for (std::size_t o = 0; o < out_rs; ++o)
                    d[arg[static_cast<std::size_t>(b) * out_rs + o]] += gg[o];
            }
            break;
        }
        case LayerKind::Flatten:
            dx.data = g.data;
            break;
        }
        g = std::move(dx);
    }
    return g;
}

void adagrad_step(std::span<double> params, std::span<double> accum, std::span<const double> grads, double lr,
                  double eps)
{
    if (params.size() != accum.size() || params.size() != grads.size())
        throw ContractError("adagrad_step: length mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double gi = grads[i];
        if (!std::isfinite(gi))
            throw ContractError("adagrad_step: non-finite gradient");
        accum[i] += gi * gi;
        params[i] -= lr * gi / (std::sqrt(accum[i]) + eps);
    }
}

void adagrad_step(TrainState& state, std::span<const double> grads)
{
    if (state.grad_sq_accum.size() != state.params.size())
        state.grad_sq_accum.assign(state.params.size(), 0.0);
    adagrad_step(state.params, state.grad_sq_accum, grads, state.lr);
}

}  // namespace cmpx
