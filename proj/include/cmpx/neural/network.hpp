#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cmpx/core/types.hpp"

namespace cmpx {

/// Dense row-major array; shape[0] is the batch dimension when used as network I/O.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);

    std::size_t size() const { return data.size(); }
    int batch() const { return shape.empty() ? 0 : shape[0]; }
    /// Elements per batch row.
    std::size_t row_size() const;
    double* row(int b) { return data.data() + static_cast<std::size_t>(b) * row_size(); }
    const double* row(int b) const { return data.data() + static_cast<std::size_t>(b) * row_size(); }
};

std::size_t shape_product(const std::vector<int>& shape);

enum class LayerKind { Linear, PReLU, Dropout, Conv2d, MaxPool2d, Flatten };

std::string to_string(LayerKind k);
LayerKind parse_layer_kind(const std::string& s);

struct LayerSpec {
    LayerKind kind = LayerKind::Linear;
    int in = 0;           ///< linear: input features; conv2d: input channels
    int out = 0;          ///< linear: output features; conv2d: output channels
    int kernel = 0;       ///< conv2d / maxpool2d window
    int stride = 1;       ///< conv2d
    double drop = 0.5;    ///< dropout probability

    static LayerSpec linear(int in, int out);
    static LayerSpec prelu();
    static LayerSpec dropout(double p);
    static LayerSpec conv2d(int in_channels, int out_channels, int kernel, int stride);
    static LayerSpec maxpool2d(int kernel);
    static LayerSpec flatten();

    bool operator==(const LayerSpec&) const = default;
};

enum class Mode {
    Train,               ///< dropout active, activations cached
    StochasticInfer,     ///< dropout active
    DeterministicInfer,  ///< dropout is the identity
};

/// Supplies dropout keep/drop decisions, either from one stream for the whole batch or from a
/// separate stream per batch row (which makes batched and per-row forwards draw identical masks).
class DropoutSource {
public:
    explicit DropoutSource(Rng& shared) : shared_(&shared) {}
    explicit DropoutSource(std::vector<Rng>& per_row) : per_row_(&per_row) {}

    bool keep(int row, double p);

private:
    Rng* shared_ = nullptr;
    std::vector<Rng>* per_row_ = nullptr;
};

/// Per-layer state recorded by a Train-mode forward pass.
struct ForwardCache {
    std::vector<Tensor> inputs;                  // input of every layer
    std::vector<std::vector<double>> masks;      // dropout scale per element
    std::vector<std::vector<std::size_t>> argmax;  // maxpool source index per output element
};

/**
 * Feed-forward layer stack with a flat parameter store. Parameters are laid out in layer
 * order: linear W as [in][out] then bias[out]; conv2d W as [out][in][k][k] then bias[out];
 * prelu one slope.
 */
class Network {
public:
    Network() = default;
    Network(std::vector<int> input_shape, std::vector<LayerSpec> layers);

    /// Xavier-uniform weights, zero biases, PReLU slopes 0.25.
    void init(Rng& rng);

    const std::vector<LayerSpec>& layers() const { return layers_; }
    const std::vector<int>& input_shape() const { return shapes_.front(); }
    const std::vector<int>& output_shape() const { return shapes_.back(); }
    /// Per-sample shape entering layer i (index layers().size() is the output).
    const std::vector<int>& shape_at(std::size_t i) const { return shapes_.at(i); }

    std::size_t param_count() const { return params_.size(); }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    /// Offset and length of layer i's parameters in the flat store.
    std::size_t param_offset(std::size_t i) const { return offsets_.at(i); }
    std::size_t layer_param_count(std::size_t i) const;

    /// x has shape [B, input_shape...]. Dropout needs a source unless mode is DeterministicInfer.
    Tensor forward(const Tensor& x, Mode mode, DropoutSource* dropout = nullptr, ForwardCache* cache = nullptr) const;

    /// Reverse pass over a Train-mode cache; accumulates parameter gradients into grad and
    /// returns the gradient with respect to the network input.
    Tensor backward(const ForwardCache& cache, const Tensor& dy, std::span<double> grad) const;

    bool same_architecture(const Network& other) const;

private:
    std::vector<LayerSpec> layers_;
    std::vector<std::vector<int>> shapes_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

/// accum += g^2; params -= lr * g / (sqrt(accum) + eps), elementwise.
void adagrad_step(std::span<double> params, std::span<double> accum, std::span<const double> grads, double lr,
                  double eps = 1e-10);

struct TrainState {
    std::vector<double> params;
    std::vector<double> grad_sq_accum;
    double lr = 0.01;
    std::uint64_t rng_seed = 0;
};

void adagrad_step(TrainState& state, std::span<const double> grads);

}  // namespace cmpx
