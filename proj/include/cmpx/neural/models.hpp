#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "cmpx/env/scene.hpp"
#include "cmpx/neural/network.hpp"

namespace cmpx {

inline constexpr int kLatentSize = 128;

/// Voxel grid as a 40-channel 40x40 image (channel = z index, row = x index, column = y index),
/// batch dimension 1.
Tensor voxel_tensor(const VoxelGrid& grid);

/// conv(40->16, 5x5, s2) PReLU conv(16->8, 3x3) PReLU maxpool(2) flatten linear(512->128) PReLU linear(128->128)
Network make_scene_encoder();

/// Trunk mapping (Z_o, q_curr, q_targ) to q_next: 896-512-256-128 blocks of linear/PReLU/dropout,
/// then linear(128->64) PReLU linear(64->n).
Network make_generator_trunk(int config_dim, double dropout = 0.5);

/// (Z_o, q) -> predicted constraint distance: linear(->256) PReLU linear(256->256) PReLU linear(256->1).
Network make_discriminator(int config_dim);

struct GeneratorModel {
    Network encoder;
    Network trunk;

    static GeneratorModel create(int config_dim, Rng& rng);
    int config_dim() const { return trunk.output_shape()[0]; }
    /// Deterministic scene embedding, shape [1, 128].
    Tensor encode(const VoxelGrid& grid) const;
};

/// The discriminator reads the generator's scene embedding; only its own MLP is trained.
struct DiscriminatorModel {
    Network mlp;

    static DiscriminatorModel create(int config_dim, Rng& rng);
    int config_dim() const { return mlp.input_shape()[0] - kLatentSize; }
};

/// Adagrad accumulators saved alongside parameters so training can resume.
struct OptimizerState {
    std::vector<double> encoder_accum;
    std::vector<double> trunk_accum;
    std::vector<double> disc_accum;
    std::size_t generator_epochs = 0;
    std::size_t discriminator_epochs = 0;
};

struct Checkpoint {
    GeneratorModel generator;
    std::optional<DiscriminatorModel> discriminator;
    std::optional<OptimizerState> optimizer;
    std::uint64_t seed = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cmpx
