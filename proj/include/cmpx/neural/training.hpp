#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <vector>

#include "cmpx/neural/models.hpp"

namespace cmpx {

/// One (v, q_j, q_T, q_{j+1}) training tuple; the voxel grid is shared per scene.
struct GeneratorTuple {
    std::size_t scene_id = 0;
    Config q_curr;
    Config q_targ;
    Config q_next;
};

struct GeneratorDataset {
    std::map<std::size_t, VoxelGrid> voxels;
    std::vector<GeneratorTuple> tuples;

    bool empty() const { return tuples.empty(); }
};

/// (v, q, d) sample for the distance surrogate.
struct DiscriminatorTuple {
    std::size_t scene_id = 0;
    Config q;
    double d = 0.0;
};

struct DiscriminatorDataset {
    std::map<std::size_t, VoxelGrid> voxels;
    std::vector<DiscriminatorTuple> tuples;
};

/// Writes `<dir>/<stem>.jsonl` plus one voxel sidecar per scene under `<dir>/voxels/`.
std::filesystem::path save_dataset(const GeneratorDataset& data, const std::filesystem::path& dir,
                                   const std::string& stem = "dataset");
/// Voxel references are resolved relative to the dataset file's directory.
GeneratorDataset load_dataset(const std::filesystem::path& jsonl);

/// Positives are the dataset's path states (at most max_positives_per_scene per scene, chosen at
/// random); each is followed by negatives at radius drawn from [r_min, r_max]. Every sample is
/// labelled with the analytic distance `label(q)`.
DiscriminatorDataset make_discriminator_dataset(const GeneratorDataset& data,
                                                const std::function<double(const Config&)>& label,
                                                std::size_t negatives_per_positive, double r_min, double r_max,
                                                Rng& rng,
                                                std::size_t max_positives_per_scene = static_cast<std::size_t>(-1));

/// Adds n samples on another scene, half on the unit sphere and half at radius drawn from
/// [r_min, r_max]. The label does not depend on the scene, so any scene can supply extra
/// examples that keep the network from keying on the scene embedding.
void add_scene_samples(DiscriminatorDataset& data, std::size_t scene_id, const VoxelGrid& grid, std::size_t n,
                       const std::function<double(const Config&)>& label, double r_min, double r_max, Rng& rng);

struct TrainOptions {
    std::size_t epochs = 20;
    double lr = 0.01;
    std::size_t batch_size = 64;
    std::uint64_t seed = 1;
};

struct EpochStats {
    std::size_t epoch = 0;  ///< 1-based, continues across resumed runs
    double train_loss = 0.0;
    double val_loss = 0.0;  ///< NaN without a validation set
};

/**
 * Mean-square training of encoder and trunk with Adagrad. Tuples are put in a canonical order,
 * grouped by scene into batches (one encoder pass per batch) and the batches shuffled with a
 * per-epoch seed, so results depend only on the dataset contents and the seed. The optimizer
 * state, when given, is read and updated so training can resume.
 */
std::vector<EpochStats> train_generator(GeneratorModel& model, const GeneratorDataset& train,
                                        const GeneratorDataset* validation, const TrainOptions& opts,
                                        OptimizerState* state = nullptr);

/// Mean ||q_next_hat - q_next||^2 in deterministic mode.
double generator_loss(const GeneratorModel& model, const GeneratorDataset& data);

/// Trains the discriminator MLP on top of the generator's frozen scene encoder.
std::vector<EpochStats> train_discriminator(DiscriminatorModel& disc, const GeneratorModel& gen,
                                            const DiscriminatorDataset& train, const DiscriminatorDataset* validation,
                                            const TrainOptions& opts, OptimizerState* state = nullptr);

/// Mean squared error of the discriminator on a dataset.
double discriminator_loss(const DiscriminatorModel& disc, const GeneratorModel& gen, const DiscriminatorDataset& data);

}  // namespace cmpx
