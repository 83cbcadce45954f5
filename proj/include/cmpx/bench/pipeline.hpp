#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmpx/env/dataset.hpp"
#include "cmpx/neural/models.hpp"

namespace cmpx {

/// Oracle dataset generation: training scenes plus separate validation scenes (scenario 1).
struct DataConfig {
    std::uint64_t seed = 1;
    std::size_t train_scenes = 10;
    std::size_t train_pairs = 200;
    std::size_t val_scenes = 2;
    std::size_t val_pairs = 50;
    Scenario1Params params;
    OracleOptions oracle;
};

/// Reads the "data" section of a config file (plus the top-level seed).
DataConfig data_config_from_json(const std::string& text);

struct DataReport {
    std::filesystem::path train_file;
    std::filesystem::path val_file;
    std::size_t train_tuples = 0;
    std::size_t val_tuples = 0;
    double train_success = 0.0;
    double val_success = 0.0;
};

/// Writes train.jsonl, val.jsonl, voxels/ and data_report.json into `dir`.
/// Validation scene ids start at 1'000'000 so both files can share one voxel directory.
DataReport generate_data(const DataConfig& cfg, const std::filesystem::path& dir);

struct TrainConfig {
    std::uint64_t seed = 1;
    std::filesystem::path dataset;               ///< generator training set
    std::optional<std::filesystem::path> validation;
    std::optional<std::filesystem::path> resume; ///< checkpoint to continue from
    TrainOptions generator{30, 0.01, 64, 1};
    bool train_discriminator = true;
    TrainOptions discriminator{10, 0.01, 64, 1};
    std::size_t disc_negatives = 2;
    double disc_r_min = 0.3;
    double disc_r_max = 1.7;
    std::size_t disc_max_positives = 200;  ///< per training scene
    std::size_t disc_extra_scenes = 300;   ///< random scenario-1 scenes used only for the discriminator
    std::size_t disc_extra_samples = 200;  ///< samples per extra scene
};

/// Reads the "training" section of a config file; relative paths resolve against `base`.
TrainConfig train_config_from_json(const std::string& text, const std::filesystem::path& base = {});

struct LossRow {
    std::size_t epoch = 0;
    std::string model;  ///< "generator" or "discriminator"
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainReport {
    Checkpoint checkpoint;
    std::vector<LossRow> losses;
};

/// Trains the generator, then the discriminator on the frozen encoder. Epoch counts are the
/// number of epochs run by this call; a resumed run continues the epoch numbering and the
/// optimizer state of the checkpoint.
TrainReport run_training(const TrainConfig& cfg);

/// loss.csv with header "epoch,model,train_loss,val_loss".
std::string loss_csv(const std::vector<LossRow>& rows);

}  // namespace cmpx
