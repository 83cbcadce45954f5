#pragma once

#include <vector>

#include "cmpx/env/scenarios.hpp"
#include "cmpx/integrators/integrator.hpp"
#include "cmpx/neural/training.hpp"

namespace cmpx {

/// Oracle planner used to label training data: classical RRTConnect plus shortcut smoothing.
struct OracleOptions {
    Adherence adherence = Adherence::Atlas;
    double time_budget = 10.0;        ///< seconds per pair
    std::size_t max_iters = 20000;
    std::size_t smoothing_attempts = 200;
    double stride = 0.25;             ///< arc-length spacing of emitted waypoints
    bool include_reverse = true;      ///< also emit each path traversed goal -> init
    std::size_t jobs = 1;
};

struct PairOutcome {
    std::size_t scene_id = 0;
    std::size_t pair_index = 0;
    bool solved = false;
    std::size_t waypoints = 0;  ///< emitted waypoints per direction (0 when unsolved)
};

struct DatasetBuild {
    GeneratorDataset data;
    std::vector<PairOutcome> outcomes;
    /// Emitted waypoint sequences, one per direction per solved pair, in tuple order.
    std::vector<std::vector<Config>> paths;

    std::size_t solved() const;
    double success_rate() const;
};

/// Waypoints of a dense path at roughly `stride` arc length apart; always keeps both ends.
std::vector<Config> key_waypoints(const std::vector<Config>& path, double stride);

/**
 * Solves every pair of the given scenes with the oracle and emits (v, q_j, q_T, q_{j+1}) tuples
 * along each smoothed path. Scene i gets id scene_ids[i]; pair seeds derive from (seed, id, pair).
 * Unsolved pairs are recorded in outcomes and skipped.
 */
DatasetBuild gen_dataset(const std::vector<SceneRecord>& scenes, const std::vector<std::size_t>& scene_ids,
                         const OracleOptions& opts, std::uint64_t seed);

/// Scenario-1 training scenes with their oracle dataset. A scene whose oracle success rate is
/// below min_success is regenerated from a fresh derived seed, up to max_regenerations times.
struct TrainingSet {
    std::vector<SceneRecord> scenes;
    std::vector<std::size_t> scene_ids;
    DatasetBuild build;
};

TrainingSet gen_training_set(std::uint64_t seed, std::size_t n_scenes, std::size_t n_pairs,
                             const OracleOptions& opts, const Scenario1Params& params = {},
                             double min_success = 0.9, int max_regenerations = 3);

}  // namespace cmpx
