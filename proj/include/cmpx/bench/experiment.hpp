#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmpx/env/scenarios.hpp"
#include "cmpx/neural/sampling.hpp"

namespace cmpx {

enum class PlannerKind { RrtConnect, FmtStar };
enum class SamplerKind { Classical, Compnetx };

std::string_view to_string(PlannerKind p);
std::string_view to_string(SamplerKind s);
PlannerKind parse_planner(std::string_view s);
SamplerKind parse_sampler(std::string_view s);

/// One (planner, adherence, sampler) combination of the experiment matrix.
struct Cell {
    PlannerKind planner = PlannerKind::RrtConnect;
    Adherence adherence = Adherence::Atlas;
    SamplerKind sampler = SamplerKind::Classical;

    bool operator==(const Cell&) const = default;
};

/// "planner=rrtconnect,adherence=atlas,sampler=classical"; missing keys keep their defaults.
Cell parse_cell(std::string_view spec);
std::string to_string(const Cell& c);
/// Stable small integer used in per-problem seed derivation.
std::uint64_t cell_code(const Cell& c);

/// Where the benchmark scenes come from: explicit scene files, or generated from a seed.
struct SceneSource {
    std::vector<std::filesystem::path> files;
    int scenario = 1;
    std::size_t count = 2;
    std::size_t pairs = 50;
    std::uint64_t seed = 1000;
    Scenario1Params params1;
    Scenario2Params params2;
};

struct ExperimentConfig {
    std::vector<Cell> cells{Cell{}};
    SceneSource scenes;
    std::optional<std::size_t> problems;  ///< cap on the number of problems (all pairs when unset)
    double time_budget = 60.0;
    std::size_t max_iters = 100000;
    std::size_t smoothing_attempts = 200;
    IntegratorParams integrator;
    FmtParams fmt;
    NeuralParams neural;
    std::filesystem::path checkpoint;   ///< required by compnetx cells
    bool use_discriminator = true;
    std::uint64_t seed = 1;

    /// Throws ContractError on invalid enumerations or values, IoError on missing files.
    void validate() const;
};

/// Relative file names are resolved against the config file's directory.
ExperimentConfig load_experiment(const std::filesystem::path& path);
ExperimentConfig experiment_from_json(const std::string& text, const std::filesystem::path& base = {});
std::string experiment_to_json(const ExperimentConfig& cfg);

/// A benchmark query: pair `pair` of scene `scene`.
struct ProblemRef {
    std::size_t id = 0;
    std::size_t scene = 0;
    std::size_t pair = 0;
};

struct ProblemSet {
    std::vector<SceneRecord> scenes;
    std::vector<std::string> scene_names;  ///< file name or "generated:<seed>"
    std::vector<ProblemRef> problems;
};

ProblemSet load_problems(const ExperimentConfig& cfg);

struct RunRecord {
    std::size_t problem_id = 0;
    bool success = false;
    double wall_time = 0.0;               ///< planning time in seconds, smoothing excluded
    std::optional<double> path_length;    ///< smoothed length, absent on failure
    std::optional<double> raw_length;     ///< length before smoothing
    std::size_t iterations = 0;
    std::size_t charts_created = 0;
    std::size_t projection_calls = 0;
    std::size_t nproj_calls = 0;
};

/// Trained networks shared read-only by every query of a run.
struct Models {
    GeneratorModel generator;
    std::optional<DiscriminatorModel> discriminator;
};

/// Loads the checkpoint when any cell needs it.
std::optional<Models> load_models(const ExperimentConfig& cfg);

/// Solves one problem with one cell; the smoothed path is stored in `path` on success.
RunRecord run_problem(const ExperimentConfig& cfg, const Cell& cell, const ProblemSet& set, const ProblemRef& problem,
                      const Models* models, std::vector<Config>* path = nullptr);

struct CellSummary {
    Cell cell;
    std::size_t problems = 0;
    std::size_t successes = 0;
    double success_rate = 0.0;
    double mean_length = 0.0;   ///< over successful rows, NaN when none
    double std_length = 0.0;
    double mean_time = 0.0;
    double std_time = 0.0;
    double mean_iterations = 0.0;
};

CellSummary summarize(const Cell& cell, const std::vector<RunRecord>& records);

struct CellResult {
    Cell cell;
    std::vector<RunRecord> records;  ///< problem-id order
    std::vector<std::vector<Config>> paths;
    CellSummary summary;
};

/// Runs every cell over the problem set with up to `jobs` worker threads.
std::vector<CellResult> run_bench(const ExperimentConfig& cfg, const ProblemSet& set, const Models* models,
                                  std::size_t jobs);

/// records.csv (deterministic), timings.csv, summary.json, problems.csv and one path file per
/// solved query under paths/<cell>/.
void write_bench(const std::filesystem::path& dir, const ExperimentConfig& cfg, const ProblemSet& set,
                 const std::vector<CellResult>& results);

std::string records_csv(const std::vector<CellResult>& results);
std::string summary_json(const std::vector<CellResult>& results);

/// Path files: a header "q0,q1,..." then one configuration per row, 17 significant digits.
void save_path_csv(const std::vector<Config>& waypoints, const std::filesystem::path& path);
std::vector<Config> load_path_csv(const std::filesystem::path& path);

struct VerifyOptions {
    double epsilon = 1e-3;        ///< manifold tolerance on ||F||
    double goal_tolerance = 0.1;  ///< distance of the last waypoint to the goal
    double max_step = 0.15;       ///< largest allowed gap between consecutive waypoints
};

/// Independent re-validation of a path against a scene: every waypoint on the sphere and
/// collision-free, consecutive waypoints close, endpoints matching the pair when given.
std::optional<std::string> verify_path(const std::vector<Config>& waypoints, const SphereScene& scene,
                                       const ProblemPair* pair, const VerifyOptions& opts = {});

struct VerifyReport {
    std::size_t checked = 0;
    std::vector<std::string> failures;
};

/// Re-validates every path file written by write_bench into `dir`.
VerifyReport verify_bench(const std::filesystem::path& dir, const VerifyOptions& opts = {});

}  // namespace cmpx
