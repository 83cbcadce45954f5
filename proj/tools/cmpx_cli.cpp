// cmpx: scene/dataset generation, training, single queries, benchmark sweeps and path verification.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmpx/bench/experiment.hpp"
#include "cmpx/bench/pipeline.hpp"

using namespace cmpx;
namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t jobs = 1;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "Seed overriding the config");
    app->add_option("--out", c.out, "Output root (default $CMPX_OUT or ./cmpx_out)");
    app->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

fs::path out_root(const Common& c)
{
    if (!c.out.empty())
        return c.out;
    if (const char* env = std::getenv("CMPX_OUT"); env && *env)
        return env;
    return "cmpx_out";
}

std::string config_text(const Common& c)
{
    if (c.config.empty())
        return "{}";
    std::ifstream in(c.config);
    if (!in)
        throw IoError("cannot read " + c.config);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path config_base(const Common& c)
{
    return c.config.empty() ? fs::path{} : fs::path(c.config).parent_path();
}

ExperimentConfig experiment(const Common& c, const std::vector<std::string>& cells)
{
    ExperimentConfig cfg = experiment_from_json(config_text(c), config_base(c));
    if (c.seed)
        cfg.seed = *c.seed;
    if (!cells.empty()) {
        cfg.cells.clear();
        for (const std::string& s : cells)
            cfg.cells.push_back(parse_cell(s));
    }
    if (cfg.checkpoint.empty())
        cfg.checkpoint = out_root(c) / "train" / "model.ckpt";
    cfg.validate();
    return cfg;
}

nlohmann::json record_json(const Cell& cell, const RunRecord& r)
{
    nlohmann::json j{{"cell", to_string(cell)},
                     {"problem_id", r.problem_id},
                     {"success", r.success},
                     {"wall_time", r.wall_time},
                     {"iterations", r.iterations},
                     {"charts_created", r.charts_created},
                     {"projection_calls", r.projection_calls},
                     {"nproj_calls", r.nproj_calls}};
    if (r.path_length)
        j["path_length"] = *r.path_length;
    if (r.raw_length)
        j["raw_length"] = *r.raw_length;
    return j;
}

void write_text(const fs::path& path, const std::string& text)
{
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text))
        throw IoError("cannot write " + path.string());
}

int cmd_gen_scenes(const Common& c)
{
    ExperimentConfig cfg = experiment_from_json(config_text(c), config_base(c));
    if (c.seed)
        cfg.scenes.seed = *c.seed;
    if (!cfg.scenes.files.empty())
        throw ContractError("gen-scenes needs a generated scene source, not scene files");
    const ProblemSet set = load_problems(cfg);
    const fs::path dir = out_root(c) / "scenes";
    fs::create_directories(dir);
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < set.scenes.size(); ++i) {
        save_scene(set.scenes[i], dir / ("scene_" + std::to_string(i) + ".json"));
        pairs += set.scenes[i].pairs.size();
    }
    std::cout << "wrote " << set.scenes.size() << " scenes with " << pairs << " pairs to " << dir.string() << '\n';
    return 0;
}

int cmd_gen_data(const Common& c)
{
    DataConfig cfg = data_config_from_json(config_text(c));
    if (c.seed)
        cfg.seed = *c.seed;
    cfg.oracle.jobs = c.jobs;
    const fs::path dir = out_root(c) / "data";
    const DataReport rep = generate_data(cfg, dir);
    std::cout << "train: " << rep.train_tuples << " tuples, oracle success " << rep.train_success << '\n'
              << "val: " << rep.val_tuples << " tuples, oracle success " << rep.val_success << '\n'
              << "wrote " << dir.string() << '\n';
    return 0;
}

int cmd_train(const Common& c, const std::string& resume)
{
    TrainConfig cfg = train_config_from_json(config_text(c), config_base(c));
    if (c.seed)
        cfg.seed = *c.seed;
    const fs::path root = out_root(c);
    if (cfg.dataset.empty())
        cfg.dataset = root / "data" / "train.jsonl";
    if (!cfg.validation && fs::exists(root / "data" / "val.jsonl"))
        cfg.validation = root / "data" / "val.jsonl";
    if (!resume.empty())
        cfg.resume = resume;

    const TrainReport rep = run_training(cfg);
    const fs::path dir = root / "train";
    fs::create_directories(dir);
    save_checkpoint(rep.checkpoint, dir / "model.ckpt");

    const fs::path log = dir / "loss.csv";
    std::string rows = loss_csv(rep.losses);
    if (cfg.resume && fs::exists(log)) {
        rows.erase(0, rows.find('\n') + 1);
        std::ofstream out(log, std::ios::app | std::ios::binary);
        if (!out || !(out << rows))
            throw IoError("cannot append to " + log.string());
    } else {
        write_text(log, rows);
    }
    for (const LossRow& r : rep.losses)
        std::cout << r.model << " epoch " << r.epoch << " train " << r.train_loss << " val " << r.val_loss << '\n';
    std::cout << "wrote " << (dir / "model.ckpt").string() << '\n';
    return 0;
}

int cmd_plan(const Common& c, const std::vector<std::string>& cells, std::size_t problem_id)
{
    if (cells.size() > 1)
        throw ContractError("plan takes at most one --cell");
    const ExperimentConfig cfg = experiment(c, cells);
    const ProblemSet set = load_problems(cfg);
    if (problem_id >= set.problems.size())
        throw ContractError("problem " + std::to_string(problem_id) + " out of range (" +
                            std::to_string(set.problems.size()) + " problems)");
    const std::optional<Models> models = load_models(cfg);
    const Cell cell = cfg.cells.front();

    std::vector<Config> path;
    const RunRecord r = run_problem(cfg, cell, set, set.problems[problem_id], models ? &*models : nullptr, &path);
    const fs::path dir = out_root(c) / "plan";
    const std::string stem = "problem_" + std::to_string(problem_id);
    const nlohmann::json rec = record_json(cell, r);
    write_text(dir / (stem + ".json"), rec.dump(2) + "\n");
    if (r.success)
        save_path_csv(path, dir / (stem + ".csv"));
    else
        fs::remove(dir / (stem + ".csv"));
    std::cout << rec.dump() << '\n';
    return r.success ? 0 : kExitFailure;
}

int cmd_bench(const Common& c, const std::vector<std::string>& cells)
{
    const ExperimentConfig cfg = experiment(c, cells);
    const ProblemSet set = load_problems(cfg);
    const std::optional<Models> models = load_models(cfg);
    const std::vector<CellResult> results = run_bench(cfg, set, models ? &*models : nullptr, c.jobs);
    const fs::path dir = out_root(c) / "bench";
    write_bench(dir, cfg, set, results);
    for (const CellResult& r : results) {
        const CellSummary& s = r.summary;
        std::cout << to_string(s.cell) << ": " << s.successes << "/" << s.problems << " solved, length "
                  << s.mean_length << " +- " << s.std_length << ", time " << s.mean_time << " +- " << s.std_time
                  << " s\n";
    }
    std::cout << "wrote " << dir.string() << '\n';
    return 0;
}

int cmd_verify(const Common& c, const std::string& dir_opt, const std::string& path_file, const std::string& scene_file,
               std::optional<std::size_t> pair, const VerifyOptions& opts)
{
    if (!path_file.empty()) {
        if (scene_file.empty())
            throw ContractError("--path needs --scene");
        const SceneRecord rec = load_scene(scene_file);
        const ProblemPair* p = nullptr;
        if (pair) {
            if (*pair >= rec.pairs.size())
                throw ContractError("pair index out of range");
            p = &rec.pairs[*pair];
        }
        if (auto err = verify_path(load_path_csv(path_file), rec.scene, p, opts)) {
            std::cout << "FAIL " << path_file << ": " << *err << '\n';
            return kExitFailure;
        }
        std::cout << "OK " << path_file << '\n';
        return 0;
    }
    const fs::path dir = dir_opt.empty() ? out_root(c) / "bench" : fs::path(dir_opt);
    const VerifyReport rep = verify_bench(dir, opts);
    for (const std::string& f : rep.failures)
        std::cout << "FAIL " << f << '\n';
    std::cout << rep.checked - rep.failures.size() << "/" << rep.checked << " paths valid\n";
    return rep.failures.empty() ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Constrained motion planning with learned samplers"};
    app.require_subcommand(1);

    Common common;
    std::vector<std::string> cells;
    std::string resume, verify_dir, verify_path_file, verify_scene;
    std::size_t problem_id = 0;
    std::optional<std::size_t> verify_pair;
    VerifyOptions vopts;

    auto* gen_scenes = app.add_subcommand("gen-scenes", "Generate benchmark scene files");
    auto* gen_data = app.add_subcommand("gen-data", "Build oracle training and validation datasets");
    auto* train = app.add_subcommand("train", "Train the generator and discriminator");
    auto* plan = app.add_subcommand("plan", "Solve one problem and write its path");
    auto* bench = app.add_subcommand("bench", "Run the experiment matrix");
    auto* verify = app.add_subcommand("verify", "Re-validate path files");
    for (CLI::App* sub : {gen_scenes, gen_data, train, plan, bench, verify})
        add_common(sub, common);

    train->add_option("--resume", resume, "Checkpoint to continue training from")->check(CLI::ExistingFile);
    plan->add_option("--cell", cells, "planner=...,adherence=...,sampler=...");
    plan->add_option("--problem", problem_id, "Problem index");
    bench->add_option("--cell", cells, "Cells to run instead of the config's (repeatable)");
    verify->add_option("--dir", verify_dir, "Benchmark output directory (default <out>/bench)");
    verify->add_option("--path", verify_path_file, "Single path file")->check(CLI::ExistingFile);
    verify->add_option("--scene", verify_scene, "Scene file for --path")->check(CLI::ExistingFile);
    verify->add_option("--pair", verify_pair, "Pair index checked against the path endpoints");
    verify->add_option("--epsilon", vopts.epsilon, "Manifold tolerance");
    verify->add_option("--goal-tolerance", vopts.goal_tolerance, "Allowed distance to the goal");
    verify->add_option("--max-step", vopts.max_step, "Largest allowed waypoint gap");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen_scenes)
            return cmd_gen_scenes(common);
        if (*gen_data)
            return cmd_gen_data(common);
        if (*train)
            return cmd_train(common, resume);
        if (*plan)
            return cmd_plan(common, cells, problem_id);
        if (*bench)
            return cmd_bench(common, cells);
        return cmd_verify(common, verify_dir, verify_path_file, verify_scene, verify_pair, vopts);
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}
