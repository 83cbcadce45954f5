#include "cmpx/bench/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cmpx/core/parallel.hpp"
#include "cmpx/core/stats.hpp"

namespace cmpx {

namespace {

using nlohmann::json;

std::string fmt_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep))
        out.push_back(cur);
    if (!s.empty() && s.back() == sep)
        out.emplace_back();
    return out;
}

std::string trim(std::string s)
{
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& s, const std::string& where)
{
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw IoError(where + ": cannot parse number '" + s + "'");
    return v;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text))
        throw IoError("cannot write " + path.string());
}

std::string cell_dir_name(const Cell& c)
{
    return std::string(to_string(c.planner)) + "-" + std::string(to_string(c.adherence)) + "-" +
           std::string(to_string(c.sampler));
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k))
            throw ContractError(where + ": unknown key '" + k + "'");
}

double mean_of(const std::vector<double>& v)
{
    return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values, NaN for none.
double std_of(const std::vector<double>& v)
{
    if (v.empty())
        return std::nan("");
    if (v.size() < 2)
        return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v)
        s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

json nan_to_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

}  // namespace

std::string_view to_string(PlannerKind p)
{
    return p == PlannerKind::RrtConnect ? "rrtconnect" : "fmtstar";
}

std::string_view to_string(SamplerKind s)
{
    return s == SamplerKind::Classical ? "classical" : "compnetx";
}

PlannerKind parse_planner(std::string_view s)
{
    if (s == "rrtconnect" || s == "rrt")
        return PlannerKind::RrtConnect;
    if (s == "fmtstar" || s == "fmt")
        return PlannerKind::FmtStar;
    throw ContractError("unknown planner '" + std::string(s) + "'");
}

SamplerKind parse_sampler(std::string_view s)
{
    if (s == "classical")
        return SamplerKind::Classical;
    if (s == "compnetx")
        return SamplerKind::Compnetx;
    throw ContractError("unknown sampler '" + std::string(s) + "'");
}

Cell parse_cell(std::string_view spec)
{
    Cell c;
    for (const std::string& part : split(std::string(spec), ',')) {
        const std::string kv = trim(part);
        if (kv.empty())
            continue;
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ContractError("cell entry '" + kv + "' is not key=value");
        const std::string key = trim(kv.substr(0, eq));
        const std::string value = trim(kv.substr(eq + 1));
        if (key == "planner")
            c.planner = parse_planner(value);
        else if (key == "adherence")
            c.adherence = parse_adherence(value);
        else if (key == "sampler")
            c.sampler = parse_sampler(value);
        else
            throw ContractError("unknown cell key '" + key + "'");
    }
    return c;
}

std::string to_string(const Cell& c)
{
    return "planner=" + std::string(to_string(c.planner)) + ",adherence=" + std::string(to_string(c.adherence)) +
           ",sampler=" + std::string(to_string(c.sampler));
}

std::uint64_t cell_code(const Cell& c)
{
    return 100 * static_cast<std::uint64_t>(c.planner) + 10 * static_cast<std::uint64_t>(c.adherence) +
           static_cast<std::uint64_t>(c.sampler);
}

void ExperimentConfig::validate() const
{
    if (cells.empty())
        throw ContractError("experiment has no cells");
    if (!(time_budget > 0.0) || max_iters == 0)
        throw ContractError("time_budget and max_iters must be positive");
    if (scenes.files.empty() && scenes.scenario != 1 && scenes.scenario != 2)
        throw ContractError("scenes.scenario must be 1 or 2");
    for (const auto& f : scenes.files)
        if (!std::filesystem::exists(f))
            throw IoError("scene file not found: " + f.string());
    if (!(neural.nu == neural.nu) || neural.k_batch == 0 || neural.nproj_steps < 0)
        throw ContractError("invalid neural parameters");
    if (fmt.n_init < 2 || !(fmt.radius > 0.0))
        throw ContractError("invalid FMT* parameters");
    const bool needs_model =
        std::any_of(cells.begin(), cells.end(), [](const Cell& c) { return c.sampler == SamplerKind::Compnetx; });
    if (needs_model) {
        if (checkpoint.empty())
            throw ContractError("compnetx cells need a checkpoint");
        if (!std::filesystem::exists(checkpoint))
            throw IoError("checkpoint not found: " + checkpoint.string());
    }
}

ExperimentConfig experiment_from_json(const std::string& text, const std::filesystem::path& base)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed experiment config: ") + e.what());
    }
    if (!j.is_object())
        throw ContractError("experiment config must be an object");
    check_keys(j,
               {"seed", "cells", "scenes", "problems", "time_budget", "max_iters", "smoothing_attempts", "integrator",
                "fmt", "neural", "data", "training"},
               "experiment config");
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() || base.empty() ? fp : base / fp;
    };
    ExperimentConfig c;
    try {
        c.seed = j.value("seed", c.seed);
        if (j.contains("cells")) {
            c.cells.clear();
            for (const json& cell : j.at("cells"))
                c.cells.push_back(parse_cell(cell.get<std::string>()));
        }
        if (j.contains("scenes")) {
            const json& s = j.at("scenes");
            check_keys(s, {"files", "scenario", "count", "pairs", "seed", "params"}, "scenes");
            if (s.contains("files"))
                for (const json& f : s.at("files"))
                    c.scenes.files.push_back(resolve(f.get<std::string>()));
            c.scenes.scenario = s.value("scenario", c.scenes.scenario);
            c.scenes.count = s.value("count", c.scenes.count);
            c.scenes.pairs = s.value("pairs", c.scenes.pairs);
            c.scenes.seed = s.value("seed", c.scenes.seed);
            if (s.contains("params")) {
                const json& p = s.at("params");
                Scenario1Params& p1 = c.scenes.params1;
                Scenario2Params& p2 = c.scenes.params2;
                p1.n_obstacles = p.value("n_obstacles", p1.n_obstacles);
                p1.half_min = p.value("half_min", p1.half_min);
                p1.half_max = p.value("half_max", p1.half_max);
                p1.radial_half = p.value("radial_half", p1.radial_half);
                p2.radial_half = p1.radial_half;
                p2.n_strips = p.value("n_strips", p2.n_strips);
                p2.gap_width = p.value("gap_width", p2.gap_width);
                p2.strip_width = p.value("strip_width", p2.strip_width);
                p2.cap_half = p.value("cap_half", p2.cap_half);
                p2.min_gaps = p.value("min_gaps", p2.min_gaps);
                p2.max_gaps = p.value("max_gaps", p2.max_gaps);
            }
        }
        if (j.contains("problems") && !j.at("problems").is_null())
            c.problems = j.at("problems").get<std::size_t>();
        c.time_budget = j.value("time_budget", c.time_budget);
        c.max_iters = j.value("max_iters", c.max_iters);
        c.smoothing_attempts = j.value("smoothing_attempts", c.smoothing_attempts);
        if (j.contains("integrator")) {
            const json& i = j.at("integrator");
            check_keys(i, {"gamma", "lambda1", "lambda2", "max_steps"}, "integrator");
            c.integrator.gamma = i.value("gamma", c.integrator.gamma);
            c.integrator.lambda1 = i.value("lambda1", c.integrator.lambda1);
            c.integrator.lambda2 = i.value("lambda2", c.integrator.lambda2);
            c.integrator.max_steps = i.value("max_steps", c.integrator.max_steps);
        }
        if (j.contains("fmt")) {
            const json& f = j.at("fmt");
            check_keys(f, {"n_init", "radius", "rerun_every"}, "fmt");
            c.fmt.n_init = f.value("n_init", c.fmt.n_init);
            c.fmt.radius = f.value("radius", c.fmt.radius);
            c.fmt.rerun_every = f.value("rerun_every", c.fmt.rerun_every);
        }
        if (j.contains("neural")) {
            const json& n = j.at("neural");
            check_keys(n, {"checkpoint", "use_discriminator", "nu", "gamma_n", "nproj_steps", "n_ismp", "k_batch"},
                       "neural");
            if (n.contains("checkpoint"))
                c.checkpoint = resolve(n.at("checkpoint").get<std::string>());
            c.use_discriminator = n.value("use_discriminator", c.use_discriminator);
            c.neural.nu = n.value("nu", c.neural.nu);
            c.neural.gamma_n = n.value("gamma_n", c.neural.gamma_n);
            c.neural.nproj_steps = n.value("nproj_steps", c.neural.nproj_steps);
            c.neural.n_ismp = n.value("n_ismp", c.neural.n_ismp);
            c.neural.k_batch = n.value("k_batch", c.neural.k_batch);
        }
    } catch (const json::exception& e) {
        throw ContractError(std::string("invalid experiment config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path)
{
    return experiment_from_json(read_file(path), path.parent_path());
}

std::string experiment_to_json(const ExperimentConfig& c)
{
    json j;
    j["seed"] = c.seed;
    j["cells"] = json::array();
    for (const Cell& cell : c.cells)
        j["cells"].push_back(to_string(cell));
    json s;
    if (!c.scenes.files.empty()) {
        s["files"] = json::array();
        for (const auto& f : c.scenes.files)
            s["files"].push_back(f.string());
    } else {
        s["scenario"] = c.scenes.scenario;
        s["count"] = c.scenes.count;
        s["pairs"] = c.scenes.pairs;
        s["seed"] = c.scenes.seed;
        if (c.scenes.scenario == 1)
            s["params"] = {{"n_obstacles", c.scenes.params1.n_obstacles},
                           {"half_min", c.scenes.params1.half_min},
                           {"half_max", c.scenes.params1.half_max},
                           {"radial_half", c.scenes.params1.radial_half}};
        else
            s["params"] = {{"n_strips", c.scenes.params2.n_strips},   {"gap_width", c.scenes.params2.gap_width},
                           {"strip_width", c.scenes.params2.strip_width}, {"cap_half", c.scenes.params2.cap_half},
                           {"radial_half", c.scenes.params2.radial_half}, {"min_gaps", c.scenes.params2.min_gaps},
                           {"max_gaps", c.scenes.params2.max_gaps}};
    }
    j["scenes"] = s;
    j["problems"] = c.problems ? json(*c.problems) : json(nullptr);
    j["time_budget"] = c.time_budget;
    j["max_iters"] = c.max_iters;
    j["smoothing_attempts"] = c.smoothing_attempts;
    j["integrator"] = {{"gamma", c.integrator.gamma},
                       {"lambda1", c.integrator.lambda1},
                       {"lambda2", c.integrator.lambda2},
                       {"max_steps", c.integrator.max_steps}};
    j["fmt"] = {{"n_init", c.fmt.n_init}, {"radius", c.fmt.radius}, {"rerun_every", c.fmt.rerun_every}};
    j["neural"] = {{"checkpoint", c.checkpoint.string()}, {"use_discriminator", c.use_discriminator},
                   {"nu", c.neural.nu},                   {"gamma_n", c.neural.gamma_n},
                   {"nproj_steps", c.neural.nproj_steps}, {"n_ismp", c.neural.n_ismp},
                   {"k_batch", c.neural.k_batch}};
    return j.dump(2) + "\n";
}

ProblemSet load_problems(const ExperimentConfig& cfg)
{
    ProblemSet set;
    if (!cfg.scenes.files.empty()) {
        for (const auto& f : cfg.scenes.files) {
            set.scenes.push_back(load_scene(f));
            set.scene_names.push_back(f.filename().string());
        }
    } else {
        for (std::size_t i = 0; i < cfg.scenes.count; ++i) {
            const std::uint64_t seed = derive_seed(cfg.scenes.seed, i);
            set.scenes.push_back(cfg.scenes.scenario == 1
                                     ? gen_scenario1(seed, cfg.scenes.pairs, cfg.scenes.params1)
                                     : gen_scenario2(seed, cfg.scenes.pairs, cfg.scenes.params2));
            set.scene_names.push_back("generated:" + std::to_string(seed));
        }
    }
    for (std::size_t s = 0; s < set.scenes.size(); ++s)
        for (std::size_t p = 0; p < set.scenes[s].pairs.size(); ++p) {
            if (cfg.problems && set.problems.size() >= *cfg.problems)
                return set;
            set.problems.push_back({set.problems.size(), s, p});
        }
    return set;
}

std::optional<Models> load_models(const ExperimentConfig& cfg)
{
    const bool needed = std::any_of(cfg.cells.begin(), cfg.cells.end(),
                                    [](const Cell& c) { return c.sampler == SamplerKind::Compnetx; });
    if (!needed)
        return std::nullopt;
    Checkpoint ck = load_checkpoint(cfg.checkpoint);
    if (ck.generator.config_dim() != 3)
        throw ContractError("checkpoint was trained for a different configuration dimension");
    Models m{std::move(ck.generator), std::nullopt};
    if (cfg.use_discriminator && ck.discriminator)
        m.discriminator = std::move(ck.discriminator);
    return m;
}

RunRecord run_problem(const ExperimentConfig& cfg, const Cell& cell, const ProblemSet& set, const ProblemRef& problem,
                      const Models* models, std::vector<Config>* path)
{
    const SceneRecord& rec = set.scenes.at(problem.scene);
    const ProblemPair& pair = rec.pairs.at(problem.pair);
    if (cell.sampler == SamplerKind::Compnetx && !models)
        throw ContractError("compnetx cell run without trained models");

    SphereConstraint sys;
    PlanProblem prob;
    prob.sys = &sys;
    prob.world = &rec.scene;
    prob.q_init = pair.init;
    prob.q_goal = pair.goal;
    prob.time_budget = cfg.time_budget;
    prob.max_iters = cfg.max_iters;
    Integrator integ(cell.adherence, sys, rec.scene, cfg.integrator);
    Rng rng(derive_seed(cfg.seed, problem.id, cell_code(cell)));
    const DiscriminatorModel* disc = models && models->discriminator ? &*models->discriminator : nullptr;

    reset_counters();
    const auto t0 = std::chrono::steady_clock::now();
    PlanResult r;
    if (cell.planner == PlannerKind::RrtConnect) {
        if (cell.sampler == SamplerKind::Classical) {
            const UniformSampler us(sys, rec.scene, integ.atlas());
            r = rrt_connect(prob, classical_rrt_sampler(us), integ, rng);
        } else {
            r = bidirectional_plan(models->generator, disc, rec.scene.voxels(), prob, integ, cfg.neural, rng);
        }
    } else {
        if (cell.sampler == SamplerKind::Classical) {
            const UniformSampler us(sys, rec.scene);
            r = fmt_star(prob, classical_fmt_sampler(us), integ, cfg.fmt, rng);
        } else {
            r = compnetx_fmt(models->generator, disc, rec.scene.voxels(), prob, integ, cfg.neural, cfg.fmt, rng);
        }
    }
    RunRecord out;
    out.problem_id = problem.id;
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.iterations = r.iterations;
    const OpCounters& oc = counters();
    out.charts_created = oc.charts_created;
    out.projection_calls = oc.projection_calls;
    out.nproj_calls = oc.nproj_calls;
    if (!r.success)
        return out;

    const Path smooth = shortcut_smooth(r.path, integ, cfg.smoothing_attempts, rng);
    if (check_path(smooth.waypoints, sys, rec.scene, pair.init, pair.goal, cfg.integrator.goal_tolerance()))
        return out;
    out.success = true;
    out.raw_length = r.path.length;
    out.path_length = smooth.length;
    if (path)
        *path = smooth.waypoints;
    return out;
}

CellSummary summarize(const Cell& cell, const std::vector<RunRecord>& records)
{
    CellSummary s;
    s.cell = cell;
    s.problems = records.size();
    std::vector<double> lengths, times, iters;
    for (const RunRecord& r : records) {
        times.push_back(r.wall_time);
        iters.push_back(static_cast<double>(r.iterations));
        if (r.success) {
            ++s.successes;
            lengths.push_back(*r.path_length);
        }
    }
    s.success_rate = s.problems ? static_cast<double>(s.successes) / static_cast<double>(s.problems) : 0.0;
    s.mean_length = mean_of(lengths);
    s.std_length = std_of(lengths);
    s.mean_time = mean_of(times);
    s.std_time = std_of(times);
    s.mean_iterations = mean_of(iters);
    return s;
}

std::vector<CellResult> run_bench(const ExperimentConfig& cfg, const ProblemSet& set, const Models* models,
                                  std::size_t jobs)
{
    std::vector<CellResult> out;
    for (const Cell& cell : cfg.cells) {
        CellResult cr;
        cr.cell = cell;
        cr.records.resize(set.problems.size());
        cr.paths.resize(set.problems.size());
        parallel_for(set.problems.size(), jobs, [&](std::size_t i) {
            cr.records[i] = run_problem(cfg, cell, set, set.problems[i], models, &cr.paths[i]);
        });
        cr.summary = summarize(cell, cr.records);
        out.push_back(std::move(cr));
    }
    return out;
}

std::string records_csv(const std::vector<CellResult>& results)
{
    std::ostringstream out;
    out << "planner,adherence,sampler,problem_id,success,path_length,raw_length,iterations,charts_created,"
           "projection_calls,nproj_calls\n";
    for (const CellResult& cr : results)
        for (const RunRecord& r : cr.records) {
            out << to_string(cr.cell.planner) << ',' << to_string(cr.cell.adherence) << ','
                << to_string(cr.cell.sampler) << ',' << r.problem_id << ',' << (r.success ? 1 : 0) << ','
                << (r.path_length ? fmt_double(*r.path_length) : "") << ','
                << (r.raw_length ? fmt_double(*r.raw_length) : "") << ',' << r.iterations << ',' << r.charts_created
                << ',' << r.projection_calls << ',' << r.nproj_calls << '\n';
        }
    return out.str();
}

std::string summary_json(const std::vector<CellResult>& results)
{
    json cells = json::array();
    for (const CellResult& cr : results) {
        const CellSummary& s = cr.summary;
        cells.push_back({{"planner", to_string(s.cell.planner)},
                         {"adherence", to_string(s.cell.adherence)},
                         {"sampler", to_string(s.cell.sampler)},
                         {"problems", s.problems},
                         {"successes", s.successes},
                         {"success_rate", s.success_rate},
                         {"mean_path_length", nan_to_null(s.mean_length)},
                         {"std_path_length", nan_to_null(s.std_length)},
                         {"mean_wall_time", nan_to_null(s.mean_time)},
                         {"std_wall_time", nan_to_null(s.std_time)},
                         {"mean_iterations", nan_to_null(s.mean_iterations)}});
    }
    return json{{"cells", cells}}.dump(2) + "\n";
}

void write_bench(const std::filesystem::path& dir, const ExperimentConfig& cfg, const ProblemSet& set,
                 const std::vector<CellResult>& results)
{
    std::filesystem::create_directories(dir);
    write_file(dir / "config.json", experiment_to_json(cfg));
    write_file(dir / "records.csv", records_csv(results));
    write_file(dir / "summary.json", summary_json(results));

    std::ostringstream timings;
    timings << "planner,adherence,sampler,problem_id,wall_time\n";
    for (const CellResult& cr : results)
        for (const RunRecord& r : cr.records)
            timings << to_string(cr.cell.planner) << ',' << to_string(cr.cell.adherence) << ','
                    << to_string(cr.cell.sampler) << ',' << r.problem_id << ',' << fmt_double(r.wall_time) << '\n';
    write_file(dir / "timings.csv", timings.str());

    std::ostringstream problems;
    problems << "problem_id,scene_file,pair\n";
    std::filesystem::create_directories(dir / "scenes");
    for (std::size_t s = 0; s < set.scenes.size(); ++s)
        save_scene(set.scenes[s], dir / "scenes" / ("scene_" + std::to_string(s) + ".json"));
    for (const ProblemRef& p : set.problems)
        problems << p.id << ",scenes/scene_" << p.scene << ".json," << p.pair << '\n';
    write_file(dir / "problems.csv", problems.str());

    for (const CellResult& cr : results) {
        const auto cdir = dir / "paths" / cell_dir_name(cr.cell);
        std::filesystem::remove_all(cdir);
        std::filesystem::create_directories(cdir);
        for (std::size_t i = 0; i < cr.records.size(); ++i)
            if (cr.records[i].success)
                save_path_csv(cr.paths[i], cdir / ("problem_" + std::to_string(cr.records[i].problem_id) + ".csv"));
    }
}

void save_path_csv(const std::vector<Config>& waypoints, const std::filesystem::path& path)
{
    if (waypoints.empty())
        throw ContractError("save_path_csv: empty path");
    const Eigen::Index n = waypoints.front().size();
    std::ostringstream out;
    for (Eigen::Index i = 0; i < n; ++i)
        out << (i ? "," : "") << 'q' << i;
    out << '\n';
    for (const Config& q : waypoints) {
        if (q.size() != n)
            throw ContractError("save_path_csv: inconsistent dimensions");
        for (Eigen::Index i = 0; i < n; ++i)
            out << (i ? "," : "") << fmt_double(q[i]);
        out << '\n';
    }
    write_file(path, out.str());
}

std::vector<Config> load_path_csv(const std::filesystem::path& path)
{
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line))
        throw IoError(path.string() + ": empty path file");
    const std::size_t n = split(trim(line), ',').size();
    if (n == 0 || trim(line).empty())
        throw IoError(path.string() + ": missing header");
    std::vector<Config> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty())
            continue;
        const auto cols = split(line, ',');
        if (cols.size() != n)
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(n) +
                          " columns");
        Config q(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            q[static_cast<Eigen::Index>(i)] = parse_double(trim(cols[i]), path.string() + ":" + std::to_string(lineno));
        out.push_back(std::move(q));
    }
    if (out.empty())
        throw IoError(path.string() + ": no waypoints");
    return out;
}

std::optional<std::string> verify_path(const std::vector<Config>& waypoints, const SphereScene& scene,
                                       const ProblemPair* pair, const VerifyOptions& opts)
{
    if (waypoints.empty())
        return "path is empty";
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
        const Config& q = waypoints[i];
        if (q.size() != 3 || !q.allFinite())
            return "waypoint " + std::to_string(i) + " is not a finite 3-vector";
        const double f = std::abs(q.norm() - 1.0);
        if (!(f < opts.epsilon))
            return "waypoint " + std::to_string(i) + " is off the sphere by " + fmt_double(f);
        if (scene.in_collision(q))
            return "waypoint " + std::to_string(i) + " is in collision";
        if (i > 0) {
            const double step = (q - waypoints[i - 1]).norm();
            if (step > opts.max_step)
                return "step " + std::to_string(i) + " is " + fmt_double(step) + " long";
        }
    }
    if (pair) {
        if ((waypoints.front() - pair->init).norm() > 1e-9)
            return "path does not start at the problem's start";
        if ((waypoints.back() - pair->goal).norm() > opts.goal_tolerance)
            return "path ends " + fmt_double((waypoints.back() - pair->goal).norm()) + " away from the goal";
    }
    return std::nullopt;
}

VerifyReport verify_bench(const std::filesystem::path& dir, const VerifyOptions& opts)
{
    VerifyReport rep;
    std::map<std::size_t, std::pair<std::string, std::size_t>> problems;
    {
        std::istringstream in(read_file(dir / "problems.csv"));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (trim(line).empty())
                continue;
            const auto cols = split(trim(line), ',');
            if (cols.size() != 3)
                throw IoError("malformed problems.csv row: " + line);
            problems[std::stoul(cols[0])] = {cols[1], std::stoul(cols[2])};
        }
    }
    std::map<std::string, SceneRecord> scenes;
    auto scene_of = [&](const std::string& rel) -> const SceneRecord& {
        auto it = scenes.find(rel);
        if (it == scenes.end())
            it = scenes.emplace(rel, load_scene(dir / rel)).first;
        return it->second;
    };

    std::istringstream in(read_file(dir / "records.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        const auto cols = split(trim(line), ',');
        if (cols.size() < 5)
            throw IoError("malformed records.csv row: " + line);
        if (cols[4] != "1")
            continue;
        const std::size_t id = std::stoul(cols[3]);
        const std::string cell = cols[0] + "-" + cols[1] + "-" + cols[2];
        const auto file = dir / "paths" / cell / ("problem_" + std::to_string(id) + ".csv");
        ++rep.checked;
        auto pit = problems.find(id);
        if (pit == problems.end()) {
            rep.failures.push_back(cell + " problem " + std::to_string(id) + ": not listed in problems.csv");
            continue;
        }
        if (!std::filesystem::exists(file)) {
            rep.failures.push_back(cell + " problem " + std::to_string(id) + ": path file missing");
            continue;
        }
        const SceneRecord& rec = scene_of(pit->second.first);
        const ProblemPair& pair = rec.pairs.at(pit->second.second);
        if (auto err = verify_path(load_path_csv(file), rec.scene, &pair, opts))
            rep.failures.push_back(cell + " problem " + std::to_string(id) + ": " + *err);
    }
    return rep;
}

}  // namespace cmpx
