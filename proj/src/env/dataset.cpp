#include "cmpx/env/dataset.hpp"

#include "cmpx/core/parallel.hpp"
#include "cmpx/planners/planners.hpp"

namespace cmpx {

std::size_t DatasetBuild::solved() const
{
    std::size_t n = 0;
    for (const PairOutcome& o : outcomes)
        n += o.solved;
    return n;
}

double DatasetBuild::success_rate() const
{
    return outcomes.empty() ? 0.0 : static_cast<double>(solved()) / static_cast<double>(outcomes.size());
}

std::vector<Config> key_waypoints(const std::vector<Config>& path, double stride)
{
    if (!(stride > 0.0))
        throw ContractError("key_waypoints: stride must be positive");
    if (path.size() <= 2)
        return path;
    std::vector<Config> out{path.front()};
    double since = 0.0;
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
        since += (path[i] - path[i - 1]).norm();
        if (since >= stride) {
            out.push_back(path[i]);
            since = 0.0;
        }
    }
    // Merge a short final hop into the goal.
    since += (path.back() - path[path.size() - 2]).norm();
    if (out.size() > 1 && since < 0.5 * stride)
        out.pop_back();
    out.push_back(path.back());
    return out;
}

DatasetBuild gen_dataset(const std::vector<SceneRecord>& scenes, const std::vector<std::size_t>& scene_ids,
                         const OracleOptions& opts, std::uint64_t seed)
{
    if (scenes.size() != scene_ids.size())
        throw ContractError("gen_dataset: one id per scene required");
    SphereConstraint sys;
    struct Job {
        std::size_t scene;
        std::size_t pair;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < scenes.size(); ++s)
        for (std::size_t p = 0; p < scenes[s].pairs.size(); ++p)
            jobs.push_back({s, p});

    std::vector<std::optional<std::vector<Config>>> results(jobs.size());
    parallel_for(jobs.size(), opts.jobs, [&](std::size_t j) {
        const SceneRecord& rec = scenes[jobs[j].scene];
        const ProblemPair& pp = rec.pairs[jobs[j].pair];
        PlanProblem prob;
        prob.sys = &sys;
        prob.world = &rec.scene;
        prob.q_init = pp.init;
        prob.q_goal = pp.goal;
        prob.time_budget = opts.time_budget;
        prob.max_iters = opts.max_iters;
        Integrator integ(opts.adherence, sys, rec.scene);
        const UniformSampler us(sys, rec.scene, integ.atlas());
        Rng rng(derive_seed(seed, scene_ids[jobs[j].scene], jobs[j].pair));
        const PlanResult r = rrt_connect(prob, classical_rrt_sampler(us), integ, rng);
        if (!r.success)
            return;
        const Path smooth = shortcut_smooth(r.path, integ, opts.smoothing_attempts, rng);
        results[j] = key_waypoints(smooth.waypoints, opts.stride);
    });

    DatasetBuild out;
    for (std::size_t s = 0; s < scenes.size(); ++s)
        out.data.voxels[scene_ids[s]] = scenes[s].scene.voxels();
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const std::size_t id = scene_ids[jobs[j].scene];
        PairOutcome o{id, jobs[j].pair, results[j].has_value(), results[j] ? results[j]->size() : 0};
        out.outcomes.push_back(o);
        if (!results[j])
            continue;
        std::vector<std::vector<Config>> dirs{*results[j]};
        if (opts.include_reverse)
            dirs.emplace_back(results[j]->rbegin(), results[j]->rend());
        for (auto& wps : dirs) {
            for (std::size_t k = 0; k + 1 < wps.size(); ++k)
                out.data.tuples.push_back({id, wps[k], wps.back(), wps[k + 1]});
            out.paths.push_back(std::move(wps));
        }
    }
    return out;
}

TrainingSet gen_training_set(std::uint64_t seed, std::size_t n_scenes, std::size_t n_pairs,
                             const OracleOptions& opts, const Scenario1Params& params, double min_success,
                             int max_regenerations)
{
    TrainingSet set;
    for (std::size_t i = 0; i < n_scenes; ++i) {
        SceneRecord best;
        DatasetBuild best_build;
        for (int attempt = 0; attempt <= max_regenerations; ++attempt) {
            SceneRecord rec = gen_scenario1(derive_seed(seed, i, static_cast<std::uint64_t>(attempt)), n_pairs, params);
            DatasetBuild b = gen_dataset({rec}, {i}, opts, seed);
            const bool better = attempt == 0 || b.success_rate() > best_build.success_rate();
            if (better) {
                best = std::move(rec);
                best_build = std::move(b);
            }
            if (best_build.success_rate() >= min_success)
                break;
        }
        set.scenes.push_back(std::move(best));
        set.scene_ids.push_back(i);
        DatasetBuild& total = set.build;
        total.data.voxels.insert(best_build.data.voxels.begin(), best_build.data.voxels.end());
        total.data.tuples.insert(total.data.tuples.end(), best_build.data.tuples.begin(), best_build.data.tuples.end());
        total.outcomes.insert(total.outcomes.end(), best_build.outcomes.begin(), best_build.outcomes.end());
        total.paths.insert(total.paths.end(), best_build.paths.begin(), best_build.paths.end());
    }
    return set;
}

}  // namespace cmpx
