#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cmpx/core/constraint.hpp"
#include "cmpx/core/world.hpp"
#include "cmpx/integrators/integrator.hpp"

namespace cmpx {

struct PlanProblem {
    const ConstraintSystem* sys = nullptr;
    const CollisionWorld* world = nullptr;
    Config q_init;
    Config q_goal;
    double time_budget = 60.0;     ///< seconds
    std::size_t max_iters = 100000;

    /// Throws ContractError unless both endpoints are on the manifold and collision-free.
    void validate() const;
};

/// Rooted tree over configurations with a linear-scan Euclidean nearest-neighbor lookup.
class Tree {
public:
    static constexpr std::size_t kNoParent = static_cast<std::size_t>(-1);

    explicit Tree(const Config& root);

    std::size_t add(const Config& q, std::size_t parent);
    std::size_t nearest(const Config& q) const;
    /// Indices of every node within `radius` of q.
    std::vector<std::size_t> within(const Config& q, double radius) const;

    std::size_t size() const { return parents_.size(); }
    std::size_t dim() const { return dim_; }
    Config config(std::size_t i) const;
    std::size_t parent(std::size_t i) const { return parents_.at(i); }
    /// Configurations from the root down to node i.
    std::vector<Config> path_from_root(std::size_t i) const;

private:
    std::size_t dim_;
    std::vector<double> coords_;
    std::vector<std::size_t> parents_;
};

double path_length(const std::vector<Config>& waypoints);

struct Path {
    std::vector<Config> waypoints;
    double length = 0.0;
    double wall_time = 0.0;
    std::size_t iterations = 0;
};

struct PlanResult {
    bool success = false;
    Path path;  ///< empty on failure
    std::size_t iterations = 0;
    double wall_time = 0.0;
};

/// Checks the Path invariants; returns a description of the first violation.
std::optional<std::string> check_path(const std::vector<Config>& waypoints, const ConstraintSystem& sys,
                                      const CollisionWorld& world, const Config& q_init, const Config& q_goal,
                                      double goal_tolerance);

/// Classical sampler. Projection mode draws from the ambient box [-box_half, box_half]^n and
/// projects; atlas mode draws tangent coordinates from a random chart and maps them with psi_exp
/// (falling back to projecting phi(u) when Newton fails). Collisions are rejected.
class UniformSampler {
public:
    static constexpr int kRejectionBudget = 1000;

    UniformSampler(const ConstraintSystem& sys, const CollisionWorld& world, const Atlas* atlas = nullptr,
                   double box_half = 1.2);

    /// Throws SamplingError when the rejection budget is exhausted.
    Config sample(Rng& rng) const;

private:
    std::optional<Config> draw(Rng& rng) const;

    const ConstraintSystem* sys_;
    const CollisionWorld* world_;
    const Atlas* atlas_;
    double box_half_;
};

/// State handed to RRTConnect samplers each iteration.
struct SampleContext {
    std::size_t iteration;
    const Tree& active;
    const Tree& other;
    const Config& last_active;  ///< endpoint of the active tree's latest extension (its root initially)
    const Config& last_other;
    bool active_is_init;
};

/// Returns the extension target for this iteration, or nullopt to skip it.
using RrtSampler = std::function<std::optional<Config>(const SampleContext&, Rng&)>;

/// Draws a single FMT* sample, or nullopt when none could be produced.
using FmtSampler = std::function<std::optional<Config>(Rng&)>;

RrtSampler classical_rrt_sampler(const UniformSampler& sampler);
FmtSampler classical_fmt_sampler(const UniformSampler& sampler);

/**
 * Bidirectional RRTConnect. Each iteration extends the active tree from its nearest node toward
 * the sample, then greedily connects the other tree to the new node; trees swap every iteration.
 * Every integrator state becomes a tree node.
 */
PlanResult rrt_connect(const PlanProblem& problem, const RrtSampler& sampler, Integrator& integrator, Rng& rng);

struct FmtParams {
    std::size_t n_init = 500;      ///< initial batch size, q_goal included
    double radius = 0.4;           ///< neighbor radius (ambient)
    std::size_t rerun_every = 50;  ///< added samples between marching passes
};

/// FMT* over a fixed-radius neighbor graph with the integrator as steering and validity check.
/// If the initial batch yields no path, samples are added one per iteration and the marching
/// pass is repeated every `rerun_every` additions, reusing cached edges.
PlanResult fmt_star(const PlanProblem& problem, const FmtSampler& sampler, Integrator& integrator,
                    const FmtParams& params, Rng& rng);

/// Random-pair shortcutting; returns a path no longer than the input.
Path shortcut_smooth(const Path& path, Integrator& integrator, std::size_t attempts, Rng& rng);

}  // namespace cmpx
