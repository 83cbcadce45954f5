#include "cmpx/planners/planners.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace cmpx {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

void PlanProblem::validate() const
{
    if (!sys || !world)
        throw ContractError("PlanProblem: constraint system and world are required");
    sys->check_config(q_init);
    sys->check_config(q_goal);
    if (!sys->on_manifold(q_init) || !sys->on_manifold(q_goal))
        throw ContractError("PlanProblem: endpoints must lie on the manifold");
    if (world->in_collision(q_init) || world->in_collision(q_goal))
        throw ContractError("PlanProblem: endpoints must be collision-free");
}

Tree::Tree(const Config& root) : dim_(static_cast<std::size_t>(root.size()))
{
    add(root, kNoParent);
}

std::size_t Tree::add(const Config& q, std::size_t parent)
{
    if (static_cast<std::size_t>(q.size()) != dim_)
        throw ContractError("Tree::add: dimension mismatch");
    if (parent != kNoParent && parent >= parents_.size())
        throw ContractError("Tree::add: unknown parent");
    coords_.insert(coords_.end(), q.data(), q.data() + q.size());
    parents_.push_back(parent);
    return parents_.size() - 1;
}

std::size_t Tree::nearest(const Config& q) const
{
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    const double* p = coords_.data();
    for (std::size_t i = 0; i < parents_.size(); ++i, p += dim_) {
        double d = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            const double t = p[j] - q[static_cast<Eigen::Index>(j)];
            d += t * t;
        }
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::vector<std::size_t> Tree::within(const Config& q, double radius) const
{
    std::vector<std::size_t> out;
    const double r2 = radius * radius;
    const double* p = coords_.data();
    for (std::size_t i = 0; i < parents_.size(); ++i, p += dim_) {
        double d = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            const double t = p[j] - q[static_cast<Eigen::Index>(j)];
            d += t * t;
        }
        if (d <= r2)
            out.push_back(i);
    }
    return out;
}

Config Tree::config(std::size_t i) const
{
    if (i >= parents_.size())
        throw ContractError("Tree::config: index out of range");
    return Eigen::Map<const Eigen::VectorXd>(coords_.data() + i * dim_, static_cast<Eigen::Index>(dim_));
}

std::vector<Config> Tree::path_from_root(std::size_t i) const
{
    std::vector<Config> out;
    for (std::size_t cur = i; cur != kNoParent; cur = parents_[cur])
        out.push_back(config(cur));
    std::reverse(out.begin(), out.end());
    return out;
}

double path_length(const std::vector<Config>& waypoints)
{
    double len = 0.0;
    for (std::size_t i = 1; i < waypoints.size(); ++i)
        len += (waypoints[i] - waypoints[i - 1]).norm();
    return len;
}

std::optional<std::string> check_path(const std::vector<Config>& waypoints, const ConstraintSystem& sys,
                                      const CollisionWorld& world, const Config& q_init, const Config& q_goal,
                                      double goal_tolerance)
{
    if (waypoints.empty())
        return "path has no waypoints";
    if (waypoints.front().size() != q_init.size() || (waypoints.front() - q_init).norm() > 1e-12)
        return "first waypoint differs from q_init";
    if ((waypoints.back() - q_goal).norm() > goal_tolerance)
        return "last waypoint is farther than the goal tolerance from q_goal";
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
        const Config& q = waypoints[i];
        std::ostringstream where;
        where << "waypoint " << i;
        if (q.size() != sys.ambient_dim() || !q.allFinite())
            return where.str() + " is malformed";
        if (!sys.on_manifold(q))
            return where.str() + " is off the manifold";
        if (world.in_collision(q))
            return where.str() + " is in collision";
    }
    return std::nullopt;
}

UniformSampler::UniformSampler(const ConstraintSystem& sys, const CollisionWorld& world, const Atlas* atlas,
                               double box_half)
    : sys_(&sys), world_(&world), atlas_(atlas), box_half_(box_half)
{
}

std::optional<Config> UniformSampler::draw(Rng& rng) const
{
    if (atlas_ && !atlas_->empty()) {
        const auto [chart, u] = atlas_->sample_chart_uniform(rng);
        if (auto q = psi_exp(*sys_, *chart, u))
            return q;
        ProjectionResult pr = project(*sys_, phi_map(*chart, u));
        if (pr.ok())
            return pr.q;
        return std::nullopt;
    }
    Config q(sys_->ambient_dim());
    for (Eigen::Index i = 0; i < q.size(); ++i)
        q[i] = uniform(rng, -box_half_, box_half_);
    ProjectionResult pr = project(*sys_, q);
    if (!pr.ok())
        return std::nullopt;
    return pr.q;
}

Config UniformSampler::sample(Rng& rng) const
{
    for (int attempt = 0; attempt < kRejectionBudget; ++attempt) {
        std::optional<Config> q = draw(rng);
        if (q && !world_->in_collision(*q))
            return *q;
    }
    throw SamplingError("uniform manifold sampler exhausted its rejection budget");
}

RrtSampler classical_rrt_sampler(const UniformSampler& sampler)
{
    return [&sampler](const SampleContext&, Rng& rng) -> std::optional<Config> {
        try {
            return sampler.sample(rng);
        } catch (const SamplingError&) {
            return std::nullopt;
        }
    };
}

FmtSampler classical_fmt_sampler(const UniformSampler& sampler)
{
    return [&sampler](Rng& rng) -> std::optional<Config> {
        try {
            return sampler.sample(rng);
        } catch (const SamplingError&) {
            return std::nullopt;
        }
    };
}

namespace {

// Appends motion states [1..] as a chain under `from`; returns the index of the last one.
std::size_t graft(Tree& tree, std::size_t from, const Motion& m)
{
    std::size_t cur = from;
    for (std::size_t i = 1; i < m.states.size(); ++i)
        cur = tree.add(m.states[i], cur);
    return cur;
}

}  // namespace

PlanResult rrt_connect(const PlanProblem& problem, const RrtSampler& sampler, Integrator& integrator, Rng& rng)
{
    problem.validate();
    const auto t0 = Clock::now();
    PlanResult res;
    const double tol = integrator.params().goal_tolerance();

    auto finish = [&](std::vector<Config> wps) {
        res.success = true;
        res.path.waypoints = std::move(wps);
        res.path.length = path_length(res.path.waypoints);
        res.path.iterations = res.iterations;
        res.wall_time = seconds_since(t0);
        res.path.wall_time = res.wall_time;
        return res;
    };

    if ((problem.q_init - problem.q_goal).norm() <= tol)
        return finish({problem.q_init});

    if (Atlas* atlas = integrator.atlas()) {
        atlas->get_chart(problem.q_init);
        atlas->get_chart(problem.q_goal);
    }

    Tree trees[2] = {Tree(problem.q_init), Tree(problem.q_goal)};
    Config last[2] = {problem.q_init, problem.q_goal};
    int a = 0;

    while (res.iterations < problem.max_iters && seconds_since(t0) < problem.time_budget) {
        const int b = 1 - a;
        const SampleContext ctx{res.iterations, trees[a], trees[b], last[a], last[b], a == 0};
        std::optional<Config> target = sampler(ctx, rng);
        ++res.iterations;
        if (target) {
            Tree& ta = trees[a];
            Tree& tb = trees[b];
            const std::size_t near = ta.nearest(*target);
            const Motion ext = integrator.steer(ta.config(near), *target);
            if (ext.states.size() > 1) {
                const std::size_t tip = graft(ta, near, ext);
                last[a] = ext.last();

                const std::size_t near_b = tb.nearest(ext.last());
                const Motion con = integrator.steer(tb.config(near_b), ext.last());
                const std::size_t tip_b = graft(tb, near_b, con);
                if ((con.last() - ext.last()).norm() <= tol) {
                    std::vector<Config> from_a = ta.path_from_root(tip);
                    std::vector<Config> from_b = tb.path_from_root(tip_b);
                    std::vector<Config>& head = (a == 0) ? from_a : from_b;
                    std::vector<Config>& tail = (a == 0) ? from_b : from_a;
                    head.insert(head.end(), tail.rbegin(), tail.rend());
                    return finish(std::move(head));
                }
            }
        }
        a = 1 - a;
    }
    res.wall_time = seconds_since(t0);
    return res;
}

namespace {

struct Edge {
    bool valid = false;
    double cost = 0.0;
    std::vector<Config> states;  // from the parent up to (excluding) the child vertex
};

class FmtGraph {
public:
    FmtGraph(const PlanProblem& problem, Integrator& integrator, const FmtParams& params)
        : problem_(problem), integrator_(integrator), params_(params)
    {
    }

    std::size_t add(const Config& q)
    {
        const std::size_t id = nodes_.size();
        nodes_.push_back(q);
        neighbors_.emplace_back();
        for (std::size_t j = 0; j < id; ++j) {
            if ((nodes_[j] - q).norm() <= params_.radius) {
                neighbors_[j].push_back(id);
                neighbors_[id].push_back(j);
            }
        }
        return id;
    }

    const Config& node(std::size_t i) const { return nodes_[i]; }

    // Marching pass from node 0 toward `goal`; returns the vertex chain on success.
    std::optional<std::vector<Config>> march(std::size_t goal, const Clock::time_point& t0)
    {
        const std::size_t n = nodes_.size();
        constexpr double kInf = std::numeric_limits<double>::infinity();
        std::vector<double> cost(n, kInf);
        std::vector<std::size_t> parent(n, Tree::kNoParent);
        enum class State : std::uint8_t { Unvisited, Open, Closed };
        std::vector<State> state(n, State::Unvisited);

        // Open set ordered by (cost, index) for determinism.
        std::set<std::pair<double, std::size_t>> open;
        cost[0] = 0.0;
        state[0] = State::Open;
        open.emplace(0.0, 0);

        while (!open.empty()) {
            if (seconds_since(t0) >= problem_.time_budget)
                return std::nullopt;
            const std::size_t z = open.begin()->second;
            if (z == goal)
                break;
            std::vector<std::pair<std::size_t, double>> admitted;
            for (std::size_t x : neighbors_[z]) {
                if (state[x] != State::Unvisited)
                    continue;
                std::size_t best = Tree::kNoParent;
                double best_est = kInf;
                for (std::size_t y : neighbors_[x]) {
                    if (state[y] != State::Open)
                        continue;
                    const double est = cost[y] + (nodes_[y] - nodes_[x]).norm();
                    if (est < best_est) {
                        best_est = est;
                        best = y;
                    }
                }
                if (best == Tree::kNoParent)
                    continue;
                const Edge& e = edge(best, x);
                if (e.valid)
                    admitted.emplace_back(x, best);
            }
            for (const auto& [x, y] : admitted) {
                parent[x] = y;
                cost[x] = cost[y] + edge(y, x).cost;
                state[x] = State::Open;
                open.emplace(cost[x], x);
            }
            open.erase(open.begin());
            state[z] = State::Closed;
        }
        if (parent[goal] == Tree::kNoParent)
            return std::nullopt;

        std::vector<std::size_t> chain;
        for (std::size_t cur = goal; cur != Tree::kNoParent; cur = parent[cur])
            chain.push_back(cur);
        std::reverse(chain.begin(), chain.end());
        std::vector<Config> wps{nodes_[chain[0]]};
        for (std::size_t i = 1; i < chain.size(); ++i) {
            const Edge& e = edge(chain[i - 1], chain[i]);
            wps.insert(wps.end(), e.states.begin() + 1, e.states.end());
            wps.push_back(nodes_[chain[i]]);
        }
        return wps;
    }

private:
    const Edge& edge(std::size_t from, std::size_t to)
    {
        auto [it, inserted] = edges_.try_emplace({from, to});
        if (!inserted)
            return it->second;
        Edge& e = it->second;
        const Motion m = integrator_.steer(nodes_[from], nodes_[to]);
        const double gap = (m.last() - nodes_[to]).norm();
        e.valid = m.reached && gap <= integrator_.params().goal_tolerance();
        if (e.valid) {
            e.cost = m.length() + gap;
            e.states = m.states;
            // Drop a trailing state that coincides with the vertex itself.
            if (e.states.size() > 1 && gap < 1e-12)
                e.states.pop_back();
        }
        return e;
    }

    const PlanProblem& problem_;
    Integrator& integrator_;
    const FmtParams& params_;
    std::vector<Config> nodes_;
    std::vector<std::vector<std::size_t>> neighbors_;
    std::map<std::pair<std::size_t, std::size_t>, Edge> edges_;
};

}  // namespace

PlanResult fmt_star(const PlanProblem& problem, const FmtSampler& sampler, Integrator& integrator,
                    const FmtParams& params, Rng& rng)
{
    problem.validate();
    if (params.n_init < 1 || !(params.radius > 0.0) || params.rerun_every < 1)
        throw ContractError("fmt_star: invalid parameters");
    const auto t0 = Clock::now();
    PlanResult res;
    const double tol = integrator.params().goal_tolerance();

    auto finish = [&](std::vector<Config> wps) {
        res.success = true;
        res.path.waypoints = std::move(wps);
        res.path.length = path_length(res.path.waypoints);
        res.path.iterations = res.iterations;
        res.wall_time = seconds_since(t0);
        res.path.wall_time = res.wall_time;
        return res;
    };

    if ((problem.q_init - problem.q_goal).norm() <= tol)
        return finish({problem.q_init});

    FmtGraph graph(problem, integrator, params);
    graph.add(problem.q_init);
    const std::size_t goal = graph.add(problem.q_goal);
    std::size_t drawn = 0;
    std::size_t failures = 0;
    auto draw_one = [&]() {
        std::optional<Config> q = sampler(rng);
        if (q) {
            graph.add(*q);
            ++drawn;
        } else {
            ++failures;
        }
    };
    while (drawn + 1 < params.n_init && failures < params.n_init) {
        if (seconds_since(t0) >= problem.time_budget) {
            res.wall_time = seconds_since(t0);
            return res;
        }
        draw_one();
    }

    for (;;) {
        if (auto wps = graph.march(goal, t0))
            return finish(std::move(*wps));
        std::size_t added = 0;
        while (added < params.rerun_every) {
            if (res.iterations >= problem.max_iters || seconds_since(t0) >= problem.time_budget) {
                res.wall_time = seconds_since(t0);
                return res;
            }
            ++res.iterations;
            const std::size_t before = drawn;
            draw_one();
            added += drawn - before;
        }
    }
}

Path shortcut_smooth(const Path& path, Integrator& integrator, std::size_t attempts, Rng& rng)
{
    Path out = path;
    std::vector<Config>& w = out.waypoints;
    const double tol = integrator.params().goal_tolerance();
    for (std::size_t it = 0; it < attempts && w.size() > 2; ++it) {
        std::size_t i = uniform_index(rng, w.size());
        std::size_t j = uniform_index(rng, w.size());
        if (i > j)
            std::swap(i, j);
        if (j < i + 2)
            continue;
        double old_len = 0.0;
        for (std::size_t k = i + 1; k <= j; ++k)
            old_len += (w[k] - w[k - 1]).norm();
        const Motion m = integrator.steer(w[i], w[j]);
        const double gap = (m.last() - w[j]).norm();
        if (!m.reached || gap > tol)
            continue;
        const double new_len = m.length() + gap;
        if (!(new_len < old_len - 1e-9))
            continue;
        std::vector<Config> mid(m.states.begin() + 1, m.states.end());
        if (!mid.empty() && gap < 1e-12)
            mid.pop_back();
        std::vector<Config> next;
        next.reserve(w.size());
        next.insert(next.end(), w.begin(), w.begin() + static_cast<std::ptrdiff_t>(i + 1));
        next.insert(next.end(), mid.begin(), mid.end());
        next.insert(next.end(), w.begin() + static_cast<std::ptrdiff_t>(j), w.end());
        w = std::move(next);
    }
    out.length = path_length(w);
    return out;
}

}  // namespace cmpx
