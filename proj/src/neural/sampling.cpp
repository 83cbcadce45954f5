#include "cmpx/neural/sampling.hpp"

#include <algorithm>

#include "cmpx/core/stats.hpp"

namespace cmpx {

namespace {

Tensor disc_row(const Tensor& z, const Config& q)
{
    Tensor x({1, kLatentSize + static_cast<int>(q.size())});
    std::copy(z.data.begin(), z.data.begin() + kLatentSize, x.data.begin());
    std::copy(q.data(), q.data() + q.size(), x.data.begin() + kLatentSize);
    return x;
}

void check_latent(const Tensor& z)
{
    if (z.shape != std::vector<int>{1, kLatentSize})
        throw ContractError("scene latent must have shape [1, 128]");
}

}  // namespace

double discriminate(const DiscriminatorModel& disc, const Tensor& z, const Config& q)
{
    check_latent(z);
    if (q.size() != disc.config_dim())
        throw ContractError("discriminate: configuration dimension mismatch");
    return disc.mlp.forward(disc_row(z, q), Mode::DeterministicInfer).data[0];
}

Config discriminator_gradient(const DiscriminatorModel& disc, const Tensor& z, const Config& q)
{
    check_latent(z);
    if (q.size() != disc.config_dim())
        throw ContractError("discriminator_gradient: configuration dimension mismatch");
    ForwardCache cache;
    const Tensor y = disc.mlp.forward(disc_row(z, q), Mode::Train, nullptr, &cache);
    Tensor dy(y.shape);
    dy.data[0] = 1.0;
    std::vector<double> scratch(disc.mlp.param_count());
    const Tensor dx = disc.mlp.backward(cache, dy, scratch);
    return Eigen::Map<const Eigen::VectorXd>(dx.data.data() + kLatentSize, q.size());
}

Config nproj(const DiscriminatorModel& disc, const Tensor& z, const Config& q, double nu, double gamma_n,
             int max_steps)
{
    double d = discriminate(disc, z, q);
    if (d <= nu)
        return q;
    ++counters().nproj_calls;
    Config best = q;
    double best_d = d;
    Config cur = q;
    for (int s = 0; s < max_steps; ++s) {
        cur -= gamma_n * discriminator_gradient(disc, z, cur);
        d = discriminate(disc, z, cur);
        if (d < best_d) {
            best_d = d;
            best = cur;
        }
        if (d <= nu)
            break;
    }
    return best;
}

CompnetxSampler::CompnetxSampler(const GeneratorModel& gen, const DiscriminatorModel* disc, const VoxelGrid& grid,
                                 NeuralParams params)
    : gen_(&gen), disc_(disc), params_(params), z_(gen.encode(grid))
{
    if (disc_ && disc_->config_dim() != gen.config_dim())
        throw ContractError("CompnetxSampler: generator and discriminator dimensions differ");
}

Config CompnetxSampler::gate(const Config& q) const
{
    if (!disc_)
        return q;
    return nproj(*disc_, z_, q, params_.nu, params_.gamma_n, params_.nproj_steps);
}

std::vector<Config> CompnetxSampler::sample_rows(const std::vector<Config>& q_curr, const Config& q_targ,
                                                 std::vector<Rng>& row_rngs) const
{
    const int n = gen_->config_dim();
    const int B = static_cast<int>(q_curr.size());
    if (row_rngs.size() != q_curr.size())
        throw ContractError("sample_rows: one dropout stream per row required");
    if (q_targ.size() != n)
        throw ContractError("sample_rows: target dimension mismatch");
    Tensor x({B, kLatentSize + 2 * n});
    for (int b = 0; b < B; ++b) {
        const Config& qc = q_curr[static_cast<std::size_t>(b)];
        if (qc.size() != n)
            throw ContractError("sample_rows: current configuration dimension mismatch");
        double* r = x.row(b);
        std::copy(z_.data.begin(), z_.data.begin() + kLatentSize, r);
        std::copy(qc.data(), qc.data() + n, r + kLatentSize);
        std::copy(q_targ.data(), q_targ.data() + n, r + kLatentSize + n);
    }
    DropoutSource drop(row_rngs);
    const Tensor y = gen_->trunk.forward(x, Mode::StochasticInfer, &drop);
    std::vector<Config> out;
    out.reserve(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b)
        out.push_back(gate(Eigen::Map<const Eigen::VectorXd>(y.row(b), n)));
    return out;
}

Config CompnetxSampler::sample(const Config& q_curr, const Config& q_targ, Rng& rng) const
{
    std::vector<Rng> rows{Rng(rng())};
    return sample_rows({q_curr}, q_targ, rows).front();
}

Config compnetx_sample(const GeneratorModel& gen, const DiscriminatorModel* disc, const VoxelGrid& grid,
                       const Config& q_curr, const Config& q_targ, double nu, Rng& rng)
{
    NeuralParams p;
    p.nu = nu;
    return CompnetxSampler(gen, disc, grid, p).sample(q_curr, q_targ, rng);
}

std::vector<Config> kbatch_sample(const CompnetxSampler& sampler, const Tree& tree, const Config& q_goal,
                                  std::size_t K, Rng& rng)
{
    if (K < 1)
        throw ContractError("kbatch_sample: K must be positive");
    std::vector<Rng> rows;
    rows.reserve(K);
    for (std::size_t k = 0; k < K; ++k)
        rows.emplace_back(rng());
    std::vector<Config> current;
    current.reserve(K);
    if (tree.size() < K) {
        for (std::size_t i = 0; i < tree.size(); ++i)
            current.push_back(tree.config(i));
        while (current.size() < K)
            current.push_back(tree.config(0));
    } else {
        for (std::size_t k = 0; k < K; ++k)
            current.push_back(tree.config(uniform_index(rng, tree.size())));
    }
    return sampler.sample_rows(current, q_goal, rows);
}

RrtSampler hybrid_rrt_sampler(const CompnetxSampler& learned, const UniformSampler& classical,
                              const ConstraintSystem& sys, std::size_t n_ismp)
{
    return [&learned, &classical, &sys, n_ismp](const SampleContext& ctx, Rng& rng) -> std::optional<Config> {
        if (ctx.iteration < n_ismp) {
            const Config raw = learned.sample(ctx.last_active, ctx.last_other, rng);
            if (!raw.allFinite())
                return std::nullopt;
            ProjectionResult pr = project(sys, raw);
            if (!pr.ok())
                return std::nullopt;
            return pr.q;
        }
        try {
            return classical.sample(rng);
        } catch (const SamplingError&) {
            return std::nullopt;
        }
    };
}

PlanResult bidirectional_plan(const GeneratorModel& gen, const DiscriminatorModel* disc, const VoxelGrid& grid,
                              const PlanProblem& problem, Integrator& integrator, const NeuralParams& params,
                              Rng& rng)
{
    const CompnetxSampler learned(gen, disc, grid, params);
    const UniformSampler classical(*problem.sys, *problem.world, integrator.atlas());
    return rrt_connect(problem, hybrid_rrt_sampler(learned, classical, *problem.sys, params.n_ismp), integrator, rng);
}

LearnedFmtSampler::LearnedFmtSampler(const CompnetxSampler& learned, const UniformSampler& classical,
                                     const ConstraintSystem& sys, const CollisionWorld& world, const Config& q_init,
                                     const Config& q_goal)
    : learned_(&learned), classical_(&classical), sys_(&sys), world_(&world), pool_(q_init), goal_(q_goal)
{
}

std::optional<Config> LearnedFmtSampler::operator()(Rng& rng)
{
    constexpr int kEmptyBatchLimit = 10;
    if (!exhausted_ && learned_drawn_ < learned_->params().n_ismp) {
        for (int attempt = 0; buffer_.empty() && attempt < kEmptyBatchLimit; ++attempt) {
            for (const Config& raw : kbatch_sample(*learned_, pool_, goal_, learned_->params().k_batch, rng)) {
                if (!raw.allFinite())
                    continue;
                ProjectionResult pr = project(*sys_, raw);
                if (!pr.ok() || world_->in_collision(pr.q))
                    continue;
                pool_.add(pr.q, 0);
                buffer_.push_back(std::move(pr.q));
            }
        }
        if (!buffer_.empty()) {
            Config q = std::move(buffer_.front());
            buffer_.pop_front();
            ++learned_drawn_;
            return q;
        }
        exhausted_ = true;
    }
    try {
        return classical_->sample(rng);
    } catch (const SamplingError&) {
        return std::nullopt;
    }
}

PlanResult compnetx_fmt(const GeneratorModel& gen, const DiscriminatorModel* disc, const VoxelGrid& grid,
                        const PlanProblem& problem, Integrator& integrator, const NeuralParams& params,
                        const FmtParams& fmt, Rng& rng)
{
    const CompnetxSampler learned(gen, disc, grid, params);
    const UniformSampler classical(*problem.sys, *problem.world);
    LearnedFmtSampler source(learned, classical, *problem.sys, *problem.world, problem.q_init, problem.q_goal);
    return fmt_star(problem, std::ref(source), integrator, fmt, rng);
}

}  // namespace cmpx
