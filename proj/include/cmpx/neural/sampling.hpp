#pragma once

#include <deque>
#include <limits>
#include <vector>

#include "cmpx/neural/models.hpp"
#include "cmpx/planners/planners.hpp"

namespace cmpx {

struct NeuralParams {
    double nu = 0.1;              ///< NProj gate threshold on the predicted distance
    double gamma_n = 0.1;         ///< NProj gradient step
    int nproj_steps = 10;         ///< 1 reproduces a single gradient step
    std::size_t n_ismp = 300;     ///< iterations (RRTConnect) or samples (FMT*) drawn from the network
    std::size_t k_batch = 10;     ///< K of the batched FMT* sampler
};

/// Predicted constraint distance D(z, q).
double discriminate(const DiscriminatorModel& disc, const Tensor& z, const Config& q);

/// dD/dq via the reverse pass.
Config discriminator_gradient(const DiscriminatorModel& disc, const Tensor& z, const Config& q);

/// Returns q if D(q) <= nu; otherwise descends q <- q - gamma_n dD/dq until D <= nu or the step
/// limit, returning the iterate with the lowest predicted distance.
Config nproj(const DiscriminatorModel& disc, const Tensor& z, const Config& q, double nu, double gamma_n,
             int max_steps);

/**
 * Per-query learned sampler. The scene is encoded once at construction; every draw runs the
 * generator with dropout active and then the NProj gate (skipped without a discriminator).
 * Outputs are not guaranteed to be on the manifold.
 */
class CompnetxSampler {
public:
    CompnetxSampler(const GeneratorModel& gen, const DiscriminatorModel* disc, const VoxelGrid& grid,
                    NeuralParams params = {});

    /// One draw; the dropout stream is seeded from a single value taken from rng.
    Config sample(const Config& q_curr, const Config& q_targ, Rng& rng) const;

    /// Batched generator pass, row b using dropout stream row_rngs[b].
    std::vector<Config> sample_rows(const std::vector<Config>& q_curr, const Config& q_targ,
                                    std::vector<Rng>& row_rngs) const;

    const Tensor& latent() const { return z_; }
    const NeuralParams& params() const { return params_; }
    const GeneratorModel& generator() const { return *gen_; }

private:
    Config gate(const Config& q) const;

    const GeneratorModel* gen_;
    const DiscriminatorModel* disc_;
    NeuralParams params_;
    Tensor z_;
};

/// Encodes v and draws one sample (convenience wrapper over CompnetxSampler).
Config compnetx_sample(const GeneratorModel& gen, const DiscriminatorModel* disc, const VoxelGrid& grid,
                       const Config& q_curr, const Config& q_targ, double nu, Rng& rng);

/// K-batch sampling: K tree nodes (all nodes padded with the root when the tree is smaller
/// than K) are pushed through one batched forward pass toward q_goal.
std::vector<Config> kbatch_sample(const CompnetxSampler& sampler, const Tree& tree, const Config& q_goal,
                                  std::size_t K, Rng& rng);

/// Learned draws while the iteration count is below n_ismp, classical afterwards. Learned
/// samples are projected onto the manifold; an iteration whose projection fails is skipped.
RrtSampler hybrid_rrt_sampler(const CompnetxSampler& learned, const UniformSampler& classical,
                              const ConstraintSystem& sys, std::size_t n_ismp);

/// Bidirectional CoMPNetX: rrt_connect with the hybrid sampler, q_curr / q_targ taken from the
/// latest extensions of the active and opposite trees.
PlanResult bidirectional_plan(const GeneratorModel& gen, const DiscriminatorModel* disc, const VoxelGrid& grid,
                              const PlanProblem& problem, Integrator& integrator, const NeuralParams& params,
                              Rng& rng);

/**
 * FMT* batch source: the first n_ismp samples come from K-batch draws over a growing pool
 * rooted at q_init and aimed at q_goal (projected, collisions rejected); later samples are
 * classical.
 */
class LearnedFmtSampler {
public:
    LearnedFmtSampler(const CompnetxSampler& learned, const UniformSampler& classical, const ConstraintSystem& sys,
                      const CollisionWorld& world, const Config& q_init, const Config& q_goal);

    std::optional<Config> operator()(Rng& rng);

private:
    const CompnetxSampler* learned_;
    const UniformSampler* classical_;
    const ConstraintSystem* sys_;
    const CollisionWorld* world_;
    Tree pool_;
    Config goal_;
    std::deque<Config> buffer_;
    std::size_t learned_drawn_ = 0;
    bool exhausted_ = false;
};

PlanResult compnetx_fmt(const GeneratorModel& gen, const DiscriminatorModel* disc, const VoxelGrid& grid,
                        const PlanProblem& problem, Integrator& integrator, const NeuralParams& params,
                        const FmtParams& fmt, Rng& rng);

}  // namespace cmpx
