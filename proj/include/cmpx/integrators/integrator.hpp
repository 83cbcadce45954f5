#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include "cmpx/atlas/atlas.hpp"
#include "cmpx/core/constraint.hpp"
#include "cmpx/core/world.hpp"

namespace cmpx {

struct IntegratorParams {
    double gamma = 0.05;     ///< step size
    double lambda1 = 2.0;    ///< per-step overshoot guard
    double lambda2 = 2.0;    ///< path-length budget relative to the ambient distance
    int max_steps = 1000;    ///< loop limit
    double stall_eps = 1e-6; ///< minimum per-step progress (atlas / tangent bundle)

    void validate() const;
    /// Ambient distance at which a target counts as reached.
    double goal_tolerance() const { return gamma * lambda1; }
};

/// Accepted states of a local motion; states[0] is the start configuration.
struct Motion {
    std::vector<Config> states;
    bool reached = false;

    double length() const;
    const Config& last() const { return states.back(); }
};

enum class Adherence { Projection, Atlas, TangentBundle };

std::string_view to_string(Adherence a);
Adherence parse_adherence(std::string_view s);

/// Steps Proj(q_i + gamma (q_e - q_i)) until a break condition fires or q_e is within gamma.
Motion projection_integrate(const ConstraintSystem& sys, const CollisionWorld& world, const Config& qs,
                            const Config& qe, const IntegratorParams& p);

/// Walks the tangent space of the atlas charts, mapping every step onto the manifold.
Motion atlas_integrate(const ConstraintSystem& sys, const CollisionWorld& world, Atlas& atlas,
                       const Config& qs, const Config& qe, const IntegratorParams& p);

/// Lazy variant of atlas_integrate: intermediate states stay on the tangent plane and are
/// projected only when switching charts and at the end of the motion.
Motion tb_integrate(const ConstraintSystem& sys, const CollisionWorld& world, Atlas& atlas,
                    const Config& qs, const Config& qe, const IntegratorParams& p);

/**
 * Per-query local planner bundling an adherence method with its atlas.
 * integrate() returns the raw integrator output; steer() additionally guarantees that
 * every state is on the manifold and collision-free (tangent-bundle states are projected,
 * the motion is truncated at the first state that cannot be).
 */
class Integrator {
public:
    Integrator(Adherence adherence, const ConstraintSystem& sys, const CollisionWorld& world,
               IntegratorParams params = {}, AtlasParams atlas_params = {});

    Motion integrate(const Config& from, const Config& to);
    Motion steer(const Config& from, const Config& to);

    Adherence adherence() const { return adherence_; }
    const IntegratorParams& params() const { return params_; }
    const ConstraintSystem& system() const { return *sys_; }
    const CollisionWorld& world() const { return *world_; }
    /// Null for projection adherence.
    Atlas* atlas() { return atlas_.get(); }
    const Atlas* atlas() const { return atlas_.get(); }

private:
    Adherence adherence_;
    const ConstraintSystem* sys_;
    const CollisionWorld* world_;
    IntegratorParams params_;
    std::unique_ptr<Atlas> atlas_;
};

}  // namespace cmpx
