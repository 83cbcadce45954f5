#include "cmpx/integrators/integrator.hpp"

#include <string>

namespace cmpx {

void IntegratorParams::validate() const
{
    if (!(gamma > 0.0) || !(lambda1 >= 1.0) || !(lambda2 >= 1.0) || max_steps < 1 ||
        !(stall_eps > 0.0 && stall_eps < gamma))
        throw ContractError("IntegratorParams: require gamma > 0, lambda1, lambda2 >= 1, "
                            "max_steps >= 1, 0 < stall_eps < gamma");
}

double Motion::length() const
{
    double total = 0.0;
    for (std::size_t i = 1; i < states.size(); ++i)
        total += (states[i] - states[i - 1]).norm();
    return total;
}

std::string_view to_string(Adherence a)
{
    switch (a) {
    case Adherence::Projection:
        return "projection";
    case Adherence::Atlas:
        return "atlas";
    case Adherence::TangentBundle:
        return "tangent-bundle";
    }
    return "unknown";
}

Adherence parse_adherence(std::string_view s)
{
    if (s == "projection" || s == "proj")
        return Adherence::Projection;
    if (s == "atlas")
        return Adherence::Atlas;
    if (s == "tangent-bundle" || s == "tb")
        return Adherence::TangentBundle;
    throw ContractError("unknown adherence method '" + std::string(s) + "'");
}

namespace {

struct BreakGuard {
    const IntegratorParams& p;
    const CollisionWorld& world;
    Config target;
    double budget;  // lambda2 * d_w
    double travelled = 0.0;

    /// True when the candidate step must be rejected and the walk stopped.
    bool breaks(const Config& from, const Config& to, bool check_stall)
    {
        const double d = (to - from).norm();
        travelled += d;
        const double d1 = (from - target).norm();
        const double d2 = (to - target).norm();
        return world.in_collision(to) || d2 > d1 || d > p.lambda1 * p.gamma ||
               (check_stall && d < p.stall_eps) || travelled > budget;
    }
};

void finish(Motion& m, const Config& qe, const IntegratorParams& p)
{
    m.reached = (m.last() - qe).norm() <= p.goal_tolerance();
}

void require_on_manifold(const ConstraintSystem& sys, const Config& q, const char* what)
{
    if (!sys.on_manifold(q))
        throw ContractError(std::string(what) + " is not on the constraint manifold");
}

}  // namespace

Motion projection_integrate(const ConstraintSystem& sys, const CollisionWorld& world, const Config& qs,
                            const Config& qe, const IntegratorParams& p)
{
    p.validate();
    sys.check_config(qs);
    sys.check_config(qe);
    require_on_manifold(sys, qs, "projection_integrate: start");

    Motion m;
    m.states.push_back(qs);
    BreakGuard guard{p, world, qe, p.lambda2 * (qe - qs).norm()};
    Config qi = qs;
    for (int i = 0; i < p.max_steps; ++i) {
        if ((qi - qe).norm() <= p.gamma)
            break;
        ProjectionResult next = project(sys, qi + p.gamma * (qe - qi));
        if (!next.ok() || guard.breaks(qi, next.q, false))
            break;
        m.states.push_back(next.q);
        qi = std::move(next.q);
    }
    finish(m, qe, p);
    return m;
}

Motion atlas_integrate(const ConstraintSystem& sys, const CollisionWorld& world, Atlas& atlas,
                       const Config& qs, const Config& qe, const IntegratorParams& p)
{
    p.validate();
    sys.check_config(qs);
    sys.check_config(qe);
    require_on_manifold(sys, qs, "atlas_integrate: start");
    require_on_manifold(sys, qe, "atlas_integrate: end");

    Motion m;
    m.states.push_back(qs);
    BreakGuard guard{p, world, qe, p.lambda2 * (qe - qs).norm()};
    Config qi = qs;
    const Chart* chart = &atlas.get_chart(qi);
    TangentCoord ui = psi_log(*chart, qi);
    TangentCoord ue = psi_log(*chart, qe);
    int i = 0;
    while ((ui - ue).norm() > p.gamma) {
        const TangentCoord step = ue - ui;
        TangentCoord un = ui + p.gamma * step / step.norm();
        std::optional<Config> qn = psi_exp(sys, *chart, un, atlas.params().max_newton);
        if (!qn || guard.breaks(qi, *qn, true) || i > p.max_steps)
            break;
        m.states.push_back(*qn);
        ++i;
        ui = std::move(un);
        qi = std::move(*qn);
        if (!in_validity(atlas.params(), *chart, ui, qi) || !chart->in_polytope(ui)) {
            chart = &atlas.get_chart(qi);
            ui = psi_log(*chart, qi);
            ue = psi_log(*chart, qe);
        }
    }
    finish(m, qe, p);
    return m;
}

Motion tb_integrate(const ConstraintSystem& sys, const CollisionWorld& world, Atlas& atlas,
                    const Config& qs, const Config& qe, const IntegratorParams& p)
{
    p.validate();
    sys.check_config(qs);
    sys.check_config(qe);
    require_on_manifold(sys, qs, "tb_integrate: start");
    require_on_manifold(sys, qe, "tb_integrate: end");

    const AtlasParams& ap = atlas.params();
    Motion m;
    m.states.push_back(qs);
    BreakGuard guard{p, world, qe, p.lambda2 * (qe - qs).norm()};
    Config qi = qs;
    const Chart* chart = &atlas.get_chart(qi);
    TangentCoord ui = psi_log(*chart, qi);
    TangentCoord ue = psi_log(*chart, qe);
    bool truncated = false;
    int i = 0;
    while ((ui - ue).norm() > p.gamma) {
        const TangentCoord step = ue - ui;
        TangentCoord un = ui + p.gamma * step / step.norm();
        Config qn = phi_map(*chart, un);
        if (guard.breaks(qi, qn, true) || i > p.max_steps)
            break;
        m.states.push_back(qn);
        ++i;
        ui = std::move(un);
        qi = std::move(qn);
        const bool leave =
            sys.distance(qi) > ap.eps_chart || ui.norm() > ap.rho || !chart->in_polytope(ui);
        if (leave) {
            std::optional<Config> on = psi_exp(sys, *chart, ui, ap.max_newton);
            if (!on || world.in_collision(*on)) {
                m.states.pop_back();
                truncated = true;
                break;
            }
            m.states.back() = *on;
            qi = *on;
            chart = &atlas.get_chart(qi);
            ui = psi_log(*chart, qi);
            ue = psi_log(*chart, qe);
        }
    }

    // The endpoint must lie on the manifold; drop trailing states that cannot be projected.
    while (m.states.size() > 1 && !sys.on_manifold(m.states.back())) {
        std::optional<Config> on;
        if (!truncated && m.states.back() == qi)
            on = psi_exp(sys, *chart, ui, ap.max_newton);
        else {
            ProjectionResult pr = project(sys, m.states.back());
            if (pr.ok())
                on = std::move(pr.q);
        }
        if (on && !world.in_collision(*on)) {
            m.states.back() = std::move(*on);
            break;
        }
        m.states.pop_back();
        truncated = true;
    }
    finish(m, qe, p);
    if (truncated)
        m.reached = false;
    return m;
}

Integrator::Integrator(Adherence adherence, const ConstraintSystem& sys, const CollisionWorld& world,
                       IntegratorParams params, AtlasParams atlas_params)
    : adherence_(adherence), sys_(&sys), world_(&world), params_(params)
{
    params_.validate();
    if (adherence_ == Adherence::TangentBundle)
        atlas_params.separate = false;
    if (adherence_ != Adherence::Projection)
        atlas_ = std::make_unique<Atlas>(sys, atlas_params);
}

Motion Integrator::integrate(const Config& from, const Config& to)
{
    switch (adherence_) {
    case Adherence::Projection:
        return projection_integrate(*sys_, *world_, from, to, params_);
    case Adherence::Atlas:
        return atlas_integrate(*sys_, *world_, *atlas_, from, to, params_);
    case Adherence::TangentBundle:
        return tb_integrate(*sys_, *world_, *atlas_, from, to, params_);
    }
    throw ContractError("Integrator: unknown adherence");
}

Motion Integrator::steer(const Config& from, const Config& to)
{
    Motion m = integrate(from, to);
    if (adherence_ != Adherence::TangentBundle)
        return m;
    // Lazy states are at most eps_chart off the manifold; pin them down for use as tree nodes.
    for (std::size_t i = 1; i < m.states.size(); ++i) {
        if (sys_->on_manifold(m.states[i]))
            continue;
        ProjectionResult pr = project(*sys_, m.states[i]);
        if (!pr.ok() || world_->in_collision(pr.q)) {
            m.states.resize(i);
            m.reached = false;
            break;
        }
        m.states[i] = std::move(pr.q);
    }
    m.reached = m.reached && (m.last() - to).norm() <= params_.goal_tolerance();
    return m;
}

}  // namespace cmpx
