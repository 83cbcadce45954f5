#include "cmpx/atlas/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmpx/core/stats.hpp"

namespace cmpx {

void AtlasParams::validate() const
{
    if (!(rho > 0.0) || !(alpha > 0.0) || !(alpha < std::numbers::pi / 2.0) || !(eps_chart > 0.0))
        throw ContractError("AtlasParams: rho, eps_chart > 0 and 0 < alpha < pi/2 required");
    if (max_charts == 0 || max_newton < 1 || lookup_candidates == 0 || rejection_budget < 1)
        throw ContractError("AtlasParams: counts must be positive");
    if (!(explore_prob >= 0.0 && explore_prob <= 1.0))
        throw ContractError("AtlasParams: explore_prob must lie in [0, 1]");
}

bool Chart::in_polytope(const TangentCoord& u) const
{
    return std::all_of(polytope.begin(), polytope.end(),
                       [&](const HalfSpace& h) { return h.contains(u); });
}

Matrix tangent_basis(const ConstraintSystem& sys, const Config& q)
{
    const int n = sys.ambient_dim();
    const int k = sys.codim();
    const Matrix J = sys.jacobian(q);
    Eigen::ColPivHouseholderQR<Matrix> qr(J.transpose());
    qr.setThreshold(1e-10);
    if (qr.rank() < k)
        throw DegeneratePointError("tangent_basis: Jacobian is rank deficient");
    const Matrix Q = qr.householderQ();
    return Q.rightCols(n - k);
}

Config phi_map(const Chart& chart, const TangentCoord& u)
{
    if (u.size() != chart.basis.cols())
        throw ContractError("phi_map: tangent coordinate dimension mismatch");
    return chart.center + chart.basis * u;
}

TangentCoord psi_log(const Chart& chart, const Config& q)
{
    if (q.size() != chart.center.size())
        throw ContractError("psi_log: configuration dimension mismatch");
    return chart.basis.transpose() * (q - chart.center);
}

std::optional<Config> psi_exp(const ConstraintSystem& sys, const Chart& chart, const TangentCoord& u,
                              int max_newton)
{
    ++counters().projection_calls;
    const int n = sys.ambient_dim();
    const int k = sys.codim();
    const Config x0 = phi_map(chart, u);
    Config q = x0;
    Matrix A(n, n);
    Vector r(n);
    A.bottomRows(n - k) = chart.basis.transpose();
    for (int it = 0; it < max_newton; ++it) {
        const Vector f = sys.evaluate(q);
        r.head(k) = f;
        r.tail(n - k) = chart.basis.transpose() * (q - x0);
        if (!r.allFinite())
            return std::nullopt;
        if (r.norm() < sys.tolerance())
            return q;
        A.topRows(k) = sys.jacobian(q);
        Eigen::ColPivHouseholderQR<Matrix> solver(A);
        if (solver.rank() < n)
            return std::nullopt;
        const Vector delta = solver.solve(r);
        q -= delta;
        if (!q.allFinite())
            return std::nullopt;
        if (delta.norm() < 1e-9)
            return sys.on_manifold(q) ? std::optional<Config>(q) : std::nullopt;
    }
    return std::nullopt;
}

bool in_validity(const AtlasParams& params, const Chart& chart, const TangentCoord& u, const Config& q)
{
    const double un = u.norm();
    if (un > params.rho)
        return false;
    if ((phi_map(chart, u) - q).norm() > params.eps_chart)
        return false;
    const double d = (chart.center - q).norm();
    if (d > 0.0 && un < std::cos(params.alpha) * d)
        return false;
    return true;
}

Atlas::Atlas(const ConstraintSystem& sys, AtlasParams params) : sys_(&sys), params_(params)
{
    params_.validate();
}

std::vector<std::size_t> Atlas::nearest_centers(const Config& q, std::size_t count) const
{
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(charts_.size());
    for (const Chart& c : charts_)
        d.emplace_back((c.center - q).squaredNorm(), c.id);
    count = std::min(count, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(count), d.end());
    std::vector<std::size_t> ids(count);
    for (std::size_t i = 0; i < count; ++i)
        ids[i] = d[i].second;
    return ids;
}

std::optional<std::size_t> Atlas::find_chart(const Config& q) const
{
    for (std::size_t id : nearest_centers(q, params_.lookup_candidates)) {
        const Chart& c = charts_[id];
        const TangentCoord u = psi_log(c, q);
        if (in_validity(params_, c, u, q) && c.in_polytope(u))
            return id;
    }
    return std::nullopt;
}

const Chart& Atlas::get_chart(const Config& q)
{
    if (auto id = find_chart(q))
        return charts_[*id];
    return add_chart(q);
}

const Chart& Atlas::add_chart(const Config& q)
{
    if (charts_.size() >= params_.max_charts)
        throw CapacityError("atlas: maximum chart count reached");
    if (!sys_->on_manifold(q))
        throw ContractError("atlas: chart center must lie on the manifold");

    Chart fresh;
    fresh.id = charts_.size();
    fresh.center = q;
    fresh.basis = tangent_basis(*sys_, q);

    if (params_.separate) {
        const double cos_alpha = std::cos(params_.alpha);
        for (Chart& other : charts_) {
            const double dist = (other.center - q).norm();
            if (!(dist < 2.0 * params_.rho) || dist == 0.0)
                continue;
            const TangentCoord v = psi_log(other, q);
            const TangentCoord w = psi_log(fresh, other.center);
            // Only locally faithful neighbors get a bisector; a far center's tangent
            // image is foreshortened and would cut the chart near its own center.
            if (v.norm() < cos_alpha * dist || w.norm() < cos_alpha * dist)
                continue;
            other.polytope.push_back({v, 0.5 * v.squaredNorm()});
            fresh.polytope.push_back({w, 0.5 * w.squaredNorm()});
        }
    }
    charts_.push_back(std::move(fresh));
    ++counters().charts_created;
    return charts_.back();
}

void Atlas::add_half_space(std::size_t id, HalfSpace h)
{
    Chart& c = charts_.at(id);
    if (h.normal.size() != c.basis.cols())
        throw ContractError("add_half_space: normal dimension mismatch");
    c.polytope.push_back(std::move(h));
}

std::pair<const Chart*, TangentCoord> Atlas::sample_chart_uniform(Rng& rng) const
{
    if (charts_.empty())
        throw ContractError("sample_chart_uniform: atlas is empty");
    const int d = sys_->manifold_dim();
    constexpr int kChartAttempts = 100;
    TangentCoord u(d);
    for (int attempt = 0; attempt < kChartAttempts; ++attempt) {
        const Chart& c = charts_[uniform_index(rng, charts_.size())];
        for (int t = 0; t < params_.rejection_budget; ++t) {
            for (int i = 0; i < d; ++i)
                u[i] = standard_normal(rng);
            const double norm = u.norm();
            if (norm == 0.0)
                continue;
            const bool rim = uniform01(rng) < params_.explore_prob;
            const double radius = rim ? params_.rho : params_.rho * std::pow(uniform01(rng), 1.0 / d);
            u *= radius / norm;
            if (c.in_polytope(u))
                return {&c, u};
        }
    }
    throw SamplingError("sample_chart_uniform: rejection budget exhausted on every chart tried");
}

}  // namespace cmpx
