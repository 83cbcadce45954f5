#pragma once

#include <cstddef>
#include <deque>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "cmpx/core/constraint.hpp"

namespace cmpx {

struct AtlasParams {
    double rho = 1.5;                          ///< tangent ball radius
    double alpha = std::numbers::pi / 6.0;     ///< max curvature angle
    double eps_chart = 0.01;                   ///< max chart-to-manifold distance
    std::size_t max_charts = 5000;
    double explore_prob = 0.9;                 ///< probability of sampling at the chart rim
    bool separate = true;                      ///< add bisector half-spaces between neighbors
    int max_newton = 50;
    std::size_t lookup_candidates = 10;        ///< nearest centers scanned by get_chart
    int rejection_budget = 100;

    void validate() const;
};

/// Half-space {u : normal . u <= offset} in a chart's tangent coordinates.
struct HalfSpace {
    Vector normal;
    double offset = 0.0;

    bool contains(const TangentCoord& u) const { return normal.dot(u) <= offset; }
};

/// Local tangent parameterization of the manifold around an on-manifold center.
struct Chart {
    std::size_t id = 0;
    Config center;
    Matrix basis;                      ///< n x (n-k), orthonormal columns spanning null(J(center))
    std::vector<HalfSpace> polytope;

    bool in_polytope(const TangentCoord& u) const;
};

/// Orthonormal basis of null(J(q)) from a QR factorization of J^T.
Matrix tangent_basis(const ConstraintSystem& sys, const Config& q);

/// center + basis * u.
Config phi_map(const Chart& chart, const TangentCoord& u);

/// Orthogonal projection of phi_map(u) onto the manifold along the chart normal space.
std::optional<Config> psi_exp(const ConstraintSystem& sys, const Chart& chart, const TangentCoord& u,
                              int max_newton = 50);

/// basis^T (q - center).
TangentCoord psi_log(const Chart& chart, const Config& q);

/**
 * Chart validity region test for the tangent point u and its manifold image q:
 * distance ||phi(u) - q|| <= eps_chart, curvature ||u|| >= cos(alpha) ||center - q||,
 * radius ||u|| <= rho. The curvature test is vacuous at q == center.
 */
bool in_validity(const AtlasParams& params, const Chart& chart, const TangentCoord& u, const Config& q);

/**
 * Growable collection of charts. Chart ids equal their insertion index and are
 * never invalidated; charts are only ever mutated by gaining half-spaces.
 */
class Atlas {
public:
    explicit Atlas(const ConstraintSystem& sys, AtlasParams params = {});

    const AtlasParams& params() const { return params_; }
    const ConstraintSystem& system() const { return *sys_; }
    std::size_t size() const { return charts_.size(); }
    bool empty() const { return charts_.empty(); }
    const Chart& chart(std::size_t id) const { return charts_.at(id); }

    /// Existing chart whose validity region and polytope contain q, else a new chart at q.
    const Chart& get_chart(const Config& q);

    /// Charts whose validity region and polytope contain q, nearest center first.
    std::optional<std::size_t> find_chart(const Config& q) const;

    /// Appends a chart centered at q and installs separating half-spaces.
    const Chart& add_chart(const Config& q);

    /// Restricts chart `id` by an extra half-space.
    void add_half_space(std::size_t id, HalfSpace h);

    /// Uniform chart, then u uniform in the rho-ball (or on its rim with explore_prob),
    /// rejected against the polytope.
    std::pair<const Chart*, TangentCoord> sample_chart_uniform(Rng& rng) const;

private:
    std::vector<std::size_t> nearest_centers(const Config& q, std::size_t count) const;

    const ConstraintSystem* sys_;
    AtlasParams params_;
    std::deque<Chart> charts_;
};

}  // namespace cmpx
