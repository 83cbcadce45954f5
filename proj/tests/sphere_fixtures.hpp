#pragma once

#include <algorithm>
#include <cmath>

#include "cmpx/atlas/atlas.hpp"
#include "cmpx/core/constraint.hpp"
#include "cmpx/env/scenarios.hpp"

namespace cmpx::testing {

inline Config v3(double x, double y, double z)
{
    Config q(3);
    q << x, y, z;
    return q;
}

inline Config random_on_sphere(Rng& rng)
{
    return random_unit_vector(rng);
}

/// North-pole chart with basis columns (1,0,0), (0,1,0).
inline Chart north_chart()
{
    Chart c;
    c.id = 0;
    c.center = v3(0, 0, 1);
    c.basis = Matrix::Zero(3, 2);
    c.basis(0, 0) = 1.0;
    c.basis(1, 1) = 1.0;
    return c;
}

inline double great_circle(const Config& a, const Config& b)
{
    return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
}

}  // namespace cmpx::testing
