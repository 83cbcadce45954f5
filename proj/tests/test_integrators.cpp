#include <doctest.h>

#include <numbers>

#include "cmpx/core/stats.hpp"
#include "cmpx/env/scene.hpp"
#include "cmpx/integrators/integrator.hpp"
#include "sphere_fixtures.hpp"

using namespace cmpx;
using cmpx::testing::v3;

namespace {

double max_violation(const ConstraintSystem& s, const Motion& m)
{
    double worst = 0.0;
    for (const Config& q : m.states)
        worst = std::max(worst, s.distance(q));
    return worst;
}

// Distance from q to the quarter arc between (1,0,0) and (0,1,0).
double arc_deviation(const Config& q)
{
    const Eigen::Vector3d p(q[0], q[1], 0.0);
    if (p.norm() < 1e-12)
        return q.norm();
    return (q - Config(p.normalized())).norm();
}

void check_motion_invariants(const ConstraintSystem& s, const CollisionWorld& w, const Motion& m,
                             const Config& qs, const Config& qe, const IntegratorParams& p)
{
    REQUIRE_FALSE(m.states.empty());
    CHECK(m.states.front() == qs);
    for (std::size_t i = 1; i < m.states.size(); ++i)
        CHECK((m.states[i] - m.states[i - 1]).norm() <= p.lambda1 * p.gamma + 1e-12);
    for (const Config& q : m.states)
        CHECK_FALSE(w.in_collision(q));
    CHECK(m.length() <= p.lambda2 * (qs - qe).norm() + 1e-12);
    if (m.reached)
        CHECK((m.last() - qe).norm() <= p.goal_tolerance());
}

}  // namespace

TEST_CASE("adherence names")
{
    CHECK(parse_adherence("projection") == Adherence::Projection);
    CHECK(parse_adherence("atlas") == Adherence::Atlas);
    CHECK(parse_adherence("tangent-bundle") == Adherence::TangentBundle);
    CHECK(parse_adherence("tb") == Adherence::TangentBundle);
    CHECK(to_string(Adherence::TangentBundle) == "tangent-bundle");
    CHECK_THROWS_AS(parse_adherence("rk4"), ContractError);
}

TEST_CASE("parameter validation")
{
    IntegratorParams p;
    CHECK_NOTHROW(p.validate());
    p.gamma = 0.0;
    CHECK_THROWS_AS(p.validate(), ContractError);
    p = {};
    p.lambda1 = 0.5;
    CHECK_THROWS_AS(p.validate(), ContractError);
}

TEST_CASE("zero-length motions")
{
    SphereConstraint s;
    EmptyWorld w;
    IntegratorParams p;
    Atlas atlas(s);
    const Config q = v3(0, 1, 0);
    for (const Motion& m : {projection_integrate(s, w, q, q, p), atlas_integrate(s, w, atlas, q, q, p),
                            tb_integrate(s, w, atlas, q, q, p)}) {
        REQUIRE(m.states.size() == 1);
        CHECK(m.states[0] == q);
        CHECK(m.reached);
    }
}

TEST_CASE("projection integrator follows the quarter arc")
{
    SphereConstraint s;
    EmptyWorld w;
    IntegratorParams p;
    const Config qs = v3(1, 0, 0), qe = v3(0, 1, 0);
    const Motion m = projection_integrate(s, w, qs, qe, p);
    CHECK(m.reached);
    CHECK((m.last() - qe).norm() <= p.gamma);
    CHECK(max_violation(s, m) < s.tolerance());
    double dev = 0.0;
    for (std::size_t i = 0; i < m.states.size(); ++i) {
        dev = std::max(dev, arc_deviation(m.states[i]));
        if (i > 0)
            CHECK((m.states[i] - m.states[i - 1]).norm() <= 0.1);
    }
    CHECK(dev < 0.02);
}

TEST_CASE("projection integrator stops before an obstacle")
{
    SphereConstraint s;
    Block cap;
    cap.center = Eigen::Vector3d(std::sqrt(0.5), std::sqrt(0.5), 0.0);
    cap.half_a = cap.half_b = 0.1;
    SphereScene scene({cap}, 0);
    IntegratorParams p;
    const Motion m = projection_integrate(s, scene, v3(1, 0, 0), v3(0, 1, 0), p);
    CHECK_FALSE(m.reached);
    for (const Config& q : m.states)
        CHECK_FALSE(scene.in_collision(q));
    // The walk got as far as the obstacle boundary.
    CHECK(longitude(m.last()) > std::numbers::pi / 4 - 0.1 - 2 * p.gamma);
}

TEST_CASE("atlas integrator on the quarter arc")
{
    SphereConstraint s;
    EmptyWorld w;
    IntegratorParams p;
    Atlas atlas(s);
    const Motion m = atlas_integrate(s, w, atlas, v3(1, 0, 0), v3(0, 1, 0), p);
    CHECK(m.reached);
    CHECK(max_violation(s, m) < s.tolerance());
    CHECK(atlas.size() >= 2);
    double dev = 0.0;
    for (const Config& q : m.states)
        dev = std::max(dev, arc_deviation(q));
    CHECK(dev < 0.02);

    CHECK_THROWS_AS(atlas_integrate(s, w, atlas, v3(1, 0, 0), v3(0, 1.1, 0), p), ContractError);
}

TEST_CASE("tangent-bundle integrator on the quarter arc")
{
    SphereConstraint s;
    EmptyWorld w;
    IntegratorParams p;
    Atlas atlas(s, [] {
        AtlasParams ap;
        ap.separate = false;
        return ap;
    }());
    const Motion m = tb_integrate(s, w, atlas, v3(1, 0, 0), v3(0, 1, 0), p);
    CHECK(m.reached);
    CHECK(max_violation(s, m) <= atlas.params().eps_chart);
    CHECK(s.on_manifold(m.last()));
}

TEST_CASE("tangent-bundle states are lazier than atlas states")
{
    SphereConstraint s;
    EmptyWorld w;
    IntegratorParams p;
    Rng rng(31);
    int lazier = 0;
    for (int t = 0; t < 20; ++t) {
        Config a = random_unit_vector(rng), b = random_unit_vector(rng);
        while (cmpx::testing::great_circle(a, b) < 0.5 || cmpx::testing::great_circle(a, b) > 2.5)
            b = random_unit_vector(rng);
        Atlas atlas_a(s);
        AtlasParams tbp;
        tbp.separate = false;
        Atlas atlas_t(s, tbp);
        const Motion ma = atlas_integrate(s, w, atlas_a, a, b, p);
        const Motion mt = tb_integrate(s, w, atlas_t, a, b, p);
        if (max_violation(s, mt) >= max_violation(s, ma))
            ++lazier;
    }
    CHECK(lazier >= 18);
}

TEST_CASE("property: motion invariants on random obstacle-free pairs")
{
    SphereConstraint s;
    EmptyWorld w;
    IntegratorParams p;
    Rng rng(41);
    for (Adherence a : {Adherence::Projection, Adherence::Atlas, Adherence::TangentBundle}) {
        CAPTURE(to_string(a));
        Integrator integ(a, s, w, p);
        int reached = 0;
        for (int t = 0; t < 100; ++t) {
            const Config qs = random_unit_vector(rng), qe = random_unit_vector(rng);
            const Motion m = integ.integrate(qs, qe);
            check_motion_invariants(s, w, m, qs, qe, p);
            if (a != Adherence::TangentBundle)
                CHECK(max_violation(s, m) < s.tolerance());
            const Motion st = integ.steer(qs, qe);
            CHECK(max_violation(s, st) < s.tolerance());
            reached += m.reached;
        }
        // Only near-antipodal pairs can fail to reach on the empty sphere.
        CHECK(reached >= 90);
    }
}

TEST_CASE("property: motions in a cluttered scene stay collision-free")
{
    SphereConstraint s;
    std::vector<Obstacle> obs;
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        Block b;
        b.center = random_unit_vector(rng);
        b.half_a = b.half_b = 0.08;
        obs.emplace_back(b);
    }
    SphereScene scene(std::move(obs), 2);
    IntegratorParams p;
    for (Adherence a : {Adherence::Projection, Adherence::Atlas, Adherence::TangentBundle}) {
        Integrator integ(a, s, scene, p);
        for (int t = 0; t < 50; ++t) {
            Config qs = random_unit_vector(rng), qe = random_unit_vector(rng);
            if (scene.in_collision(qs) || scene.in_collision(qe))
                continue;
            check_motion_invariants(s, scene, integ.steer(qs, qe), qs, qe, p);
        }
    }
}
