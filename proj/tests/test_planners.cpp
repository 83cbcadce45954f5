#include <doctest.h>

#include <numbers>

#include "cmpx/env/scenarios.hpp"
#include "cmpx/planners/planners.hpp"
#include "sphere_fixtures.hpp"

using namespace cmpx;
using cmpx::testing::great_circle;
using cmpx::testing::v3;

namespace {

class Plane final : public ConstraintSystem {
public:
    Plane() : ConstraintSystem(3, 1) {}

protected:
    void compute(const Config& q, Eigen::Ref<Vector> out) const override { out[0] = q[2]; }
    bool analytic_jacobian(const Config&, Eigen::Ref<Matrix> out) const override
    {
        out << 0.0, 0.0, 1.0;
        return true;
    }
};

PlanProblem make_problem(const ConstraintSystem& sys, const CollisionWorld& world, const Config& a,
                         const Config& b)
{
    PlanProblem p;
    p.sys = &sys;
    p.world = &world;
    p.q_init = a;
    p.q_goal = b;
    p.time_budget = 30.0;
    p.max_iters = 20000;
    return p;
}

bool same_path(const Path& a, const Path& b)
{
    if (a.waypoints.size() != b.waypoints.size())
        return false;
    for (std::size_t i = 0; i < a.waypoints.size(); ++i)
        if (a.waypoints[i] != b.waypoints[i])
            return false;
    return true;
}

SphereScene cluttered(std::uint64_t seed)
{
    return gen_scenario1(seed, 0).scene;
}

}  // namespace

TEST_CASE("tree bookkeeping")
{
    Tree t(v3(1, 0, 0));
    CHECK(t.size() == 1);
    CHECK(t.parent(0) == Tree::kNoParent);
    const auto a = t.add(v3(0, 1, 0), 0);
    const auto b = t.add(v3(0, 0, 1), a);
    CHECK(t.nearest(v3(0, 0.1, 0.9)) == b);
    CHECK(t.within(v3(1, 0, 0), 1.5).size() == 3);
    CHECK(t.within(v3(1, 0, 0), 0.5).size() == 1);
    const auto chain = t.path_from_root(b);
    REQUIRE(chain.size() == 3);
    CHECK(chain[0] == v3(1, 0, 0));
    CHECK(chain[2] == v3(0, 0, 1));
    CHECK_THROWS_AS(t.add(v3(0, 0, 1), 7), ContractError);
    CHECK_THROWS_AS(t.add(Config::Zero(2), 0), ContractError);
}

TEST_CASE("uniform manifold sampling")
{
    SphereConstraint sys;
    EmptyWorld empty;
    Rng rng(1);

    SUBCASE("projection mode")
    {
        UniformSampler s(sys, empty);
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (int i = 0; i < 10000; ++i) {
            const Config q = s.sample(rng);
            CHECK(sys.on_manifold(q));
            mean += Eigen::Vector3d(q[0], q[1], q[2]);
        }
        CHECK((mean / 10000.0).norm() < 0.1);
    }

    SUBCASE("atlas mode")
    {
        Atlas atlas(sys);
        atlas.get_chart(v3(1, 0, 0));
        atlas.get_chart(v3(-1, 0, 0));
        atlas.get_chart(v3(0, 0, 1));
        UniformSampler s(sys, empty, &atlas);
        for (int i = 0; i < 2000; ++i)
            CHECK(sys.on_manifold(s.sample(rng)));
    }

    SUBCASE("blocked hemisphere")
    {
        Block cap;
        cap.center = Eigen::Vector3d(0, 0, 1);
        cap.half_a = cap.half_b = std::numbers::pi / 2;
        SphereScene scene({cap}, 0);
        UniformSampler s(sys, scene);
        for (int i = 0; i < 2000; ++i)
            CHECK(s.sample(rng)[2] <= 0.0);
    }

    SUBCASE("fully blocked")
    {
        Strip shell;
        shell.width = 2 * std::numbers::pi;
        SphereScene scene({shell}, 0);
        UniformSampler s(sys, scene);
        CHECK_THROWS_AS(s.sample(rng), SamplingError);
    }
}

TEST_CASE("path checker")
{
    SphereConstraint sys;
    EmptyWorld w;
    const Config a = v3(1, 0, 0), b = v3(0, 1, 0);
    CHECK(check_path({a, b}, sys, w, a, b, 0.1) == std::nullopt);
    CHECK(check_path({}, sys, w, a, b, 0.1).has_value());
    CHECK(check_path({b}, sys, w, a, b, 0.1).has_value());
    CHECK(check_path({a}, sys, w, a, b, 0.1).has_value());
    CHECK(check_path({a, v3(0, 1.2, 0), b}, sys, w, a, b, 0.1).has_value());
}

TEST_CASE("rrt_connect trivial query")
{
    SphereConstraint sys;
    EmptyWorld w;
    Integrator integ(Adherence::Atlas, sys, w);
    UniformSampler us(sys, w);
    Rng rng(1);
    const PlanResult r = rrt_connect(make_problem(sys, w, v3(0, 0, 1), v3(0, 0, 1)), classical_rrt_sampler(us),
                                     integ, rng);
    CHECK(r.success);
    CHECK(r.iterations == 0);
    CHECK(r.path.waypoints.size() == 1);

    PlanProblem bad = make_problem(sys, w, v3(0, 0, 1), v3(0, 0, 2));
    CHECK_THROWS_AS(rrt_connect(bad, classical_rrt_sampler(us), integ, rng), ContractError);
}

TEST_CASE("rrt_connect on the obstacle-free sphere")
{
    SphereConstraint sys;
    EmptyWorld w;
    UniformSampler us(sys, w);
    Rng pairs(5);
    int solved = 0;
    for (int t = 0; t < 100; ++t) {
        const Config a = random_unit_vector(pairs), b = random_unit_vector(pairs);
        Integrator integ(Adherence::Atlas, sys, w);
        Rng rng(derive_seed(9, static_cast<std::uint64_t>(t)));
        const PlanResult r = rrt_connect(make_problem(sys, w, a, b), classical_rrt_sampler(us), integ, rng);
        if (!r.success)
            continue;
        ++solved;
        CHECK(check_path(r.path.waypoints, sys, w, a, b, integ.params().goal_tolerance()) == std::nullopt);
        CHECK(r.path.length >= great_circle(a, b) - integ.params().goal_tolerance() - 1e-3);
    }
    CHECK(solved == 100);
}

TEST_CASE("rrt_connect in clutter: valid paths, determinism, every adherence")
{
    SphereConstraint sys;
    const SceneRecord rec = gen_scenario1(77, 5);
    const SphereScene& scene = rec.scene;
    for (Adherence a : {Adherence::Projection, Adherence::Atlas, Adherence::TangentBundle}) {
        CAPTURE(to_string(a));
        for (const ProblemPair& pp : rec.pairs) {
            Path first;
            for (int rep = 0; rep < 2; ++rep) {
                Integrator integ(a, sys, scene);
                UniformSampler us(sys, scene, integ.atlas());
                Rng rng(1234);
                const PlanResult r =
                    rrt_connect(make_problem(sys, scene, pp.init, pp.goal), classical_rrt_sampler(us), integ, rng);
                REQUIRE(r.success);
                CHECK(check_path(r.path.waypoints, sys, scene, pp.init, pp.goal, integ.params().goal_tolerance()) ==
                      std::nullopt);
                if (rep == 0)
                    first = r.path;
                else
                    CHECK(same_path(first, r.path));
            }
        }
    }
}

TEST_CASE("fmt_star adjacent endpoints use the direct edge")
{
    SphereConstraint sys;
    EmptyWorld w;
    Integrator integ(Adherence::Projection, sys, w);
    UniformSampler us(sys, w);
    Rng rng(3);
    const Config a = v3(1, 0, 0);
    const Config b = from_lon_lat(0.2, 0.0);
    const PlanResult r = fmt_star(make_problem(sys, w, a, b), classical_fmt_sampler(us), integ, {}, rng);
    REQUIRE(r.success);
    std::vector<Config> direct = integ.steer(a, b).states;
    direct.push_back(b);
    REQUIRE(r.path.waypoints.size() == direct.size());
    for (std::size_t i = 0; i < direct.size(); ++i)
        CHECK((r.path.waypoints[i] - direct[i]).norm() < 1e-12);
}

TEST_CASE("fmt_star on the obstacle-free sphere is near-geodesic and beats rrt_connect")
{
    SphereConstraint sys;
    EmptyWorld w;
    UniformSampler us(sys, w);
    Rng pairs(8);
    int shorter = 0;
    for (int t = 0; t < 50; ++t) {
        const Config a = random_unit_vector(pairs), b = random_unit_vector(pairs);
        Integrator fi(Adherence::Projection, sys, w);
        Rng rf(derive_seed(1, static_cast<std::uint64_t>(t)));
        const PlanResult f = fmt_star(make_problem(sys, w, a, b), classical_fmt_sampler(us), fi, {}, rf);
        REQUIRE(f.success);
        CHECK(check_path(f.path.waypoints, sys, w, a, b, fi.params().goal_tolerance()) == std::nullopt);
        CHECK(f.path.length <= 1.2 * great_circle(a, b) + 1e-9);

        Integrator ri(Adherence::Projection, sys, w);
        Rng rr(derive_seed(2, static_cast<std::uint64_t>(t)));
        const PlanResult r = rrt_connect(make_problem(sys, w, a, b), classical_rrt_sampler(us), ri, rr);
        REQUIRE(r.success);
        shorter += f.path.length <= r.path.length;
    }
    MESSAGE("fmt_star shorter than rrt_connect in " << shorter << "/50");
    CHECK(shorter >= 40);
}

TEST_CASE("fmt_star in clutter")
{
    SphereConstraint sys;
    const SceneRecord rec = gen_scenario1(78, 5);
    for (const ProblemPair& pp : rec.pairs) {
        Integrator integ(Adherence::Atlas, sys, rec.scene);
        UniformSampler us(sys, rec.scene);
        Rng rng(5), rng2(5);
        const PlanProblem prob = make_problem(sys, rec.scene, pp.init, pp.goal);
        const PlanResult r = fmt_star(prob, classical_fmt_sampler(us), integ, {}, rng);
        REQUIRE(r.success);
        CHECK(check_path(r.path.waypoints, sys, rec.scene, pp.init, pp.goal, integ.params().goal_tolerance()) ==
              std::nullopt);
        Integrator integ2(Adherence::Atlas, sys, rec.scene);
        const PlanResult r2 = fmt_star(prob, classical_fmt_sampler(us), integ2, {}, rng2);
        CHECK(same_path(r.path, r2.path));
    }
}

TEST_CASE("fmt_star grows the sample set when the batch is too sparse")
{
    SphereConstraint sys;
    EmptyWorld w;
    Integrator integ(Adherence::Projection, sys, w);
    UniformSampler us(sys, w);
    Rng rng(2);
    FmtParams fp;
    fp.n_init = 2;
    fp.radius = 0.4;
    PlanProblem prob = make_problem(sys, w, v3(1, 0, 0), v3(-1, 0, 0));
    const PlanResult r = fmt_star(prob, classical_fmt_sampler(us), integ, fp, rng);
    CHECK(r.success);
    CHECK(r.iterations > 0);

    prob.max_iters = 10;
    Integrator integ2(Adherence::Projection, sys, w);
    CHECK_FALSE(fmt_star(prob, classical_fmt_sampler(us), integ2, fp, rng).success);
}

TEST_CASE("shortcut smoothing")
{
    SUBCASE("straight path on a plane is unchanged")
    {
        Plane plane;
        EmptyWorld w;
        Integrator integ(Adherence::Projection, plane, w);
        Path p;
        for (int i = 0; i <= 20; ++i)
            p.waypoints.push_back(v3(0.05 * i, 0, 0));
        p.length = path_length(p.waypoints);
        Rng rng(1);
        const Path s = shortcut_smooth(p, integ, 200, rng);
        CHECK(std::abs(s.length - p.length) < 1e-9);
    }

    SUBCASE("zigzag on the sphere gets shorter")
    {
        SphereConstraint sys;
        EmptyWorld w;
        Integrator integ(Adherence::Projection, sys, w);
        const Config a = v3(1, 0, 0), mid = v3(1, 1, 1).normalized(), b = v3(0, 1, 0);
        Path p;
        p.waypoints = integ.steer(a, mid).states;
        const Motion second = integ.steer(p.waypoints.back(), b);
        p.waypoints.insert(p.waypoints.end(), second.states.begin() + 1, second.states.end());
        p.waypoints.push_back(b);
        p.length = path_length(p.waypoints);
        Rng rng(2);
        const Path s = shortcut_smooth(p, integ, 100, rng);
        CHECK(s.length < p.length - 1e-3);
        CHECK(check_path(s.waypoints, sys, w, a, b, integ.params().goal_tolerance()) == std::nullopt);
    }

    SUBCASE("property: smoothing preserves path invariants")
    {
        SphereConstraint sys;
        const SceneRecord rec = gen_scenario1(79, 100);
        Integrator integ(Adherence::Projection, sys, rec.scene);
        UniformSampler us(sys, rec.scene);
        Rng rng(3);
        int checked = 0;
        for (const ProblemPair& pp : rec.pairs) {
            const PlanResult r =
                rrt_connect(make_problem(sys, rec.scene, pp.init, pp.goal), classical_rrt_sampler(us), integ, rng);
            if (!r.success)
                continue;
            const Path s = shortcut_smooth(r.path, integ, 50, rng);
            CHECK(s.length <= r.path.length + 1e-12);
            CHECK(check_path(s.waypoints, sys, rec.scene, pp.init, pp.goal, integ.params().goal_tolerance()) ==
                  std::nullopt);
            ++checked;
        }
        CHECK(checked >= 95);
    }
}
