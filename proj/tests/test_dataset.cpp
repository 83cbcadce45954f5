#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

#include "cmpx/env/dataset.hpp"
#include "sphere_fixtures.hpp"

using namespace cmpx;
using cmpx::testing::v3;

namespace {

std::vector<Config> quarter_arc(int steps)
{
    std::vector<Config> out;
    for (int i = 0; i <= steps; ++i) {
        const double t = 0.5 * std::numbers::pi * i / steps;
        out.push_back(v3(std::cos(t), std::sin(t), 0));
    }
    return out;
}

std::filesystem::path temp_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("cmpx_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

bool same_tuples(const GeneratorDataset& a, const GeneratorDataset& b)
{
    if (a.tuples.size() != b.tuples.size())
        return false;
    for (std::size_t i = 0; i < a.tuples.size(); ++i) {
        const GeneratorTuple& x = a.tuples[i];
        const GeneratorTuple& y = b.tuples[i];
        if (x.scene_id != y.scene_id || x.q_curr != y.q_curr || x.q_targ != y.q_targ || x.q_next != y.q_next)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("key waypoints")
{
    const Config a = v3(1, 0, 0);
    const Config b = v3(0, 1, 0);
    CHECK(key_waypoints({a, b}, 0.25).size() == 2);
    CHECK_THROWS_AS(key_waypoints({a, b}, 0.0), ContractError);

    const std::vector<Config> dense = quarter_arc(200);
    const auto keys = key_waypoints(dense, 0.25);
    REQUIRE(keys.size() >= 3);
    CHECK(keys.front() == dense.front());
    CHECK((keys.back() - b).norm() < 1e-15);
    // Arc length pi/2: the 0.06 left after the sixth stride is too short, so that waypoint is dropped.
    CHECK(keys.size() == 7);
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
        const double d = (keys[i + 1] - keys[i]).norm();
        CHECK(d > 0.24);
        CHECK(d < 0.4);
    }
}

TEST_CASE("oracle dataset")
{
    const std::vector<SceneRecord> scenes{gen_scenario1(5, 6), gen_scenario1(6, 4)};
    OracleOptions o;
    const DatasetBuild build = gen_dataset(scenes, {3, 8}, o, 11);
    REQUIRE(build.outcomes.size() == 10);
    CHECK(build.outcomes.front().scene_id == 3);
    CHECK(build.outcomes.back().scene_id == 8);
    CHECK(build.success_rate() >= 0.9);
    CHECK(build.data.voxels.size() == 2);
    CHECK(build.data.voxels.at(3) == scenes[0].scene.voxels());

    std::size_t expected = 0;
    for (const auto& p : build.paths)
        expected += p.size() - 1;
    CHECK(build.data.tuples.size() == expected);
    CHECK(build.paths.size() == 2 * build.solved());

    std::size_t off = 0;
    for (const auto& p : build.paths) {
        const SceneRecord& rec = build.data.tuples[off].scene_id == 3 ? scenes[0] : scenes[1];
        for (const Config& q : p) {
            CHECK(std::abs(q.norm() - 1.0) < 1e-3);
            CHECK(!rec.scene.in_collision(q));
        }
        for (std::size_t k = 0; k + 1 < p.size(); ++k) {
            const GeneratorTuple& t = build.data.tuples[off + k];
            CHECK(t.q_curr == p[k]);
            CHECK(t.q_next == p[k + 1]);
            CHECK(t.q_targ == p.back());
        }
        off += p.size() - 1;
    }
    // The second path of each pair is the first reversed.
    REQUIRE(build.paths.size() >= 2);
    CHECK(build.paths[0].front() == build.paths[1].back());

    SUBCASE("deterministic and independent of the job count")
    {
        OracleOptions o2 = o;
        o2.jobs = 2;
        CHECK(same_tuples(gen_dataset(scenes, {3, 8}, o, 11).data, build.data));
        CHECK(same_tuples(gen_dataset(scenes, {3, 8}, o2, 11).data, build.data));
    }
    SUBCASE("forward direction only")
    {
        OracleOptions o2 = o;
        o2.include_reverse = false;
        CHECK(gen_dataset(scenes, {3, 8}, o2, 11).paths.size() == build.solved());
    }
    SUBCASE("file roundtrip")
    {
        const auto dir = temp_dir("dataset");
        const auto path = save_dataset(build.data, dir);
        CHECK(path == dir / "dataset.jsonl");
        CHECK(std::filesystem::file_size(dir / "voxels" / "scene_3.vox") == 12 + 8000);
        const GeneratorDataset back = load_dataset(path);
        CHECK(same_tuples(back, build.data));
        CHECK(back.voxels == build.data.voxels);

        // Voxel references resolve relative to the dataset, so the directory can move.
        const auto moved = temp_dir("dataset_moved");
        std::filesystem::remove_all(moved);
        std::filesystem::rename(dir, moved);
        CHECK(same_tuples(load_dataset(moved / "dataset.jsonl"), build.data));
    }
    CHECK_THROWS_AS(gen_dataset(scenes, {1}, o, 11), ContractError);
}

TEST_CASE("dataset file errors")
{
    const auto dir = temp_dir("dataset_errors");
    CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), IoError);
    {
        std::ofstream out(dir / "bad.jsonl");
        out << "{\"scene_id\": 0, \"q_curr\": [1, 0, 0]}\n";
    }
    CHECK_THROWS_AS(load_dataset(dir / "bad.jsonl"), IoError);
    {
        std::ofstream out(dir / "bad.jsonl");
        out << "not json\n";
    }
    CHECK_THROWS_AS(load_dataset(dir / "bad.jsonl"), IoError);
    {
        std::ofstream out(dir / "bad.jsonl");
        out << R"({"scene_id":0,"voxel_ref":"voxels/a.vox","q_curr":[1,0,0],"q_targ":[0,1,0],"q_next":[0,0,1]})" << '\n'
            << R"({"scene_id":0,"voxel_ref":"voxels/b.vox","q_curr":[1,0,0],"q_targ":[0,1,0],"q_next":[0,0,1]})" << '\n';
    }
    CHECK_THROWS_AS(load_dataset(dir / "bad.jsonl"), IoError);
    {
        std::ofstream out(dir / "bad.jsonl");
        out << R"({"scene_id":0,"voxel_ref":"voxels/none.vox","q_curr":[1,0,0],"q_targ":[0,1,0],"q_next":[0,0,1]})"
            << '\n';
    }
    CHECK_THROWS_AS(load_dataset(dir / "bad.jsonl"), IoError);

    GeneratorDataset orphan;
    orphan.tuples.push_back({4, v3(1, 0, 0), v3(0, 1, 0), v3(0, 0, 1)});
    CHECK_THROWS_AS(save_dataset(orphan, dir), ContractError);
}

TEST_CASE("training set keeps scene ids and success")
{
    OracleOptions o;
    const TrainingSet set = gen_training_set(21, 2, 5, o);
    REQUIRE(set.scenes.size() == 2);
    CHECK(set.scene_ids == std::vector<std::size_t>{0, 1});
    CHECK(set.build.outcomes.size() == 10);
    CHECK(set.build.data.voxels.size() == 2);
    const TrainingSet again = gen_training_set(21, 2, 5, o);
    CHECK(same_tuples(again.build.data, set.build.data));
}
