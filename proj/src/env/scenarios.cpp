#include "cmpx/env/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>

#include <json.hpp>

namespace cmpx {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

Eigen::Vector3d random_unit_vector(Rng& rng)
{
    for (;;) {
        Eigen::Vector3d v(standard_normal(rng), standard_normal(rng), standard_normal(rng));
        const double n = v.norm();
        if (n > 1e-12)
            return v / n;
    }
}

double free_fraction(const CollisionWorld& world, std::size_t samples, Rng& rng)
{
    if (samples == 0)
        return 0.0;
    std::size_t free = 0;
    Config q(3);
    for (std::size_t i = 0; i < samples; ++i) {
        q = random_unit_vector(rng);
        if (!world.in_collision(q))
            ++free;
    }
    return static_cast<double>(free) / static_cast<double>(samples);
}

bool arc_in_collision(const CollisionWorld& world, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                      double spacing)
{
    const double angle = std::acos(std::clamp(a.dot(b), -1.0, 1.0));
    const int steps = std::max(1, static_cast<int>(std::ceil(angle / spacing)));
    Config q(3);
    for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        if (angle < 1e-12) {
            q = a;
        } else {
            // slerp
            const double sa = std::sin((1.0 - t) * angle) / std::sin(angle);
            const double sb = std::sin(t * angle) / std::sin(angle);
            q = sa * a + sb * b;
        }
        if (world.in_collision(q))
            return true;
    }
    return false;
}

SurfaceConnectivity::SurfaceConnectivity(const CollisionWorld& world, int lat_cells, int lon_cells)
    : lat_cells_(lat_cells), lon_cells_(lon_cells), labels_(static_cast<std::size_t>(lat_cells * lon_cells), -1)
{
    std::vector<char> free(labels_.size(), 0);
    Config q(3);
    for (int r = 0; r < lat_cells_; ++r) {
        const double lat = -kPi / 2 + (r + 0.5) * kPi / lat_cells_;
        for (int c = 0; c < lon_cells_; ++c) {
            const double lon = -kPi + (c + 0.5) * 2.0 * kPi / lon_cells_;
            q = from_lon_lat(lon, lat);
            free[static_cast<std::size_t>(r * lon_cells_ + c)] = world.in_collision(q) ? 0 : 1;
        }
    }
    std::deque<int> queue;
    for (int start = 0; start < static_cast<int>(labels_.size()); ++start) {
        if (!free[static_cast<std::size_t>(start)] || labels_[static_cast<std::size_t>(start)] >= 0)
            continue;
        const int id = components_++;
        labels_[static_cast<std::size_t>(start)] = id;
        queue.push_back(start);
        while (!queue.empty()) {
            const int cur = queue.front();
            queue.pop_front();
            const int r = cur / lon_cells_;
            const int c = cur % lon_cells_;
            auto visit = [&](int rr, int cc) {
                const auto idx = static_cast<std::size_t>(rr * lon_cells_ + cc);
                if (free[idx] && labels_[idx] < 0) {
                    labels_[idx] = id;
                    queue.push_back(static_cast<int>(idx));
                }
            };
            visit(r, (c + 1) % lon_cells_);
            visit(r, (c + lon_cells_ - 1) % lon_cells_);
            if (r + 1 < lat_cells_)
                visit(r + 1, c);
            if (r > 0)
                visit(r - 1, c);
        }
    }
}

int SurfaceConnectivity::cell(const Eigen::Vector3d& q) const
{
    int r = static_cast<int>(std::floor((latitude(q) + kPi / 2) / kPi * lat_cells_));
    r = std::clamp(r, 0, lat_cells_ - 1);
    int c = static_cast<int>(std::floor((longitude(q) + kPi) / (2.0 * kPi) * lon_cells_));
    c = ((c % lon_cells_) + lon_cells_) % lon_cells_;
    return r * lon_cells_ + c;
}

int SurfaceConnectivity::label(const Eigen::Vector3d& q) const
{
    return labels_[static_cast<std::size_t>(cell(q))];
}

bool SurfaceConnectivity::connected(const Eigen::Vector3d& a, const Eigen::Vector3d& b) const
{
    const int la = label(a);
    return la >= 0 && la == label(b);
}

SceneRecord gen_scenario1(std::uint64_t seed, std::size_t n_pairs, const Scenario1Params& params)
{
    if (!(params.half_min > 0.0) || params.half_max < params.half_min)
        throw ContractError("gen_scenario1: invalid half-width range");
    Rng rng(derive_seed(seed, 1));
    std::vector<Obstacle> obstacles;
    obstacles.reserve(params.n_obstacles);
    for (std::size_t i = 0; i < params.n_obstacles; ++i) {
        Block b;
        b.center = random_unit_vector(rng);
        b.half_a = uniform(rng, params.half_min, params.half_max);
        b.half_b = uniform(rng, params.half_min, params.half_max);
        b.radial_half = params.radial_half;
        obstacles.emplace_back(b);
    }
    SceneRecord rec;
    rec.scenario = 1;
    rec.params1 = params;
    rec.scene = SphereScene(std::move(obstacles), seed);

    const SurfaceConnectivity surface(rec.scene);
    const std::size_t budget = 1000 + 100 * n_pairs;
    std::size_t attempts = 0;
    auto draw_free = [&]() -> Eigen::Vector3d {
        for (;;) {
            if (++attempts > budget)
                throw GenerationError("gen_scenario1: rejection budget exhausted (scene overcrowded)");
            Eigen::Vector3d q = random_unit_vector(rng);
            if (!rec.scene.in_collision(q))
                return q;
        }
    };
    while (rec.pairs.size() < n_pairs) {
        const Eigen::Vector3d a = draw_free();
        const Eigen::Vector3d b = draw_free();
        if (!surface.connected(a, b)) {
            ++rec.rejected_pairs;
            continue;
        }
        rec.pairs.push_back({Config(a), Config(b)});
    }
    return rec;
}

SphereScene build_scenario2_scene(std::uint64_t seed, const Scenario2Params& p, std::vector<double>* strip_lons)
{
    if (p.n_strips < 2)
        throw ContractError("gen_scenario2: need at least two strips");
    if (!(p.gap_width > 2.0 * p.gamma) && p.max_gaps > 0)
        throw ContractError("gen_scenario2: passages must be wider than twice the step size");
    if (p.min_gaps < 0 || p.max_gaps < p.min_gaps)
        throw ContractError("gen_scenario2: invalid gap count range");
    const double spacing = 2.0 * kPi / static_cast<double>(p.n_strips);
    if (!(p.strip_width > 0.0 && p.strip_width < spacing))
        throw ContractError("gen_scenario2: strips overlap");

    Rng rng(derive_seed(seed, 2));
    const double phase = uniform(rng, -kPi, kPi);
    std::vector<Obstacle> obstacles;
    if (strip_lons)
        strip_lons->clear();
    for (std::size_t s = 0; s < p.n_strips; ++s) {
        const double center = phase + spacing * static_cast<double>(s);
        Strip strip;
        strip.lon_min = center - 0.5 * p.strip_width;
        strip.width = p.strip_width;
        strip.radial_half = p.radial_half;
        const int gaps = p.min_gaps + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(p.max_gaps - p.min_gaps + 1)));
        for (int g = 0; g < gaps; ++g) {
            const double c = uniform(rng, -0.6, 0.6);
            strip.gaps.emplace_back(c - 0.5 * p.gap_width, c + 0.5 * p.gap_width);
        }
        std::sort(strip.gaps.begin(), strip.gaps.end());
        obstacles.emplace_back(strip);
        if (strip_lons)
            strip_lons->push_back(center);
    }
    for (double z : {1.0, -1.0}) {
        Block cap;
        cap.center = Eigen::Vector3d(0.0, 0.0, z);
        cap.half_a = cap.half_b = p.cap_half;
        cap.radial_half = p.radial_half;
        obstacles.emplace_back(cap);
    }
    return SphereScene(std::move(obstacles), seed);
}

SceneRecord gen_scenario2(std::uint64_t seed, std::size_t n_pairs, const Scenario2Params& params)
{
    SceneRecord rec;
    rec.scenario = 2;
    rec.params2 = params;
    std::vector<double> lons;
    rec.scene = build_scenario2_scene(seed, params, &lons);

    const std::size_t n = params.n_strips;
    const std::size_t far = n / 2;
    const double spacing = 2.0 * kPi / static_cast<double>(n);
    const double half_w = 0.5 * params.strip_width;
    auto cell_range = [&](std::size_t cell) {
        return std::pair{lons[cell] + half_w, lons[cell] + spacing - half_w};
    };

    const SurfaceConnectivity surface(rec.scene);
    {
        const auto [a0, a1] = cell_range(0);
        const auto [b0, b1] = cell_range(far);
        if (!surface.connected(from_lon_lat(0.5 * (a0 + a1), 0.0), from_lon_lat(0.5 * (b0 + b1), 0.0)))
            throw GenerationError("gen_scenario2: start and goal cells are disconnected (no passages)");
    }

    Rng rng(derive_seed(seed, 3));
    constexpr double kMargin = 0.05;
    const double lat_max = 0.8;
    auto draw = [&](std::size_t cell) {
        const auto [lo, hi] = cell_range(cell);
        const double lon = uniform(rng, lo + kMargin, hi - kMargin);
        const double lat = std::asin(uniform(rng, std::sin(-lat_max), std::sin(lat_max)));
        return from_lon_lat(lon, lat);
    };
    const std::size_t budget = 1000 + 100 * n_pairs;
    std::size_t attempts = 0;
    while (rec.pairs.size() < n_pairs) {
        if (++attempts > budget)
            throw GenerationError("gen_scenario2: rejection budget exhausted");
        const Eigen::Vector3d a = draw(0);
        const Eigen::Vector3d b = draw(far);
        if (rec.scene.in_collision(a) || rec.scene.in_collision(b))
            continue;
        if (!arc_in_collision(rec.scene, a, b)) {
            ++rec.rejected_pairs;
            continue;
        }
        if (!surface.connected(a, b)) {
            ++rec.rejected_pairs;
            continue;
        }
        rec.pairs.push_back({Config(a), Config(b)});
    }
    return rec;
}

namespace {

using nlohmann::json;

json vec_json(const Eigen::VectorXd& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(v[i]);
    return a;
}

Eigen::VectorXd json_vec(const json& a)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

}  // namespace

void save_scene(const SceneRecord& rec, const std::filesystem::path& path)
{
    json j;
    j["format"] = "cmpx-scene";
    j["version"] = 1;
    j["seed"] = rec.scene.seed();
    j["scenario"] = rec.scenario;
    if (rec.scenario == 1) {
        j["params"] = {{"n_obstacles", rec.params1.n_obstacles},
                       {"half_min", rec.params1.half_min},
                       {"half_max", rec.params1.half_max},
                       {"radial_half", rec.params1.radial_half}};
    } else {
        j["params"] = {{"n_strips", rec.params2.n_strips},       {"gap_width", rec.params2.gap_width},
                       {"strip_width", rec.params2.strip_width}, {"cap_half", rec.params2.cap_half},
                       {"radial_half", rec.params2.radial_half}, {"min_gaps", rec.params2.min_gaps},
                       {"max_gaps", rec.params2.max_gaps},       {"gamma", rec.params2.gamma}};
    }
    json obs = json::array();
    for (const Obstacle& o : rec.scene.obstacles()) {
        if (const auto* b = std::get_if<Block>(&o)) {
            obs.push_back({{"kind", "block"},
                           {"center", vec_json(b->center)},
                           {"half_a", b->half_a},
                           {"half_b", b->half_b},
                           {"radial_half", b->radial_half}});
        } else {
            const auto& s = std::get<Strip>(o);
            json gaps = json::array();
            for (const auto& [lo, hi] : s.gaps)
                gaps.push_back({lo, hi});
            obs.push_back({{"kind", "strip"},
                           {"lon_min", s.lon_min},
                           {"width", s.width},
                           {"gaps", gaps},
                           {"radial_half", s.radial_half}});
        }
    }
    j["obstacles"] = obs;
    json pairs = json::array();
    for (const ProblemPair& p : rec.pairs)
        pairs.push_back({{"init", vec_json(p.init)}, {"goal", vec_json(p.goal)}});
    j["pairs"] = pairs;
    j["rejected_pairs"] = rec.rejected_pairs;

    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write scene file " + path.string());
    out << j.dump(1) << '\n';
}

SceneRecord load_scene(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read scene file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("malformed scene file " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "cmpx-scene")
        throw IoError("not a scene file: " + path.string());
    SceneRecord rec;
    rec.scenario = j.at("scenario").get<int>();
    const json& p = j.at("params");
    if (rec.scenario == 1) {
        rec.params1.n_obstacles = p.at("n_obstacles").get<std::size_t>();
        rec.params1.half_min = p.at("half_min").get<double>();
        rec.params1.half_max = p.at("half_max").get<double>();
        rec.params1.radial_half = p.at("radial_half").get<double>();
    } else {
        rec.params2.n_strips = p.at("n_strips").get<std::size_t>();
        rec.params2.gap_width = p.at("gap_width").get<double>();
        rec.params2.strip_width = p.at("strip_width").get<double>();
        rec.params2.cap_half = p.at("cap_half").get<double>();
        rec.params2.radial_half = p.at("radial_half").get<double>();
        rec.params2.min_gaps = p.at("min_gaps").get<int>();
        rec.params2.max_gaps = p.at("max_gaps").get<int>();
        rec.params2.gamma = p.at("gamma").get<double>();
    }
    std::vector<Obstacle> obstacles;
    for (const json& o : j.at("obstacles")) {
        const std::string kind = o.at("kind").get<std::string>();
        if (kind == "block") {
            Block b;
            b.center = json_vec(o.at("center"));
            b.half_a = o.at("half_a").get<double>();
            b.half_b = o.at("half_b").get<double>();
            b.radial_half = o.at("radial_half").get<double>();
            obstacles.emplace_back(b);
        } else if (kind == "strip") {
            Strip s;
            s.lon_min = o.at("lon_min").get<double>();
            s.width = o.at("width").get<double>();
            s.radial_half = o.at("radial_half").get<double>();
            for (const json& g : o.at("gaps"))
                s.gaps.emplace_back(g.at(0).get<double>(), g.at(1).get<double>());
            obstacles.emplace_back(s);
        } else {
            throw IoError("unknown obstacle kind '" + kind + "'");
        }
    }
    rec.scene = SphereScene(std::move(obstacles), j.at("seed").get<std::uint64_t>());
    for (const json& pr : j.at("pairs"))
        rec.pairs.push_back({json_vec(pr.at("init")), json_vec(pr.at("goal"))});
    rec.rejected_pairs = j.value("rejected_pairs", std::size_t{0});
    return rec;
}

void save_voxels(const VoxelGrid& grid, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write voxel file " + path.string());
    out.write("CMPXVOX1", 8);
    const std::uint32_t r = VoxelGrid::kResolution;
    const unsigned char rb[4] = {static_cast<unsigned char>(r & 0xff), static_cast<unsigned char>((r >> 8) & 0xff),
                                 static_cast<unsigned char>((r >> 16) & 0xff),
                                 static_cast<unsigned char>((r >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(rb), 4);
    std::vector<unsigned char> bits((grid.cells.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < grid.cells.size(); ++i)
        if (grid.cells[i])
            bits[i / 8] |= static_cast<unsigned char>(1u << (i % 8));
    out.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
}

VoxelGrid load_voxels(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read voxel file " + path.string());
    char magic[8];
    unsigned char rb[4];
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(rb), 4);
    if (!in || std::string(magic, 8) != "CMPXVOX1")
        throw IoError("not a voxel file: " + path.string());
    const std::uint32_t r = rb[0] | (rb[1] << 8) | (rb[2] << 16) | (static_cast<std::uint32_t>(rb[3]) << 24);
    if (r != VoxelGrid::kResolution)
        throw IoError("voxel resolution mismatch in " + path.string());
    VoxelGrid grid;
    std::vector<unsigned char> bits((grid.cells.size() + 7) / 8, 0);
    in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
    if (!in)
        throw IoError("truncated voxel file " + path.string());
    for (std::size_t i = 0; i < grid.cells.size(); ++i)
        grid.cells[i] = (bits[i / 8] >> (i % 8)) & 1u;
    return grid;
}

}  // namespace cmpx
