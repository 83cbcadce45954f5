#include "cmpx/env/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cmpx/core/stats.hpp"

namespace cmpx {

std::pair<Eigen::Vector3d, Eigen::Vector3d> local_frame(const Eigen::Vector3d& c)
{
    Eigen::Vector3d east = Eigen::Vector3d::UnitZ().cross(c);
    if (east.norm() < 1e-9)
        east = Eigen::Vector3d::UnitX();
    east.normalize();
    Eigen::Vector3d north = c.cross(east).normalized();
    return {east, north};
}

double longitude(const Eigen::Vector3d& q) { return std::atan2(q.y(), q.x()); }

double latitude(const Eigen::Vector3d& q)
{
    const double r = q.norm();
    return r > 0.0 ? std::asin(std::clamp(q.z() / r, -1.0, 1.0)) : 0.0;
}

Eigen::Vector3d from_lon_lat(double lon, double lat)
{
    return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

bool Block::contains(const Eigen::Vector3d& q) const
{
    const double r = q.norm();
    if (std::abs(r - 1.0) > radial_half || r == 0.0)
        return false;
    const Eigen::Vector3d d = q / r;
    const double cz = d.dot(center);
    if (cz <= 0.0)
        return false;
    const auto [east, north] = local_frame(center);
    return std::abs(std::atan2(d.dot(east), cz)) <= half_a &&
           std::abs(std::atan2(d.dot(north), cz)) <= half_b;
}

bool Strip::contains(const Eigen::Vector3d& q) const
{
    const double r = q.norm();
    if (std::abs(r - 1.0) > radial_half || r == 0.0)
        return false;
    if (width < 2.0 * std::numbers::pi) {
        double off = std::fmod(longitude(q) - lon_min, 2.0 * std::numbers::pi);
        if (off < 0.0)
            off += 2.0 * std::numbers::pi;
        if (off > width)
            return false;
    }
    const double lat = latitude(q);
    return std::none_of(gaps.begin(), gaps.end(),
                        [&](const auto& g) { return lat >= g.first && lat <= g.second; });
}

bool obstacle_contains(const Obstacle& o, const Eigen::Vector3d& q)
{
    return std::visit([&](const auto& ob) { return ob.contains(q); }, o);
}

Eigen::Vector3d VoxelGrid::cell_center(int i, int j, int k)
{
    const double h = cell_size();
    return {-kExtent + (i + 0.5) * h, -kExtent + (j + 0.5) * h, -kExtent + (k + 0.5) * h};
}

bool VoxelGrid::lookup(const Eigen::Vector3d& q) const
{
    const double h = cell_size();
    int idx[3];
    for (int a = 0; a < 3; ++a) {
        const double t = (q[a] + kExtent) / h;
        if (!(t >= 0.0) || t >= kResolution)
            return false;
        idx[a] = static_cast<int>(t);
    }
    return occupied(idx[0], idx[1], idx[2]);
}

std::size_t VoxelGrid::count() const
{
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](auto c) { return c != 0; }));
}

SphereScene::SphereScene(std::vector<Obstacle> obstacles, std::uint64_t seed)
    : obstacles_(std::move(obstacles)), seed_(seed)
{
    for (const Obstacle& o : obstacles_) {
        if (const auto* b = std::get_if<Block>(&o)) {
            const double reach = std::hypot(b->half_a, b->half_b) + 1e-6;
            cones_.push_back({b->center, reach < std::numbers::pi / 2 ? std::cos(reach) : 0.0});
        } else {
            cones_.push_back({Eigen::Vector3d::Zero(), -2.0});
        }
    }
    voxels_ = voxelize(*this);
}

bool SphereScene::in_collision(const Eigen::Vector3d& q) const
{
    ++counters().collision_checks;
    const double r = q.norm();
    if (r == 0.0)
        return false;
    const Eigen::Vector3d d = q / r;
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
        if (cones_[i].cos_bound > -1.5 && d.dot(cones_[i].axis) < cones_[i].cos_bound)
            continue;
        if (obstacle_contains(obstacles_[i], q))
            return true;
    }
    return false;
}

bool SphereScene::in_collision(const Config& q) const
{
    if (q.size() != 3)
        throw ContractError("SphereScene: configuration must be 3-dimensional");
    return in_collision(Eigen::Vector3d(q[0], q[1], q[2]));
}

VoxelGrid voxelize(const CollisionWorld& world)
{
    VoxelGrid grid;
    constexpr int R = VoxelGrid::kResolution;
    Config c(3);
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < R; ++j)
            for (int k = 0; k < R; ++k) {
                c = VoxelGrid::cell_center(i, j, k);
                grid.cells[VoxelGrid::index(i, j, k)] = world.in_collision(c) ? 1 : 0;
            }
    return grid;
}

}  // namespace cmpx
