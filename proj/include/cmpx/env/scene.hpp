#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cmpx/core/world.hpp"

namespace cmpx {

/// Patch of the sphere shell centered at a unit direction, bounded by angular half-widths
/// measured in the local east/north frame of the center.
struct Block {
    Eigen::Vector3d center;  ///< unit vector
    double half_a = 0.05;    ///< half-width along the local east axis (rad)
    double half_b = 0.05;    ///< half-width along the local north axis (rad)
    double radial_half = 0.1;

    bool contains(const Eigen::Vector3d& q) const;
};

/// Longitude band [lon_min, lon_min + width] of the shell, interrupted by latitude gaps.
struct Strip {
    double lon_min = 0.0;
    double width = 0.3;                               ///< rad; >= 2 pi covers every longitude
    std::vector<std::pair<double, double>> gaps;      ///< latitude intervals [lo, hi] that are free
    double radial_half = 0.1;

    bool contains(const Eigen::Vector3d& q) const;
};

using Obstacle = std::variant<Block, Strip>;

bool obstacle_contains(const Obstacle& o, const Eigen::Vector3d& q);

/// Occupancy grid over the cube [-extent, extent]^3, index ((i * R) + j) * R + k for (x, y, z).
struct VoxelGrid {
    static constexpr int kResolution = 40;
    static constexpr double kExtent = 1.2;

    std::vector<std::uint8_t> cells = std::vector<std::uint8_t>(kResolution * kResolution * kResolution, 0);

    static double cell_size() { return 2.0 * kExtent / kResolution; }
    static Eigen::Vector3d cell_center(int i, int j, int k);
    static std::size_t index(int i, int j, int k)
    {
        return (static_cast<std::size_t>(i) * kResolution + j) * kResolution + k;
    }

    bool occupied(int i, int j, int k) const { return cells[index(i, j, k)] != 0; }
    /// Occupancy of the cell containing q; points outside the cube are free.
    bool lookup(const Eigen::Vector3d& q) const;
    std::size_t count() const;

    bool operator==(const VoxelGrid&) const = default;
};

/// Sphere benchmark world: analytic obstacles plus their voxel rendering.
class SphereScene final : public CollisionWorld {
public:
    SphereScene() = default;
    SphereScene(std::vector<Obstacle> obstacles, std::uint64_t seed);

    bool in_collision(const Config& q) const override;
    bool in_collision(const Eigen::Vector3d& q) const;

    const std::vector<Obstacle>& obstacles() const { return obstacles_; }
    std::uint64_t seed() const { return seed_; }
    const VoxelGrid& voxels() const { return voxels_; }

private:
    struct Cone {
        Eigen::Vector3d axis;
        double cos_bound;
    };

    std::vector<Obstacle> obstacles_;
    std::vector<Cone> cones_;  // bounding cones, blocks only
    std::uint64_t seed_ = 0;
    VoxelGrid voxels_;
};

/// Cell marked occupied iff its center is in collision.
VoxelGrid voxelize(const CollisionWorld& world);

/// Local east/north frame of a unit vector (east = z x c, falling back to x at the poles).
std::pair<Eigen::Vector3d, Eigen::Vector3d> local_frame(const Eigen::Vector3d& c);

double longitude(const Eigen::Vector3d& q);
double latitude(const Eigen::Vector3d& q);
Eigen::Vector3d from_lon_lat(double lon, double lat);

}  // namespace cmpx
