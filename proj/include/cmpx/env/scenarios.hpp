#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cmpx/env/scene.hpp"

namespace cmpx {

struct Scenario1Params {
    std::size_t n_obstacles = 500;
    double half_min = 0.03;   ///< block angular half-width range (rad)
    double half_max = 0.06;
    double radial_half = 0.1;
};

struct Scenario2Params {
    std::size_t n_strips = 4;
    double gap_width = 0.25;    ///< latitude extent of each passage (rad)
    double strip_width = 0.3;   ///< longitude extent of each strip (rad)
    double cap_half = 0.55;     ///< polar cap half-width (rad)
    double radial_half = 0.1;
    int min_gaps = 1;
    int max_gaps = 2;
    /// Integrator step; passages narrower than twice this are rejected.
    double gamma = 0.05;
};

struct ProblemPair {
    Config init;
    Config goal;
};

/// One generated world with its start/goal pairs.
struct SceneRecord {
    int scenario = 1;
    SphereScene scene;
    std::vector<ProblemPair> pairs;
    std::size_t rejected_pairs = 0;  ///< endpoint pairs dropped by the feasibility filter
    Scenario1Params params1;
    Scenario2Params params2;
};

/// Latitude/longitude raster of the free unit sphere with connected-component labels.
class SurfaceConnectivity {
public:
    explicit SurfaceConnectivity(const CollisionWorld& world, int lat_cells = 180, int lon_cells = 360);

    /// True iff both points lie in the same free component.
    bool connected(const Eigen::Vector3d& a, const Eigen::Vector3d& b) const;
    int label(const Eigen::Vector3d& q) const;
    int component_count() const { return components_; }

private:
    int cell(const Eigen::Vector3d& q) const;

    int lat_cells_;
    int lon_cells_;
    std::vector<int> labels_;  // -1 for occupied
    int components_ = 0;
};

/// Randomly placed blocks; endpoints sampled by rejection and filtered for connectivity.
SceneRecord gen_scenario1(std::uint64_t seed, std::size_t n_pairs, const Scenario1Params& params = {});

/// Evenly spaced longitude strips pierced by latitude passages, plus polar caps; endpoints are
/// placed in opposite longitudinal cells so that every solution crosses strips.
SceneRecord gen_scenario2(std::uint64_t seed, std::size_t n_pairs, const Scenario2Params& params = {});

/// Builds the scenario-2 world without sampling endpoints.
SphereScene build_scenario2_scene(std::uint64_t seed, const Scenario2Params& params,
                                  std::vector<double>* strip_lons = nullptr);

/// Samples the great-circle arc a -> b at the given spacing and reports any collision.
bool arc_in_collision(const CollisionWorld& world, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                      double spacing = 0.005);

/// Uniform point on the unit sphere.
Eigen::Vector3d random_unit_vector(Rng& rng);

/// Fraction of uniformly sampled unit-sphere points that are collision-free.
double free_fraction(const CollisionWorld& world, std::size_t samples, Rng& rng);

// Scene files: JSON text with seed, parameter block, obstacles and pairs.
void save_scene(const SceneRecord& rec, const std::filesystem::path& path);
SceneRecord load_scene(const std::filesystem::path& path);

// Voxel sidecar: magic "CMPXVOX1", uint32 LE resolution, then ceil(R^3 / 8) bytes of
// row-major occupancy bits, cell index b stored in byte b / 8 at bit b % 8 (LSB first).
void save_voxels(const VoxelGrid& grid, const std::filesystem::path& path);
VoxelGrid load_voxels(const std::filesystem::path& path);

}  // namespace cmpx
