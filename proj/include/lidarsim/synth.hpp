#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lidarsim/dataset.hpp"
#include "lidarsim/geometry.hpp"
#include "lidarsim/reconstruct.hpp"

namespace lidarsim::synth {

enum class FixtureKind { Wall, StreetBox, FiveSensor };

FixtureKind kind_from_string(const std::string& name);

/// Front-facing rectangular plate at constant camera-frame depth, covering an
/// inclusive pixel rectangle (plate edges sit 0.3 px outside the rectangle so
/// pixel-center rays never graze them).
struct Plate {
    double z = 0;
    int u0 = 0, u1 = 0, v0 = 0, v1 = 0;
    int class_id = 0;
    int instance_id = 0;
};

/// Closed-form scene parameters, written to params.json so tests can verify
/// the rendered rasters against an independent formula.
struct SceneSpec {
    std::optional<double> ground_y;    // horizontal plane y = ground_y (camera y down)
    std::optional<double> wall_z;      // frontal wall plane
    double wall_top_y = 0;             // wall spans [wall_top_y, ground_y]
    std::vector<Plate> plates;
};

struct FixtureOptions {
    int image_size = 64;
    int frames = 0;  // 0 = per-kind default
    std::uint64_t seed = 42;
};

struct FixtureResult {
    std::filesystem::path manifest_path;
    std::vector<std::filesystem::path> pattern_paths;  // one per sensor
    std::filesystem::path trajectory_path;
    std::filesystem::path params_path;
};

FixtureResult generate_fixture(FixtureKind kind, const std::filesystem::path& out_dir,
                               const FixtureOptions& options);

/// z-depth (0 = sky) of a pixel ray under the closed-form scene description.
double closed_form_depth(const SceneSpec& spec, const geometry::CameraIntrinsics& k, int u,
                         int v);

/// Triangle soup realizing the scene (the second, independent route used by
/// the renderer and the scan caster).
std::vector<reconstruct::Triangle> scene_triangles(const SceneSpec& spec,
                                                   const geometry::CameraIntrinsics& k);

/// Ray targeting the center of pixel (u, v), expressed as sensor-frame
/// azimuth/elevation under the standard lidar-to-camera axis permutation.
reconstruct::ScanRay ray_for_pixel(const geometry::CameraIntrinsics& k, double u, double v);

/// Axis permutation taking LiDAR coords (x forward, y left, z up) to camera
/// coords (z forward, x right, y down).
geometry::RigidTransform lidar_to_camera_axes();

SceneSpec load_scene_spec(const std::filesystem::path& params_path, int frame_index);

}  // namespace lidarsim::synth
