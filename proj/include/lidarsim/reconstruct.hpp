#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "lidarsim/geometry.hpp"
#include "lidarsim/image.hpp"
#include "lidarsim/lidar_image.hpp"

namespace lidarsim::reconstruct {

struct ScanRay {
    double azimuth = 0;    // radians, about sensor +z (x forward, y left, z up)
    double elevation = 0;  // radians above the xy plane
    double time_offset = 0;
};

struct ScanPattern {
    std::vector<ScanRay> rays;
    double period = 0.1;  // seconds per scan
};

/// Unit direction in the sensor frame.
Eigen::Vector3d ray_direction(double azimuth, double elevation);

struct TimedPose {
    double timestamp = 0;
    geometry::RigidTransform world_from_sensor;
};

struct EgoTrajectory {
    std::vector<TimedPose> poses;  // strictly increasing timestamps
};

/// Linear translation + spherical-linear rotation interpolation, clamped at
/// the trajectory ends.
geometry::RigidTransform interpolate_pose(const EgoTrajectory& traj, double t);

/// Scene proxy answering ray queries with a hit distance (meters) or a miss.
class DepthProvider {
public:
    virtual ~DepthProvider() = default;
    virtual std::optional<double> query(const Eigen::Vector3d& origin,
                                        const Eigen::Vector3d& direction) const = 0;
};

/// Treats every raster pixel as a frontal surfel at its stored z-depth (in
/// the provider's camera frame). Pixels with depth <= 0 hold no geometry;
/// rays whose surfel candidates all fall outside the raster miss.
class RasterDepthProvider : public DepthProvider {
public:
    RasterDepthProvider(ImageF depth_m, geometry::CameraIntrinsics k,
                        geometry::RigidTransform world_from_camera);
    std::optional<double> query(const Eigen::Vector3d& origin,
                                const Eigen::Vector3d& direction) const override;

private:
    ImageF depth_;
    geometry::CameraIntrinsics k_;
    geometry::RigidTransform cam_from_world_;
};

struct Triangle {
    Eigen::Vector3d a, b, c;
    int class_id = 0;
    int instance_id = 0;
    float shade = 0.5f;
};

/// Exact Moeller-Trumbore intersection over a triangle soup.
class TriangleDepthProvider : public DepthProvider {
public:
    explicit TriangleDepthProvider(std::vector<Triangle> triangles);
    std::optional<double> query(const Eigen::Vector3d& origin,
                                const Eigen::Vector3d& direction) const override;
    /// Nearest hit with the triangle index (for shading / labels).
    std::optional<std::pair<double, int>> query_indexed(const Eigen::Vector3d& origin,
                                                        const Eigen::Vector3d& direction) const;
    const std::vector<Triangle>& triangles() const { return triangles_; }

private:
    std::vector<Triangle> triangles_;
};

std::optional<double> ray_triangle_intersect(const Eigen::Vector3d& origin,
                                             const Eigen::Vector3d& dir, const Triangle& tri);

/// Uniform-grid readout: every stride-th pixel with visibility >= threshold
/// and finite positive depth is unprojected into the camera frame. Intensity
/// carries the visibility value; timestamps are the scan start (0).
geometry::PointCloud sample_grid(const VisibilityMap& vis, const ImageF& depth_m,
                                 const geometry::CameraIntrinsics& k, int stride,
                                 double threshold);

struct RaycastOptions {
    double threshold = 0.5;
    double scan_start = 0.0;
    float intensity = 1.0f;  // constant intensity assigned to kept samples
};

/// Casts each pattern ray from its time-interpolated pose, keeps hits whose
/// projection into the camera (anchored at the scan-start pose) lands inside
/// the image with bilinear visibility >= threshold. Points are returned in
/// the sensor frame with per-ray timestamps.
geometry::PointCloud raycast_scan(const ScanPattern& pattern, const EgoTrajectory& traj,
                                  const DepthProvider& scene, const VisibilityMap& vis,
                                  const geometry::CameraIntrinsics& k,
                                  const geometry::RigidTransform& lidar_to_cam,
                                  const RaycastOptions& options);

// JSON documents for patterns and trajectories.
ScanPattern load_scan_pattern(const std::filesystem::path& path);
void save_scan_pattern(const ScanPattern& pattern, const std::filesystem::path& path);
EgoTrajectory load_trajectory(const std::filesystem::path& path);
void save_trajectory(const EgoTrajectory& traj, const std::filesystem::path& path);

}  // namespace lidarsim::reconstruct
