#include "lidarsim/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "lidarsim/error.hpp"
#include "lidarsim/runtime.hpp"

namespace lidarsim::reconstruct {

using json = nlohmann::ordered_json;

Eigen::Vector3d ray_direction(double azimuth, double elevation) {
    const double ce = std::cos(elevation);
    return {ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation)};
}

geometry::RigidTransform interpolate_pose(const EgoTrajectory& traj, double t) {
    if (traj.poses.empty()) raise("TrajectoryGap", "trajectory holds no poses");
    if (traj.poses.size() == 1 || t <= traj.poses.front().timestamp)
        return traj.poses.front().world_from_sensor;
    if (t >= traj.poses.back().timestamp) return traj.poses.back().world_from_sensor;

    const auto upper = std::upper_bound(
        traj.poses.begin(), traj.poses.end(), t,
        [](double value, const TimedPose& p) { return value < p.timestamp; });
    const TimedPose& hi = *upper;
    const TimedPose& lo = *(upper - 1);
    const double f = (t - lo.timestamp) / (hi.timestamp - lo.timestamp);

    geometry::RigidTransform out;
    out.translation =
        (1.0 - f) * lo.world_from_sensor.translation + f * hi.world_from_sensor.translation;
    const Eigen::Quaterniond qa(lo.world_from_sensor.rotation);
    const Eigen::Quaterniond qb(hi.world_from_sensor.rotation);
    out.rotation = qa.slerp(f, qb).toRotationMatrix();
    return out;
}

RasterDepthProvider::RasterDepthProvider(ImageF depth_m, geometry::CameraIntrinsics k,
                                         geometry::RigidTransform world_from_camera)
    : depth_(std::move(depth_m)), k_(std::move(k)),
      cam_from_world_(geometry::invert_transform(world_from_camera)) {
    if (depth_.channels != 1) raise("DimensionMismatch", "depth raster must be single-channel");
    if (depth_.width != k_.width || depth_.height != k_.height)
        raise("DimensionMismatch", "depth raster does not match the intrinsics' image size");
}

std::optional<double> RasterDepthProvider::query(const Eigen::Vector3d& origin,
                                                 const Eigen::Vector3d& direction) const {
    const Eigen::Vector3d o = geometry::transform_point(cam_from_world_, origin);
    const Eigen::Vector3d d = cam_from_world_.rotation * direction;

    // Each pixel is a frontal surfel: a disc at depth Z covering the pixel's
    // footprint. The ray reaches depth Z at t = (Z - o.z) / d.z; the surfel is
    // hit when the point at that t still projects (rounded) into the pixel.
    // Scanning all pixels keeps this exact; desk-scale rasters are small.
    double best_t = std::numeric_limits<double>::infinity();
    for (int v = 0; v < depth_.height; ++v) {
        for (int u = 0; u < depth_.width; ++u) {
            const double z = depth_.at(u, v);
            if (!(z > 0) || !std::isfinite(z)) continue;
            if (std::abs(d.z()) < 1e-12) continue;
            const double t = (z - o.z()) / d.z();
            if (t <= 1e-9 || t >= best_t) continue;
            const Eigen::Vector3d p = o + t * d;
            const auto proj = geometry::project_point(k_, p);
            if (!proj) continue;
            if (std::lround(proj->u) != u || std::lround(proj->v) != v) continue;
            best_t = t;
        }
    }
    if (!std::isfinite(best_t)) return std::nullopt;
    return best_t * direction.norm();
}

TriangleDepthProvider::TriangleDepthProvider(std::vector<Triangle> triangles)
    : triangles_(std::move(triangles)) {}

std::optional<double> ray_triangle_intersect(const Eigen::Vector3d& origin,
                                             const Eigen::Vector3d& dir, const Triangle& tri) {
    constexpr double kEps = 1e-12;
    const Eigen::Vector3d e1 = tri.b - tri.a;
    const Eigen::Vector3d e2 = tri.c - tri.a;
    const Eigen::Vector3d p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < kEps) return std::nullopt;
    const double inv_det = 1.0 / det;
    const Eigen::Vector3d s = origin - tri.a;
    const double u = s.dot(p) * inv_det;
    if (u < -1e-12 || u > 1.0 + 1e-12) return std::nullopt;
    const Eigen::Vector3d q = s.cross(e1);
    const double v = dir.dot(q) * inv_det;
    if (v < -1e-12 || u + v > 1.0 + 1e-12) return std::nullopt;
    const double t = e2.dot(q) * inv_det;
    if (t <= 1e-9) return std::nullopt;
    return t;
}

std::optional<std::pair<double, int>> TriangleDepthProvider::query_indexed(
    const Eigen::Vector3d& origin, const Eigen::Vector3d& direction) const {
    double best_t = std::numeric_limits<double>::infinity();
    int best_i = -1;
    for (std::size_t i = 0; i < triangles_.size(); ++i) {
        const auto t = ray_triangle_intersect(origin, direction, triangles_[i]);
        if (t && *t < best_t) {
            best_t = *t;
            best_i = static_cast<int>(i);
        }
    }
    if (best_i < 0) return std::nullopt;
    return std::make_pair(best_t * direction.norm(), best_i);
}

std::optional<double> TriangleDepthProvider::query(const Eigen::Vector3d& origin,
                                                   const Eigen::Vector3d& direction) const {
    const auto hit = query_indexed(origin, direction);
    if (!hit) return std::nullopt;
    return hit->first;
}

geometry::PointCloud sample_grid(const VisibilityMap& vis, const ImageF& depth_m,
                                 const geometry::CameraIntrinsics& k, int stride,
                                 double threshold) {
    if (depth_m.channels != 1) raise("DimensionMismatch", "depth raster must be single-channel");
    if (vis.width != depth_m.width || vis.height != depth_m.height)
        raise("DimensionMismatch", "visibility map and depth raster dimensions differ");
    if (stride < 1) raise("InvalidConfig", "stride must be >= 1");

    geometry::PointCloud cloud;
    for (int v = 0; v < vis.height; v += stride) {
        for (int u = 0; u < vis.width; u += stride) {
            const float visibility = vis.at(u, v);
            if (visibility < threshold) continue;
            const float depth = depth_m.at(u, v);
            if (!(depth > 0) || !std::isfinite(depth)) continue;
            const Eigen::Vector3d p = geometry::unproject(k, u, v, depth);
            geometry::LidarPoint pt;
            pt.x = p.x();
            pt.y = p.y();
            pt.z = p.z();
            pt.intensity = visibility;
            pt.timestamp = cloud.scan_start;
            cloud.points.push_back(pt);
        }
    }
    return cloud;
}

geometry::PointCloud raycast_scan(const ScanPattern& pattern, const EgoTrajectory& traj,
                                  const DepthProvider& scene, const VisibilityMap& vis,
                                  const geometry::CameraIntrinsics& k,
                                  const geometry::RigidTransform& lidar_to_cam,
                                  const RaycastOptions& options) {
    if (pattern.rays.empty()) raise("EmptyPattern", "scan pattern holds no rays");
    if (traj.poses.empty()) raise("TrajectoryGap", "trajectory holds no poses");

    // The predicted map belongs to the camera frame captured at scan start.
    const geometry::RigidTransform world_from_lidar0 =
        interpolate_pose(traj, options.scan_start);
    const geometry::RigidTransform cam_from_world = geometry::compose(
        lidar_to_cam, geometry::invert_transform(world_from_lidar0));

    const ImageF vis_img = to_image(vis);
    const int ray_count = static_cast<int>(pattern.rays.size());
    std::vector<std::optional<geometry::LidarPoint>> hits(pattern.rays.size());

    const auto cast_one = [&](int i) {
        const ScanRay& ray = pattern.rays[static_cast<std::size_t>(i)];
        const double t_ray = options.scan_start + ray.time_offset;
        const geometry::RigidTransform pose = interpolate_pose(traj, t_ray);
        const Eigen::Vector3d dir_sensor = ray_direction(ray.azimuth, ray.elevation);
        const Eigen::Vector3d dir_world = pose.rotation * dir_sensor;
        const auto distance = scene.query(pose.translation, dir_world);
        if (!distance) return;
        const Eigen::Vector3d hit_world = pose.translation + *distance * dir_world;
        const Eigen::Vector3d hit_cam = geometry::transform_point(cam_from_world, hit_world);
        const auto proj = geometry::project_point(k, hit_cam);
        if (!proj) return;
        if (proj->u < 0 || proj->u > k.width - 1 || proj->v < 0 || proj->v > k.height - 1)
            return;
        if (bilinear_sample(vis_img, proj->u, proj->v) < options.threshold) return;
        const Eigen::Vector3d p_sensor = *distance * dir_sensor;
        geometry::LidarPoint pt;
        pt.x = p_sensor.x();
        pt.y = p_sensor.y();
        pt.z = p_sensor.z();
        pt.intensity = options.intensity;
        pt.timestamp = t_ray;
        hits[static_cast<std::size_t>(i)] = pt;
    };

    if (runtime::parallel_enabled()) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < ray_count; ++i) cast_one(i);
    } else {
        for (int i = 0; i < ray_count; ++i) cast_one(i);
    }

    geometry::PointCloud cloud;
    cloud.scan_start = options.scan_start;
    cloud.scan_end = options.scan_start + pattern.period;
    for (const auto& hit : hits)  // gathered in pattern order
        if (hit) cloud.points.push_back(*hit);
    return cloud;
}

ScanPattern load_scan_pattern(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) raise("IoError", "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::parse_error& e) {
        raise("MalformedPattern", path.string() + ": " + e.what());
    }
    ScanPattern pattern;
    pattern.period = doc.value("period", 0.1);
    double prev_offset = 0.0;
    for (const auto& r : doc.value("rays", json::array())) {
        ScanRay ray;
        ray.azimuth = r.at("azimuth").get<double>();
        ray.elevation = r.at("elevation").get<double>();
        ray.time_offset = r.value("time_offset", 0.0);
        if (ray.time_offset < prev_offset - 1e-12 || ray.time_offset > pattern.period + 1e-12)
            raise("MalformedPattern", "time offsets must be non-decreasing within the period");
        prev_offset = ray.time_offset;
        pattern.rays.push_back(ray);
    }
    return pattern;
}

void save_scan_pattern(const ScanPattern& pattern, const std::filesystem::path& path) {
    json doc;
    doc["period"] = pattern.period;
    json rays = json::array();
    for (const auto& r : pattern.rays) {
        json ray;
        ray["azimuth"] = r.azimuth;
        ray["elevation"] = r.elevation;
        ray["time_offset"] = r.time_offset;
        rays.push_back(ray);
    }
    doc["rays"] = rays;
    std::ofstream out(path);
    if (!out) raise("IoError", "cannot open " + path.string() + " for writing");
    out << doc.dump(2) << "\n";
}

EgoTrajectory load_trajectory(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) raise("IoError", "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::parse_error& e) {
        raise("MalformedTrajectory", path.string() + ": " + e.what());
    }
    EgoTrajectory traj;
    double prev_t = -std::numeric_limits<double>::infinity();
    for (const auto& p : doc.value("poses", json::array())) {
        TimedPose pose;
        pose.timestamp = p.at("timestamp").get<double>();
        if (pose.timestamp <= prev_t)
            raise("MalformedTrajectory", "pose timestamps must be strictly increasing");
        prev_t = pose.timestamp;
        const auto& rot = p.at("rotation");
        if (rot.size() != 9) raise("MalformedTrajectory", "rotation must hold 9 numbers");
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                pose.world_from_sensor.rotation(r, c) = rot[r * 3 + c].get<double>();
        if (!geometry::is_orthonormal(pose.world_from_sensor.rotation, 1e-4))
            raise("NonOrthonormalRotation", "trajectory rotation is not orthonormal");
        pose.world_from_sensor.rotation =
            geometry::orthonormalized(pose.world_from_sensor.rotation);
        const auto& tr = p.at("translation");
        for (int r = 0; r < 3; ++r) pose.world_from_sensor.translation(r) = tr[r].get<double>();
        traj.poses.push_back(pose);
    }
    if (traj.poses.empty()) raise("TrajectoryGap", path.string() + ": trajectory holds no poses");
    return traj;
}

void save_trajectory(const EgoTrajectory& traj, const std::filesystem::path& path) {
    json doc;
    json poses = json::array();
    for (const auto& p : traj.poses) {
        json pose;
        pose["timestamp"] = p.timestamp;
        json rot = json::array();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) rot.push_back(p.world_from_sensor.rotation(r, c));
        pose["rotation"] = rot;
        pose["translation"] = {p.world_from_sensor.translation(0),
                               p.world_from_sensor.translation(1),
                               p.world_from_sensor.translation(2)};
        poses.push_back(pose);
    }
    doc["poses"] = poses;
    std::ofstream out(path);
    if (!out) raise("IoError", "cannot open " + path.string() + " for writing");
    out << doc.dump(2) << "\n";
}

}  // namespace lidarsim::reconstruct
