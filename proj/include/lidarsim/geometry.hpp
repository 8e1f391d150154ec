#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>
#include <vector>

namespace lidarsim::geometry {

/// Pinhole intrinsics for a rectified camera. Camera frame: +z forward,
/// +x right, +y down (image v grows downward).
struct CameraIntrinsics {
    double fx = 0;
    double fy = 0;
    double cx = 0;
    double cy = 0;
    int width = 0;
    int height = 0;

    bool valid() const {
        return fx > 0 && fy > 0 && width > 0 && height > 0 && cx >= 0 && cx < width &&
               cy >= 0 && cy < height;
    }
};

struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidTransform identity() { return {}; }
};

struct LidarPoint {
    double x = 0;
    double y = 0;
    double z = 0;
    float intensity = 0;
    double timestamp = 0;

    Eigen::Vector3d position() const { return {x, y, z}; }
};

struct PointCloud {
    std::vector<LidarPoint> points;
    double scan_start = 0;
    double scan_end = 0;
};

struct Projection {
    double u = 0;
    double v = 0;
    double depth = 0;
};

Eigen::Vector3d transform_point(const RigidTransform& t, const Eigen::Vector3d& p);

/// a then b applied on top: compose(b, a)(p) == b(a(p)).
RigidTransform compose(const RigidTransform& b, const RigidTransform& a);

RigidTransform invert_transform(const RigidTransform& t);

/// Pinhole projection; nullopt marks a point behind the camera plane (z <= 0).
std::optional<Projection> project_point(const CameraIntrinsics& k, const Eigen::Vector3d& p_cam);

/// Inverse of project_point on its valid domain; rejects depth <= 0.
Eigen::Vector3d unproject(const CameraIntrinsics& k, double u, double v, double depth);

bool is_orthonormal(const Eigen::Matrix3d& r, double tol);

/// Nearest proper rotation (SVD projection).
Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& r);

}  // namespace lidarsim::geometry
