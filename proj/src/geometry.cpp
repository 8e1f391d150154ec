#include "lidarsim/geometry.hpp"

#include <Eigen/SVD>

#include "lidarsim/error.hpp"

namespace lidarsim::geometry {

Eigen::Vector3d transform_point(const RigidTransform& t, const Eigen::Vector3d& p) {
    return t.rotation * p + t.translation;
}

RigidTransform compose(const RigidTransform& b, const RigidTransform& a) {
    RigidTransform out;
    out.rotation = b.rotation * a.rotation;
    out.translation = b.rotation * a.translation + b.translation;
    return out;
}

RigidTransform invert_transform(const RigidTransform& t) {
    RigidTransform out;
    out.rotation = t.rotation.transpose();
    out.translation = -(out.rotation * t.translation);
    return out;
}

std::optional<Projection> project_point(const CameraIntrinsics& k, const Eigen::Vector3d& p_cam) {
    if (p_cam.z() <= 0.0) return std::nullopt;
    Projection proj;
    proj.u = k.fx * p_cam.x() / p_cam.z() + k.cx;
    proj.v = k.fy * p_cam.y() / p_cam.z() + k.cy;
    proj.depth = p_cam.z();
    return proj;
}

Eigen::Vector3d unproject(const CameraIntrinsics& k, double u, double v, double depth) {
    if (depth <= 0.0) raise("InvalidDepth", "unproject requires depth > 0");
    return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

bool is_orthonormal(const Eigen::Matrix3d& r, double tol) {
    const Eigen::Matrix3d err = r.transpose() * r - Eigen::Matrix3d::Identity();
    return err.cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& r) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d out = svd.matrixU() * svd.matrixV().transpose();
    if (out.determinant() < 0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1;
        out = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return out;
}

}  // namespace lidarsim::geometry
