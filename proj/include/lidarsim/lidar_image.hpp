#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lidarsim/geometry.hpp"
#include "lidarsim/image.hpp"

namespace lidarsim {

struct BinaryHitMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;  // {0,1}

    BinaryHitMask() = default;
    BinaryHitMask(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0) {}
    std::uint8_t& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct VisibilityMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;  // [0,1]

    VisibilityMap() = default;
    VisibilityMap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0) {}
    float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Densification kernel. Kernels are max-normalized (peak weight 1) and the
/// blurred map saturates at 1, so hit pixels keep the value 1.0 exactly.
struct BlurConfig {
    enum class Mode { Gaussian, Custom5x5 };

    Mode mode = Mode::Gaussian;
    double sigma = 8.0;
    int radius = 24;  // ceil(3*sigma) by default
    std::array<double, 25> weights{};

    static BlurConfig gaussian(double sigma, int radius = 0);
    static BlurConfig custom5x5(const std::array<double, 25>& weights);
    /// Outer product of (0.25, 0.5, 1, 0.5, 0.25) with itself; fills one to
    /// two pixel gaps in dense scan patterns.
    static BlurConfig default_custom5x5();

    void validate() const;
};

/// Projects every point of the scan through lidar_to_cam and the pinhole
/// model; sets the nearest pixel of each point landing in front of the camera
/// and inside bounds. Behind/out-of-bounds points are dropped.
BinaryHitMask rasterize_scan(const geometry::PointCloud& cloud,
                             const geometry::RigidTransform& lidar_to_cam,
                             const geometry::CameraIntrinsics& k);

/// Accumulates further points into an existing mask (multi-sensor union).
void rasterize_scan_into(BinaryHitMask& mask, const geometry::PointCloud& cloud,
                         const geometry::RigidTransform& lidar_to_cam,
                         const geometry::CameraIntrinsics& k);

/// Convolves the mask with the configured kernel (true convolution, so the
/// impulse response equals the kernel), zero padding, clamped to [0,1].
VisibilityMap blur_mask(const BinaryHitMask& mask, const BlurConfig& config);

/// Fixed 256-entry ramp from dark blue (0.0) to red (1.0); all entries distinct
/// so the coding is bijective on the quantized range. Anchors at indices
/// 0, 64, 128, 192, 255: navy, blue, cyan, yellow, red, linearly interpolated.
const std::array<std::array<std::uint8_t, 3>, 256>& visibility_color_table();

ImageU8 colorize(const VisibilityMap& map);

ImageF to_image(const VisibilityMap& map);
VisibilityMap visibility_from_image(const ImageF& img);

namespace blur_detail {
// Serial reference and OpenMP variants; blur_mask dispatches on the runtime
// thread setting. Both produce bitwise-identical output.
void gaussian_blur_serial(const BinaryHitMask& mask, const std::vector<double>& kernel1d,
                          int radius, VisibilityMap& out);
void gaussian_blur_parallel(const BinaryHitMask& mask, const std::vector<double>& kernel1d,
                            int radius, VisibilityMap& out);
void conv5x5_serial(const BinaryHitMask& mask, const std::array<double, 25>& w,
                    VisibilityMap& out);
void conv5x5_parallel(const BinaryHitMask& mask, const std::array<double, 25>& w,
                      VisibilityMap& out);
std::vector<double> gaussian_kernel1d(double sigma, int radius);
}  // namespace blur_detail

}  // namespace lidarsim
