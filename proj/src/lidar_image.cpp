#include "lidarsim/lidar_image.hpp"

#include <algorithm>
#include <cmath>

#include "lidarsim/error.hpp"
#include "lidarsim/runtime.hpp"

namespace lidarsim {

BlurConfig BlurConfig::gaussian(double sigma, int radius) {
    BlurConfig cfg;
    cfg.mode = Mode::Gaussian;
    cfg.sigma = sigma;
    cfg.radius = radius > 0 ? radius : static_cast<int>(std::ceil(3.0 * sigma));
    cfg.validate();
    return cfg;
}

BlurConfig BlurConfig::custom5x5(const std::array<double, 25>& weights) {
    BlurConfig cfg;
    cfg.mode = Mode::Custom5x5;
    cfg.weights = weights;
    cfg.validate();
    return cfg;
}

BlurConfig BlurConfig::default_custom5x5() {
    const std::array<double, 5> t = {0.25, 0.5, 1.0, 0.5, 0.25};
    std::array<double, 25> w{};
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) w[i * 5 + j] = t[i] * t[j];
    return custom5x5(w);
}

void BlurConfig::validate() const {
    if (mode == Mode::Gaussian) {
        if (sigma <= 0) raise("InvalidConfig", "Gaussian blur requires sigma > 0");
        if (radius <= 0) raise("InvalidConfig", "Gaussian blur requires radius > 0");
    } else {
        double max_w = 0;
        for (double w : weights) {
            if (w < 0) raise("InvalidConfig", "custom kernel weights must be non-negative");
            max_w = std::max(max_w, w);
        }
        if (std::abs(max_w - 1.0) > 1e-12)
            raise("InvalidConfig", "custom kernel must be max-normalized (peak weight 1)");
    }
}

void rasterize_scan_into(BinaryHitMask& mask, const geometry::PointCloud& cloud,
                         const geometry::RigidTransform& lidar_to_cam,
                         const geometry::CameraIntrinsics& k) {
    for (const auto& pt : cloud.points) {
        const Eigen::Vector3d p_cam = geometry::transform_point(lidar_to_cam, pt.position());
        const auto proj = geometry::project_point(k, p_cam);
        if (!proj) continue;
        if (std::abs(proj->u) > 1e9 || std::abs(proj->v) > 1e9) continue;
        const long u = std::lround(proj->u);
        const long v = std::lround(proj->v);
        if (u < 0 || u >= mask.width || v < 0 || v >= mask.height) continue;
        mask.at(static_cast<int>(u), static_cast<int>(v)) = 1;
    }
}

BinaryHitMask rasterize_scan(const geometry::PointCloud& cloud,
                             const geometry::RigidTransform& lidar_to_cam,
                             const geometry::CameraIntrinsics& k) {
    BinaryHitMask mask(k.width, k.height);
    rasterize_scan_into(mask, cloud, lidar_to_cam, k);
    return mask;
}

namespace blur_detail {

std::vector<double> gaussian_kernel1d(double sigma, int radius) {
    std::vector<double> kernel(2 * radius + 1);
    for (int d = -radius; d <= radius; ++d)
        kernel[d + radius] = std::exp(-(static_cast<double>(d) * d) / (2.0 * sigma * sigma));
    return kernel;  // peak weight exp(0) = 1, already max-normalized
}

namespace {

// Separable pass structure shared by the serial and parallel variants. Each
// output pixel is accumulated in a fixed order, so results are bitwise equal
// across thread counts.
inline void gaussian_row_pass(const BinaryHitMask& mask, const std::vector<double>& k1d,
                              int radius, int y, std::vector<double>& row) {
    for (int x = 0; x < mask.width; ++x) {
        double acc = 0;
        const int d0 = std::max(-radius, x - (mask.width - 1));
        const int d1 = std::min(radius, x);
        for (int d = d0; d <= d1; ++d) acc += k1d[d + radius] * mask.at(x - d, y);
        row[static_cast<std::size_t>(y) * mask.width + x] = acc;
    }
}

inline void gaussian_col_pass(const std::vector<double>& rows, int width, int height,
                              const std::vector<double>& k1d, int radius, int y,
                              VisibilityMap& out) {
    for (int x = 0; x < width; ++x) {
        double acc = 0;
        const int d0 = std::max(-radius, y - (height - 1));
        const int d1 = std::min(radius, y);
        for (int d = d0; d <= d1; ++d)
            acc += k1d[d + radius] * rows[static_cast<std::size_t>(y - d) * width + x];
        out.at(x, y) = static_cast<float>(std::min(acc, 1.0));
    }
}

inline void conv5x5_pixel(const BinaryHitMask& mask, const std::array<double, 25>& w, int x,
                          int y, VisibilityMap& out) {
    double acc = 0;
    for (int dy = -2; dy <= 2; ++dy) {
        const int sy = y - dy;
        if (sy < 0 || sy >= mask.height) continue;
        for (int dx = -2; dx <= 2; ++dx) {
            const int sx = x - dx;
            if (sx < 0 || sx >= mask.width) continue;
            acc += w[(dy + 2) * 5 + (dx + 2)] * mask.at(sx, sy);
        }
    }
    out.at(x, y) = static_cast<float>(std::min(acc, 1.0));
}

}  // namespace

void gaussian_blur_serial(const BinaryHitMask& mask, const std::vector<double>& k1d, int radius,
                          VisibilityMap& out) {
    std::vector<double> rows(static_cast<std::size_t>(mask.width) * mask.height);
    for (int y = 0; y < mask.height; ++y) gaussian_row_pass(mask, k1d, radius, y, rows);
    for (int y = 0; y < mask.height; ++y)
        gaussian_col_pass(rows, mask.width, mask.height, k1d, radius, y, out);
}

void gaussian_blur_parallel(const BinaryHitMask& mask, const std::vector<double>& k1d, int radius,
                            VisibilityMap& out) {
    std::vector<double> rows(static_cast<std::size_t>(mask.width) * mask.height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < mask.height; ++y) gaussian_row_pass(mask, k1d, radius, y, rows);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < mask.height; ++y)
        gaussian_col_pass(rows, mask.width, mask.height, k1d, radius, y, out);
}

void conv5x5_serial(const BinaryHitMask& mask, const std::array<double, 25>& w,
                    VisibilityMap& out) {
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) conv5x5_pixel(mask, w, x, y, out);
}

void conv5x5_parallel(const BinaryHitMask& mask, const std::array<double, 25>& w,
                      VisibilityMap& out) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) conv5x5_pixel(mask, w, x, y, out);
}

}  // namespace blur_detail

VisibilityMap blur_mask(const BinaryHitMask& mask, const BlurConfig& config) {
    config.validate();
    VisibilityMap out(mask.width, mask.height);
    if (mask.width == 0 || mask.height == 0) return out;
    if (config.mode == BlurConfig::Mode::Gaussian) {
        const auto k1d = blur_detail::gaussian_kernel1d(config.sigma, config.radius);
        if (runtime::parallel_enabled())
            blur_detail::gaussian_blur_parallel(mask, k1d, config.radius, out);
        else
            blur_detail::gaussian_blur_serial(mask, k1d, config.radius, out);
    } else {
        if (runtime::parallel_enabled())
            blur_detail::conv5x5_parallel(mask, config.weights, out);
        else
            blur_detail::conv5x5_serial(mask, config.weights, out);
    }
    return out;
}

const std::array<std::array<std::uint8_t, 3>, 256>& visibility_color_table() {
    static const auto table = [] {
        std::array<std::array<std::uint8_t, 3>, 256> t{};
        struct Anchor {
            int index;
            std::array<double, 3> rgb;
        };
        const Anchor anchors[] = {
            {0, {0, 0, 128}},      // navy
            {64, {0, 0, 255}},     // blue
            {128, {0, 255, 255}},  // cyan
            {192, {255, 255, 0}},  // yellow
            {255, {255, 0, 0}},    // red
        };
        for (int seg = 0; seg + 1 < static_cast<int>(std::size(anchors)); ++seg) {
            const Anchor& a = anchors[seg];
            const Anchor& b = anchors[seg + 1];
            for (int i = a.index; i <= b.index; ++i) {
                const double f = static_cast<double>(i - a.index) / (b.index - a.index);
                for (int c = 0; c < 3; ++c)
                    t[i][c] = static_cast<std::uint8_t>(
                        std::lround(a.rgb[c] + f * (b.rgb[c] - a.rgb[c])));
            }
        }
        return t;
    }();
    return table;
}

ImageU8 colorize(const VisibilityMap& map) {
    const auto& table = visibility_color_table();
    ImageU8 img(map.width, map.height, 3);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const float v = std::clamp(map.at(x, y), 0.0f, 1.0f);
            const auto& rgb = table[static_cast<int>(std::lround(255.0f * v))];
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = rgb[c];
        }
    }
    return img;
}

ImageF to_image(const VisibilityMap& map) {
    ImageF img(map.width, map.height, 1);
    img.data = map.values;
    return img;
}

VisibilityMap visibility_from_image(const ImageF& img) {
    if (img.channels != 1) raise("DimensionMismatch", "visibility map must be single-channel");
    VisibilityMap map(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        if (!(img.data[i] >= 0.0f && img.data[i] <= 1.0f))
            raise("InvalidValue", "visibility values must lie in [0,1]");
        map.values[i] = img.data[i];
    }
    return map;
}

}  // namespace lidarsim
