#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lidarsim {

/// Row-major interleaved raster. `channels` is 1 (gray, depth, map) or 3 (RGB).
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c, T fill = T{})
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    T& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    const T& at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    bool empty() const { return data.empty(); }
};

using ImageU8 = Image<std::uint8_t>;
using ImageF = Image<float>;

/// Single-channel float raster file: 16-byte header (8-byte magic "LSRASTR1",
/// u32 LE width, u32 LE height) followed by width*height float32 LE values.
void write_float_raster(const std::filesystem::path& path, const ImageF& img);
ImageF read_float_raster(const std::filesystem::path& path);

/// Bilinear sample with clamp-to-edge addressing; (x, y) in pixel-center coords.
float bilinear_sample(const ImageF& img, double x, double y, int channel = 0);

/// Bilinear resize of an arbitrary-channel float image.
ImageF resize_bilinear(const ImageF& src, int dst_w, int dst_h);

/// Aspect-preserving fit into a square with zero padding, plus the mapping
/// needed to carry results back to the source frame (pixel-center convention):
///   dst_x = (src_x + 0.5) * scale - 0.5 + offset_x, likewise for y
struct LetterboxMapping {
    int src_width = 0;
    int src_height = 0;
    int dst_size = 0;
    double scale = 1.0;
    double offset_x = 0.0;
    double offset_y = 0.0;
};

ImageF letterbox(const ImageF& src, int dst_size, LetterboxMapping* mapping = nullptr);
ImageF unletterbox(const ImageF& boxed, const LetterboxMapping& mapping);

}  // namespace lidarsim
