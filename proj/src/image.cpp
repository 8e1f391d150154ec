#include "lidarsim/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "lidarsim/error.hpp"

namespace lidarsim {

namespace {

constexpr char kRasterMagic[8] = {'L', 'S', 'R', 'A', 'S', 'T', 'R', '1'};

void put_u32_le(std::uint8_t* out, std::uint32_t v) {
    out[0] = static_cast<std::uint8_t>(v & 0xff);
    out[1] = static_cast<std::uint8_t>((v >> 8) & 0xff);
    out[2] = static_cast<std::uint8_t>((v >> 16) & 0xff);
    out[3] = static_cast<std::uint8_t>((v >> 24) & 0xff);
}

std::uint32_t get_u32_le(const std::uint8_t* in) {
    return static_cast<std::uint32_t>(in[0]) | (static_cast<std::uint32_t>(in[1]) << 8) |
           (static_cast<std::uint32_t>(in[2]) << 16) | (static_cast<std::uint32_t>(in[3]) << 24);
}

}  // namespace

void write_float_raster(const std::filesystem::path& path, const ImageF& img) {
    if (img.channels != 1) raise("DimensionMismatch", "float raster stores single-channel images");
    std::ofstream f(path, std::ios::binary);
    if (!f) raise("IoError", "cannot open " + path.string() + " for writing");
    std::array<std::uint8_t, 16> header{};
    std::memcpy(header.data(), kRasterMagic, 8);
    put_u32_le(header.data() + 8, static_cast<std::uint32_t>(img.width));
    put_u32_le(header.data() + 12, static_cast<std::uint32_t>(img.height));
    f.write(reinterpret_cast<const char*>(header.data()), header.size());
    // float32 LE payload; this code targets little-endian hosts.
    f.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size() * sizeof(float)));
    if (!f) raise("IoError", "short write to " + path.string());
}

ImageF read_float_raster(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) raise("IoError", "cannot open " + path.string());
    std::array<std::uint8_t, 16> header{};
    f.read(reinterpret_cast<char*>(header.data()), header.size());
    if (f.gcount() != 16 || std::memcmp(header.data(), kRasterMagic, 8) != 0)
        raise("MalformedRaster", path.string() + ": bad raster header");
    const std::uint32_t w = get_u32_le(header.data() + 8);
    const std::uint32_t h = get_u32_le(header.data() + 12);
    ImageF img(static_cast<int>(w), static_cast<int>(h), 1);
    f.read(reinterpret_cast<char*>(img.data.data()),
           static_cast<std::streamsize>(img.data.size() * sizeof(float)));
    if (static_cast<std::size_t>(f.gcount()) != img.data.size() * sizeof(float))
        raise("MalformedRaster", path.string() + ": truncated raster payload");
    return img;
}

float bilinear_sample(const ImageF& img, double x, double y, int channel) {
    const auto clampi = [](int v, int lo, int hi) { return std::min(std::max(v, lo), hi); };
    const int x0 = clampi(static_cast<int>(std::floor(x)), 0, img.width - 1);
    const int y0 = clampi(static_cast<int>(std::floor(y)), 0, img.height - 1);
    const int x1 = clampi(x0 + 1, 0, img.width - 1);
    const int y1 = clampi(y0 + 1, 0, img.height - 1);
    const double fx = std::clamp(x - x0, 0.0, 1.0);
    const double fy = std::clamp(y - y0, 0.0, 1.0);
    const double v00 = img.at(x0, y0, channel);
    const double v10 = img.at(x1, y0, channel);
    const double v01 = img.at(x0, y1, channel);
    const double v11 = img.at(x1, y1, channel);
    return static_cast<float>((v00 * (1 - fx) + v10 * fx) * (1 - fy) +
                              (v01 * (1 - fx) + v11 * fx) * fy);
}

ImageF resize_bilinear(const ImageF& src, int dst_w, int dst_h) {
    ImageF dst(dst_w, dst_h, src.channels);
    if (src.empty()) return dst;
    const double sx = static_cast<double>(src.width) / dst_w;
    const double sy = static_cast<double>(src.height) / dst_h;
    for (int y = 0; y < dst_h; ++y) {
        for (int x = 0; x < dst_w; ++x) {
            // Pixel-center sampling keeps identity resizes exact.
            const double src_x = (x + 0.5) * sx - 0.5;
            const double src_y = (y + 0.5) * sy - 0.5;
            for (int c = 0; c < src.channels; ++c)
                dst.at(x, y, c) = bilinear_sample(src, src_x, src_y, c);
        }
    }
    return dst;
}

ImageF letterbox(const ImageF& src, int dst_size, LetterboxMapping* mapping) {
    const double scale = static_cast<double>(dst_size) / std::max(src.width, src.height);
    const int fit_w = std::max(1, static_cast<int>(std::lround(src.width * scale)));
    const int fit_h = std::max(1, static_cast<int>(std::lround(src.height * scale)));
    const int off_x = (dst_size - fit_w) / 2;
    const int off_y = (dst_size - fit_h) / 2;

    ImageF dst(dst_size, dst_size, src.channels, 0.0f);
    const ImageF fitted = (fit_w == src.width && fit_h == src.height)
                              ? src
                              : resize_bilinear(src, fit_w, fit_h);
    for (int y = 0; y < fit_h; ++y)
        for (int x = 0; x < fit_w; ++x)
            for (int c = 0; c < src.channels; ++c)
                dst.at(x + off_x, y + off_y, c) = fitted.at(x, y, c);

    if (mapping) {
        mapping->src_width = src.width;
        mapping->src_height = src.height;
        mapping->dst_size = dst_size;
        mapping->scale = scale;
        mapping->offset_x = off_x;
        mapping->offset_y = off_y;
    }
    return dst;
}

ImageF unletterbox(const ImageF& boxed, const LetterboxMapping& mapping) {
    ImageF out(mapping.src_width, mapping.src_height, boxed.channels);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const double bx = (x + 0.5) * mapping.scale - 0.5 + mapping.offset_x;
            const double by = (y + 0.5) * mapping.scale - 0.5 + mapping.offset_y;
            for (int c = 0; c < boxed.channels; ++c)
                out.at(x, y, c) = bilinear_sample(boxed, bx, by, c);
        }
    }
    return out;
}

}  // namespace lidarsim
