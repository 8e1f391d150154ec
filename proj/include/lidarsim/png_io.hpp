#pragma once

#include <filesystem>

#include "lidarsim/image.hpp"

namespace lidarsim {

void write_png(const std::filesystem::path& path, const ImageU8& img);  // 1 or 3 channels
ImageU8 read_png(const std::filesystem::path& path);                    // gray or RGB out

/// [0,1] float image to 8-bit (value = round(255*v), clamped).
ImageU8 to_u8(const ImageF& img);
/// 8-bit image to [0,1] float.
ImageF to_float(const ImageU8& img);

}  // namespace lidarsim
