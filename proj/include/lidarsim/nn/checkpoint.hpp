#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lidarsim::nn {

/// One checkpoint entry: name, NCHW shape, float32 payload.
struct NamedTensor {
    std::string name;
    std::array<int, 4> shape{};
    std::vector<float> values;
};

/// Binary checkpoint: magic "LSCKPT01", u32 version, u32 count, then per
/// entry u32 name length + bytes, 4 x u32 shape, float32 LE payload. All
/// integers little-endian; byte-stable across platforms.
void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& params);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace lidarsim::nn
