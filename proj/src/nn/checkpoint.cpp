#include "lidarsim/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "lidarsim/error.hpp"

namespace lidarsim::nn {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& f, std::uint32_t v) {
    const std::uint8_t b[4] = {static_cast<std::uint8_t>(v & 0xff),
                               static_cast<std::uint8_t>((v >> 8) & 0xff),
                               static_cast<std::uint8_t>((v >> 16) & 0xff),
                               static_cast<std::uint8_t>((v >> 24) & 0xff)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& f) {
    std::uint8_t b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& params) {
    std::ofstream f(path, std::ios::binary);
    if (!f) raise("IoError", "cannot open " + path.string() + " for writing");
    f.write(kMagic, 8);
    write_u32(f, kVersion);
    write_u32(f, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        write_u32(f, static_cast<std::uint32_t>(p.name.size()));
        f.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        std::size_t count = 1;
        for (int dim : p.shape) {
            write_u32(f, static_cast<std::uint32_t>(dim));
            count *= static_cast<std::size_t>(dim);
        }
        if (count != p.values.size())
            raise("ShapeMismatch", "checkpoint entry " + p.name + " shape/payload mismatch");
        f.write(reinterpret_cast<const char*>(p.values.data()),
                static_cast<std::streamsize>(p.values.size() * sizeof(float)));
    }
    if (!f) raise("IoError", "short write to " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) raise("IoError", "cannot open " + path.string());
    char magic[8];
    f.read(magic, 8);
    if (f.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
        raise("MalformedCheckpoint", path.string() + ": bad magic");
    const std::uint32_t version = read_u32(f);
    if (version != kVersion)
        raise("MalformedCheckpoint", path.string() + ": unsupported version");
    const std::uint32_t count = read_u32(f);
    std::vector<NamedTensor> params;
    params.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const std::uint32_t name_len = read_u32(f);
        t.name.resize(name_len);
        f.read(t.name.data(), name_len);
        std::size_t n = 1;
        for (int d = 0; d < 4; ++d) {
            t.shape[d] = static_cast<int>(read_u32(f));
            n *= static_cast<std::size_t>(t.shape[d]);
        }
        t.values.resize(n);
        f.read(reinterpret_cast<char*>(t.values.data()),
               static_cast<std::streamsize>(n * sizeof(float)));
        if (!f) raise("MalformedCheckpoint", path.string() + ": truncated entry " + t.name);
        params.push_back(std::move(t));
    }
    return params;
}

}  // namespace lidarsim::nn
