#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "lidarsim/error.hpp"
#include "lidarsim/image.hpp"
#include "lidarsim/lidar_image.hpp"
#include "lidarsim/nn/rng.hpp"
#include "lidarsim/png_io.hpp"
#include "lidarsim/runtime.hpp"

using namespace lidarsim;

namespace {

geometry::CameraIntrinsics small_cam() {
    geometry::CameraIntrinsics k;
    k.fx = k.fy = 100;
    k.cx = k.cy = 50;
    k.width = k.height = 101;
    return k;
}

geometry::PointCloud cloud_of(std::initializer_list<Eigen::Vector3d> pts) {
    geometry::PointCloud cloud;
    for (const auto& p : pts) {
        geometry::LidarPoint lp;
        lp.x = p.x();
        lp.y = p.y();
        lp.z = p.z();
        lp.intensity = 1.0f;
        cloud.points.push_back(lp);
    }
    return cloud;
}

int count_set(const BinaryHitMask& mask) {
    int n = 0;
    for (auto v : mask.values) n += v;
    return n;
}

}  // namespace

TEST_CASE("rasterize_scan basics") {
    const auto k = small_cam();
    const geometry::RigidTransform id;

    SUBCASE("empty cloud -> all-zero mask") {
        const BinaryHitMask mask = rasterize_scan({}, id, k);
        CHECK(count_set(mask) == 0);
        CHECK(mask.width == k.width);
    }
    SUBCASE("single point lands on its projected pixel") {
        const BinaryHitMask mask = rasterize_scan(cloud_of({{0, 0, 2}}), id, k);
        CHECK(count_set(mask) == 1);
        CHECK(mask.at(50, 50) == 1);
    }
    SUBCASE("coincident points accumulate idempotently") {
        const BinaryHitMask mask =
            rasterize_scan(cloud_of({{0, 0, 2}, {0.001, 0, 2}}), id, k);
        CHECK(count_set(mask) == 1);
    }
    SUBCASE("behind and out-of-bounds points are dropped") {
        const BinaryHitMask mask =
            rasterize_scan(cloud_of({{0, 0, -2}, {500, 0, 2}, {0, 0, 0}}), id, k);
        CHECK(count_set(mask) == 0);
    }
    SUBCASE("point order does not matter") {
        nn::Rng rng(3);
        std::vector<Eigen::Vector3d> pts;
        for (int i = 0; i < 200; ++i)
            pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 5)});
        geometry::PointCloud a, b;
        for (const auto& p : pts) {
            geometry::LidarPoint lp;
            lp.x = p.x();
            lp.y = p.y();
            lp.z = p.z();
            a.points.push_back(lp);
        }
        b = a;
        std::reverse(b.points.begin(), b.points.end());
        CHECK(rasterize_scan(a, geometry::RigidTransform{}, small_cam()).values ==
              rasterize_scan(b, geometry::RigidTransform{}, small_cam()).values);
    }
}

TEST_CASE("blur_mask impulse responses") {
    SUBCASE("all-zero mask stays zero") {
        BinaryHitMask mask(32, 32);
        const VisibilityMap map = blur_mask(mask, BlurConfig::default_custom5x5());
        for (float v : map.values) CHECK(v == 0.0f);
    }

    SUBCASE("custom 5x5 impulse stamps the kernel") {
        BinaryHitMask mask(16, 16);
        mask.at(8, 8) = 1;
        const BlurConfig cfg = BlurConfig::default_custom5x5();
        const VisibilityMap map = blur_mask(mask, cfg);
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx)
                CHECK(map.at(8 + dx, 8 + dy) ==
                      doctest::Approx(cfg.weights[(dy + 2) * 5 + (dx + 2)]).epsilon(1e-12));
        CHECK(map.at(8, 8) == 1.0f);
        CHECK(map.at(8 + 3, 8) == 0.0f);
    }

    SUBCASE("gaussian impulse matches the closed form") {
        BinaryHitMask mask(201, 201);
        mask.at(100, 100) = 1;
        const VisibilityMap map = blur_mask(mask, BlurConfig::gaussian(8.0));
        // Independent oracle: exp(-d^2 / (2 sigma^2)), max-normalized.
        const double sigma = 8.0;
        const int offsets[][2] = {{0, 0}, {1, 0},  {0, 1},  {3, 2}, {8, 0},
                                  {0, 8}, {5, 5},  {12, 9}, {20, 0}, {24, 0}};
        for (const auto& off : offsets) {
            const double d2 = off[0] * off[0] + off[1] * off[1];
            const double expected = std::exp(-d2 / (2.0 * sigma * sigma));
            CHECK(map.at(100 + off[0], 100 + off[1]) ==
                  doctest::Approx(expected).epsilon(1e-6));
        }
        CHECK(map.at(100 + 8, 100) == doctest::Approx(std::exp(-0.5)).epsilon(1e-6));
        // Beyond the truncation radius the response is zero.
        CHECK(map.at(100 + 25, 100) == 0.0f);
    }

    SUBCASE("hit pixels stay exactly 1.0 and range holds") {
        nn::Rng rng(9);
        BinaryHitMask mask(64, 64);
        for (int i = 0; i < 200; ++i)
            mask.at(static_cast<int>(rng.uniform() * 64), static_cast<int>(rng.uniform() * 64)) =
                1;
        for (const auto& cfg :
             {BlurConfig::gaussian(8.0), BlurConfig::default_custom5x5()}) {
            const VisibilityMap map = blur_mask(mask, cfg);
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x) {
                    CHECK(map.at(x, y) >= 0.0f);
                    CHECK(map.at(x, y) <= 1.0f);
                    if (mask.at(x, y)) CHECK(map.at(x, y) == 1.0f);
                }
        }
    }
}

TEST_CASE("blur monotonicity: adding a point never decreases the map") {
    nn::Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        BinaryHitMask mask(48, 48);
        const int n = 1 + static_cast<int>(rng.uniform() * 20);
        for (int i = 0; i < n; ++i)
            mask.at(static_cast<int>(rng.uniform() * 48), static_cast<int>(rng.uniform() * 48)) =
                1;
        const BlurConfig cfg =
            trial % 2 ? BlurConfig::gaussian(3.0) : BlurConfig::default_custom5x5();
        const VisibilityMap before = blur_mask(mask, cfg);
        BinaryHitMask more = mask;
        more.at(static_cast<int>(rng.uniform() * 48), static_cast<int>(rng.uniform() * 48)) = 1;
        const VisibilityMap after = blur_mask(more, cfg);
        for (std::size_t i = 0; i < before.values.size(); ++i)
            CHECK(after.values[i] >= before.values[i]);
    }
}

TEST_CASE("blur locality: output differs only within kernel radius of hits") {
    BinaryHitMask mask(64, 64);
    mask.at(10, 12) = 1;
    mask.at(40, 40) = 1;
    const BlurConfig cfg = BlurConfig::gaussian(2.0);  // radius 6
    const VisibilityMap map = blur_mask(mask, cfg);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const bool near_hit =
                (std::abs(x - 10) <= cfg.radius && std::abs(y - 12) <= cfg.radius) ||
                (std::abs(x - 40) <= cfg.radius && std::abs(y - 40) <= cfg.radius);
            if (!near_hit) CHECK(map.at(x, y) == 0.0f);
        }
}

TEST_CASE("serial and parallel blur agree bitwise") {
    nn::Rng rng(23);
    BinaryHitMask mask(96, 80);
    for (int i = 0; i < 300; ++i)
        mask.at(static_cast<int>(rng.uniform() * 96), static_cast<int>(rng.uniform() * 80)) = 1;

    const auto k1d = blur_detail::gaussian_kernel1d(8.0, 24);
    VisibilityMap serial(96, 80), parallel(96, 80);
    blur_detail::gaussian_blur_serial(mask, k1d, 24, serial);
    blur_detail::gaussian_blur_parallel(mask, k1d, 24, parallel);
    CHECK(serial.values == parallel.values);

    VisibilityMap s5(96, 80), p5(96, 80);
    const auto w = BlurConfig::default_custom5x5().weights;
    blur_detail::conv5x5_serial(mask, w, s5);
    blur_detail::conv5x5_parallel(mask, w, p5);
    CHECK(s5.values == p5.values);
}

TEST_CASE("blur config validation") {
    CHECK_THROWS_AS(BlurConfig::gaussian(0.0), Error);
    std::array<double, 25> w{};
    w[12] = 0.5;  // peak != 1
    CHECK_THROWS_AS(BlurConfig::custom5x5(w), Error);
    w[12] = 1.0;
    w[0] = -0.1;
    CHECK_THROWS_AS(BlurConfig::custom5x5(w), Error);
}

TEST_CASE("colorize ramp") {
    const auto& table = visibility_color_table();

    SUBCASE("endpoints are navy and red") {
        CHECK(table[0] == std::array<std::uint8_t, 3>{0, 0, 128});
        CHECK(table[255] == std::array<std::uint8_t, 3>{255, 0, 0});
    }
    SUBCASE("midpoint derived from the documented anchors") {
        // Index 128 sits exactly on the cyan anchor of the 0/64/128/192/255
        // anchor set.
        CHECK(table[128] == std::array<std::uint8_t, 3>{0, 255, 255});
        // Value 0.5 quantizes to round(255 * 0.5) = 128.
        VisibilityMap map(1, 1);
        map.at(0, 0) = 0.5f;
        const ImageU8 img = colorize(map);
        CHECK(img.at(0, 0, 0) == 0);
        CHECK(img.at(0, 0, 1) == 255);
        CHECK(img.at(0, 0, 2) == 255);
    }
    SUBCASE("all 256 entries are distinct (bijective coding)") {
        std::set<std::array<std::uint8_t, 3>> unique(table.begin(), table.end());
        CHECK(unique.size() == 256);
    }
    SUBCASE("uniform maps colorize uniformly") {
        VisibilityMap zeros(4, 4);
        const ImageU8 blue = colorize(zeros);
        for (int i = 0; i < 16; ++i) {
            CHECK(blue.data[i * 3 + 0] == 0);
            CHECK(blue.data[i * 3 + 2] == 128);
        }
        VisibilityMap ones(4, 4);
        std::fill(ones.values.begin(), ones.values.end(), 1.0f);
        const ImageU8 red = colorize(ones);
        for (int i = 0; i < 16; ++i) CHECK(red.data[i * 3 + 0] == 255);
    }
}

TEST_CASE("float raster round trip") {
    nn::Rng rng(31);
    ImageF img(23, 17, 1);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    const auto path = std::filesystem::temp_directory_path() / "lidarsim_raster_test.raster";
    write_float_raster(path, img);
    const ImageF back = read_float_raster(path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.data == img.data);
    std::filesystem::remove(path);
}

TEST_CASE("visibility map png round trips through 8-bit quantization") {
    VisibilityMap map(8, 8);
    nn::Rng rng(33);
    for (auto& v : map.values) v = static_cast<float>(rng.uniform());
    const auto path = std::filesystem::temp_directory_path() / "lidarsim_map_test.png";
    write_png(path, to_u8(to_image(map)));
    const ImageU8 back = read_png(path);
    REQUIRE(back.channels == 1);
    for (std::size_t i = 0; i < map.values.size(); ++i)
        CHECK(back.data[i] == std::lround(255.0f * map.values[i]));
    std::filesystem::remove(path);
}
