#include "lidarsim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lidarsim/error.hpp"
#include "lidarsim/nn/rng.hpp"
#include "lidarsim/png_io.hpp"

namespace lidarsim::synth {

using json = nlohmann::ordered_json;

namespace {

constexpr int kClassRoad = 0;
constexpr int kClassBuilding = 1;
constexpr int kClassObstacle = 2;
constexpr int kClassSky = 3;
constexpr int kClassWall = 4;

dataset::SegmentationCoding fixture_coding() {
    dataset::SegmentationCoding coding;
    coding.classes = {
        {"road", kClassRoad, {90, 90, 96}},
        {"building", kClassBuilding, {158, 116, 80}},
        {"obstacle", kClassObstacle, {204, 60, 60}},
        {"sky", kClassSky, {70, 130, 180}},
        {"wall", kClassWall, {150, 150, 150}},
    };
    return coding;
}

float class_intensity(int class_id) {
    switch (class_id) {
        case kClassRoad: return 0.30f;
        case kClassBuilding: return 0.55f;
        case kClassObstacle: return 0.80f;
        case kClassWall: return 0.50f;
        default: return 0.10f;
    }
}

struct RenderedFrame {
    ImageF depth;    // z-depth in meters, 0 = sky
    ImageU8 rgb;     // shaded image
    ImageU8 seg;     // grey codes (class*4 + instance)
};

RenderedFrame render_frame(const SceneSpec& spec, const geometry::CameraIntrinsics& k,
                           const dataset::SegmentationCoding& coding) {
    const auto tris = scene_triangles(spec, k);
    RenderedFrame out;
    out.depth = ImageF(k.width, k.height, 1, 0.0f);
    out.rgb = ImageU8(k.width, k.height, 3);
    out.seg = ImageU8(k.width, k.height, 1);

    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            const Eigen::Vector3d dir((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
            double best_t = std::numeric_limits<double>::infinity();
            int best = -1;
            for (std::size_t i = 0; i < tris.size(); ++i) {
                const auto t = reconstruct::ray_triangle_intersect(
                    Eigen::Vector3d::Zero(), dir, tris[i]);
                if (t && *t < best_t) {
                    best_t = *t;
                    best = static_cast<int>(i);
                }
            }
            int class_id = kClassSky;
            int instance_id = 0;
            std::array<std::uint8_t, 3> albedo = {70, 130, 180};
            double shade = 1.0;
            if (best >= 0) {
                out.depth.at(u, v) = static_cast<float>(best_t);  // dir.z == 1
                class_id = tris[static_cast<std::size_t>(best)].class_id;
                instance_id = tris[static_cast<std::size_t>(best)].instance_id;
                const dataset::SegClass* cls = coding.find(class_id);
                albedo = cls->color;
                shade = 0.35 + 0.65 * std::exp(-best_t / 50.0);
            }
            for (int c = 0; c < 3; ++c)
                out.rgb.at(u, v, c) =
                    static_cast<std::uint8_t>(std::lround(albedo[c] * shade));
            out.seg.at(u, v) = static_cast<std::uint8_t>(
                class_id * dataset::SegmentationCoding::instances_per_class + instance_id);
        }
    }
    return out;
}

json plate_to_json(const Plate& p) {
    json j;
    j["z"] = p.z;
    j["u0"] = p.u0;
    j["u1"] = p.u1;
    j["v0"] = p.v0;
    j["v1"] = p.v1;
    j["class_id"] = p.class_id;
    j["instance_id"] = p.instance_id;
    return j;
}

Plate plate_from_json(const json& j) {
    Plate p;
    p.z = j.at("z").get<double>();
    p.u0 = j.at("u0").get<int>();
    p.u1 = j.at("u1").get<int>();
    p.v0 = j.at("v0").get<int>();
    p.v1 = j.at("v1").get<int>();
    p.class_id = j.at("class_id").get<int>();
    p.instance_id = j.at("instance_id").get<int>();
    return p;
}

}  // namespace

FixtureKind kind_from_string(const std::string& name) {
    if (name == "wall") return FixtureKind::Wall;
    if (name == "street-box") return FixtureKind::StreetBox;
    if (name == "five-sensor") return FixtureKind::FiveSensor;
    raise("InvalidConfig", "unknown fixture kind '" + name + "'");
}

geometry::RigidTransform lidar_to_camera_axes() {
    geometry::RigidTransform t;
    t.rotation << 0, -1, 0,
                  0, 0, -1,
                  1, 0, 0;
    return t;
}

reconstruct::ScanRay ray_for_pixel(const geometry::CameraIntrinsics& k, double u, double v) {
    reconstruct::ScanRay ray;
    ray.azimuth = std::atan((k.cx - u) / k.fx);
    ray.elevation = std::atan((k.cy - v) * std::cos(ray.azimuth) / k.fy);
    return ray;
}

double closed_form_depth(const SceneSpec& spec, const geometry::CameraIntrinsics& k, int u,
                         int v) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : spec.plates)
        if (u >= p.u0 && u <= p.u1 && v >= p.v0 && v <= p.v1) best = std::min(best, p.z);
    const double slope_y = (v - k.cy) / k.fy;
    if (spec.ground_y && slope_y > 0) {
        const double z = *spec.ground_y / slope_y;
        if (z > 0 && (!spec.wall_z || z <= *spec.wall_z)) best = std::min(best, z);
    }
    if (spec.wall_z) {
        const double y_at_wall = slope_y * *spec.wall_z;
        const double y_lo = spec.ground_y ? *spec.ground_y : std::numeric_limits<double>::max();
        if (y_at_wall >= spec.wall_top_y && y_at_wall <= y_lo) best = std::min(best, *spec.wall_z);
    }
    return std::isfinite(best) ? best : 0.0;
}

std::vector<reconstruct::Triangle> scene_triangles(const SceneSpec& spec,
                                                   const geometry::CameraIntrinsics& k) {
    std::vector<reconstruct::Triangle> tris;
    const auto add_quad = [&tris](const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                                  const Eigen::Vector3d& c, const Eigen::Vector3d& d,
                                  int class_id, int instance_id) {
        tris.push_back({a, b, c, class_id, instance_id, 0.5f});
        tris.push_back({a, c, d, class_id, instance_id, 0.5f});
    };

    for (const auto& p : spec.plates) {
        const Eigen::Vector3d tl = geometry::unproject(k, p.u0 - 0.3, p.v0 - 0.3, p.z);
        const Eigen::Vector3d br = geometry::unproject(k, p.u1 + 0.3, p.v1 + 0.3, p.z);
        add_quad({tl.x(), tl.y(), p.z}, {br.x(), tl.y(), p.z}, {br.x(), br.y(), p.z},
                 {tl.x(), br.y(), p.z}, p.class_id, p.instance_id);
    }
    if (spec.ground_y) {
        const double y = *spec.ground_y;
        const double z_far = spec.wall_z ? *spec.wall_z : 500.0;
        add_quad({-300, y, 0.05}, {300, y, 0.05}, {300, y, z_far}, {-300, y, z_far}, kClassRoad,
                 0);
    }
    if (spec.wall_z) {
        const double z = *spec.wall_z;
        const double y_lo = spec.ground_y ? *spec.ground_y : 300.0;
        add_quad({-300, spec.wall_top_y, z}, {300, spec.wall_top_y, z}, {300, y_lo, z},
                 {-300, y_lo, z}, kClassBuilding, 0);
    }
    return tris;
}

SceneSpec load_scene_spec(const std::filesystem::path& params_path, int frame_index) {
    std::ifstream f(params_path);
    if (!f) raise("IoError", "cannot open " + params_path.string());
    json doc = json::parse(f);
    SceneSpec spec;
    if (doc.contains("ground_y") && !doc.at("ground_y").is_null())
        spec.ground_y = doc.at("ground_y").get<double>();
    if (doc.contains("wall_z") && !doc.at("wall_z").is_null())
        spec.wall_z = doc.at("wall_z").get<double>();
    spec.wall_top_y = doc.value("wall_top_y", 0.0);
    const auto& frames = doc.at("frames");
    if (frame_index < 0 || frame_index >= static_cast<int>(frames.size()))
        raise("InvalidConfig", "frame index out of range");
    for (const auto& pj : frames[frame_index].at("plates")) spec.plates.push_back(plate_from_json(pj));
    return spec;
}

FixtureResult generate_fixture(FixtureKind kind, const std::filesystem::path& out_dir,
                               const FixtureOptions& options) {
    namespace fs = std::filesystem;
    const int size = options.image_size;
    if (size < 16) raise("InvalidConfig", "fixture image size must be >= 16");

    fs::create_directories(out_dir / "frames");

    geometry::CameraIntrinsics k;
    k.fx = k.fy = size;
    k.cx = k.cy = size / 2;
    k.width = k.height = size;

    const geometry::RigidTransform extrinsic = lidar_to_camera_axes();
    const int sensor_count = kind == FixtureKind::FiveSensor ? 5 : 1;
    int frame_count = options.frames;
    if (frame_count <= 0)
        frame_count = kind == FixtureKind::Wall ? 1 : (kind == FixtureKind::FiveSensor ? 4 : 16);

    nn::Rng rng(options.seed);
    const dataset::SegmentationCoding coding = fixture_coding();

    // Base scene geometry shared by all frames.
    SceneSpec base;
    if (kind == FixtureKind::Wall) {
        Plate wall;
        wall.z = 5.0;
        wall.u0 = 0;
        wall.u1 = size - 1;
        wall.v0 = 0;
        wall.v1 = size - 1;
        wall.class_id = kClassWall;
        base.plates.push_back(wall);
    } else {
        base.ground_y = 1.5;
        base.wall_z = 30.0;
        base.wall_top_y = -1.0;
    }

    // Scan patterns: pixel-center rays, azimuth-major so time offsets ramp
    // with the sweep.
    std::vector<reconstruct::ScanPattern> patterns(sensor_count);
    const int u_lo = 2, u_hi = size - 3, v_lo = 3, v_hi = size - 4;
    for (int s = 0; s < sensor_count; ++s) {
        auto& pattern = patterns[s];
        pattern.period = 0.1;
        const int u_step = sensor_count == 5 ? 5 : 2;
        const int v_step = sensor_count == 5 ? 3 : 2;
        const int u_off = sensor_count == 5 ? s : 0;
        std::vector<int> columns;
        for (int u = u_lo + u_off; u <= u_hi; u += u_step) columns.push_back(u);
        int col_index = 0;
        for (int u : columns) {
            const double t_off =
                pattern.period * (static_cast<double>(col_index) /
                                  std::max<std::size_t>(columns.size(), 2));
            for (int v = v_lo; v <= v_hi; v += v_step) {
                reconstruct::ScanRay ray = ray_for_pixel(k, u, v);
                ray.time_offset = t_off;
                pattern.rays.push_back(ray);
            }
            ++col_index;
        }
    }

    // Static trajectory: world frame == camera frame at scan start.
    reconstruct::EgoTrajectory traj;
    traj.poses.push_back({0.0, extrinsic});

    // Per-frame scenes with seeded plate jitter.
    json params;
    params["kind"] = kind == FixtureKind::Wall
                         ? "wall"
                         : (kind == FixtureKind::FiveSensor ? "five-sensor" : "street-box");
    params["image_size"] = size;
    params["ground_y"] = base.ground_y ? json(*base.ground_y) : json(nullptr);
    params["wall_z"] = base.wall_z ? json(*base.wall_z) : json(nullptr);
    params["wall_top_y"] = base.wall_top_y;
    json frames_json = json::array();

    dataset::Manifest manifest;
    manifest.root = out_dir;
    manifest.calibration_path = out_dir / "calib.txt";
    manifest.sensor_count = sensor_count;
    manifest.scan_period = 0.1;
    manifest.depth_max_range = 80.0;
    manifest.coding = coding;
    if (sensor_count > 1)
        manifest.sensor_extrinsics.assign(static_cast<std::size_t>(sensor_count), extrinsic);

    for (int f = 0; f < frame_count; ++f) {
        SceneSpec spec = base;
        if (kind != FixtureKind::Wall) {
            // Two road-level obstacles plus one tall structure, jittered per
            // frame within ranges that keep them interior.
            const int obstacle_count = 3;
            for (int i = 0; i < obstacle_count; ++i) {
                Plate p;
                const bool tall = i == 2;
                const int w = 4 + static_cast<int>(rng.uniform() * 6);    // 4..9 px
                const int h = tall ? 14 + static_cast<int>(rng.uniform() * 6)
                                   : 4 + static_cast<int>(rng.uniform() * 5);
                p.u0 = 4 + static_cast<int>(rng.uniform() * (size - 12 - w));
                p.u1 = p.u0 + w;
                if (tall) {
                    p.z = 9.0 + rng.uniform() * 4.0;
                    p.v0 = 8 + static_cast<int>(rng.uniform() * 6);
                } else {
                    p.z = 6.0 + rng.uniform() * 10.0;
                    p.v0 = size / 2 - 2 - static_cast<int>(rng.uniform() * 6);
                }
                p.v1 = std::min(p.v0 + h, size - 6);
                p.class_id = kClassObstacle;
                p.instance_id = i;
                spec.plates.push_back(p);
            }
        }

        const RenderedFrame rendered = render_frame(spec, k, coding);
        char prefix[32];
        std::snprintf(prefix, sizeof(prefix), "%06d", f);
        const fs::path rgb_path = out_dir / "frames" / (std::string(prefix) + "_rgb.png");
        const fs::path depth_path = out_dir / "frames" / (std::string(prefix) + "_depth.raster");
        const fs::path seg_path = out_dir / "frames" / (std::string(prefix) + "_seg.png");
        write_png(rgb_path, rendered.rgb);
        write_float_raster(depth_path, rendered.depth);
        write_png(seg_path, rendered.seg);

        // Scans: cast the sensor patterns against the triangle scene.
        const reconstruct::TriangleDepthProvider scene(scene_triangles(spec, k));
        const double frame_time = 0.1 * f;
        dataset::FrameRecord record;
        record.camera_timestamp = frame_time;
        record.image_path = rgb_path;
        record.depth_path = depth_path;
        record.seg_path = seg_path;
        record.split = f < std::max(1, (frame_count * 3) / 4) ? "train" : "val";

        for (int s = 0; s < sensor_count; ++s) {
            geometry::PointCloud cloud;
            cloud.scan_start = frame_time;
            cloud.scan_end = frame_time + patterns[s].period;
            for (const auto& ray : patterns[s].rays) {
                const Eigen::Vector3d dir_sensor =
                    reconstruct::ray_direction(ray.azimuth, ray.elevation);
                const Eigen::Vector3d dir_cam = extrinsic.rotation * dir_sensor;
                const auto hit = scene.query_indexed(Eigen::Vector3d::Zero(), dir_cam);
                if (!hit) continue;
                const Eigen::Vector3d p_sensor = hit->first * dir_sensor;
                geometry::LidarPoint pt;
                pt.x = p_sensor.x();
                pt.y = p_sensor.y();
                pt.z = p_sensor.z();
                pt.intensity = class_intensity(
                    scene.triangles()[static_cast<std::size_t>(hit->second)].class_id);
                pt.timestamp = frame_time + ray.time_offset;
                cloud.points.push_back(pt);
            }
            const fs::path scan_path =
                out_dir / "frames" /
                (std::string(prefix) + "_s" + std::to_string(s) + ".bin");
            dataset::write_point_cloud_bin(scan_path, cloud);
            record.scan_paths.push_back(scan_path);
        }
        manifest.frames.push_back(record);

        json frame_json;
        json plates = json::array();
        for (const auto& p : spec.plates) plates.push_back(plate_to_json(p));
        frame_json["plates"] = plates;
        frames_json.push_back(frame_json);
    }
    params["frames"] = frames_json;

    // Calibration text (KITTI layout).
    dataset::CalibrationSet calib;
    calib.camera = k;
    calib.lidar_to_cam.push_back(extrinsic);
    {
        std::ofstream out(out_dir / "calib.txt");
        if (!out) raise("IoError", "cannot write calibration");
        out << dataset::format_kitti_calib(calib);
    }

    FixtureResult result;
    result.trajectory_path = out_dir / "trajectory.json";
    reconstruct::save_trajectory(traj, result.trajectory_path);
    for (int s = 0; s < sensor_count; ++s) {
        const fs::path p = out_dir / ("pattern_s" + std::to_string(s) + ".json");
        reconstruct::save_scan_pattern(patterns[s], p);
        result.pattern_paths.push_back(p);
    }
    result.params_path = out_dir / "params.json";
    {
        std::ofstream out(result.params_path);
        if (!out) raise("IoError", "cannot write params.json");
        out << params.dump(2) << "\n";
    }
    result.manifest_path = out_dir / "manifest.json";
    dataset::save_manifest(manifest, result.manifest_path);
    return result;
}

}  // namespace lidarsim::synth
