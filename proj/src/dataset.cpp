#include "lidarsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lidarsim/error.hpp"
#include "lidarsim/png_io.hpp"

namespace lidarsim::dataset {

using json = nlohmann::ordered_json;

namespace {

std::map<std::string, std::vector<double>> parse_key_values(const std::string& text) {
    std::map<std::string, std::vector<double>> out;
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        const std::string key = line.substr(0, colon);
        std::istringstream values(line.substr(colon + 1));
        std::vector<double> nums;
        double v;
        while (values >> v) nums.push_back(v);
        if (!key.empty()) out[key] = std::move(nums);
    }
    return out;
}

const std::vector<double>& require_key(const std::map<std::string, std::vector<double>>& kv,
                                       const std::string& key, std::size_t count) {
    const auto it = kv.find(key);
    if (it == kv.end()) raise("MissingKey", "calibration is missing key " + key);
    if (it->second.size() != count)
        raise("MalformedMatrix", "calibration key " + key + " has " +
                                     std::to_string(it->second.size()) + " values, expected " +
                                     std::to_string(count));
    return it->second;
}

float read_f32_le(const std::uint8_t* p) {
    std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                         (static_cast<std::uint32_t>(p[1]) << 8) |
                         (static_cast<std::uint32_t>(p[2]) << 16) |
                         (static_cast<std::uint32_t>(p[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

void append_f32_le(std::vector<std::uint8_t>& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    out.push_back(static_cast<std::uint8_t>(bits & 0xff));
    out.push_back(static_cast<std::uint8_t>((bits >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((bits >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((bits >> 24) & 0xff));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) raise("IoError", "cannot open " + path.string());
    const auto size = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    return bytes;
}

}  // namespace

CalibrationSet parse_kitti_calib(const std::string& text) {
    const auto kv = parse_key_values(text);
    const auto& p2 = require_key(kv, "P2", 12);
    const auto& r0 = require_key(kv, "R0_rect", 9);
    const auto& tr = require_key(kv, "Tr_velo_to_cam", 12);

    CalibrationSet calib;
    calib.camera.fx = p2[0];
    calib.camera.fy = p2[5];
    calib.camera.cx = p2[2];
    calib.camera.cy = p2[6];
    if (calib.camera.fx <= 0 || calib.camera.fy <= 0)
        raise("MalformedMatrix", "P2 focal lengths must be positive");
    // Optional KITTI-raw-style rectified image size.
    if (const auto s2 = kv.find("S2"); s2 != kv.end() && s2->second.size() == 2) {
        calib.camera.width = static_cast<int>(s2->second[0]);
        calib.camera.height = static_cast<int>(s2->second[1]);
    }

    Eigen::Matrix3d rect;
    rect << r0[0], r0[1], r0[2], r0[3], r0[4], r0[5], r0[6], r0[7], r0[8];
    Eigen::Matrix3d rot;
    rot << tr[0], tr[1], tr[2], tr[4], tr[5], tr[6], tr[8], tr[9], tr[10];
    const Eigen::Vector3d trans(tr[3], tr[7], tr[11]);

    if (!geometry::is_orthonormal(rect, 1e-4))
        raise("NonOrthonormalRotation", "R0_rect is not orthonormal within 1e-4");
    if (!geometry::is_orthonormal(rot, 1e-4))
        raise("NonOrthonormalRotation", "Tr_velo_to_cam rotation is not orthonormal within 1e-4");

    // Text files carry ~7 significant digits; snap to the nearest proper
    // rotation so downstream invariants hold at 1e-9.
    geometry::RigidTransform velo_to_cam;
    velo_to_cam.rotation = geometry::orthonormalized(rot);
    velo_to_cam.translation = trans;
    geometry::RigidTransform rectify;
    rectify.rotation = geometry::orthonormalized(rect);

    geometry::RigidTransform composed = geometry::compose(rectify, velo_to_cam);
    composed.translation +=
        Eigen::Vector3d(p2[3] / calib.camera.fx, p2[7] / calib.camera.fy, p2[11]);
    calib.lidar_to_cam.push_back(composed);
    return calib;
}

std::string format_kitti_calib(const CalibrationSet& calib) {
    // Round-trip-exact floats; emits the composed extrinsic as Tr_velo_to_cam
    // with R0_rect = I and a zero P2 fourth column.
    const auto& k = calib.camera;
    const auto& t = calib.lidar_to_cam.front();
    std::ostringstream out;
    out.precision(17);
    out << "P2: " << k.fx << " 0 " << k.cx << " 0 0 " << k.fy << " " << k.cy << " 0 0 0 1 0\n";
    out << "S2: " << k.width << " " << k.height << "\n";
    out << "R0_rect: 1 0 0 0 1 0 0 0 1\n";
    out << "Tr_velo_to_cam:";
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out << " " << t.rotation(r, c);
        out << " " << t.translation(r);
    }
    out << "\n";
    return out.str();
}

geometry::PointCloud decode_point_cloud_bin(const std::vector<std::uint8_t>& bytes,
                                            double scan_start, double scan_period) {
    if (bytes.size() % 16 != 0)
        raise("TruncatedRecord", "velodyne payload length " + std::to_string(bytes.size()) +
                                     " is not a multiple of 16");
    geometry::PointCloud cloud;
    cloud.scan_start = scan_start;
    cloud.scan_end = scan_start + scan_period;
    const std::size_t n = bytes.size() / 16;
    cloud.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* rec = bytes.data() + i * 16;
        geometry::LidarPoint pt;
        pt.x = read_f32_le(rec);
        pt.y = read_f32_le(rec + 4);
        pt.z = read_f32_le(rec + 8);
        pt.intensity = read_f32_le(rec + 12);
        pt.timestamp = n > 1 ? scan_start + scan_period * (static_cast<double>(i) / (n - 1))
                             : scan_start;
        cloud.points.push_back(pt);
    }
    return cloud;
}

std::vector<std::uint8_t> encode_point_cloud_bin(const geometry::PointCloud& cloud) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(cloud.points.size() * 16);
    for (const auto& pt : cloud.points) {
        append_f32_le(bytes, static_cast<float>(pt.x));
        append_f32_le(bytes, static_cast<float>(pt.y));
        append_f32_le(bytes, static_cast<float>(pt.z));
        append_f32_le(bytes, pt.intensity);
    }
    return bytes;
}

geometry::PointCloud read_point_cloud_bin(const std::filesystem::path& path, double scan_start,
                                          double scan_period) {
    return decode_point_cloud_bin(read_file_bytes(path), scan_start, scan_period);
}

void write_point_cloud_bin(const std::filesystem::path& path, const geometry::PointCloud& cloud) {
    const auto bytes = encode_point_cloud_bin(cloud);
    std::ofstream f(path, std::ios::binary);
    if (!f) raise("IoError", "cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void write_timestamps(const std::filesystem::path& path, const geometry::PointCloud& cloud) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(cloud.points.size() * 4);
    for (const auto& pt : cloud.points) append_f32_le(bytes, static_cast<float>(pt.timestamp));
    std::ofstream f(path, std::ios::binary);
    if (!f) raise("IoError", "cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

const SegClass* SegmentationCoding::find(int class_id) const {
    for (const auto& c : classes)
        if (c.class_id == class_id) return &c;
    return nullptr;
}

int SegmentationCoding::code(int class_id, int instance_id) const {
    const SegClass* cls = find(class_id);
    if (!cls) raise("UnknownClass", "unknown segmentation class id " + std::to_string(class_id));
    if (instance_id < 0 || instance_id >= instances_per_class)
        raise("InvalidInstance", "instance id out of range: " + std::to_string(instance_id));
    return class_id * instances_per_class + instance_id;
}

ImageF encode_combined(const ImageF& gray, const ImageF& depth, const ImageU8& seg_codes,
                       const SegmentationCoding& coding) {
    if (gray.channels != 1 || depth.channels != 1 || seg_codes.channels != 1)
        raise("DimensionMismatch", "encode_combined expects single-channel inputs");
    if (gray.width != depth.width || gray.height != depth.height ||
        gray.width != seg_codes.width || gray.height != seg_codes.height)
        raise("DimensionMismatch", "encode_combined inputs must share dimensions");

    ImageF out(gray.width, gray.height, 3);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const int code = seg_codes.at(x, y);
            if (!coding.find(SegmentationCoding::class_of_code(code)))
                raise("UnknownClass",
                      "segmentation code " + std::to_string(code) + " has no class entry");
            out.at(x, y, 0) = gray.at(x, y);
            out.at(x, y, 1) = depth.at(x, y);
            out.at(x, y, 2) = static_cast<float>(code) / 255.0f;
        }
    }
    return out;
}

PairingResult pair_frames(const std::vector<double>& camera_timestamps,
                          const std::vector<std::vector<double>>& scan_timestamps_per_sensor,
                          double tolerance) {
    const auto check_sorted = [](const std::vector<double>& ts, const char* what) {
        if (!std::is_sorted(ts.begin(), ts.end()))
            raise("UnsortedStream", std::string(what) + " timestamps are not sorted");
    };
    check_sorted(camera_timestamps, "camera");
    for (const auto& ts : scan_timestamps_per_sensor) check_sorted(ts, "scan");

    PairingResult result;
    for (std::size_t ci = 0; ci < camera_timestamps.size(); ++ci) {
        const double t = camera_timestamps[ci];
        FramePairing pairing;
        pairing.camera_index = static_cast<int>(ci);
        pairing.camera_timestamp = t;
        bool complete = true;
        for (const auto& scans : scan_timestamps_per_sensor) {
            int best = -1;
            double best_dt = 0;
            // Ties on |dt| (within rounding noise) keep the earlier scan;
            // scans iterate in ascending time, so the first winner stands.
            const double tie_eps = 1e-9 * std::max(1.0, std::abs(t));
            for (std::size_t si = 0; si < scans.size(); ++si) {
                const double dt = std::abs(scans[si] - t);
                if (dt > tolerance) continue;
                if (best < 0 || dt < best_dt - tie_eps) {
                    best = static_cast<int>(si);
                    best_dt = dt;
                }
            }
            if (best < 0) {
                complete = false;
                break;
            }
            pairing.scan_indices.push_back(best);
        }
        if (complete)
            result.pairs.push_back(std::move(pairing));
        else
            ++result.dropped;
    }
    return result;
}

CalibrationSet Manifest::load_calibration() const {
    std::ifstream f(calibration_path);
    if (!f) raise("IoError", "cannot open calibration " + calibration_path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    CalibrationSet calib = parse_kitti_calib(buf.str());
    if (!sensor_extrinsics.empty()) calib.lidar_to_cam = sensor_extrinsics;
    if (static_cast<int>(calib.lidar_to_cam.size()) < sensor_count)
        raise("MalformedManifest", "manifest declares " + std::to_string(sensor_count) +
                                       " sensors but provides fewer extrinsics");
    return calib;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) raise("IoError", "cannot open manifest " + path.string());
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::parse_error& e) {
        raise("MalformedManifest", path.string() + ": " + e.what());
    }

    Manifest m;
    m.root = path.parent_path();
    if (!doc.contains("calibration")) raise("MissingKey", "manifest is missing 'calibration'");
    m.calibration_path = m.root / doc.at("calibration").get<std::string>();
    m.sensor_count = doc.value("sensor_count", 1);
    m.scan_period = doc.value("scan_period", 0.1);
    m.depth_max_range = doc.value("depth_max_range", 80.0);

    for (const auto& row : doc.value("sensor_extrinsics", json::array())) {
        if (row.size() != 12)
            raise("MalformedManifest", "sensor_extrinsics rows must hold 12 numbers (3x4)");
        geometry::RigidTransform t;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) t.rotation(r, c) = row[r * 4 + c].get<double>();
            t.translation(r) = row[r * 4 + 3].get<double>();
        }
        if (!geometry::is_orthonormal(t.rotation, 1e-4))
            raise("NonOrthonormalRotation", "sensor_extrinsics rotation is not orthonormal");
        t.rotation = geometry::orthonormalized(t.rotation);
        m.sensor_extrinsics.push_back(t);
    }

    if (doc.contains("classes")) {
        for (const auto& c : doc.at("classes")) {
            SegClass cls;
            cls.name = c.at("name").get<std::string>();
            cls.class_id = c.at("id").get<int>();
            if (c.contains("color"))
                for (int i = 0; i < 3; ++i)
                    cls.color[i] = static_cast<std::uint8_t>(c.at("color")[i].get<int>());
            m.coding.classes.push_back(std::move(cls));
        }
    }

    for (const auto& fr : doc.value("frames", json::array())) {
        FrameRecord record;
        record.camera_timestamp = fr.value("timestamp", 0.0);
        record.image_path = m.root / fr.at("image").get<std::string>();
        for (const auto& s : fr.at("scans")) record.scan_paths.push_back(m.root / s.get<std::string>());
        if (fr.contains("depth")) record.depth_path = m.root / fr.at("depth").get<std::string>();
        if (fr.contains("segmentation"))
            record.seg_path = m.root / fr.at("segmentation").get<std::string>();
        record.split = fr.value("split", "train");
        if (static_cast<int>(record.scan_paths.size()) != m.sensor_count)
            raise("MalformedManifest", "frame lists " + std::to_string(record.scan_paths.size()) +
                                           " scans, manifest declares " +
                                           std::to_string(m.sensor_count) + " sensors");
        m.frames.push_back(std::move(record));
    }
    return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    json doc;
    doc["calibration"] =
        std::filesystem::relative(manifest.calibration_path, manifest.root).string();
    doc["sensor_count"] = manifest.sensor_count;
    doc["scan_period"] = manifest.scan_period;
    doc["depth_max_range"] = manifest.depth_max_range;
    if (!manifest.sensor_extrinsics.empty()) {
        json rows = json::array();
        for (const auto& t : manifest.sensor_extrinsics) {
            json row = json::array();
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) row.push_back(t.rotation(r, c));
                row.push_back(t.translation(r));
            }
            rows.push_back(row);
        }
        doc["sensor_extrinsics"] = rows;
    }
    json classes = json::array();
    for (const auto& c : manifest.coding.classes) {
        json cls;
        cls["name"] = c.name;
        cls["id"] = c.class_id;
        cls["color"] = {c.color[0], c.color[1], c.color[2]};
        classes.push_back(cls);
    }
    doc["classes"] = classes;
    json frames = json::array();
    for (const auto& fr : manifest.frames) {
        json f;
        f["timestamp"] = fr.camera_timestamp;
        f["image"] = std::filesystem::relative(fr.image_path, manifest.root).string();
        json scans = json::array();
        for (const auto& s : fr.scan_paths)
            scans.push_back(std::filesystem::relative(s, manifest.root).string());
        f["scans"] = scans;
        if (!fr.depth_path.empty())
            f["depth"] = std::filesystem::relative(fr.depth_path, manifest.root).string();
        if (!fr.seg_path.empty())
            f["segmentation"] = std::filesystem::relative(fr.seg_path, manifest.root).string();
        f["split"] = fr.split;
        frames.push_back(f);
    }
    doc["frames"] = frames;
    std::ofstream out(path);
    if (!out) raise("IoError", "cannot open " + path.string() + " for writing");
    out << doc.dump(2) << "\n";
}

Modality modality_from_string(const std::string& name) {
    if (name == "rgb") return Modality::RGB;
    if (name == "depth") return Modality::Depth;
    if (name == "seg" || name == "segmentation") return Modality::Segmentation;
    if (name == "combined") return Modality::Combined;
    raise("InvalidConfig", "unknown modality '" + name + "'");
}

std::string to_string(Modality m) {
    switch (m) {
        case Modality::RGB: return "rgb";
        case Modality::Depth: return "depth";
        case Modality::Segmentation: return "segmentation";
        case Modality::Combined: return "combined";
    }
    return "rgb";
}

namespace {

ImageF load_rgb_image(const std::filesystem::path& path) {
    const ImageU8 img = read_png(path);
    ImageF out(img.width, img.height, 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(x, y, c) =
                    static_cast<float>(img.at(x, y, img.channels == 1 ? 0 : c)) / 255.0f;
    return out;
}

ImageF rgb_to_gray(const ImageF& rgb) {
    ImageF gray(rgb.width, rgb.height, 1);
    for (int y = 0; y < rgb.height; ++y)
        for (int x = 0; x < rgb.width; ++x)
            gray.at(x, y) = 0.299f * rgb.at(x, y, 0) + 0.587f * rgb.at(x, y, 1) +
                            0.114f * rgb.at(x, y, 2);
    return gray;
}

ImageF normalized_depth(const FrameRecord& record, const Manifest& manifest) {
    if (record.depth_path.empty())
        raise("MissingChannel", "modality requires a depth raster but the frame has none");
    ImageF depth = read_float_raster(record.depth_path);
    for (auto& v : depth.data) {
        const float norm = v / static_cast<float>(manifest.depth_max_range);
        v = std::clamp(norm, 0.0f, 1.0f);
    }
    return depth;
}

ImageU8 load_seg_codes(const FrameRecord& record) {
    if (record.seg_path.empty())
        raise("MissingChannel", "modality requires segmentation but the frame has none");
    ImageU8 seg = read_png(record.seg_path);
    if (seg.channels != 1) raise("MalformedImage", "segmentation PNG must be single-channel");
    return seg;
}

}  // namespace

VisibilityMap build_target_map(const FrameRecord& record, const Manifest& manifest,
                               const CalibrationSet& calib, const BlurConfig& blur) {
    BinaryHitMask mask(calib.camera.width, calib.camera.height);
    for (std::size_t s = 0; s < record.scan_paths.size(); ++s) {
        if (s >= calib.lidar_to_cam.size())
            raise("MalformedManifest", "more scan files than LiDAR extrinsics");
        const geometry::PointCloud cloud =
            read_point_cloud_bin(record.scan_paths[s], record.camera_timestamp,
                                 manifest.scan_period);
        rasterize_scan_into(mask, cloud, calib.lidar_to_cam[s], calib.camera);
    }
    return blur_mask(mask, blur);
}

TrainingSample build_sample(const FrameRecord& record, const Manifest& manifest,
                            const CalibrationSet& calib, Modality modality,
                            const BlurConfig& blur, const SampleOptions& options) {
    ImageF input;
    switch (modality) {
        case Modality::RGB: {
            input = load_rgb_image(record.image_path);
            break;
        }
        case Modality::Depth: {
            const ImageF depth = normalized_depth(record, manifest);
            input = ImageF(depth.width, depth.height, 3);
            for (int y = 0; y < depth.height; ++y)
                for (int x = 0; x < depth.width; ++x)
                    for (int c = 0; c < 3; ++c) input.at(x, y, c) = depth.at(x, y);
            break;
        }
        case Modality::Segmentation: {
            const ImageU8 seg = load_seg_codes(record);
            input = ImageF(seg.width, seg.height, 3);
            for (int y = 0; y < seg.height; ++y) {
                for (int x = 0; x < seg.width; ++x) {
                    const int code = seg.at(x, y);
                    const SegClass* cls =
                        manifest.coding.find(SegmentationCoding::class_of_code(code));
                    if (!cls)
                        raise("UnknownClass",
                              "segmentation code " + std::to_string(code) + " has no class entry");
                    for (int c = 0; c < 3; ++c)
                        input.at(x, y, c) = static_cast<float>(cls->color[c]) / 255.0f;
                }
            }
            break;
        }
        case Modality::Combined: {
            const ImageF gray = rgb_to_gray(load_rgb_image(record.image_path));
            const ImageF depth = normalized_depth(record, manifest);
            const ImageU8 seg = load_seg_codes(record);
            input = encode_combined(gray, depth, seg, manifest.coding);
            break;
        }
    }

    const VisibilityMap target_native = build_target_map(record, manifest, calib, blur);

    TrainingSample sample;
    if (options.network_size > 0) {
        sample.input = letterbox(input, options.network_size, &sample.mapping);
        const ImageF boxed_target = letterbox(to_image(target_native), options.network_size);
        sample.target = visibility_from_image(boxed_target);
    } else {
        sample.mapping = LetterboxMapping{input.width, input.height, 0, 1.0, 0.0, 0.0};
        sample.input = std::move(input);
        sample.target = target_native;
    }
    if (sample.input.width != sample.target.width || sample.input.height != sample.target.height)
        raise("DimensionMismatch", "input and target dimensions differ");
    return sample;
}

}  // namespace lidarsim::dataset
