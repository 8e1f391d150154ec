#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lidarsim/geometry.hpp"
#include "lidarsim/image.hpp"
#include "lidarsim/lidar_image.hpp"

namespace lidarsim::dataset {

struct CalibrationSet {
    geometry::CameraIntrinsics camera;
    std::vector<geometry::RigidTransform> lidar_to_cam;  // one per LiDAR sensor
};

/// KITTI calibration text: "KEY: v1 v2 ..." lines with P2 (3x4), R0_rect (3x3)
/// and Tr_velo_to_cam (3x4). Intrinsics come from P2; the extrinsic is
/// R0_rect * Tr_velo_to_cam with P2's fourth column folded into the
/// translation as (P2[0,3]/fx, P2[1,3]/fy, P2[2,3]).
CalibrationSet parse_kitti_calib(const std::string& text);
std::string format_kitti_calib(const CalibrationSet& calib);

/// KITTI velodyne payload: packed little-endian float32 (x, y, z, intensity)
/// records. The format carries no per-point time, so timestamps are
/// synthesized as a uniform ramp over [scan_start, scan_start + scan_period]
/// in storage order.
geometry::PointCloud decode_point_cloud_bin(const std::vector<std::uint8_t>& bytes,
                                            double scan_start = 0.0, double scan_period = 0.1);
std::vector<std::uint8_t> encode_point_cloud_bin(const geometry::PointCloud& cloud);
geometry::PointCloud read_point_cloud_bin(const std::filesystem::path& path,
                                          double scan_start = 0.0, double scan_period = 0.1);
void write_point_cloud_bin(const std::filesystem::path& path, const geometry::PointCloud& cloud);
/// Sidecar of per-point timestamps, float32 LE, same order as the .bin.
void write_timestamps(const std::filesystem::path& path, const geometry::PointCloud& cloud);

struct SegClass {
    std::string name;
    int class_id = 0;  // [0, 63]
    std::array<std::uint8_t, 3> color{};
};

/// Grey coding of segmentation labels: code = class_id * 4 + instance_id with
/// up to four instances per class, so codes stay within [0, 255].
struct SegmentationCoding {
    static constexpr int instances_per_class = 4;
    std::vector<SegClass> classes;

    const SegClass* find(int class_id) const;
    int code(int class_id, int instance_id) const;  // throws UnknownClass / InvalidInstance
    static int class_of_code(int code) { return code / instances_per_class; }
    static int instance_of_code(int code) { return code % instances_per_class; }
};

/// Packs grayscale, normalized depth and grey-coded segmentation into the
/// three channels of the combined network input.
ImageF encode_combined(const ImageF& gray, const ImageF& depth, const ImageU8& seg_codes,
                       const SegmentationCoding& coding);

struct FramePairing {
    int camera_index = 0;
    double camera_timestamp = 0;
    std::vector<int> scan_indices;  // one per sensor stream
};

struct PairingResult {
    std::vector<FramePairing> pairs;
    int dropped = 0;
};

/// Pairs each camera timestamp with the nearest scan per sensor within the
/// tolerance; nearest |dt| wins, ties break to the earlier scan. Camera frames
/// missing any sensor are dropped (and counted).
PairingResult pair_frames(const std::vector<double>& camera_timestamps,
                          const std::vector<std::vector<double>>& scan_timestamps_per_sensor,
                          double tolerance);

struct FrameRecord {
    double camera_timestamp = 0;
    std::filesystem::path image_path;
    std::vector<std::filesystem::path> scan_paths;  // one per sensor
    std::filesystem::path depth_path;               // optional (empty when absent)
    std::filesystem::path seg_path;                 // optional
    std::string split = "train";
};

struct Manifest {
    std::filesystem::path root;  // directory the manifest lives in
    std::filesystem::path calibration_path;
    int sensor_count = 1;
    double scan_period = 0.1;
    double depth_max_range = 80.0;
    std::vector<FrameRecord> frames;
    SegmentationCoding coding;
    /// Optional per-sensor lidar_to_cam extrinsics (3x4 row-major, one row of
    /// 12 numbers per sensor) for multi-LiDAR rigs; replaces the single
    /// extrinsic from the KITTI calibration text when present.
    std::vector<geometry::RigidTransform> sensor_extrinsics;

    CalibrationSet load_calibration() const;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

enum class Modality { RGB, Depth, Segmentation, Combined };

Modality modality_from_string(const std::string& name);
std::string to_string(Modality m);

struct TrainingSample {
    ImageF input;          // H x W x 3, [0,1]
    VisibilityMap target;  // same spatial size
    LetterboxMapping mapping;
};

struct SampleOptions {
    int network_size = 64;  // square network input; 0 keeps native resolution
};

/// Loads the frame, rasterizes all sensors' scans into one mask, blurs it, and
/// assembles the modality input. Depth replicates its channel x3; segmentation
/// renders class display colors; combined packs gray/depth/greycode.
TrainingSample build_sample(const FrameRecord& record, const Manifest& manifest,
                            const CalibrationSet& calib, Modality modality,
                            const BlurConfig& blur, const SampleOptions& options);

/// Target map only (ground-truth LiDAR image at native camera resolution).
VisibilityMap build_target_map(const FrameRecord& record, const Manifest& manifest,
                               const CalibrationSet& calib, const BlurConfig& blur);

}  // namespace lidarsim::dataset
