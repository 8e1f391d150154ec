#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lidarsim/dataset.hpp"
#include "lidarsim/error.hpp"
#include "lidarsim/metrics.hpp"
#include "lidarsim/pix2pix.hpp"
#include "lidarsim/png_io.hpp"
#include "lidarsim/reconstruct.hpp"
#include "lidarsim/runtime.hpp"
#include "lidarsim/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lidarsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitUsage = 64;
constexpr int kExitInternal = 70;

struct BlurFlags {
    std::string mode = "custom5x5";
    double sigma = 8.0;
    int radius = 0;

    BlurConfig build() const {
        if (mode == "gaussian") return BlurConfig::gaussian(sigma, radius);
        if (mode == "custom5x5") return BlurConfig::default_custom5x5();
        raise("InvalidConfig", "unknown blur mode '" + mode + "'");
    }

    json to_json() const {
        json j;
        j["mode"] = mode;
        j["sigma"] = sigma;
        j["radius"] = radius;
        return j;
    }

    static BlurFlags from_json(const json& j) {
        BlurFlags f;
        f.mode = j.value("mode", "custom5x5");
        f.sigma = j.value("sigma", 8.0);
        f.radius = j.value("radius", 0);
        return f;
    }
};

void add_blur_flags(CLI::App* cmd, BlurFlags& flags) {
    cmd->add_option("--blur", flags.mode, "Blur kernel: gaussian or custom5x5")
        ->default_str(flags.mode);
    cmd->add_option("--sigma", flags.sigma, "Gaussian sigma in pixels");
    cmd->add_option("--radius", flags.radius, "Gaussian truncation radius (0 = ceil(3*sigma))");
}

std::string frame_prefix(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", index);
    return buf;
}

std::vector<fs::path> sorted_rasters(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) raise("IoError", dir.string() + " is not a directory");
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".raster")
            out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string kind;
    std::string out;
    int size = 64;
    int frames = 0;
    std::uint64_t seed = 42;
};

int run_synth(const SynthArgs& args) {
    synth::FixtureOptions options;
    options.image_size = args.size;
    options.frames = args.frames;
    options.seed = args.seed;
    const auto result =
        synth::generate_fixture(synth::kind_from_string(args.kind), args.out, options);
    std::cerr << "fixture written: " << result.manifest_path.string() << "\n";
    return kExitOk;
}

struct GenImagesArgs {
    std::string manifest;
    std::string out;
    BlurFlags blur;
};

int run_gen_lidar_images(const GenImagesArgs& args) {
    const dataset::Manifest manifest = dataset::load_manifest(args.manifest);
    if (manifest.frames.empty()) raise("EmptyDataset", "manifest lists no frames");
    const dataset::CalibrationSet calib = manifest.load_calibration();
    const BlurConfig blur = args.blur.build();
    fs::create_directories(args.out);
    for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
        const VisibilityMap map =
            dataset::build_target_map(manifest.frames[i], manifest, calib, blur);
        const std::string prefix = frame_prefix(static_cast<int>(i));
        write_float_raster(fs::path(args.out) / (prefix + "_target.raster"), to_image(map));
        write_png(fs::path(args.out) / (prefix + "_target.png"), colorize(map));
    }
    std::cerr << "wrote " << manifest.frames.size() << " visibility maps to " << args.out
              << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string manifest;
    std::string out;
    std::string config_path;
    std::string modality = "rgb";
    std::string split = "train";
    BlurFlags blur;
    pix2pix::UNetConfig unet = pix2pix::UNetConfig::desk();
    pix2pix::PatchGANConfig disc = pix2pix::PatchGANConfig::desk();
    pix2pix::TrainConfig train = [] {
        pix2pix::TrainConfig cfg;
        cfg.steps = 2000;
        cfg.checkpoint_every = 0;
        cfg.log_every = 10;
        return cfg;
    }();
};

void apply_config_file(TrainArgs& args) {
    if (args.config_path.empty()) return;
    std::ifstream f(args.config_path);
    if (!f) raise("IoError", "cannot open config " + args.config_path);
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::parse_error& e) {
        raise("MalformedConfig", std::string("config: ") + e.what());
    }
    args.modality = doc.value("modality", args.modality);
    args.split = doc.value("split", args.split);
    if (doc.contains("blur")) args.blur = BlurFlags::from_json(doc.at("blur"));
    if (doc.contains("unet")) {
        const auto& u = doc.at("unet");
        args.unet.input_size = u.value("input_size", args.unet.input_size);
        args.unet.base_channels = u.value("base_channels", args.unet.base_channels);
        args.unet.depth = u.value("depth", args.unet.depth);
        args.unet.dropout_rate = u.value("dropout_rate", args.unet.dropout_rate);
        args.unet.dropout_blocks = u.value("dropout_blocks", args.unet.dropout_blocks);
    }
    if (doc.contains("patchgan")) {
        const auto& d = doc.at("patchgan");
        args.disc.base_channels = d.value("base_channels", args.disc.base_channels);
        args.disc.stride2_layers = d.value("stride2_layers", args.disc.stride2_layers);
    }
    if (doc.contains("train")) {
        const auto& t = doc.at("train");
        args.train.lr = t.value("lr", args.train.lr);
        args.train.beta1 = t.value("beta1", args.train.beta1);
        args.train.beta2 = t.value("beta2", args.train.beta2);
        args.train.lambda = t.value("lambda", args.train.lambda);
        args.train.steps = t.value("steps", args.train.steps);
        args.train.seed = t.value("seed", args.train.seed);
        args.train.checkpoint_every = t.value("checkpoint_every", args.train.checkpoint_every);
        args.train.log_every = t.value("log_every", args.train.log_every);
    }
}

json model_sidecar(const TrainArgs& args) {
    json doc;
    json u;
    u["input_size"] = args.unet.input_size;
    u["base_channels"] = args.unet.base_channels;
    u["depth"] = args.unet.depth;
    u["dropout_rate"] = args.unet.dropout_rate;
    u["dropout_blocks"] = args.unet.dropout_blocks;
    doc["unet"] = u;
    json d;
    d["base_channels"] = args.disc.base_channels;
    d["stride2_layers"] = args.disc.stride2_layers;
    doc["patchgan"] = d;
    doc["modality"] = args.modality;
    doc["blur"] = args.blur.to_json();
    doc["seed"] = args.train.seed;
    return doc;
}

int run_train(TrainArgs args) {
    apply_config_file(args);
    args.unet.validate();
    args.disc.validate();

    const dataset::Manifest manifest = dataset::load_manifest(args.manifest);
    const dataset::CalibrationSet calib = manifest.load_calibration();
    const dataset::Modality modality = dataset::modality_from_string(args.modality);
    const BlurConfig blur = args.blur.build();
    dataset::SampleOptions sample_options;
    sample_options.network_size = args.unet.input_size;

    std::vector<std::pair<pix2pix::Tensor<float>, pix2pix::Tensor<float>>> pairs;
    for (const auto& record : manifest.frames) {
        if (!args.split.empty() && record.split != args.split) continue;
        const dataset::TrainingSample sample =
            dataset::build_sample(record, manifest, calib, modality, blur, sample_options);
        pairs.emplace_back(pix2pix::image_to_signed_tensor<float>(sample.input),
                           pix2pix::map_to_signed_tensor<float>(sample.target));
    }
    if (pairs.empty()) raise("EmptyDataset", "no frames in split '" + args.split + "'");

    fs::create_directories(args.out);
    pix2pix::Pix2Pix<float> model(args.unet, args.disc, args.train.seed);

    std::ofstream log(fs::path(args.out) / "train_log.jsonl");
    if (!log) raise("IoError", "cannot open training log for writing");

    pix2pix::TrainHooks hooks;
    hooks.on_record = [&log](const pix2pix::StepRecord& rec) {
        json j;
        j["step"] = rec.step;
        j["d_loss"] = rec.d_loss;
        j["g_total"] = rec.g_total;
        j["g_adv"] = rec.g_adv;
        j["g_l1"] = rec.g_l1;
        log << j.dump() << "\n";
    };
    hooks.on_checkpoint = [&model, &args](int step) {
        nn::save_checkpoint(fs::path(args.out) / "checkpoint.ckpt", model.snapshot());
        if (args.train.checkpoint_every > 0 && step < args.train.steps) {
            nn::save_checkpoint(
                fs::path(args.out) / ("checkpoint_" + frame_prefix(step) + ".ckpt"),
                model.snapshot());
        }
    };

    const auto records = pix2pix::train(model, pairs, args.train, hooks);
    {
        std::ofstream sidecar(fs::path(args.out) / "model.json");
        sidecar << model_sidecar(args).dump(2) << "\n";
    }
    if (!records.empty()) {
        const auto& last = records.back();
        std::cerr << "trained " << args.train.steps << " steps; final d_loss=" << last.d_loss
                  << " g_l1=" << last.g_l1 << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct InferArgs {
    std::string checkpoint;
    std::string manifest;
    std::string input;
    std::string out;
    std::string split;  // empty = all frames
};

struct LoadedModel {
    pix2pix::UNetConfig unet;
    pix2pix::PatchGANConfig disc;
    std::string modality = "rgb";
    BlurFlags blur;
    std::unique_ptr<pix2pix::Pix2Pix<float>> model;
};

LoadedModel load_model(const fs::path& checkpoint_path) {
    LoadedModel lm;
    const fs::path sidecar = checkpoint_path.parent_path() / "model.json";
    if (fs::exists(sidecar)) {
        std::ifstream f(sidecar);
        const json doc = json::parse(f);
        const auto& u = doc.at("unet");
        lm.unet.input_size = u.value("input_size", 64);
        lm.unet.base_channels = u.value("base_channels", 8);
        lm.unet.depth = u.value("depth", 4);
        lm.unet.dropout_rate = u.value("dropout_rate", 0.5);
        lm.unet.dropout_blocks = u.value("dropout_blocks", 3);
        const auto& d = doc.at("patchgan");
        lm.disc.base_channels = d.value("base_channels", 8);
        lm.disc.stride2_layers = d.value("stride2_layers", 3);
        lm.modality = doc.value("modality", "rgb");
        if (doc.contains("blur")) lm.blur = BlurFlags::from_json(doc.at("blur"));
    } else {
        lm.unet = pix2pix::UNetConfig::desk();
        lm.disc = pix2pix::PatchGANConfig::desk();
    }
    lm.model = std::make_unique<pix2pix::Pix2Pix<float>>(lm.unet, lm.disc, 0);
    lm.model->restore(nn::load_checkpoint(checkpoint_path));
    return lm;
}

ImageF gray_to_rgb(const ImageF& img) {
    if (img.channels == 3) return img;
    ImageF out(img.width, img.height, 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, 0);
    return out;
}

int run_infer(const InferArgs& args) {
    if (args.manifest.empty() == args.input.empty())
        raise("InvalidConfig", "provide exactly one of --manifest or --input");
    LoadedModel lm = load_model(args.checkpoint);

    if (!args.input.empty()) {
        const ImageF native = gray_to_rgb(to_float(read_png(args.input)));
        LetterboxMapping mapping;
        const ImageF boxed = letterbox(native, lm.unet.input_size, &mapping);
        const VisibilityMap map = lm.model->infer(boxed);
        const ImageF restored = unletterbox(to_image(map), mapping);
        fs::create_directories(fs::path(args.out));
        const fs::path base = fs::path(args.out) / "pred";
        write_float_raster(base.string() + ".raster", restored);
        write_png(base.string() + ".png", to_u8(restored));
        return kExitOk;
    }

    const dataset::Manifest manifest = dataset::load_manifest(args.manifest);
    const dataset::CalibrationSet calib = manifest.load_calibration();
    const dataset::Modality modality = dataset::modality_from_string(lm.modality);
    const BlurConfig blur = lm.blur.build();
    dataset::SampleOptions sample_options;
    sample_options.network_size = lm.unet.input_size;
    fs::create_directories(args.out);
    int written = 0;
    for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
        const auto& record = manifest.frames[i];
        if (!args.split.empty() && record.split != args.split) continue;
        const dataset::TrainingSample sample =
            dataset::build_sample(record, manifest, calib, modality, blur, sample_options);
        const VisibilityMap map = lm.model->infer(sample.input);
        const std::string prefix = frame_prefix(static_cast<int>(i));
        write_float_raster(fs::path(args.out) / (prefix + "_pred.raster"), to_image(map));
        write_png(fs::path(args.out) / (prefix + "_pred.png"), to_u8(to_image(map)));
        ++written;
    }
    if (written == 0) raise("EmptyDataset", "no frames matched the requested split");
    std::cerr << "wrote " << written << " predictions to " << args.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct ReconstructArgs {
    std::string vis;
    std::string depth;
    std::string calib;
    std::string mode = "grid";
    std::string pattern;
    std::string trajectory;
    std::string out;
    std::string timestamps;
    int stride = 2;
    double threshold = 0.5;
    double scan_start = 0.0;
};

geometry::CameraIntrinsics load_calib_intrinsics(const std::string& path,
                                                 geometry::RigidTransform* extrinsic) {
    std::ifstream f(path);
    if (!f) raise("IoError", "cannot open calibration " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    const dataset::CalibrationSet calib = dataset::parse_kitti_calib(buf.str());
    if (extrinsic) *extrinsic = calib.lidar_to_cam.front();
    return calib.camera;
}

int run_reconstruct(const ReconstructArgs& args) {
    const ImageF vis_img = read_float_raster(args.vis);
    const VisibilityMap vis = visibility_from_image(vis_img);
    geometry::RigidTransform lidar_to_cam;
    geometry::CameraIntrinsics k = load_calib_intrinsics(args.calib, &lidar_to_cam);
    if (k.width == 0) {
        k.width = vis.width;
        k.height = vis.height;
    }

    geometry::PointCloud cloud;
    if (args.mode == "grid") {
        const ImageF depth = read_float_raster(args.depth);
        cloud = reconstruct::sample_grid(vis, depth, k, args.stride, args.threshold);
    } else if (args.mode == "raycast") {
        if (args.pattern.empty() || args.trajectory.empty())
            raise("InvalidConfig", "raycast mode requires --pattern and --trajectory");
        const ImageF depth = read_float_raster(args.depth);
        const reconstruct::ScanPattern pattern = reconstruct::load_scan_pattern(args.pattern);
        const reconstruct::EgoTrajectory traj = reconstruct::load_trajectory(args.trajectory);
        const geometry::RigidTransform world_from_lidar0 =
            reconstruct::interpolate_pose(traj, args.scan_start);
        const geometry::RigidTransform world_from_camera =
            geometry::compose(world_from_lidar0, geometry::invert_transform(lidar_to_cam));
        const reconstruct::RasterDepthProvider scene(depth, k, world_from_camera);
        reconstruct::RaycastOptions options;
        options.threshold = args.threshold;
        options.scan_start = args.scan_start;
        cloud = reconstruct::raycast_scan(pattern, traj, scene, vis, k, lidar_to_cam, options);
    } else {
        raise("InvalidConfig", "unknown reconstruction mode '" + args.mode + "'");
    }

    dataset::write_point_cloud_bin(args.out, cloud);
    if (!args.timestamps.empty()) dataset::write_timestamps(args.timestamps, cloud);
    std::cerr << "wrote " << cloud.points.size() << " points to " << args.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string pred;
    std::string gt;
    std::string out;
    std::string format = "csv";
    std::string json_path;
    std::string overlay_dir;
    std::string label = "all";
};

int run_evaluate(const EvaluateArgs& args) {
    const auto pred_files = sorted_rasters(args.pred);
    const auto gt_files = sorted_rasters(args.gt);
    if (pred_files.empty()) raise("EmptyInput", "no .raster files in " + args.pred);
    if (pred_files.size() != gt_files.size())
        raise("DimensionMismatch", "prediction and ground-truth directories differ in size");

    std::ofstream json_out;
    if (!args.json_path.empty()) {
        json_out.open(args.json_path);
        if (!json_out) raise("IoError", "cannot open " + args.json_path + " for writing");
    }
    if (!args.overlay_dir.empty()) fs::create_directories(args.overlay_dir);

    std::vector<metrics::MetricsReport> reports;
    for (std::size_t i = 0; i < pred_files.size(); ++i) {
        const VisibilityMap pred = visibility_from_image(read_float_raster(pred_files[i]));
        const VisibilityMap gt = visibility_from_image(read_float_raster(gt_files[i]));
        const metrics::MetricsReport report = metrics::evaluate_pair(pred, gt);
        if (json_out.is_open())
            json_out << metrics::report_to_json(report, pred_files[i].filename().string())
                     << "\n";
        if (!args.overlay_dir.empty())
            write_png(fs::path(args.overlay_dir) /
                          (pred_files[i].stem().string() + "_overlay.png"),
                      metrics::overlay(pred, gt));
        reports.push_back(report);
    }
    const metrics::MetricsReport total = metrics::aggregate(reports);
    const metrics::TableFormat format = args.format == "markdown"
                                            ? metrics::TableFormat::Markdown
                                            : metrics::TableFormat::Csv;
    const std::string table = metrics::emit_table({{args.label, total}}, format);
    std::ofstream out(args.out);
    if (!out) raise("IoError", "cannot open " + args.out + " for writing");
    out << table;
    std::cout << table;
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    int input_size = 64;
    int base_channels = 8;
    int depth = 4;
    int repeats = 20;
};

int run_bench(const BenchArgs& args) {
    pix2pix::UNetConfig cfg = pix2pix::UNetConfig::desk();
    cfg.input_size = args.input_size;
    cfg.base_channels = args.base_channels;
    cfg.depth = args.depth;
    cfg.validate();
    pix2pix::Pix2Pix<float> model(cfg, pix2pix::PatchGANConfig::desk(), 42);

    ImageF input(cfg.input_size, cfg.input_size, 3, 0.25f);
    model.infer(input);  // warm up
    double total_ms = 0, min_ms = std::numeric_limits<double>::infinity();
    for (int i = 0; i < args.repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        model.infer(input);
        const auto t1 = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        total_ms += ms;
        min_ms = std::min(min_ms, ms);
    }
    json doc;
    doc["input_size"] = cfg.input_size;
    doc["base_channels"] = cfg.base_channels;
    doc["depth"] = cfg.depth;
    doc["repeats"] = args.repeats;
    doc["threads"] = runtime::threads();
    doc["mean_ms"] = total_ms / args.repeats;
    doc["min_ms"] = min_ms;
    std::cout << doc.dump() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned LiDAR visibility simulation pipeline"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads,
                   "Worker threads for the parallel kernels (1 = deterministic serial)");
    app.fallthrough();

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth-fixture", "Generate a synthetic desk-scale fixture");
    synth_cmd->add_option("--kind", synth_args.kind, "wall | street-box | five-sensor")
        ->required();
    synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();
    synth_cmd->add_option("--size", synth_args.size, "Square image size in pixels");
    synth_cmd->add_option("--frames", synth_args.frames, "Frame count (0 = per-kind default)");
    synth_cmd->add_option("--seed", synth_args.seed, "Deterministic seed");

    GenImagesArgs gen_args;
    auto* gen_cmd =
        app.add_subcommand("gen-lidar-images", "Rasterize + blur scans into visibility maps");
    gen_cmd->add_option("--manifest", gen_args.manifest, "Dataset manifest")->required();
    gen_cmd->add_option("--out", gen_args.out, "Output directory")->required();
    add_blur_flags(gen_cmd, gen_args.blur);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train the translation network");
    train_cmd->add_option("--manifest", train_args.manifest, "Dataset manifest")->required();
    train_cmd->add_option("--out", train_args.out, "Output directory")->required();
    train_cmd->add_option("--config", train_args.config_path,
                          "JSON config (flags override its values)");
    train_cmd->add_option("--modality", train_args.modality,
                          "rgb | depth | segmentation | combined");
    train_cmd->add_option("--split", train_args.split, "Manifest split to train on");
    add_blur_flags(train_cmd, train_args.blur);
    train_cmd->add_option("--steps", train_args.train.steps, "Training steps");
    train_cmd->add_option("--seed", train_args.train.seed, "Deterministic seed");
    train_cmd->add_option("--lr", train_args.train.lr, "Adam learning rate");
    train_cmd->add_option("--lambda", train_args.train.lambda, "L1 loss weight");
    train_cmd->add_option("--input-size", train_args.unet.input_size, "Network input size");
    train_cmd->add_option("--base-channels", train_args.unet.base_channels,
                          "Generator base channels");
    train_cmd->add_option("--depth", train_args.unet.depth, "Generator depth");
    train_cmd->add_option("--dropout", train_args.unet.dropout_rate, "Decoder dropout rate");
    train_cmd->add_option("--disc-base", train_args.disc.base_channels,
                          "Discriminator base channels");
    train_cmd->add_option("--checkpoint-every", train_args.train.checkpoint_every,
                          "Periodic checkpoint interval (0 = final only)");
    train_cmd->add_option("--log-every", train_args.train.log_every, "Log record interval");

    InferArgs infer_args;
    auto* infer_cmd = app.add_subcommand("infer", "Predict visibility maps with a checkpoint");
    infer_cmd->add_option("--checkpoint", infer_args.checkpoint, "Checkpoint file")->required();
    infer_cmd->add_option("--manifest", infer_args.manifest, "Manifest (per-frame inference)");
    infer_cmd->add_option("--input", infer_args.input, "Single input PNG");
    infer_cmd->add_option("--out", infer_args.out, "Output directory")->required();
    infer_cmd->add_option("--split", infer_args.split, "Restrict manifest frames to a split");

    ReconstructArgs rec_args;
    auto* rec_cmd = app.add_subcommand("reconstruct", "Visibility map back to a point cloud");
    rec_cmd->add_option("--vis", rec_args.vis, "Visibility map raster")->required();
    rec_cmd->add_option("--depth", rec_args.depth, "Depth raster (meters)")->required();
    rec_cmd->add_option("--calib", rec_args.calib, "KITTI-format calibration")->required();
    rec_cmd->add_option("--mode", rec_args.mode, "grid | raycast");
    rec_cmd->add_option("--stride", rec_args.stride, "Grid stride in pixels");
    rec_cmd->add_option("--threshold", rec_args.threshold, "Visibility threshold");
    rec_cmd->add_option("--pattern", rec_args.pattern, "Scan pattern JSON (raycast)");
    rec_cmd->add_option("--trajectory", rec_args.trajectory, "Ego trajectory JSON (raycast)");
    rec_cmd->add_option("--scan-start", rec_args.scan_start, "Scan start time (raycast)");
    rec_cmd->add_option("--out", rec_args.out, "Output .bin point cloud")->required();
    rec_cmd->add_option("--timestamps", rec_args.timestamps,
                        "Optional per-point timestamp sidecar");

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "Compare prediction and ground-truth maps");
    eval_cmd->add_option("--pred", eval_args.pred, "Directory of predicted rasters")->required();
    eval_cmd->add_option("--gt", eval_args.gt, "Directory of ground-truth rasters")->required();
    eval_cmd->add_option("--out", eval_args.out, "Report file")->required();
    eval_cmd->add_option("--format", eval_args.format, "csv | markdown");
    eval_cmd->add_option("--json", eval_args.json_path, "Per-pair JSON-lines dump");
    eval_cmd->add_option("--overlay", eval_args.overlay_dir, "Directory for overlay PNGs");
    eval_cmd->add_option("--label", eval_args.label, "Row label for the report table");

    BenchArgs bench_args;
    auto* bench_cmd =
        app.add_subcommand("bench", "Report inference latency (non-binding regression aid)");
    bench_cmd->add_option("--size", bench_args.input_size, "Network input size");
    bench_cmd->add_option("--base-channels", bench_args.base_channels, "Base channels");
    bench_cmd->add_option("--depth", bench_args.depth, "Generator depth");
    bench_cmd->add_option("--repeats", bench_args.repeats, "Measured repetitions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    runtime::set_threads(threads);

    try {
        if (synth_cmd->parsed()) return run_synth(synth_args);
        if (gen_cmd->parsed()) return run_gen_lidar_images(gen_args);
        if (train_cmd->parsed()) return run_train(train_args);
        if (infer_cmd->parsed()) return run_infer(infer_args);
        if (rec_cmd->parsed()) return run_reconstruct(rec_args);
        if (eval_cmd->parsed()) return run_evaluate(eval_args);
        if (bench_cmd->parsed()) return run_bench(bench_args);
    } catch (const Error& e) {
        json err;
        err["error"] = e.kind();
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return e.kind() == "NonFiniteLoss" ? kExitInternal : kExitInput;
    } catch (const std::exception& e) {
        json err;
        err["error"] = "Internal";
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return kExitInternal;
    }
    return kExitOk;
}
