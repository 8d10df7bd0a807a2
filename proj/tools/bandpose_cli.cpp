#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bandpose/color_model.hpp"
#include "bandpose/config.hpp"
#include "bandpose/error.hpp"
#include "bandpose/evaluation.hpp"
#include "bandpose/image_io.hpp"
#include "bandpose/pipeline.hpp"
#include "bandpose/synthetic.hpp"

namespace fs = std::filesystem;
using namespace bandpose;

namespace {

// 0 success, 1 unexpected, 2 usage; library errors map to 10 + kind.
int exit_code(ErrorKind kind) { return 10 + static_cast<int>(kind); }

struct Common {
  std::string config_path;
  std::string color_model;
  std::string out_prefix;
  std::uint64_t seed = 1;
  int jobs = 0;
};

Config resolve_config(const Common& c) {
  Config cfg = c.config_path.empty() ? reference_config() : load_config(c.config_path);
  if (c.config_path.empty()) {
    if (const char* v = std::getenv("BANDPOSE_COLOR_MODEL"); v && *v) cfg.paths.color_model = v;
    if (const char* v = std::getenv("BANDPOSE_OUT_PREFIX"); v && *v) cfg.paths.out_prefix = v;
  }
  if (!c.color_model.empty()) cfg.paths.color_model = c.color_model;
  if (!c.out_prefix.empty()) cfg.paths.out_prefix = c.out_prefix;
  if (cfg.paths.out_prefix.empty()) cfg.paths.out_prefix = "bandpose";
  return cfg;
}

ColorClassSet require_model(const Config& cfg) {
  if (cfg.paths.color_model.empty()) {
    throw Error(ErrorKind::InvalidArgument, "config", "no color model path (use --color-model)");
  }
  return load_color_model(cfg.paths.color_model);
}

std::string format_pose(const PoseEstimate& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "tip_mm %.6f %.6f %.6f direction %.9f %.9f %.9f rms_px %.6f inliers %zu",
                e.pose.tip.x(), e.pose.tip.y(), e.pose.tip.z(), e.pose.direction.x(), e.pose.direction.y(),
                e.pose.direction.z(), e.rms, e.correspondence.inlier_count());
  return buf;
}

int cmd_calibrate(const Common& common, const std::string& image_path, const std::string& mask_path,
                  double min_saturation) {
  const Config cfg = resolve_config(common);
  if (cfg.paths.color_model.empty()) {
    throw Error(ErrorKind::InvalidArgument, "config", "no color model output path (use --color-model)");
  }
  const RasterImage img = load_ppm(image_path);
  const LabelImage mask = load_label_raster(mask_path);
  if (mask.width != img.width() || mask.height != img.height()) {
    throw Error(ErrorKind::InvalidArgument, "calibrate", "mask " + mask_path + " does not match image size");
  }
  std::set<ClassId> used;
  for (std::uint8_t l : mask.labels)
    if (l) used.insert(l);
  for (ClassId id : used) {
    if (!cfg.label_names.contains(id)) {
      throw Error(ErrorKind::ConfigMismatch, "calibrate",
                  "mask class " + std::to_string(id) + " is not named in the config");
    }
  }
  const ColorClassSet raw = calibrate_colors(img, mask, min_saturation);
  std::vector<ColorClass> named(raw.classes().begin(), raw.classes().end());
  for (ColorClass& c : named) c.name = cfg.label_names.at(c.id);
  const ColorClassSet model(std::move(named));
  save_color_model(cfg.paths.color_model, model);
  for (const ColorClass& c : model.classes()) {
    std::printf("class %d %s samples %zu modal_hue_rad %.4f\n", c.id, c.name.c_str(), c.sample_count, c.modal_hue);
  }
  std::printf("wrote %s\n", cfg.paths.color_model.c_str());
  return 0;
}

int cmd_probe(const Common& common, const std::string& image_path) {
  const Config cfg = resolve_config(common);
  const ColorClassSet model = require_model(cfg);
  const RasterImage img = load_ppm(image_path);
  const PipelineOutput out = run_pipeline(img, model, cfg);
  std::printf("%s\n", format_pose(out.estimate).c_str());
  return 0;
}

int cmd_track(const Common& common, const std::string& dir) {
  const Config cfg = resolve_config(common);
  const ColorClassSet model = require_model(cfg);
  const auto frames = list_frames(dir);
  if (frames.empty()) throw Error(ErrorKind::InvalidArgument, "track", "no .ppm frames in " + dir);
  const auto records = track_frames(frames, cfg, model);
  const PointCloud cloud = cloud_from(records);
  const std::string prefix = cfg.paths.out_prefix;
  write_poses_csv(prefix + "_poses.csv", records);
  write_ply(prefix + "_cloud_raw.ply", cloud, true);
  write_ply(prefix + "_cloud.ply", cloud, false);
  std::size_t failed = 0;
  for (const auto& r : records) {
    if (!r.estimate) {
      ++failed;
      std::fprintf(stderr, "%s: %s [%s]: %s\n", r.name.c_str(), std::string(to_string(*r.failure)).c_str(),
                   r.failure_stage.c_str(), r.failure_message.c_str());
    }
  }
  std::size_t filtered = 0;
  for (const auto& p : cloud.points) filtered += p.filtered ? 1 : 0;
  std::printf("frames %zu failed %zu points %zu filtered %zu%s\n", records.size(), failed, cloud.points.size(),
              filtered, cloud.filter_skipped ? " (filter skipped: fewer than 5 points)" : "");
  return 0;
}

SceneSpec template_scene(const Config& cfg) {
  return SceneSpec{.pose = sweep_pose(505.0, 0.0, cfg.pointer.total_length(), cfg.camera),
                   .spec = cfg.pointer,
                   .band_colors = reference_band_colors()};
}

int cmd_eval(const Common& common, EvalSpec spec) {
  const Config cfg = resolve_config(common);
  spec.seed = common.seed;
  const SceneSpec scene = template_scene(cfg);
  const ColorClassSet model =
      cfg.paths.color_model.empty() ? calibrate_from_scene(scene, cfg.camera) : load_color_model(cfg.paths.color_model);
  const auto cells = run_eval(spec, scene, cfg, model);
  const std::string path = cfg.paths.out_prefix + "_eval.csv";
  write_eval_csv(path, cells);
  std::printf("depth_mm angle_deg trials failures rms_tip_mm rms_dir_deg pc1\n");
  for (const EvalCell& c : cells) {
    std::printf("%.2f %.2f %d %d %.4f %.4f %.3f,%.3f,%.3f\n", c.depth_mm, c.angle_deg, c.trials, c.failures,
                c.rms_tip_mm, c.rms_direction_deg, c.first_component.x(), c.first_component.y(),
                c.first_component.z());
  }
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

struct RenderArgs {
  std::string scene_path;
  double depth = 505.0;
  double angle = 0.0;
  double noise = 0.0;
  double blur = 0.0;
  std::string out;
  std::string mask;
};

int cmd_render(const Common& common, const RenderArgs& args) {
  const Config cfg = resolve_config(common);
  SceneSpec scene = template_scene(cfg);
  if (!args.scene_path.empty()) {
    std::ifstream in(args.scene_path);
    if (!in) throw Error(ErrorKind::Io, "render", "cannot read " + args.scene_path);
    std::stringstream ss;
    ss << in.rdbuf();
    scene = parse_scene(ss.str(), cfg.pointer);
  } else {
    scene.pose = sweep_pose(args.depth, args.angle, cfg.pointer.total_length(), cfg.camera);
    scene.noise_sigma = args.noise;
    scene.blur_sigma = args.blur;
    scene.seed = common.seed;
  }
  scene.validate();
  const Rendering r = render(scene, cfg.camera);
  save_ppm(args.out, r.image);
  if (!args.mask.empty()) save_pgm(args.mask, render_label_mask(scene, cfg.camera));
  std::printf("tip_mm %.6f %.6f %.6f direction %.9f %.9f %.9f\n", scene.pose.tip.x(), scene.pose.tip.y(),
              scene.pose.tip.z(), scene.pose.direction.x(), scene.pose.direction.y(), scene.pose.direction.z());
  return 0;
}

int cmd_sequence(const Common& common, const SquareTrace& trace, const std::string& dir, double noise) {
  const Config cfg = resolve_config(common);
  fs::create_directories(dir);
  const auto poses = square_trace(trace, cfg.camera);
  SceneSpec scene = template_scene(cfg);
  scene.noise_sigma = noise;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    scene.pose = poses[k];
    scene.seed = common.seed + k;
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.ppm", k);
    save_ppm(fs::path(dir) / name, render(scene, cfg.camera).image);
  }
  std::printf("wrote %zu frames to %s\n", poses.size(), dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-camera 3D tracking of a color-banded pointer"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "JSON config (default: built-in reference setup)");
  app.add_option("--color-model", common.color_model, "color model file (overrides config and environment)");
  app.add_option("--out-prefix", common.out_prefix, "prefix for output files");
  app.add_option("--seed", common.seed, "seed for synthetic noise");
  app.add_option("--jobs", common.jobs, "worker threads (0: OpenMP default)")->check(CLI::NonNegativeNumber);

  std::string image, mask, dir;
  double min_saturation = 0.25;
  auto* calibrate = app.add_subcommand("calibrate", "build a color model from an image and a label mask");
  calibrate->add_option("image", image, "PPM image")->required();
  calibrate->add_option("mask", mask, "label mask (PGM, or PPM with ids in red)")->required();
  calibrate->add_option("--min-saturation", min_saturation, "ignore pixels below this saturation");

  auto* probe = app.add_subcommand("probe", "estimate the pose in one image");
  probe->add_option("image", image, "PPM image")->required();

  auto* track = app.add_subcommand("track", "estimate poses for every frame in a directory");
  track->add_option("dir", dir, "directory of .ppm frames")->required();

  EvalSpec spec;
  auto* eval = app.add_subcommand("eval", "synthetic depth/angle sweep");
  eval->add_option("--depths", spec.depths_mm, "depths of the pointer midpoint, mm");
  eval->add_option("--angles", spec.angles_deg, "tilt angles, degrees");
  eval->add_option("--trials", spec.trials, "trials per cell")->check(CLI::PositiveNumber);
  eval->add_option("--image-noise", spec.image_noise_sigma, "pixel noise sigma (channel units)");
  eval->add_option("--point-noise", spec.point_noise_sigma, "noise on detected points, px");
  eval->add_option("--blur", spec.blur_sigma_px, "Gaussian blur sigma, px");

  RenderArgs rargs;
  auto* rend = app.add_subcommand("render", "render a synthetic frame");
  rend->add_option("out", rargs.out, "output PPM")->required();
  rend->add_option("--scene", rargs.scene_path, "scene JSON (pose, colors, occluders, ...)");
  rend->add_option("--depth", rargs.depth, "midpoint depth, mm");
  rend->add_option("--angle", rargs.angle, "tilt angle, degrees");
  rend->add_option("--noise", rargs.noise, "pixel noise sigma");
  rend->add_option("--blur", rargs.blur, "blur sigma, px");
  rend->add_option("--mask", rargs.mask, "also write the label mask (PGM)");

  SquareTrace trace;
  double seq_noise = 0.0;
  auto* seq = app.add_subcommand("sequence", "render a square-tracing frame sequence");
  seq->add_option("dir", dir, "output directory")->required();
  seq->add_option("--frames", trace.frames, "frame count")->check(CLI::PositiveNumber);
  seq->add_option("--side", trace.side_mm, "square side, mm");
  seq->add_option("--depth", trace.depth_mm, "square depth, mm");
  seq->add_option("--noise", seq_noise, "pixel noise sigma");

  std::string config_out;
  auto* init = app.add_subcommand("init-config", "write the reference config");
  init->add_option("out", config_out, "output JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (common.jobs > 0) omp_set_num_threads(common.jobs);

  try {
    if (*calibrate) return cmd_calibrate(common, image, mask, min_saturation);
    if (*probe) return cmd_probe(common, image);
    if (*track) return cmd_track(common, dir);
    if (*eval) return cmd_eval(common, spec);
    if (*rend) return cmd_render(common, rargs);
    if (*seq) return cmd_sequence(common, trace, dir, seq_noise);
    if (*init) {
      Config cfg = reference_config();
      if (!common.color_model.empty()) cfg.paths.color_model = common.color_model;
      save_config(config_out, cfg);
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
