#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "bandpose/association.hpp"
#include "bandpose/camera.hpp"
#include "bandpose/detection.hpp"
#include "bandpose/pointer_spec.hpp"
#include "bandpose/synthetic.hpp"

namespace bandpose {

struct Paths {
  std::string color_model;
  std::string out_prefix;
  friend bool operator==(const Paths&, const Paths&) = default;
};

struct Config {
  CameraModel camera;
  PointerSpec pointer;
  std::map<ClassId, std::string> label_names;
  DetectionParams detection;
  AssociationParams association;
  Paths paths;
};

bool operator==(const Config& a, const Config& b);

/// JSON text with unit-suffixed keys. Diameters are stored in the file and
/// halved to radii on parse.
std::string serialize_config(const Config& config);
Config parse_config(const std::string& text);

/// Reads the file and then applies BANDPOSE_COLOR_MODEL / BANDPOSE_OUT_PREFIX
/// environment overrides.
Config load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const Config& config);

/// Config for the reference camera and pointer.
Config reference_config();

std::string serialize_scene(const SceneSpec& scene);
SceneSpec parse_scene(const std::string& text, const PointerSpec& pointer);

}  // namespace bandpose
