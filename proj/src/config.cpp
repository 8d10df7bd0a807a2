#include "bandpose/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "bandpose/error.hpp"

namespace bandpose {

namespace {

using nlohmann::json;

std::vector<double> flatten(const Mat3& m) {
  std::vector<double> v;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) v.push_back(m(r, c));
  return v;
}

Mat3 unflatten(const std::vector<double>& v) {
  if (v.size() != 9) throw Error(ErrorKind::InvalidArgument, "config", "3x3 matrices need 9 row-major entries");
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = v[static_cast<std::size_t>(3 * r + c)];
  return m;
}

json rgb_json(const Rgb& c) { return json::array({c.r, c.g, c.b}); }
Rgb rgb_from(const json& j) { return {j.at(0).get<float>(), j.at(1).get<float>(), j.at(2).get<float>()}; }

bool same_camera(const CameraModel& a, const CameraModel& b) {
  const auto& da = a.distortion;
  const auto& db = b.distortion;
  return a.K == b.K && a.R == b.R && a.t == b.t && a.width == b.width && a.height == b.height && da.fx == db.fx &&
         da.fy == db.fy && da.cx == db.cx && da.cy == db.cy && da.k1 == db.k1 && da.k2 == db.k2 && da.k3 == db.k3 &&
         da.p1 == db.p1 && da.p2 == db.p2;
}

bool same_detection(const DetectionParams& a, const DetectionParams& b) {
  return a.s1 == b.s1 && a.s2 == b.s2 && a.r1 == b.r1 && a.r2 == b.r2 && a.major_expand == b.major_expand &&
         a.minor_expand == b.minor_expand && a.binarize_threshold == b.binarize_threshold &&
         a.line_inlier_sigmas == b.line_inlier_sigmas && a.pair_separation_sigmas == b.pair_separation_sigmas &&
         a.ransac_iterations == b.ransac_iterations && a.ransac_seed == b.ransac_seed;
}

}  // namespace

bool operator==(const Config& a, const Config& b) {
  return same_camera(a.camera, b.camera) && a.pointer == b.pointer && a.label_names == b.label_names &&
         same_detection(a.detection, b.detection) && a.association.max_triplets == b.association.max_triplets &&
         a.association.seed == b.association.seed && a.paths == b.paths;
}

std::string serialize_config(const Config& c) {
  json j;
  const auto& d = c.camera.distortion;
  j["camera"] = {{"K_px", flatten(c.camera.K)},
                 {"R", flatten(c.camera.R)},
                 {"t_mm", {c.camera.t.x(), c.camera.t.y(), c.camera.t.z()}},
                 {"width_px", c.camera.width},
                 {"height_px", c.camera.height},
                 {"distortion",
                  {{"fx_px", d.fx},
                   {"fy_px", d.fy},
                   {"cx_px", d.cx},
                   {"cy_px", d.cy},
                   {"k1", d.k1},
                   {"k2", d.k2},
                   {"k3", d.k3},
                   {"p1", d.p1},
                   {"p2", d.p2}}}};
  std::vector<double> diameters;
  for (double r : c.pointer.radii()) diameters.push_back(2.0 * r);
  json names = json::object();
  for (const auto& [id, name] : c.label_names) names[std::to_string(id)] = name;
  j["pointer"] = {{"edge_distances_mm", std::vector<double>(c.pointer.distances().begin(), c.pointer.distances().end())},
                  {"edge_diameters_mm", diameters},
                  {"band_labels", std::vector<int>(c.pointer.band_labels().begin(), c.pointer.band_labels().end())},
                  {"label_names", names},
                  {"total_length_mm", c.pointer.total_length()}};
  const auto& p = c.detection;
  j["detection"] = {{"saturation_pass1", p.s1},
                    {"saturation_pass2", p.s2},
                    {"erosion_radius_pass1_px", p.r1},
                    {"erosion_radius_pass2_px", p.r2},
                    {"box_major_expand", p.major_expand},
                    {"box_minor_expand", p.minor_expand},
                    {"junction_threshold", p.binarize_threshold},
                    {"line_inlier_sigmas", p.line_inlier_sigmas},
                    {"pair_separation_sigmas", p.pair_separation_sigmas},
                    {"line_ransac_iterations", p.ransac_iterations},
                    {"line_ransac_seed", p.ransac_seed}};
  j["association"] = {{"max_triplets", c.association.max_triplets}, {"seed", c.association.seed}};
  j["paths"] = {{"color_model", c.paths.color_model}, {"out_prefix", c.paths.out_prefix}};
  return j.dump(2) + "\n";
}

Config parse_config(const std::string& text) {
  try {
    const json j = json::parse(text);
    const json& jc = j.at("camera");
    CameraModel cam;
    cam.K = unflatten(jc.at("K_px").get<std::vector<double>>());
    cam.R = unflatten(jc.at("R").get<std::vector<double>>());
    const auto t = jc.at("t_mm").get<std::vector<double>>();
    if (t.size() != 3) throw Error(ErrorKind::InvalidArgument, "config", "t_mm needs 3 entries");
    cam.t = Vec3(t[0], t[1], t[2]);
    cam.width = jc.at("width_px").get<int>();
    cam.height = jc.at("height_px").get<int>();
    const json jd = jc.value("distortion", json::object());
    auto& d = cam.distortion;
    d.fx = jd.value("fx_px", cam.K(0, 0));
    d.fy = jd.value("fy_px", cam.K(1, 1));
    d.cx = jd.value("cx_px", cam.K(0, 2));
    d.cy = jd.value("cy_px", cam.K(1, 2));
    d.k1 = jd.value("k1", 0.0);
    d.k2 = jd.value("k2", 0.0);
    d.k3 = jd.value("k3", 0.0);
    d.p1 = jd.value("p1", 0.0);
    d.p2 = jd.value("p2", 0.0);
    cam.validate();

    const json& jp = j.at("pointer");
    std::vector<double> radii = jp.at("edge_diameters_mm").get<std::vector<double>>();
    for (double& r : radii) r *= 0.5;
    PointerSpec pointer(jp.at("edge_distances_mm").get<std::vector<double>>(), std::move(radii),
                        jp.at("band_labels").get<std::vector<int>>(), jp.at("total_length_mm").get<double>());
    std::map<ClassId, std::string> names;
    const json jnames = jp.value("label_names", json::object());
    for (const auto& [key, value] : jnames.items()) {
      names[std::stoi(key)] = value.get<std::string>();
    }

    Config c{cam, std::move(pointer), std::move(names), {}, {}, {}};
    const json jdet = j.value("detection", json::object());
    auto& p = c.detection;
    p.s1 = jdet.value("saturation_pass1", p.s1);
    p.s2 = jdet.value("saturation_pass2", p.s2);
    p.r1 = jdet.value("erosion_radius_pass1_px", p.r1);
    p.r2 = jdet.value("erosion_radius_pass2_px", p.r2);
    p.major_expand = jdet.value("box_major_expand", p.major_expand);
    p.minor_expand = jdet.value("box_minor_expand", p.minor_expand);
    p.binarize_threshold = jdet.value("junction_threshold", p.binarize_threshold);
    p.line_inlier_sigmas = jdet.value("line_inlier_sigmas", p.line_inlier_sigmas);
    p.pair_separation_sigmas = jdet.value("pair_separation_sigmas", p.pair_separation_sigmas);
    p.ransac_iterations = jdet.value("line_ransac_iterations", p.ransac_iterations);
    p.ransac_seed = jdet.value("line_ransac_seed", p.ransac_seed);
    p.validate();
    const json ja = j.value("association", json::object());
    c.association.max_triplets = ja.value("max_triplets", c.association.max_triplets);
    c.association.seed = ja.value("seed", c.association.seed);
    const json jpaths = j.value("paths", json::object());
    c.paths.color_model = jpaths.value("color_model", std::string{});
    c.paths.out_prefix = jpaths.value("out_prefix", std::string{});
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, "config", e.what());
  }
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "config", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Config c = [&] {
    try {
      return parse_config(ss.str());
    } catch (const Error& e) {
      throw Error(e.kind(), "config", path.string() + ": " + e.detail());
    }
  }();
  if (const char* v = std::getenv("BANDPOSE_COLOR_MODEL"); v && *v) c.paths.color_model = v;
  if (const char* v = std::getenv("BANDPOSE_OUT_PREFIX"); v && *v) c.paths.out_prefix = v;
  return c;
}

void save_config(const std::filesystem::path& path, const Config& config) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "config", "cannot write " + path.string());
  out << serialize_config(config);
}

Config reference_config() {
  Config c{reference_camera(), reference_pointer(), {{1, "red"}, {2, "green"}, {3, "blue"}}, {}, {}, {}};
  return c;
}

std::string serialize_scene(const SceneSpec& s) {
  json j;
  j["tip_mm"] = {s.pose.tip.x(), s.pose.tip.y(), s.pose.tip.z()};
  j["direction"] = {s.pose.direction.x(), s.pose.direction.y(), s.pose.direction.z()};
  json colors = json::object();
  for (const auto& [id, c] : s.band_colors) colors[std::to_string(id)] = rgb_json(c);
  j["band_colors"] = colors;
  j["background"] = rgb_json(s.background);
  j["blur_sigma_px"] = s.blur_sigma;
  j["noise_sigma"] = s.noise_sigma;
  j["seed"] = s.seed;
  j["occluders_px"] = json::array();
  for (const auto& o : s.occluders) j["occluders_px"].push_back({{"rect", {o.x0, o.y0, o.x1, o.y1}}, {"color", rgb_json(o.color)}});
  j["highlights_mm"] = json::array();
  for (const auto& h : s.highlights) j["highlights_mm"].push_back({{"interval", {h.s0, h.s1}}, {"desaturation", h.desaturation}});
  j["distractors_px"] = json::array();
  for (const auto& d : s.distractors) {
    j["distractors_px"].push_back(
        {{"center", {d.center.x(), d.center.y()}}, {"radius", d.radius}, {"color", rgb_json(d.color)}});
  }
  return j.dump(2) + "\n";
}

SceneSpec parse_scene(const std::string& text, const PointerSpec& pointer) {
  try {
    const json j = json::parse(text);
    SceneSpec s{.pose = {}, .spec = pointer, .band_colors = {}};
    const auto tip = j.at("tip_mm").get<std::vector<double>>();
    const auto dir = j.at("direction").get<std::vector<double>>();
    if (tip.size() != 3 || dir.size() != 3) throw Error(ErrorKind::InvalidArgument, "scene", "vectors need 3 entries");
    s.pose.tip = Vec3(tip[0], tip[1], tip[2]);
    s.pose.direction = Vec3(dir[0], dir[1], dir[2]).normalized();
    for (const auto& [key, value] : j.at("band_colors").items()) s.band_colors[std::stoi(key)] = rgb_from(value);
    if (j.contains("background")) s.background = rgb_from(j["background"]);
    s.blur_sigma = j.value("blur_sigma_px", 0.0);
    s.noise_sigma = j.value("noise_sigma", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
    for (const auto& o : j.value("occluders_px", json::array())) {
      const auto r = o.at("rect").get<std::vector<double>>();
      s.occluders.push_back({r.at(0), r.at(1), r.at(2), r.at(3), rgb_from(o.at("color"))});
    }
    for (const auto& h : j.value("highlights_mm", json::array())) {
      const auto iv = h.at("interval").get<std::vector<double>>();
      s.highlights.push_back({iv.at(0), iv.at(1), h.at("desaturation").get<double>()});
    }
    for (const auto& d : j.value("distractors_px", json::array())) {
      const auto c = d.at("center").get<std::vector<double>>();
      s.distractors.push_back({Vec2(c.at(0), c.at(1)), d.at("radius").get<double>(), rgb_from(d.at("color"))});
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, "scene", e.what());
  }
}

}  // namespace bandpose
