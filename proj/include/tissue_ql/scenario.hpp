#pragma once

// Scenario: everything needed to reproduce one training/testing run, plus
// its JSON representation and the built-in presets.

#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tissue_ql/agent.hpp"
#include "tissue_ql/errors.hpp"
#include "tissue_ql/soft_body.hpp"
#include "tissue_ql/vision.hpp"

namespace tql {

struct MarkerConfig {
  double ttp_radius_m = 0.002;
  double grasper_radius_m = 0.0032;
  double idp_radius_px = 2.0;

  friend bool operator==(const MarkerConfig&, const MarkerConfig&) = default;
};

struct Scenario {
  std::string name = "default";
  soft::PhysicsConfig physics;
  soft::GridIndex tgp1{9, 12};
  soft::GridIndex tgp2{15, 12};
  soft::GridIndex ttp1{9, 9};
  soft::GridIndex ttp2{15, 15};
  agent::TargetSet targets{Pixel(140, 150), Pixel(190, 90)};
  vision::CameraPose camera;
  MarkerConfig markers;
  vision::VisionConfig vision;
  agent::LearningConfig learning;
  std::uint64_t seed = 0;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline void validate(const Scenario& s) {
  soft::validate(s.physics);
  soft::validate_interior(s.physics, s.tgp1, "points.tgp1");
  soft::validate_interior(s.physics, s.tgp2, "points.tgp2");
  soft::validate_interior(s.physics, s.ttp1, "points.ttp1");
  soft::validate_interior(s.physics, s.ttp2, "points.ttp2");
  const std::array<std::pair<const char*, soft::GridIndex>, 4> nodes = {
      {{"points.tgp1", s.tgp1}, {"points.tgp2", s.tgp2}, {"points.ttp1", s.ttp1}, {"points.ttp2", s.ttp2}}};
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (nodes[i].second == nodes[j].second) {
        throw ConfigError(nodes[i].first, std::string("coincides with ") + nodes[j].first);
      }
    }
  }
  vision::validate(s.camera);
  auto check_idp = [&](const Pixel& p, const char* field) {
    if (!(p.x() >= 0 && p.x() < s.camera.image_width && p.y() >= 0 && p.y() < s.camera.image_height)) {
      throw ConfigError(field, "lies outside the " + std::to_string(s.camera.image_width) + "x" +
                                   std::to_string(s.camera.image_height) + " image");
    }
  };
  check_idp(s.targets.idp1, "points.idp1");
  check_idp(s.targets.idp2, "points.idp2");
  if (!(s.markers.ttp_radius_m > 0)) throw ConfigError("markers.ttp_radius_m", "must be > 0");
  if (!(s.markers.grasper_radius_m > 0)) throw ConfigError("markers.grasper_radius_m", "must be > 0");
  if (!(s.markers.idp_radius_px >= 0)) throw ConfigError("markers.idp_radius_px", "must be >= 0");
  if (s.vision.min_pixels < 1) throw ConfigError("vision.min_pixels", "must be >= 1");
  agent::validate(s.learning);
}

inline vision::SceneLayout scene_layout(const Scenario& s) {
  vision::SceneLayout layout;
  layout.ttp_nodes = {soft::flat_index(s.physics.nx, s.physics.ny, s.ttp1.ix, s.ttp1.iy),
                      soft::flat_index(s.physics.nx, s.physics.ny, s.ttp2.ix, s.ttp2.iy)};
  layout.idps = {s.targets.idp1, s.targets.idp2};
  layout.ttp_radius_m = s.markers.ttp_radius_m;
  layout.grasper_radius_m = s.markers.grasper_radius_m;
  layout.idp_radius_px = s.markers.idp_radius_px;
  return layout;
}

namespace config_detail {

using nlohmann::json;

/// Reads members of a JSON object through per-key handlers and rejects
/// keys without one.
class ObjectReader {
public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
  }

  template <typename T>
  ObjectReader& field(const std::string& key, T& out) {
    handlers_[key] = [this, key, &out](const json& v) { out = read<T>(v, qualified(key)); };
    return *this;
  }

  ObjectReader& custom(const std::string& key, std::function<void(const json&, const std::string&)> fn) {
    handlers_[key] = [this, key, fn = std::move(fn)](const json& v) { fn(v, qualified(key)); };
    return *this;
  }

  void run() const {
    for (const auto& [key, value] : obj_.items()) {
      auto it = handlers_.find(key);
      if (it == handlers_.end()) throw ConfigError(qualified(key), "unknown key");
      it->second(value);
    }
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  static T read(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(where, "expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw ConfigError(where, "expected a non-negative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_same_v<T, int>) {
      if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
      const auto x = v.get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw ConfigError(where, "integer out of range");
      }
      return static_cast<int>(x);
    } else if constexpr (std::is_same_v<T, Eigen::Vector3d>) {
      return Eigen::Vector3d(number_array(v, 3, where).data());
    } else if constexpr (std::is_same_v<T, Pixel>) {
      return Pixel(number_array(v, 2, where).data());
    } else if constexpr (std::is_same_v<T, soft::GridIndex>) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
        throw ConfigError(where, "expected [ix, iy]");
      }
      return {read<int>(v[0], where), read<int>(v[1], where)};
    } else {
      static_assert(sizeof(T) == 0, "unsupported config field type");
    }
  }

private:
  static std::vector<double> number_array(const json& v, std::size_t n, const std::string& where) {
    if (!v.is_array() || v.size() != n) throw ConfigError(where, "expected an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (const json& x : v) out.push_back(read<double>(x, where));
    return out;
  }

  const json& obj_;
  std::string path_;
  std::map<std::string, std::function<void(const json&)>> handlers_;
};

inline json to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }
inline json to_json(const Pixel& v) { return json::array({v.x(), v.y()}); }
inline json to_json(const soft::GridIndex& g) { return json::array({g.ix, g.iy}); }

}  // namespace config_detail

/// Parses a scenario document. Omitted keys keep their defaults; unknown
/// keys and out-of-range values raise ConfigError naming the field.
inline Scenario parse_scenario(const std::string& text) {
  using config_detail::json;
  using config_detail::ObjectReader;
  json doc;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    doc = json::object();
  } else {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("", std::string("malformed scenario document: ") + e.what());
    }
  }

  Scenario s;
  auto physics = [&s](const json& v, const std::string& path) {
    soft::PhysicsConfig& p = s.physics;
    ObjectReader(v, path)
        .field("nx", p.nx)
        .field("ny", p.ny)
        .field("nz", p.nz)
        .field("spacing", p.spacing)
        .field("node_mass", p.node_mass)
        .field("structural_stiffness", p.structural_stiffness)
        .field("shear_stiffness", p.shear_stiffness)
        .field("link_damping", p.link_damping)
        .field("node_damping", p.node_damping)
        .field("coupling_stiffness", p.coupling_stiffness)
        .field("coupling_damping", p.coupling_damping)
        .field("gravity", p.gravity)
        .field("dt", p.dt)
        .field("grasper_height", p.grasper_height)
        .field("step_size", p.step_size)
        .field("settle_steps", p.settle_steps)
        .field("workspace_half_extent", p.workspace_half_extent)
        .run();
  };
  auto points = [&s](const json& v, const std::string& path) {
    ObjectReader(v, path)
        .field("tgp1", s.tgp1)
        .field("tgp2", s.tgp2)
        .field("ttp1", s.ttp1)
        .field("ttp2", s.ttp2)
        .field("idp1", s.targets.idp1)
        .field("idp2", s.targets.idp2)
        .run();
  };
  auto camera = [&s](const json& v, const std::string& path) {
    vision::CameraPose& c = s.camera;
    ObjectReader(v, path)
        .field("position", c.position)
        .field("look_at", c.look_at)
        .field("up", c.up)
        .field("focal_length_px", c.focal_length_px)
        .field("image_width", c.image_width)
        .field("image_height", c.image_height)
        .run();
  };
  auto markers = [&s](const json& v, const std::string& path) {
    ObjectReader(v, path)
        .field("ttp_radius_m", s.markers.ttp_radius_m)
        .field("grasper_radius_m", s.markers.grasper_radius_m)
        .field("idp_radius_px", s.markers.idp_radius_px)
        .run();
  };
  auto vis = [&s](const json& v, const std::string& path) {
    vision::HsvRange& r = s.vision.ttp_color;
    ObjectReader(v, path)
        .field("min_pixels", s.vision.min_pixels)
        .custom("ttp_hsv",
                [&r](const json& h, const std::string& hpath) {
                  ObjectReader(h, hpath)
                      .field("h_min", r.h_min)
                      .field("h_max", r.h_max)
                      .field("s_min", r.s_min)
                      .field("s_max", r.s_max)
                      .field("v_min", r.v_min)
                      .field("v_max", r.v_max)
                      .run();
                })
        .run();
  };
  auto learning = [&s](const json& v, const std::string& path) {
    agent::LearningConfig& l = s.learning;
    ObjectReader(v, path)
        .field("gamma", l.gamma)
        .field("eps_s", l.eps_s)
        .field("stop_threshold", l.stop_threshold)
        .field("K", l.K)
        .field("alpha_floor", l.alpha_floor)
        .field("alpha_ceiling", l.alpha_ceiling)
        .field("cycle_period", l.cycle_period)
        .field("n_episode", l.n_episode)
        .field("n_action", l.n_action)
        .field("eps_min", l.eps_min)
        .field("weight_init_min", l.weight_init_min)
        .field("weight_init_max", l.weight_init_max)
        .run();
  };

  ObjectReader(doc, "")
      .field("name", s.name)
      .field("seed", s.seed)
      .custom("physics", physics)
      .custom("points", points)
      .custom("camera", camera)
      .custom("markers", markers)
      .custom("vision", vis)
      .custom("learning", learning)
      .run();
  validate(s);
  return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  using config_detail::json;
  using config_detail::to_json;
  const soft::PhysicsConfig& p = s.physics;
  const agent::LearningConfig& l = s.learning;
  const vision::HsvRange& h = s.vision.ttp_color;
  json doc;
  doc["name"] = s.name;
  doc["seed"] = s.seed;
  doc["physics"] = {{"nx", p.nx},
                    {"ny", p.ny},
                    {"nz", p.nz},
                    {"spacing", p.spacing},
                    {"node_mass", p.node_mass},
                    {"structural_stiffness", p.structural_stiffness},
                    {"shear_stiffness", p.shear_stiffness},
                    {"link_damping", p.link_damping},
                    {"node_damping", p.node_damping},
                    {"coupling_stiffness", p.coupling_stiffness},
                    {"coupling_damping", p.coupling_damping},
                    {"gravity", to_json(p.gravity)},
                    {"dt", p.dt},
                    {"grasper_height", p.grasper_height},
                    {"step_size", p.step_size},
                    {"settle_steps", p.settle_steps},
                    {"workspace_half_extent", p.workspace_half_extent}};
  doc["points"] = {{"tgp1", to_json(s.tgp1)},         {"tgp2", to_json(s.tgp2)},
                   {"ttp1", to_json(s.ttp1)},         {"ttp2", to_json(s.ttp2)},
                   {"idp1", to_json(s.targets.idp1)}, {"idp2", to_json(s.targets.idp2)}};
  doc["camera"] = {{"position", to_json(s.camera.position)},
                   {"look_at", to_json(s.camera.look_at)},
                   {"up", to_json(s.camera.up)},
                   {"focal_length_px", s.camera.focal_length_px},
                   {"image_width", s.camera.image_width},
                   {"image_height", s.camera.image_height}};
  doc["markers"] = {{"ttp_radius_m", s.markers.ttp_radius_m},
                    {"grasper_radius_m", s.markers.grasper_radius_m},
                    {"idp_radius_px", s.markers.idp_radius_px}};
  doc["vision"] = {{"min_pixels", s.vision.min_pixels},
                   {"ttp_hsv",
                    {{"h_min", h.h_min},
                     {"h_max", h.h_max},
                     {"s_min", h.s_min},
                     {"s_max", h.s_max},
                     {"v_min", h.v_min},
                     {"v_max", h.v_max}}}};
  doc["learning"] = {{"gamma", l.gamma},
                     {"eps_s", l.eps_s},
                     {"stop_threshold", l.stop_threshold},
                     {"K", l.K},
                     {"alpha_floor", l.alpha_floor},
                     {"alpha_ceiling", l.alpha_ceiling},
                     {"cycle_period", l.cycle_period},
                     {"n_episode", l.n_episode},
                     {"n_action", l.n_action},
                     {"eps_min", l.eps_min},
                     {"weight_init_min", l.weight_init_min},
                     {"weight_init_max", l.weight_init_max}};
  return doc;
}

inline std::string serialize_scenario(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

}  // namespace tql
