#pragma once

// Built-in scenarios. c1-c3 vary grasp, target and desired points under the
// default camera; c4 reuses c2's points under a rotated, translated camera.
//
// Each preset's IDPs are the settled image positions of its TTPs after
// displacing the graspers by a whole number of steps (goal_offsets), so every
// goal is physically reachable. settled_ttp_pixels() recomputes them.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "tissue_ql/scenario.hpp"
#include "tissue_ql/soft_body.hpp"
#include "tissue_ql/vision.hpp"

namespace tql {

/// Grasper displacement in whole action steps along robot x and y.
struct StepOffset {
  int dx = 0;
  int dy = 0;
};

/// Image positions of both TTPs once the graspers have been moved by the
/// given offsets and the sheet has come to rest.
inline std::array<Pixel, 2> settled_ttp_pixels(const Scenario& s, StepOffset g1, StepOffset g2,
                                               int settle_steps = 4000) {
  soft::TissueModel m = soft::build_lattice(s.physics, s.tgp1, s.tgp2);
  const std::array<StepOffset, 2> offsets = {g1, g2};
  for (int k = 0; k < 2; ++k) {
    m.graspers[k].position.x() += offsets[k].dx * s.physics.step_size;
    m.graspers[k].position.y() += offsets[k].dy * s.physics.step_size;
  }
  soft::step_n(m, settle_steps);
  std::array<Pixel, 2> out;
  const std::array<soft::GridIndex, 2> ttps = {s.ttp1, s.ttp2};
  for (int k = 0; k < 2; ++k) {
    const auto p = vision::project(s.camera, m.nodes[soft::node_index(m, ttps[k])].position);
    if (!p) throw ConfigError(k == 0 ? "points.ttp1" : "points.ttp2", "behind the camera");
    out[k] = p->pixel;
  }
  return out;
}

struct PresetGoal {
  StepOffset grasper1;
  StepOffset grasper2;
};

/// Grasper displacements that generated each preset's IDPs.
inline std::optional<PresetGoal> preset_goal(const std::string& name) {
  if (name == "c1") return PresetGoal{{0, -5}, {0, 5}};
  if (name == "c2" || name == "c4") return PresetGoal{{-6, 17}, {6, -17}};
  if (name == "c3") return PresetGoal{{5, -16}, {-5, 16}};
  return std::nullopt;
}

inline vision::CameraPose rotated_camera() {
  const double angle = 25.0 * std::numbers::pi / 180.0;
  vision::CameraPose c;
  c.position = {0.02, 0.005, 0.32};
  c.look_at = {0.02, 0.005, 0.0};
  c.up = {-std::sin(angle), std::cos(angle), 0.0};
  return c;
}

inline Scenario make_preset(const std::string& name) {
  Scenario s;
  s.name = name;
  if (name == "c1") {
    s.tgp1 = {9, 12};
    s.tgp2 = {15, 12};
    s.ttp1 = {9, 14};
    s.ttp2 = {15, 10};
  } else if (name == "c2" || name == "c4") {
    s.tgp1 = {10, 15};
    s.tgp2 = {14, 9};
    s.ttp1 = {10, 14};
    s.ttp2 = {14, 10};
    if (name == "c4") s.camera = rotated_camera();
  } else if (name == "c3") {
    s.tgp1 = {10, 9};
    s.tgp2 = {14, 15};
    s.ttp1 = {10, 10};
    s.ttp2 = {14, 14};
  }
  const PresetGoal goal = *preset_goal(name);
  const auto idps = settled_ttp_pixels(s, goal.grasper1, goal.grasper2);
  s.targets = {idps[0], idps[1]};
  return s;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"c1", "c2", "c3", "c4"};
  return names;
}

/// A built-in preset by name ("default" gives the all-defaults scenario).
inline std::optional<Scenario> find_preset(const std::string& name) {
  if (name == "default") return Scenario{};
  for (const std::string& n : preset_names()) {
    if (n == name) return make_preset(name);
  }
  return std::nullopt;
}

}  // namespace tql
