#pragma once

// Mass-spring-damper tissue sheet with fixed lateral edges and two
// spring-coupled graspers that move in a plane above the sheet.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tissue_ql/errors.hpp"

namespace tql::soft {

using Vec3 = Eigen::Vector3d;

/// Column/row address of a node on the top layer of the sheet.
struct GridIndex {
  int ix = 0;
  int iy = 0;

  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

/// Physical and discretization parameters of the sheet and graspers.
struct PhysicsConfig {
  int nx = 25;
  int ny = 25;
  int nz = 1;
  double spacing = 0.01;             // m
  double node_mass = 0.002;          // kg
  double structural_stiffness = 40;  // N/m, 4-neighbour links
  double shear_stiffness = 20;       // N/m, diagonal links
  double link_damping = 0.15;        // N*s/m, along each link
  double node_damping = 0.02;        // N*s/m, absolute velocity drag per node
  double coupling_stiffness = 200;   // N/m, grasper to TGP
  double coupling_damping = 0.5;     // N*s/m
  Vec3 gravity = Vec3::Zero();       // m/s^2
  double dt = 1e-3;                  // s
  double grasper_height = 0.02;      // m above the sheet
  double step_size = 0.004;          // m per action
  int settle_steps = 50;             // dynamics steps per control action
  double workspace_half_extent = 0.1;  // m, clamp box around the sheet centre

  friend bool operator==(const PhysicsConfig&, const PhysicsConfig&) = default;
};

struct NodeState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double mass = 0;
  bool fixed = false;
};

struct LinkSpec {
  std::size_t node_a = 0;
  std::size_t node_b = 0;
  double rest_length = 0;
  double stiffness = 0;
  double damping = 0;
};

enum class Move : std::uint8_t { stay = 0, pos_x = 1, neg_x = 2, pos_y = 3, neg_y = 4 };

inline constexpr std::array<Move, 5> kMoves = {Move::stay, Move::pos_x, Move::neg_x, Move::pos_y,
                                               Move::neg_y};

/// Unit direction of a move in the robot base frame, as (dx, dy).
constexpr std::array<int, 2> move_direction(Move m) {
  switch (m) {
    case Move::pos_x: return {1, 0};
    case Move::neg_x: return {-1, 0};
    case Move::pos_y: return {0, 1};
    case Move::neg_y: return {0, -1};
    case Move::stay: break;
  }
  return {0, 0};
}

struct Grasper {
  int id = 1;
  std::size_t attached_node = 0;
  Vec3 position = Vec3::Zero();
  double coupling_stiffness = 0;
  double coupling_damping = 0;
  double step_size = 0;
  bool engaged = false;
};

struct TissueModel {
  int nx = 0;
  int ny = 0;
  int nz = 0;
  std::vector<NodeState> nodes;
  std::vector<Vec3> rest_positions;
  std::vector<LinkSpec> links;
  std::array<Grasper, 2> graspers;
  Vec3 gravity = Vec3::Zero();
  double dt = 0;
  double node_damping = 0;
  double grasper_height = 0;
  double workspace_half_extent = 0;

  // Force accumulator reused across steps; carries no state between them.
  std::vector<Vec3> scratch_forces;

  std::size_t node_count() const { return nodes.size(); }
};

inline std::size_t flat_index(int nx, int ny, int ix, int iy, int iz = 0) {
  return static_cast<std::size_t>(ix) +
         static_cast<std::size_t>(nx) * (static_cast<std::size_t>(iy) +
                                         static_cast<std::size_t>(ny) * static_cast<std::size_t>(iz));
}

inline std::size_t node_index(const TissueModel& model, GridIndex g) {
  return flat_index(model.nx, model.ny, g.ix, g.iy);
}

inline bool is_lateral_edge(int nx, int ny, int ix, int iy) {
  return ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1;
}

/// Checks that `g` addresses an interior (non-fixed) top-layer node.
inline void validate_interior(const PhysicsConfig& cfg, GridIndex g, const std::string& field) {
  if (g.ix < 0 || g.iy < 0 || g.ix >= cfg.nx || g.iy >= cfg.ny) {
    throw ConfigError(field, "node index (" + std::to_string(g.ix) + ", " + std::to_string(g.iy) +
                                 ") is outside the " + std::to_string(cfg.nx) + "x" +
                                 std::to_string(cfg.ny) + " grid");
  }
  if (is_lateral_edge(cfg.nx, cfg.ny, g.ix, g.iy)) {
    throw ConfigError(field, "node index (" + std::to_string(g.ix) + ", " + std::to_string(g.iy) +
                                 ") is a fixed boundary node");
  }
}

inline void validate(const PhysicsConfig& cfg) {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(std::string("physics.") + field, what);
  };
  require(cfg.nx >= 2, "nx", "must be >= 2");
  require(cfg.ny >= 2, "ny", "must be >= 2");
  require(cfg.nz >= 1, "nz", "must be >= 1");
  require(cfg.spacing > 0, "spacing", "must be > 0");
  require(cfg.node_mass > 0, "node_mass", "must be > 0");
  require(cfg.structural_stiffness >= 0, "structural_stiffness", "must be >= 0");
  require(cfg.shear_stiffness >= 0, "shear_stiffness", "must be >= 0");
  require(cfg.link_damping >= 0, "link_damping", "must be >= 0");
  require(cfg.node_damping >= 0, "node_damping", "must be >= 0");
  require(cfg.coupling_stiffness >= 0, "coupling_stiffness", "must be >= 0");
  require(cfg.coupling_damping >= 0, "coupling_damping", "must be >= 0");
  require(cfg.dt > 0, "dt", "must be > 0");
  require(cfg.grasper_height > 0, "grasper_height", "must be > 0");
  require(cfg.step_size > 0, "step_size", "must be > 0");
  require(cfg.settle_steps >= 1, "settle_steps", "must be >= 1");
  require(cfg.workspace_half_extent > 0, "workspace_half_extent", "must be > 0");
  require(cfg.gravity.allFinite(), "gravity", "must be finite");
}

/// Builds the sheet at rest: uniform grid centred on the origin in x/y with
/// the top layer at z = 0, zero-strain links, lateral edges fixed. Graspers
/// are left disengaged; see attach_graspers().
inline TissueModel build_lattice(const PhysicsConfig& cfg) {
  validate(cfg);
  TissueModel m;
  m.nx = cfg.nx;
  m.ny = cfg.ny;
  m.nz = cfg.nz;
  m.gravity = cfg.gravity;
  m.dt = cfg.dt;
  m.node_damping = cfg.node_damping;
  m.grasper_height = cfg.grasper_height;
  m.workspace_half_extent = cfg.workspace_half_extent;

  const double cx = 0.5 * (cfg.nx - 1);
  const double cy = 0.5 * (cfg.ny - 1);
  const std::size_t count = static_cast<std::size_t>(cfg.nx) * cfg.ny * cfg.nz;
  m.nodes.resize(count);
  for (int iz = 0; iz < cfg.nz; ++iz) {
    for (int iy = 0; iy < cfg.ny; ++iy) {
      for (int ix = 0; ix < cfg.nx; ++ix) {
        NodeState& n = m.nodes[flat_index(cfg.nx, cfg.ny, ix, iy, iz)];
        n.position = Vec3((ix - cx) * cfg.spacing, (iy - cy) * cfg.spacing, -iz * cfg.spacing);
        n.mass = cfg.node_mass;
        n.fixed = is_lateral_edge(cfg.nx, cfg.ny, ix, iy);
      }
    }
  }
  m.rest_positions.reserve(count);
  for (const auto& n : m.nodes) m.rest_positions.push_back(n.position);

  struct Offset {
    int dx, dy, dz;
    bool shear;
  };
  static constexpr std::array<Offset, 9> kOffsets = {{{1, 0, 0, false},
                                                      {0, 1, 0, false},
                                                      {0, 0, 1, false},
                                                      {1, 1, 0, true},
                                                      {1, -1, 0, true},
                                                      {1, 0, 1, true},
                                                      {1, 0, -1, true},
                                                      {0, 1, 1, true},
                                                      {0, 1, -1, true}}};
  for (int iz = 0; iz < cfg.nz; ++iz) {
    for (int iy = 0; iy < cfg.ny; ++iy) {
      for (int ix = 0; ix < cfg.nx; ++ix) {
        const std::size_t a = flat_index(cfg.nx, cfg.ny, ix, iy, iz);
        for (const Offset& o : kOffsets) {
          const int jx = ix + o.dx, jy = iy + o.dy, jz = iz + o.dz;
          if (jx < 0 || jy < 0 || jz < 0 || jx >= cfg.nx || jy >= cfg.ny || jz >= cfg.nz) continue;
          const std::size_t b = flat_index(cfg.nx, cfg.ny, jx, jy, jz);
          if (m.nodes[a].fixed && m.nodes[b].fixed) continue;  // carries no force
          const double rest = (m.nodes[b].position - m.nodes[a].position).norm();
          m.links.push_back({a, b, rest, o.shear ? cfg.shear_stiffness : cfg.structural_stiffness,
                             cfg.link_damping});
        }
      }
    }
  }

  for (int k = 0; k < 2; ++k) {
    m.graspers[k].id = k + 1;
    m.graspers[k].coupling_stiffness = cfg.coupling_stiffness;
    m.graspers[k].coupling_damping = cfg.coupling_damping;
    m.graspers[k].step_size = cfg.step_size;
  }
  m.scratch_forces.assign(count, Vec3::Zero());
  return m;
}

/// Engages both graspers on the given TGPs, placed directly above them at
/// the grasper plane height.
inline void attach_graspers(TissueModel& m, const PhysicsConfig& cfg, GridIndex tgp1, GridIndex tgp2) {
  validate_interior(cfg, tgp1, "tgp1");
  validate_interior(cfg, tgp2, "tgp2");
  if (tgp1 == tgp2) throw ConfigError("tgp2", "must differ from tgp1");
  const std::array<GridIndex, 2> tgps = {tgp1, tgp2};
  for (int k = 0; k < 2; ++k) {
    Grasper& g = m.graspers[k];
    g.attached_node = node_index(m, tgps[k]);
    g.position = m.nodes[g.attached_node].position + Vec3(0, 0, m.grasper_height);
    g.engaged = true;
  }
}

inline TissueModel build_lattice(const PhysicsConfig& cfg, GridIndex tgp1, GridIndex tgp2) {
  TissueModel m = build_lattice(cfg);
  attach_graspers(m, cfg, tgp1, tgp2);
  return m;
}

/// Net elastic + damping + coupling + gravity + drag force on every node.
inline void accumulate_forces(const TissueModel& m, std::vector<Vec3>& forces) {
  forces.resize(m.nodes.size());
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    const NodeState& n = m.nodes[i];
    forces[i] = n.mass * m.gravity - m.node_damping * n.velocity;
  }
  for (const LinkSpec& l : m.links) {
    const NodeState& a = m.nodes[l.node_a];
    const NodeState& b = m.nodes[l.node_b];
    const Vec3 d = b.position - a.position;
    const double len = d.norm();
    const Vec3 u = d / len;
    const double stretch_rate = (b.velocity - a.velocity).dot(u);
    const Vec3 f = (l.stiffness * (len - l.rest_length) + l.damping * stretch_rate) * u;
    forces[l.node_a] += f;
    forces[l.node_b] -= f;
  }
  for (const Grasper& g : m.graspers) {
    if (!g.engaged) continue;
    const NodeState& n = m.nodes[g.attached_node];
    const Vec3 anchor = g.position - Vec3(0, 0, m.grasper_height);
    forces[g.attached_node] += g.coupling_stiffness * (anchor - n.position) - g.coupling_damping * n.velocity;
  }
}

/// One semi-implicit Euler step of every non-fixed node. A non-finite state
/// is reported at its source node before it spreads through the links.
inline void step(TissueModel& m) {
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    if (!m.nodes[i].position.allFinite() || !m.nodes[i].velocity.allFinite()) throw SimulationDiverged(i);
  }
  accumulate_forces(m, m.scratch_forces);
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    NodeState& n = m.nodes[i];
    if (n.fixed) continue;
    const Vec3& f = m.scratch_forces[i];
    if (!f.allFinite()) throw SimulationDiverged(i);
    n.velocity += (m.dt / n.mass) * f;
    n.position += m.dt * n.velocity;
    if (!n.position.allFinite()) throw SimulationDiverged(i);
  }
}

inline void step_n(TissueModel& m, int steps) {
  for (int s = 0; s < steps; ++s) step(m);
}

/// Translates grasper `id` (1 or 2) by one step along `move`, clamped to the
/// workspace box. The grasper stays on its plane.
inline void move_grasper(TissueModel& m, int id, Move move) {
  Grasper& g = m.graspers.at(static_cast<std::size_t>(id - 1));
  const auto [dx, dy] = move_direction(move);
  const double lim = m.workspace_half_extent;
  g.position.x() = std::clamp(g.position.x() + dx * g.step_size, -lim, lim);
  g.position.y() = std::clamp(g.position.y() + dy * g.step_size, -lim, lim);
  g.position.z() = m.grasper_height;
}

inline double kinetic_energy(const TissueModel& m) {
  double e = 0;
  for (const NodeState& n : m.nodes) e += 0.5 * n.mass * n.velocity.squaredNorm();
  return e;
}

}  // namespace tql::soft
