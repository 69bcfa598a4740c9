#pragma once

// Software pinhole camera, disk rasterizer and colour-blob TTP detector.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "tissue_ql/errors.hpp"
#include "tissue_ql/observation.hpp"
#include "tissue_ql/soft_body.hpp"

namespace tql::vision {

using Vec3 = Eigen::Vector3d;

struct CameraPose {
  Vec3 position = Vec3(0, 0, 0.25);
  Vec3 look_at = Vec3::Zero();
  Vec3 up = Vec3(0, 1, 0);
  double focal_length_px = 500;
  int image_width = 320;
  int image_height = 240;

  friend bool operator==(const CameraPose&, const CameraPose&) = default;
};

inline void validate(const CameraPose& c) {
  const Vec3 forward = c.look_at - c.position;
  if (!(forward.norm() > 0)) throw ConfigError("camera.look_at", "must differ from camera.position");
  if (!(forward.normalized().cross(c.up).norm() > 1e-9)) {
    throw ConfigError("camera.up", "must not be parallel to the viewing direction");
  }
  if (!(c.focal_length_px > 0)) throw ConfigError("camera.focal_length_px", "must be > 0");
  if (c.image_width <= 0) throw ConfigError("camera.image_width", "must be > 0");
  if (c.image_height <= 0) throw ConfigError("camera.image_height", "must be > 0");
}

/// Pixel position plus the view depth used to scale world-sized markers.
struct Projection {
  Pixel pixel;
  double depth;
};

/// Pinhole projection with the principal point at the image centre. Returns
/// nullopt for points at or behind the camera plane.
inline std::optional<Projection> project(const CameraPose& c, const Vec3& point) {
  const Vec3 forward = (c.look_at - c.position).normalized();
  const Vec3 right = forward.cross(c.up).normalized();
  const Vec3 cam_up = right.cross(forward);
  const Vec3 d = point - c.position;
  const double depth = d.dot(forward);
  if (!(depth > 0)) return std::nullopt;
  return Projection{Pixel(0.5 * c.image_width + c.focal_length_px * d.dot(right) / depth,
                          0.5 * c.image_height - c.focal_length_px * d.dot(cam_up) / depth),
                    depth};
}

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kBackground{190, 120, 110};
inline constexpr Rgb kTtpGreen{20, 200, 40};
inline constexpr Rgb kIdpBlack{0, 0, 0};
inline constexpr Rgb kGrasperGray{150, 150, 150};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;  // row-major

  Image() = default;
  Image(int w, int h, Rgb fill = {}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  Rgb& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const Rgb& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const Image&, const Image&) = default;
};

struct Circle {
  Pixel center = Pixel::Zero();
  double radius = 0;
};

/// Pixel (x, y) is lit when its integer coordinate lies within the disk.
inline void fill_disk(Image& img, const Circle& disk, Rgb color) {
  const int x0 = std::max(0, static_cast<int>(std::ceil(disk.center.x() - disk.radius)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::floor(disk.center.x() + disk.radius)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(disk.center.y() - disk.radius)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::floor(disk.center.y() + disk.radius)));
  const double r2 = disk.radius * disk.radius;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - disk.center.x(), dy = y - disk.center.y();
      if (dx * dx + dy * dy <= r2) img.at(x, y) = color;
    }
  }
}

/// What gets drawn besides the background: TTP markers (world-sized),
/// IDP dots (pixel-sized) and grasper avatars (world-sized).
struct SceneLayout {
  std::vector<std::size_t> ttp_nodes;
  std::vector<Pixel> idps;
  double ttp_radius_m = 0.002;
  double grasper_radius_m = 0.0032;
  double idp_radius_px = 2.0;
};

/// Rasterizes one frame. Draw order: background, TTP markers, IDPs, grasper
/// avatars, then any extra occluders (pixel-space disks).
inline Image render_frame(const soft::TissueModel& model, const SceneLayout& layout, const CameraPose& camera,
                          std::span<const Circle> extra_occluders = {}) {
  Image img(camera.image_width, camera.image_height, kBackground);
  auto draw_world = [&](const Vec3& p, double radius_m, Rgb color) {
    if (auto proj = project(camera, p)) {
      fill_disk(img, {proj->pixel, camera.focal_length_px * radius_m / proj->depth}, color);
    }
  };
  for (std::size_t node : layout.ttp_nodes) draw_world(model.nodes.at(node).position, layout.ttp_radius_m, kTtpGreen);
  for (const Pixel& idp : layout.idps) fill_disk(img, {idp, layout.idp_radius_px}, kIdpBlack);
  for (const soft::Grasper& g : model.graspers) {
    if (g.engaged) draw_world(g.position, layout.grasper_radius_m, kGrasperGray);
  }
  for (const Circle& c : extra_occluders) fill_disk(img, c, kGrasperGray);
  return img;
}

struct Hsv {
  double h;  // degrees, [0, 360)
  double s;  // [0, 1]
  double v;  // [0, 1]
};

inline Hsv to_hsv(Rgb c) {
  const double r = c.r / 255.0, g = c.g / 255.0, b = c.b / 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0;
  if (delta > 0) {
    if (mx == r) {
      h = 60 * std::fmod((g - b) / delta, 6.0);
    } else if (mx == g) {
      h = 60 * ((b - r) / delta + 2);
    } else {
      h = 60 * ((r - g) / delta + 4);
    }
    if (h < 0) h += 360;
  }
  return {h, mx > 0 ? delta / mx : 0.0, mx};
}

struct HsvRange {
  double h_min = 90, h_max = 150;
  double s_min = 0.5, s_max = 1;
  double v_min = 0.3, v_max = 1;

  bool contains(const Hsv& p) const {
    return p.h >= h_min && p.h <= h_max && p.s >= s_min && p.s <= s_max && p.v >= v_min && p.v <= v_max;
  }
  friend bool operator==(const HsvRange&, const HsvRange&) = default;
};

struct PixelCoord {
  int x = 0, y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// All pixels whose colour falls in `range`, in row-major order.
inline std::vector<PixelCoord> color_mask(const Image& img, const HsvRange& range) {
  std::vector<PixelCoord> out;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (range.contains(to_hsv(img.at(x, y)))) out.push_back({x, y});
    }
  }
  return out;
}

namespace detail {

inline bool inside(const Circle& c, const Pixel& p) {
  return (p - c.center).norm() <= c.radius * (1 + 1e-12) + 1e-12;
}

inline Circle from_two(const Pixel& a, const Pixel& b) {
  return {0.5 * (a + b), 0.5 * (a - b).norm()};
}

inline Circle from_three(const Pixel& a, const Pixel& b, const Pixel& c) {
  const Pixel ab = b - a, ac = c - a;
  const double det = 2 * (ab.x() * ac.y() - ab.y() * ac.x());
  if (std::abs(det) <= 1e-12 * (ab.squaredNorm() + ac.squaredNorm())) {
    // Collinear: the circle on the farthest pair covers all three.
    Circle best = from_two(a, b);
    for (const Circle& cand : {from_two(a, c), from_two(b, c)}) {
      if (cand.radius > best.radius) best = cand;
    }
    return best;
  }
  const double ab2 = ab.squaredNorm(), ac2 = ac.squaredNorm();
  const Pixel offset((ac.y() * ab2 - ab.y() * ac2) / det, (ab.x() * ac2 - ac.x() * ab2) / det);
  return {a + offset, offset.norm()};
}

}  // namespace detail

/// Minimal-radius circle containing every point (Welzl, iterative form, on
/// a deterministically shuffled copy). Throws NoDetection for empty input.
inline Circle smallest_enclosing_circle(std::span<const Pixel> points) {
  if (points.empty()) throw NoDetection();
  std::vector<Pixel> p(points.begin(), points.end());
  std::mt19937 shuffle_rng(0x5eedu);
  std::shuffle(p.begin(), p.end(), shuffle_rng);

  Circle c{p[0], 0};
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (detail::inside(c, p[i])) continue;
    c = {p[i], 0};
    for (std::size_t j = 0; j < i; ++j) {
      if (detail::inside(c, p[j])) continue;
      c = detail::from_two(p[i], p[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (!detail::inside(c, p[k])) c = detail::from_three(p[i], p[j], p[k]);
      }
    }
  }
  return c;
}

struct VisionConfig {
  HsvRange ttp_color;
  int min_pixels = 5;  // fewer mask pixels than this means the TTP is occluded

  friend bool operator==(const VisionConfig&, const VisionConfig&) = default;
};

/// Masks TTP-coloured pixels, assigns each to the nearer of the two previous
/// TTP centres, and fits the smallest enclosing circle per cluster. Clusters
/// below `min_pixels` are reported as not visible with stale coordinates.
inline Observation detect_ttps(const Image& img, const VisionConfig& cfg, const Observation& previous) {
  std::array<std::vector<Pixel>, 2> clusters;
  for (const PixelCoord& pc : color_mask(img, cfg.ttp_color)) {
    const Pixel p(pc.x, pc.y);
    const bool second = (p - previous.ttp2).squaredNorm() < (p - previous.ttp1).squaredNorm();
    clusters[second ? 1 : 0].push_back(p);
  }
  Observation obs = previous;
  auto fit = [&](const std::vector<Pixel>& cluster, Pixel& center, bool& visible) {
    visible = static_cast<int>(cluster.size()) >= cfg.min_pixels;
    if (visible) center = smallest_enclosing_circle(cluster).center;
  };
  fit(clusters[0], obs.ttp1, obs.visible1);
  fit(clusters[1], obs.ttp2, obs.visible2);
  return obs;
}

/// Binary portable pixmap (P6).
inline void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  for (const Rgb& p : img.pixels) {
    const char bytes[3] = {static_cast<char>(p.r), static_cast<char>(p.g), static_cast<char>(p.b)};
    out.write(bytes, 3);
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  if (!(in >> magic >> w >> h >> maxval) || magic != "P6" || maxval != 255 || w <= 0 || h <= 0) {
    throw std::runtime_error("not a P6 pixmap: " + path);
  }
  in.get();
  Image img(w, h);
  for (Rgb& p : img.pixels) {
    char bytes[3];
    if (!in.read(bytes, 3)) throw std::runtime_error("truncated pixmap: " + path);
    p = {static_cast<std::uint8_t>(bytes[0]), static_cast<std::uint8_t>(bytes[1]),
         static_cast<std::uint8_t>(bytes[2])};
  }
  return img;
}

}  // namespace tql::vision
