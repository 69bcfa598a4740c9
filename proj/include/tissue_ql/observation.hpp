#pragma once

#include <Eigen/Core>

namespace tql {

using Pixel = Eigen::Vector2d;  // sub-pixel image coordinates, x right, y down

/// Image-space state: both TTP centres plus per-TTP visibility. A TTP that
/// is not visible keeps its last valid measurement.
struct Observation {
  Pixel ttp1 = Pixel::Zero();
  Pixel ttp2 = Pixel::Zero();
  bool visible1 = false;
  bool visible2 = false;

  bool both_visible() const { return visible1 && visible2; }

  friend bool operator==(const Observation&, const Observation&) = default;
};

}  // namespace tql
