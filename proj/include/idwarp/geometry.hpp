#pragma once

// Instantaneous (first-order) motion model: pixel flow as a function of the
// camera's egomotion and the pixel's inverse depth,
//
//   u = Q_omega(x~, y~) * omega + d * Q_t(x~, y~) * t
//
// with centered coordinates x~ = x - x0, y~ = y - y0.

#include <Eigen/Core>

#include "idwarp/types.hpp"

namespace idwarp {

using Matrix23 = Eigen::Matrix<double, 2, 3>;

inline Eigen::Vector2d centered_coords(double x, double y, const CameraIntrinsics& k) {
  return {x - k.x0, y - k.y0};
}

// Rotational flow basis. Entry (1,1) is -x~y~/f.
inline Matrix23 q_omega(double xc, double yc, double f) {
  Matrix23 q;
  q << xc * yc / f, -f - xc * xc / f, yc,
       f + yc * yc / f, -xc * yc / f, -xc;
  return q;
}

// Translational flow basis, scaled by inverse depth in pixel_flow.
inline Matrix23 q_t(double xc, double yc, double f) {
  Matrix23 q;
  q << -f, 0.0, xc,
       0.0, -f, yc;
  return q;
}

inline Eigen::Vector2d rotational_flow(double x, double y, const EgoMotion& m, const CameraIntrinsics& k) {
  const Eigen::Vector2d c = centered_coords(x, y, k);
  return q_omega(c.x(), c.y(), k.f) * m.omega;
}

inline Eigen::Vector2d translational_flow(double x, double y, double d, const EgoMotion& m,
                                          const CameraIntrinsics& k) {
  const Eigen::Vector2d c = centered_coords(x, y, k);
  return d * (q_t(c.x(), c.y(), k.f) * m.t);
}

inline Eigen::Vector2d pixel_flow(double x, double y, double d, const EgoMotion& m, const CameraIntrinsics& k) {
  return rotational_flow(x, y, m, k) + translational_flow(x, y, d, m, k);
}

// Invalid-depth pixels keep their rotational flow and are marked rotation_only.
inline FlowField flow_field(const InverseDepthMap& depth, const EgoMotion& m, const CameraIntrinsics& k) {
  depth.check();
  require_shape(depth.height > 0 && depth.width > 0, "flow_field: empty depth map");
  FlowField out(depth.height, depth.width);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const std::size_t i = depth.index(y, x);
      if (depth.mask[i]) {
        out.u[i] = pixel_flow(x, y, depth.values[i], m, k);
      } else {
        out.u[i] = rotational_flow(x, y, m, k);
        out.status[i] = FlowStatus::rotation_only;
      }
    }
  }
  return out;
}

// The stored convention is the normalized range [-1, 1]; these map it to and
// from the unit interval.
inline double inverse_depth_to_unit(double d) { return 0.5 * (d + 1.0); }
inline double inverse_depth_from_unit(double u) { return 2.0 * u - 1.0; }

}  // namespace idwarp
