#pragma once

// Exact pinhole reprojection under a rigid transform. Serves as the oracle for
// the instantaneous motion model and as the forward-splatting warp backend.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "idwarp/types.hpp"

namespace idwarp {

// Maps points from one camera frame to another: p' = rotation * p + translation.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  // Throws unless rotation is orthonormal with det +1 (within tol).
  static RigidTransform checked(const Eigen::Matrix3d& r, const Eigen::Vector3d& t, double tol = 1e-9) {
    const double orth = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(orth <= tol) || !(std::abs(r.determinant() - 1.0) <= tol))
      throw Error(ErrorKind::degenerate, "rigid transform: rotation is not orthonormal");
    if (!t.allFinite()) throw Error(ErrorKind::degenerate, "rigid transform: non-finite translation");
    return {r, t};
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    const Eigen::Matrix3d rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  // (*this) after other.
  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }
};

// R = Rz(omega_z) * Ry(omega_y) * Rx(omega_x): extrinsic X, then Y, then Z.
inline Eigen::Matrix3d euler_to_rotation(const Eigen::Vector3d& omega) {
  const Eigen::Matrix3d rx = Eigen::AngleAxisd(omega.x(), Eigen::Vector3d::UnitX()).toRotationMatrix();
  const Eigen::Matrix3d ry = Eigen::AngleAxisd(omega.y(), Eigen::Vector3d::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(omega.z(), Eigen::Vector3d::UnitZ()).toRotationMatrix();
  return rz * ry * rx;
}

// Point transform seen by a camera that moves by rotation euler(omega) and
// translation t (expressed in its starting frame): p' = R^T (p - t).
// To first order this is p' = p - omega x p - t, the convention of the
// instantaneous flow model.
inline RigidTransform motion_to_transform(const EgoMotion& m) {
  const Eigen::Matrix3d rt = euler_to_rotation(m.omega).transpose();
  return {rt, -(rt * m.t)};
}

struct Reprojection {
  double x = 0.0;
  double y = 0.0;
  double depth = 0.0;
  bool behind_camera = false;
};

inline Eigen::Vector3d back_project(double x, double y, double depth, const CameraIntrinsics& k) {
  return {depth * (x - k.x0) / k.f, depth * (y - k.y0) / k.f, depth};
}

inline Reprojection exact_reproject(double x, double y, double depth, const RigidTransform& t,
                                    const CameraIntrinsics& k) {
  if (!(depth > 0.0)) throw Error(ErrorKind::degenerate, "exact_reproject: depth must be positive");
  const Eigen::Vector3d p = t.apply(back_project(x, y, depth, k));
  Reprojection r;
  r.depth = p.z();
  if (!(p.z() > 0.0)) {
    r.behind_camera = true;
    r.x = std::numeric_limits<double>::quiet_NaN();
    r.y = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.x = k.f * p.x() / p.z() + k.x0;
  r.y = k.f * p.y() / p.z() + k.y0;
  return r;
}

// Pixels without valid depth get the flow of a point at infinity (rotation only).
inline FlowField exact_flow_field(const DepthImage& depth, const RigidTransform& t, const CameraIntrinsics& k) {
  require_shape(depth.height > 0 && depth.width > 0, "exact_flow_field: empty depth map");
  require_shape(depth.meters.size() == static_cast<std::size_t>(depth.height) * depth.width,
                "exact_flow_field: depth buffer does not match dimensions");
  FlowField out(depth.height, depth.width);
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const std::size_t i = out.index(y, x);
      if (depth.valid(y, x)) {
        const Reprojection r = exact_reproject(x, y, depth(y, x), t, k);
        if (r.behind_camera) {
          out.status[i] = FlowStatus::behind_camera;
        } else {
          out.u[i] = {r.x - x, r.y - y};
        }
      } else {
        const Eigen::Vector3d ray = t.rotation * back_project(x, y, 1.0, k);
        if (ray.z() > 0.0) {
          out.u[i] = {k.f * ray.x() / ray.z() + k.x0 - x, k.f * ray.y() / ray.z() + k.y0 - y};
          out.status[i] = FlowStatus::rotation_only;
        } else {
          out.status[i] = FlowStatus::behind_camera;
        }
      }
    }
  }
  return out;
}

template <typename T>
struct ForwardWarpResult {
  Tensor<T> image;
  std::vector<std::uint8_t> hole_mask;  // 1 = no source landed here
  DepthImage depth;                     // z-buffer; 0 where hole
  std::size_t splatted = 0;             // sources that landed inside the target
  std::size_t behind_camera = 0;
  std::size_t out_of_bounds = 0;
  std::size_t invalid_depth = 0;

  std::size_t hole_count() const {
    std::size_t n = 0;
    for (auto h : hole_mask) n += h;
    return n;
  }
};

// Nearest-pixel splatting with a z-buffer. Sources are visited in row-major
// order and a later source replaces an earlier one only when it is nearer by
// more than 1e-9, so ties keep the lexicographically smallest source pixel.
template <typename T>
ForwardWarpResult<T> forward_warp(const Tensor<T>& image, const DepthImage& depth, const RigidTransform& t,
                                  const CameraIntrinsics& k) {
  require_shape(image.height == depth.height && image.width == depth.width,
                "forward_warp: image and depth dimensions differ");
  require_shape(depth.meters.size() == static_cast<std::size_t>(depth.height) * depth.width,
                "forward_warp: depth buffer does not match dimensions");
  constexpr double kTieTolerance = 1e-9;
  const int h = image.height, w = image.width, c = image.channels;

  ForwardWarpResult<T> out;
  out.image = Tensor<T>(h, w, c);
  out.depth = DepthImage(h, w, 0.0);
  out.hole_mask.assign(static_cast<std::size_t>(h) * w, 1);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!depth.valid(y, x)) {
        ++out.invalid_depth;
        continue;
      }
      const Reprojection r = exact_reproject(x, y, depth(y, x), t, k);
      if (r.behind_camera) {
        ++out.behind_camera;
        continue;
      }
      const double tx = std::floor(r.x + 0.5);
      const double ty = std::floor(r.y + 0.5);
      if (tx < 0.0 || ty < 0.0 || tx > w - 1 || ty > h - 1) {
        ++out.out_of_bounds;
        continue;
      }
      ++out.splatted;
      const int ix = static_cast<int>(tx), iy = static_cast<int>(ty);
      const std::size_t ti = out.depth.index(iy, ix);
      if (!out.hole_mask[ti] && !(r.depth < out.depth.meters[ti] - kTieTolerance)) continue;
      out.hole_mask[ti] = 0;
      out.depth.meters[ti] = r.depth;
      for (int ch = 0; ch < c; ++ch) out.image(iy, ix, ch) = image(y, x, ch);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes for tests and demos.

enum class SceneKind { fronto_parallel, tilted_plane, depth_ramp };

struct SyntheticScene {
  SceneKind kind = SceneKind::fronto_parallel;
  double plane_depth = 10.0;                              // fronto_parallel
  Eigen::Vector3d plane_normal = Eigen::Vector3d::UnitZ();  // tilted_plane: n . p = plane_distance
  double plane_distance = 10.0;
  double ramp_top = 5.0;  // depth_ramp: depth of row 0
  double ramp_bottom = 20.0;  // depth of the last row
  int checker_size = 8;
  double contrast = 0.5;  // checker amplitude around mid-gray
  std::uint64_t seed = 0;
};

struct RenderedScene {
  FeatureMap image;
  DepthImage depth;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [0, 1) from a 64-bit word.
inline double unit_from_bits(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace detail

inline RenderedScene render_synthetic(const SyntheticScene& scene, const CameraIntrinsics& k, int height,
                                      int width, int channels = 3) {
  if (height < 1 || width < 1 || channels < 1) throw Error(ErrorKind::config, "render_synthetic: bad size");
  if (scene.checker_size < 1) throw Error(ErrorKind::config, "render_synthetic: checker_size must be >= 1");

  RenderedScene out{FeatureMap(height, width, channels), DepthImage(height, width)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double z = 0.0;
      switch (scene.kind) {
        case SceneKind::fronto_parallel:
          z = scene.plane_depth;
          break;
        case SceneKind::tilted_plane: {
          const Eigen::Vector3d ray = back_project(x, y, 1.0, k);
          z = scene.plane_distance / scene.plane_normal.dot(ray);
          break;
        }
        case SceneKind::depth_ramp:
          z = height == 1 ? scene.ramp_top
                          : scene.ramp_top + (scene.ramp_bottom - scene.ramp_top) * y / (height - 1);
          break;
      }
      if (!(z > 0.0) || !std::isfinite(z))
        throw Error(ErrorKind::degenerate, "render_synthetic: scene depth must be positive");
      out.depth(y, x) = z;

      const int cx = x / scene.checker_size, cy = y / scene.checker_size;
      const double sign = ((cx + cy) % 2 == 0) ? 1.0 : -1.0;
      const std::uint64_t cell =
          detail::splitmix64(scene.seed ^ detail::splitmix64((static_cast<std::uint64_t>(cy) << 32) |
                                                             static_cast<std::uint32_t>(cx)));
      for (int c = 0; c < channels; ++c) {
        const double jitter = 0.1 * (detail::unit_from_bits(detail::splitmix64(cell + c)) - 0.5);
        const double v = 0.5 + 0.5 * scene.contrast * sign + jitter * scene.contrast;
        out.image(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace idwarp
