#pragma once

// KITTI-style depth and pose ingestion plus the preprocessing applied before
// warping: inverse-depth normalization, resizing with intrinsics bookkeeping,
// and nearest-neighbour densification of sparse LiDAR depth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "idwarp/image_io.hpp"
#include "idwarp/reproject.hpp"
#include "idwarp/types.hpp"

namespace idwarp {

// ---------------------------------------------------------------------------
// Depth

// 16-bit PNG; meters = value / 256, 0 = invalid.
inline DepthImage load_depth_png(const std::string& path) {
  const Tensor<std::uint16_t> raw = read_gray16(path);
  DepthImage out(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.size(); ++i) out.meters[i] = raw.data[i] / 256.0;
  return out;
}

inline void save_depth_png(const std::string& path, const DepthImage& depth) {
  Tensor<std::uint16_t> raw(depth.height, depth.width, 1);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = depth.meters[i] > 0.0 ? std::round(depth.meters[i] * 256.0) : 0.0;
    raw.data[i] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
  }
  write_gray16(path, raw);
}

inline constexpr double kInverseDepthSingularity = 1.5;

// clamp(2 / (x - 1.5) - 1, -1, 1). Depths at or below 1.5 m have no valid
// normalized value and return nullopt.
inline std::optional<double> normalize_inverse_depth(double meters) {
  if (!std::isfinite(meters) || meters <= kInverseDepthSingularity) return std::nullopt;
  return std::clamp(2.0 / (meters - kInverseDepthSingularity) - 1.0, -1.0, 1.0);
}

inline InverseDepthMap normalized_inverse_depth(const DepthImage& depth) {
  InverseDepthMap out(depth.height, depth.width, 0.0, false);
  for (std::size_t i = 0; i < depth.meters.size(); ++i) {
    if (!(depth.meters[i] > 0.0)) continue;
    if (auto v = normalize_inverse_depth(depth.meters[i])) {
      out.values[i] = *v;
      out.mask[i] = 1;
    }
  }
  return out;
}

// Physical inverse depth 1/Z in 1/m, the quantity the flow model multiplies
// the translation by.
inline InverseDepthMap metric_inverse_depth(const DepthImage& depth) {
  InverseDepthMap out(depth.height, depth.width, 0.0, false);
  for (std::size_t i = 0; i < depth.meters.size(); ++i) {
    if (depth.meters[i] > 0.0 && std::isfinite(depth.meters[i])) {
      out.values[i] = 1.0 / depth.meters[i];
      out.mask[i] = 1;
    }
  }
  return out;
}

// Every invalid pixel takes the depth of its nearest valid pixel (Euclidean
// distance; ties to the smallest row, then column). Rings of growing
// Chebyshev radius are scanned until no closer candidate can exist.
inline DepthImage densify_depth(const DepthImage& sparse) {
  const int h = sparse.height, w = sparse.width;
  bool any = false;
  for (double v : sparse.meters) any = any || v > 0.0;
  if (!any) throw Error(ErrorKind::degenerate, "densify_depth: no valid depth pixels");

  DepthImage out = sparse;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (sparse.valid(y, x)) continue;
      long best_d2 = -1;
      int by = 0, bx = 0;
      auto consider = [&](int yy, int xx) {
        if (yy < 0 || xx < 0 || yy >= h || xx >= w || !sparse.valid(yy, xx)) return;
        const long d2 = static_cast<long>(yy - y) * (yy - y) + static_cast<long>(xx - x) * (xx - x);
        if (best_d2 < 0 || d2 < best_d2 || (d2 == best_d2 && (yy < by || (yy == by && xx < bx)))) {
          best_d2 = d2;
          by = yy;
          bx = xx;
        }
      };
      const int max_r = std::max(h, w);
      for (int r = 1; r <= max_r; ++r) {
        if (best_d2 >= 0 && static_cast<long>(r) * r > best_d2) break;
        for (int xx = x - r; xx <= x + r; ++xx) {
          consider(y - r, xx);
          consider(y + r, xx);
        }
        for (int yy = y - r + 1; yy <= y + r - 1; ++yy) {
          consider(yy, x - r);
          consider(yy, x + r);
        }
      }
      out(y, x) = sparse(by, bx);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Poses

// Camera-to-world pose: [R | t], 3x4 row-major in the text format.
struct PoseRecord {
  Eigen::Matrix<double, 3, 4> matrix = Eigen::Matrix<double, 3, 4>::Identity();

  Eigen::Matrix3d rotation() const { return matrix.leftCols<3>(); }
  Eigen::Vector3d translation() const { return matrix.col(3); }
  RigidTransform transform() const { return {rotation(), translation()}; }

  static PoseRecord from_transform(const RigidTransform& t) {
    PoseRecord p;
    p.matrix.leftCols<3>() = t.rotation;
    p.matrix.col(3) = t.translation;
    return p;
  }
};

inline constexpr double kPoseOrthonormalTolerance = 1e-6;

inline std::vector<PoseRecord> parse_odometry_poses(std::istream& is, const std::string& name = "<stream>") {
  std::vector<PoseRecord> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::vector<double> vals;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorKind::io, name + ":" + std::to_string(line_no) + ": not a number: '" + tok + "'");
      }
    }
    if (vals.size() != 12)
      throw Error(ErrorKind::io, name + ":" + std::to_string(line_no) + ": expected 12 values, found " +
                                     std::to_string(vals.size()));
    PoseRecord p;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) p.matrix(r, c) = vals[4 * r + c];
    const Eigen::Matrix3d rot = p.rotation();
    const double err = (rot.transpose() * rot - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(err <= kPoseOrthonormalTolerance) || !p.matrix.allFinite())
      throw Error(ErrorKind::io, name + ":" + std::to_string(line_no) + ": rotation block is not orthonormal");
    poses.push_back(p);
  }
  return poses;
}

inline std::vector<PoseRecord> load_odometry_poses(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::io, "cannot open '" + path + "' for reading");
  return parse_odometry_poses(is, path);
}

inline std::string format_pose_line(const PoseRecord& p) {
  std::ostringstream os;
  os.precision(17);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) os << (r || c ? " " : "") << p.matrix(r, c);
  return os.str();
}

struct EulerAngles {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  bool degenerate = false;  // omega_y within 1e-6 of +-pi/2
};

// Inverse of euler_to_rotation (R = Rz Ry Rx).
inline EulerAngles rotation_to_euler(const Eigen::Matrix3d& r) {
  constexpr double kGimbal = 1e-6;
  EulerAngles e;
  const double cy = std::hypot(r(0, 0), r(1, 0));
  const double oy = std::atan2(-r(2, 0), cy);
  e.degenerate = std::abs(std::abs(oy) - std::numbers::pi / 2) < kGimbal;
  if (e.degenerate) {
    // Only omega_z - omega_x (or their sum) is observable; put it all in omega_x.
    e.omega = {std::atan2(-r(1, 2), r(1, 1)), oy, 0.0};
  } else {
    e.omega = {std::atan2(r(2, 1), r(2, 2)), oy, std::atan2(r(1, 0), r(0, 0))};
  }
  return e;
}

struct RelativeMotion {
  EgoMotion motion;
  bool degenerate = false;
};

// Motion from frame i to frame j: T_rel = pose_i^-1 * pose_j, i.e. the pose of
// camera j expressed in camera i's frame.
inline RelativeMotion relative_motion(const PoseRecord& pose_i, const PoseRecord& pose_j) {
  const RigidTransform rel = pose_i.transform().inverse() * pose_j.transform();
  const EulerAngles e = rotation_to_euler(rel.rotation);
  RelativeMotion out;
  out.motion.omega = e.omega;
  out.motion.t = rel.translation;
  out.degenerate = e.degenerate;
  return out;
}

// Camera pose of a motion: [euler(omega) | t].
inline RigidTransform motion_pose(const EgoMotion& m) { return {euler_to_rotation(m.omega), m.t}; }

// ---------------------------------------------------------------------------
// Resizing

inline constexpr int kTargetHeight = 176;
inline constexpr int kTargetWidth = 608;

// Bilinear resize with pixel-center alignment and edge clamping.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& in, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw Error(ErrorKind::config, "resize: degenerate target size");
  require_shape(in.height >= 2 && in.width >= 2, "resize: input must be at least 2x2");
  const double sy = static_cast<double>(in.height) / out_h, sx = static_cast<double>(in.width) / out_w;
  Tensor<T> out(out_h, out_w, in.channels);
  for (int y = 0; y < out_h; ++y) {
    const double py = std::clamp((y + 0.5) * sy - 0.5, 0.0, in.height - 1.0);
    const int y0 = std::min(static_cast<int>(py), in.height - 2);
    const double fy = py - y0;
    for (int x = 0; x < out_w; ++x) {
      const double px = std::clamp((x + 0.5) * sx - 0.5, 0.0, in.width - 1.0);
      const int x0 = std::min(static_cast<int>(px), in.width - 2);
      const double fx = px - x0;
      for (int c = 0; c < in.channels; ++c) {
        const double v = (1 - fy) * ((1 - fx) * in(y0, x0, c) + fx * in(y0, x0 + 1, c)) +
                         fy * ((1 - fx) * in(y0 + 1, x0, c) + fx * in(y0 + 1, x0 + 1, c));
        out(y, x, c) = static_cast<T>(v);
      }
    }
  }
  return out;
}

// Down-sample to the 176x608 working resolution.
template <typename T>
Tensor<T> resize_half_to(const Tensor<T>& in, int out_h = kTargetHeight, int out_w = kTargetWidth) {
  return resize_bilinear(in, out_h, out_w);
}

struct ScaledIntrinsics {
  CameraIntrinsics intrinsics;
  bool aspect_preserved = true;  // false when the two axis scales differ by > 1e-9 relative
};

// f and x0 follow the horizontal scale, y0 the vertical one.
inline ScaledIntrinsics scale_intrinsics(const CameraIntrinsics& k, int in_h, int in_w, int out_h, int out_w) {
  if (in_h < 1 || in_w < 1 || out_h < 1 || out_w < 1) throw Error(ErrorKind::config, "scale_intrinsics: bad size");
  const double sx = static_cast<double>(out_w) / in_w, sy = static_cast<double>(out_h) / in_h;
  ScaledIntrinsics s;
  s.intrinsics = {k.f * sx, k.x0 * sx, k.y0 * sy};
  s.aspect_preserved = std::abs(sx - sy) <= 1e-9 * std::max(sx, sy);
  return s;
}

}  // namespace idwarp
