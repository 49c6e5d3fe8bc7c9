#pragma once

// End-to-end warping of one view into a target view, with either the exact
// forward-splatting backend or the grid-based backward warp.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "idwarp/fusion.hpp"
#include "idwarp/grid_sampler.hpp"
#include "idwarp/kitti_io.hpp"
#include "idwarp/reproject.hpp"
#include "idwarp/types.hpp"

namespace idwarp {

enum class WarpBackend { grid, forward };

inline WarpBackend parse_backend(const std::string& s) {
  if (s == "grid") return WarpBackend::grid;
  if (s == "forward") return WarpBackend::forward;
  throw Error(ErrorKind::config, "backend: expected 'grid' or 'forward', got '" + s + "'");
}

// Motions the learned model was shown to handle: |t_z| <= 7 m, |omega_y| <= 22 deg.
inline bool within_validated_envelope(const EgoMotion& m) {
  return std::abs(m.t.z()) <= 7.0 && std::abs(m.omega.y()) <= 22.0 * std::numbers::pi / 180.0;
}

struct WarpOutput {
  FeatureMap image;
  std::vector<std::uint8_t> holes;  // 1 = no source content
  std::size_t hole_count() const {
    std::size_t n = 0;
    for (auto h : holes) n += h;
    return n;
  }
};

// Depth is in meters; sparse maps are densified by nearest neighbour first.
inline WarpOutput warp_view(const FeatureMap& image, const DepthImage& depth, const EgoMotion& motion,
                            const CameraIntrinsics& k, WarpBackend backend, int iterations = 1) {
  if (image.height != depth.height || image.width != depth.width)
    throw Error(ErrorKind::shape, "depth size " + std::to_string(depth.width) + "x" + std::to_string(depth.height) +
                                      " does not match image size " + std::to_string(image.width) + "x" +
                                      std::to_string(image.height));
  if (!(k.f > 0.0)) throw Error(ErrorKind::config, "focal: must be positive");
  if (!motion.omega.allFinite() || !motion.t.allFinite()) throw Error(ErrorKind::config, "motion: non-finite value");

  bool sparse = false;
  for (double v : depth.meters) sparse = sparse || !(v > 0.0);
  const DepthImage dense = sparse ? densify_depth(depth) : depth;

  WarpOutput out;
  if (backend == WarpBackend::forward) {
    auto r = forward_warp(image, dense, motion_to_transform(motion), k);
    out.image = std::move(r.image);
    out.holes = std::move(r.hole_mask);
  } else {
    const TransformCoeffs coeffs = analytic_coeffs(motion, k, image.width, image.height, 1.0);
    const SamplingGrid grid = generate_grid(coeffs, metric_inverse_depth(dense), iterations);
    out.image = bilinear_sample(image, grid);
    out.holes = grid_out_of_bounds(grid, image.width, image.height);
  }
  return out;
}

struct FusedViews {
  FeatureMap image;
  ArgmaxMap winners;
  std::vector<std::uint8_t> holes;  // hole only where every view has a hole
  std::vector<std::size_t> view_holes;

  std::size_t hole_count() const {
    std::size_t n = 0;
    for (auto h : holes) n += h;
    return n;
  }
};

inline FusedViews fuse_warped(const std::vector<WarpOutput>& views) {
  if (views.empty()) throw Error(ErrorKind::config, "fuse: at least one view is required");
  std::vector<FeatureMap> maps;
  maps.reserve(views.size());
  for (const auto& v : views) maps.push_back(v.image);
  FusionResult<float> fused = max_select(maps);

  FusedViews out{std::move(fused.fused), std::move(fused.winners), views.front().holes, {}};
  for (const auto& v : views) {
    out.view_holes.push_back(v.hole_count());
    for (std::size_t i = 0; i < out.holes.size(); ++i) out.holes[i] = out.holes[i] && v.holes[i];
  }
  return out;
}

}  // namespace idwarp
