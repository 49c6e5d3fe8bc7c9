#pragma once

// Parametric sampling-grid generation and the differentiable bilinear sampler.
//
// For every target coordinate (x_t, y_t), normalized to [-1, 1], the source
// coordinate is
//
//   (x_s, y_s) = g * (x_t, y_t, x_t^2, x_t*y_t, y_t^2, 1)
//              + d(x_s, y_s) * h * (x_t, y_t, 1)
//
// where g is 2x6 (rotation pathway), h is 2x3 (translation pathway) and d is
// inverse depth. d starts at the target pixel and is re-sampled at the current
// source estimate for a configurable number of fixed-point passes.

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "idwarp/geometry.hpp"
#include "idwarp/types.hpp"

namespace idwarp {

// x_n = 2x/(W-1) - 1, y_n = 2y/(H-1) - 1.
inline Eigen::Vector2d normalize_coords(double x, double y, int width, int height) {
  require_shape(width >= 2 && height >= 2, "normalize_coords: width and height must be >= 2");
  return {2.0 * x / (width - 1) - 1.0, 2.0 * y / (height - 1) - 1.0};
}

inline Eigen::Vector2d denormalize_coords(double xn, double yn, int width, int height) {
  require_shape(width >= 2 && height >= 2, "denormalize_coords: width and height must be >= 2");
  return {(xn + 1.0) * 0.5 * (width - 1), (yn + 1.0) * 0.5 * (height - 1)};
}

using Monomials = Eigen::Matrix<double, 6, 1>;

inline Monomials monomials(double xn, double yn) {
  Monomials m;
  m << xn, yn, xn * xn, xn * yn, yn * yn, 1.0;
  return m;
}

struct TransformCoeffs {
  Eigen::Matrix<double, 2, 6> g = Eigen::Matrix<double, 2, 6>::Zero();
  Eigen::Matrix<double, 2, 3> h = Eigen::Matrix<double, 2, 3>::Zero();

  static TransformCoeffs identity() {
    TransformCoeffs c;
    c.g(0, 0) = 1.0;
    c.g(1, 1) = 1.0;
    return c;
  }
};

// Closed-form coefficients that make generate_grid perform backward warping
// with the instantaneous model: source = target - normalized(u(target)).
// Pixel coordinates are affine in the normalized ones, x~ = a_x x_n + b_x, so
// the rotational flow is quadratic in (x_n, y_n) and the translational flow is
// affine; both expand exactly in the respective bases. The physical inverse
// depth used by the flow is depth_scale times the stored map value.
inline TransformCoeffs analytic_coeffs(const EgoMotion& m, const CameraIntrinsics& k, int width, int height,
                                       double depth_scale = 1.0) {
  require_shape(width >= 2 && height >= 2, "analytic_coeffs: width and height must be >= 2");
  if (!(k.f > 0.0)) throw Error(ErrorKind::config, "analytic_coeffs: focal length must be positive");

  const double f = k.f;
  const double ax = 0.5 * (width - 1), ay = 0.5 * (height - 1);
  const double bx = ax - k.x0, by = ay - k.y0;
  const double sx = 1.0 / ax, sy = 1.0 / ay;
  const double wx = m.omega.x(), wy = m.omega.y(), wz = m.omega.z();

  // Rotational flow coefficients on (x_n, y_n, x_n^2, x_n y_n, y_n^2, 1).
  Eigen::Matrix<double, 1, 6> ru, rv;
  ru << wx / f * ax * by - wy / f * 2.0 * ax * bx,
        wx / f * bx * ay + wz * ay,
        -wy / f * ax * ax,
        wx / f * ax * ay,
        0.0,
        wx / f * bx * by - wy * (f + bx * bx / f) + wz * by;
  rv << -wy / f * ax * by - wz * ax,
        wx / f * 2.0 * ay * by - wy / f * bx * ay,
        0.0,
        -wy / f * ax * ay,
        wx / f * ay * ay,
        wx * (f + by * by / f) - wy / f * bx * by - wz * bx;

  TransformCoeffs c = TransformCoeffs::identity();
  c.g.row(0) -= sx * ru;
  c.g.row(1) -= sy * rv;

  const double tx = m.t.x(), ty = m.t.y(), tz = m.t.z();
  c.h << -sx * depth_scale * tz * ax, 0.0, -sx * depth_scale * (-f * tx + tz * bx),
         0.0, -sy * depth_scale * tz * ay, -sy * depth_scale * (-f * ty + tz * by);
  return c;
}

// Source coordinates in normalized space, one per target pixel (row-major).
struct SamplingGrid {
  int height = 0;
  int width = 0;
  std::vector<Eigen::Vector2d> points;

  SamplingGrid() = default;
  SamplingGrid(int h, int w) : height(h), width(w), points(static_cast<std::size_t>(h) * w) {}

  std::size_t index(int y, int x) const noexcept { return static_cast<std::size_t>(y) * width + x; }
  const Eigen::Vector2d& at(int y, int x) const noexcept { return points[index(y, x)]; }

  // Normalized target coordinates: the grid of the identity warp.
  static SamplingGrid identity(int h, int w) {
    SamplingGrid g(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) g.points[g.index(y, x)] = normalize_coords(x, y, w, h);
    return g;
  }
};

namespace detail {

// Normalized -> pixel along one axis. Results within a few ulp of an integer
// are snapped onto it so that normalization round-off cannot leak a
// neighbouring pixel into an exact-center sample.
inline double to_pixel(double n, int extent) {
  if (extent <= 1) return 0.0;
  const double p = (n + 1.0) * 0.5 * (extent - 1);
  const double r = std::nearbyint(p);
  if (std::abs(p - r) <= 8.0 * DBL_EPSILON * std::max(1.0, std::abs(p))) return r;
  return p;
}

inline double pixel_scale(int extent) { return extent <= 1 ? 0.0 : 0.5 * (extent - 1); }

struct Bilinear {
  int x0 = 0, y0 = 0;
  double fx = 0.0, fy = 0.0;  // fractional offsets toward x0+1, y0+1
};

inline Bilinear bilinear_at(double px, double py) {
  Bilinear b;
  const double flx = std::floor(px), fly = std::floor(py);
  b.x0 = static_cast<int>(flx);
  b.y0 = static_cast<int>(fly);
  b.fx = px - flx;
  b.fy = py - fly;
  return b;
}

inline bool inside(int x, int y, int w, int h) { return x >= 0 && y >= 0 && x < w && y < h; }

// Masked bilinear lookup of inverse depth: invalid and out-of-bounds
// neighbours are dropped and the remaining weights renormalized. The blend is
// taken as offsets from the first contributing value, so a constant
// neighbourhood returns that constant exactly.
inline bool masked_depth_lookup(const InverseDepthMap& depth, double px, double py, double& out) {
  const Bilinear b = bilinear_at(px, py);
  const double wts[4] = {(1 - b.fx) * (1 - b.fy), b.fx * (1 - b.fy), (1 - b.fx) * b.fy, b.fx * b.fy};
  const int dx[4] = {0, 1, 0, 1}, dy[4] = {0, 0, 1, 1};
  double base = 0.0, acc = 0.0, wsum = 0.0;
  bool any = false;
  for (int n = 0; n < 4; ++n) {
    const int x = b.x0 + dx[n], y = b.y0 + dy[n];
    if (wts[n] <= 0.0 || !inside(x, y, depth.width, depth.height) || !depth.valid(y, x)) continue;
    if (!any) base = depth.value(y, x);
    any = true;
    acc += wts[n] * (depth.value(y, x) - base);
    wsum += wts[n];
  }
  if (!any) return false;
  out = base + acc / wsum;
  return true;
}

}  // namespace detail

// Pixels with invalid target depth start from d = 0 (rotation only).
inline SamplingGrid generate_grid(const TransformCoeffs& coeffs, const InverseDepthMap& depth, int iterations = 1) {
  depth.check();
  if (iterations < 0) throw Error(ErrorKind::config, "generate_grid: iterations must be >= 0");
  const int h = depth.height, w = depth.width;
  require_shape(w >= 2 && h >= 2, "generate_grid: grid must be at least 2x2");

  SamplingGrid grid(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector2d tn = normalize_coords(x, y, w, h);
      const Eigen::Vector2d rot = coeffs.g * monomials(tn.x(), tn.y());
      const Eigen::Vector2d trans = coeffs.h * Eigen::Vector3d(tn.x(), tn.y(), 1.0);
      const double d0 = depth.valid(y, x) ? depth.value(y, x) : 0.0;

      Eigen::Vector2d src = rot + d0 * trans;
      for (int it = 0; it < iterations; ++it) {
        double d = d0;
        detail::masked_depth_lookup(depth, detail::to_pixel(src.x(), w), detail::to_pixel(src.y(), h), d);
        src = rot + d * trans;
      }
      grid.points[grid.index(y, x)] = src;
    }
  }
  return grid;
}

// Per-target flag: 1 where the source coordinate falls outside the input image.
inline std::vector<std::uint8_t> grid_out_of_bounds(const SamplingGrid& grid, int input_width, int input_height) {
  std::vector<std::uint8_t> mask(grid.points.size(), 0);
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    const double px = detail::to_pixel(grid.points[i].x(), input_width);
    const double py = detail::to_pixel(grid.points[i].y(), input_height);
    mask[i] = !(px >= 0.0 && py >= 0.0 && px <= input_width - 1 && py <= input_height - 1);
  }
  return mask;
}

// V(i, c) = sum over input pixels of U(y, x, c) * max(0, 1-|px_i - x|) * max(0, 1-|py_i - y|),
// with the grid denormalized against the input size. Outside pixels read as zero.
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& input, const SamplingGrid& grid) {
  require_shape(grid.points.size() == static_cast<std::size_t>(grid.height) * grid.width,
                "bilinear_sample: grid size does not match its dimensions");
  const int w = input.width, h = input.height, c = input.channels;
  Tensor<T> out(grid.height, grid.width, c);
  for (int oy = 0; oy < grid.height; ++oy) {
    for (int ox = 0; ox < grid.width; ++ox) {
      const Eigen::Vector2d& g = grid.at(oy, ox);
      const detail::Bilinear b = detail::bilinear_at(detail::to_pixel(g.x(), w), detail::to_pixel(g.y(), h));
      const double wts[4] = {(1 - b.fx) * (1 - b.fy), b.fx * (1 - b.fy), (1 - b.fx) * b.fy, b.fx * b.fy};
      const int dx[4] = {0, 1, 0, 1}, dy[4] = {0, 0, 1, 1};
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int n = 0; n < 4; ++n) {
          const int x = b.x0 + dx[n], y = b.y0 + dy[n];
          if (detail::inside(x, y, w, h)) acc += wts[n] * static_cast<double>(input(y, x, ch));
        }
        out(oy, ox, ch) = static_cast<T>(acc);
      }
    }
  }
  return out;
}

template <typename T>
struct SamplerGradients {
  Tensor<T> d_input;
  std::vector<Eigen::Vector2d> d_grid;  // w.r.t. normalized coordinates
};

// Reverse mode of bilinear_sample. The hat kernel's derivative is +-1 inside
// the unit window and 0 outside; grid gradients are chained through the
// denormalization scale. dU is scattered in a fixed row-major order.
template <typename T>
SamplerGradients<T> bilinear_backward(const Tensor<T>& input, const SamplingGrid& grid, const Tensor<T>& d_out) {
  require_shape(grid.points.size() == static_cast<std::size_t>(grid.height) * grid.width,
                "bilinear_backward: grid size does not match its dimensions");
  require_shape(d_out.height == grid.height && d_out.width == grid.width && d_out.channels == input.channels,
                "bilinear_backward: upstream gradient shape does not match the forward output");
  const int w = input.width, h = input.height, c = input.channels;
  const double scale_x = detail::pixel_scale(w), scale_y = detail::pixel_scale(h);

  SamplerGradients<T> out{Tensor<T>(h, w, c), std::vector<Eigen::Vector2d>(grid.points.size())};
  for (int oy = 0; oy < grid.height; ++oy) {
    for (int ox = 0; ox < grid.width; ++ox) {
      const Eigen::Vector2d& g = grid.at(oy, ox);
      const detail::Bilinear b = detail::bilinear_at(detail::to_pixel(g.x(), w), detail::to_pixel(g.y(), h));
      const double wts[4] = {(1 - b.fx) * (1 - b.fy), b.fx * (1 - b.fy), (1 - b.fx) * b.fy, b.fx * b.fy};
      const double dwx[4] = {-(1 - b.fy), (1 - b.fy), -b.fy, b.fy};
      const double dwy[4] = {-(1 - b.fx), -b.fx, (1 - b.fx), b.fx};
      const int dx[4] = {0, 1, 0, 1}, dy[4] = {0, 0, 1, 1};

      double gx = 0.0, gy = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const double upstream = static_cast<double>(d_out(oy, ox, ch));
        for (int n = 0; n < 4; ++n) {
          const int x = b.x0 + dx[n], y = b.y0 + dy[n];
          if (!detail::inside(x, y, w, h)) continue;
          const double u = static_cast<double>(input(y, x, ch));
          out.d_input(y, x, ch) = static_cast<T>(static_cast<double>(out.d_input(y, x, ch)) + wts[n] * upstream);
          gx += dwx[n] * u * upstream;
          gy += dwy[n] * u * upstream;
        }
      }
      out.d_grid[grid.index(oy, ox)] = {gx * scale_x, gy * scale_y};
    }
  }
  return out;
}

// Zeroes each value with probability `rate` and scales survivors by
// 1/(1-rate). The stream is a 64-bit Mersenne Twister seeded with `seed`,
// one draw per element in storage order.
template <typename T>
Tensor<T> dropout_noise(const Tensor<T>& values, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorKind::config, "dropout_noise: rate must be in [0, 1)");
  std::mt19937_64 rng(seed);
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor<T> out = values;
  for (auto& v : out.data) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = u < rate ? T{} : static_cast<T>(static_cast<double>(v) * keep_scale);
  }
  return out;
}

}  // namespace idwarp
