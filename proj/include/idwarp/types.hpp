#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace idwarp {

// Error categories map one-to-one onto the CLI exit codes.
enum class ErrorKind {
  config,      // bad arguments or configuration (exit 2)
  io,          // unreadable/unwritable file, bad file format (exit 3)
  shape,       // mismatched tensor dimensions (exit 2)
  degenerate,  // numeric degeneracy: gimbal lock, no valid depth (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::shape, what);
}

// Pinhole camera with zero skew and unit aspect ratio.
// Pixel convention: x right, y down, origin top-left, centers on integers.
struct CameraIntrinsics {
  double f = 1.0;
  double x0 = 0.0;
  double y0 = 0.0;
};

// Control variable theta = (omega; t). Rotations in radians, translation in meters.
struct EgoMotion {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  static EgoMotion from_array(const std::array<double, 6>& v) {
    EgoMotion m;
    m.omega = {v[0], v[1], v[2]};
    m.t = {v[3], v[4], v[5]};
    return m;
  }

  std::array<double, 6> to_array() const {
    return {omega.x(), omega.y(), omega.z(), t.x(), t.y(), t.z()};
  }
};

// H x W x C tensor, row-major with channels innermost.
template <typename T>
struct Tensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int h, int w, int c, T fill = T{})
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {
    if (h < 0 || w < 0 || c < 0) throw Error(ErrorKind::shape, "negative tensor dimension");
  }

  std::size_t size() const noexcept { return data.size(); }
  std::size_t index(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& operator()(int y, int x, int c = 0) noexcept { return data[index(y, x, c)]; }
  const T& operator()(int y, int x, int c = 0) const noexcept { return data[index(y, x, c)]; }

  bool same_shape(const Tensor& o) const noexcept {
    return height == o.height && width == o.width && channels == o.channels;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(height, width, channels);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  bool operator==(const Tensor&) const = default;
};

// Feature values are single precision; gradient checks instantiate with double.
using FeatureMap = Tensor<float>;

// Per-pixel inverse depth with an explicit validity mask.
struct InverseDepthMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;  // 1 = valid

  InverseDepthMap() = default;
  InverseDepthMap(int h, int w, double fill = 0.0, bool valid = true)
      : height(h), width(w),
        values(static_cast<std::size_t>(h) * w, fill),
        mask(static_cast<std::size_t>(h) * w, valid ? 1 : 0) {}

  std::size_t index(int y, int x) const noexcept { return static_cast<std::size_t>(y) * width + x; }
  double value(int y, int x) const noexcept { return values[index(y, x)]; }
  bool valid(int y, int x) const noexcept { return mask[index(y, x)] != 0; }

  void check() const {
    require_shape(height >= 0 && width >= 0, "inverse depth map: negative dimension");
    const auto n = static_cast<std::size_t>(height) * width;
    require_shape(values.size() == n, "inverse depth map: values do not match dimensions");
    require_shape(mask.size() == n, "inverse depth map: mask does not match values");
  }
};

// Metric depth in meters; 0 marks an invalid pixel.
struct DepthImage {
  int height = 0;
  int width = 0;
  std::vector<double> meters;

  DepthImage() = default;
  DepthImage(int h, int w, double fill = 0.0)
      : height(h), width(w), meters(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t index(int y, int x) const noexcept { return static_cast<std::size_t>(y) * width + x; }
  double& operator()(int y, int x) noexcept { return meters[index(y, x)]; }
  double operator()(int y, int x) const noexcept { return meters[index(y, x)]; }
  bool valid(int y, int x) const noexcept { return meters[index(y, x)] > 0.0; }

  bool operator==(const DepthImage&) const = default;
};

enum class FlowStatus : std::uint8_t {
  complete,       // full flow available
  rotation_only,  // depth invalid: translational component unavailable
  behind_camera,  // exact reprojection landed behind the camera
};

struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<Eigen::Vector2d> u;
  std::vector<FlowStatus> status;

  FlowField() = default;
  FlowField(int h, int w)
      : height(h), width(w),
        u(static_cast<std::size_t>(h) * w, Eigen::Vector2d::Zero()),
        status(static_cast<std::size_t>(h) * w, FlowStatus::complete) {}

  std::size_t index(int y, int x) const noexcept { return static_cast<std::size_t>(y) * width + x; }
  const Eigen::Vector2d& at(int y, int x) const noexcept { return u[index(y, x)]; }
};

}  // namespace idwarp
