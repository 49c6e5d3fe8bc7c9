#pragma once

// Adversarial objectives over discriminator outputs, with analytic gradients.
//
// Discriminator:  L_D = L_LS + lambda * L_aux
//   L_LS  = 1/2 E[(D_LS(real) - 1)^2] + 1/2 E[(D_LS(fake) + 1)^2]
//   L_aux = 1/2 E[(D_pose(real) - theta)^2] + 1/2 E[(D_pose(fake) - z)^2]
// Generator:
//   L_G   = 1/2 E[D_LS(fake)^2] + lambda * E[(D_pose(fake) - theta)^2] + phi * E|G - Y|
//
// Expectations are arithmetic means over the batch (scores) or the six pose
// components. The real/fake targets +1/-1 are used as given.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "idwarp/types.hpp"

namespace idwarp {

using Vector6d = Eigen::Matrix<double, 6, 1>;

struct LossWeights {
  double lambda = 0.1;
  double phi = 10.0;  // not given with the method; reconstruction-dominant default

  void check() const {
    if (!(lambda >= 0.0) || !(phi >= 0.0)) throw Error(ErrorKind::config, "loss weights must be non-negative");
  }
};

// Standard-normal 6-vector target for the fake branch of the pose head.
// Box-Muller over a seeded 64-bit Mersenne Twister, so the stream is the same
// on every platform.
inline Vector6d sample_pose_noise(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform_open = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  Vector6d z;
  for (int i = 0; i < 6; i += 2) {
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double a = 2.0 * std::numbers::pi * uniform_open();
    z(i) = r * std::cos(a);
    z(i + 1) = r * std::sin(a);
  }
  return z;
}

// ---------------------------------------------------------------------------

inline double ls_d_loss(std::span<const double> real_scores, std::span<const double> fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) throw Error(ErrorKind::config, "ls_d_loss: empty score list");
  double real = 0.0, fake = 0.0;
  for (double s : real_scores) real += (s - 1.0) * (s - 1.0);
  for (double s : fake_scores) fake += (s + 1.0) * (s + 1.0);
  return 0.5 * real / real_scores.size() + 0.5 * fake / fake_scores.size();
}

struct LsDGradients {
  std::vector<double> d_real;
  std::vector<double> d_fake;
};

inline LsDGradients ls_d_loss_gradients(std::span<const double> real_scores, std::span<const double> fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) throw Error(ErrorKind::config, "ls_d_loss: empty score list");
  LsDGradients g;
  for (double s : real_scores) g.d_real.push_back((s - 1.0) / real_scores.size());
  for (double s : fake_scores) g.d_fake.push_back((s + 1.0) / fake_scores.size());
  return g;
}

inline double aux_d_loss(const Vector6d& pose_real_est, const Vector6d& theta, const Vector6d& pose_fake_est,
                         const Vector6d& z) {
  return 0.5 * (pose_real_est - theta).squaredNorm() / 6.0 + 0.5 * (pose_fake_est - z).squaredNorm() / 6.0;
}

struct AuxDGradients {
  Vector6d d_pose_real;
  Vector6d d_theta;
  Vector6d d_pose_fake;
  Vector6d d_z;
};

inline AuxDGradients aux_d_loss_gradients(const Vector6d& pose_real_est, const Vector6d& theta,
                                          const Vector6d& pose_fake_est, const Vector6d& z) {
  const Vector6d real = (pose_real_est - theta) / 6.0;
  const Vector6d fake = (pose_fake_est - z) / 6.0;
  return {real, -real, fake, -fake};
}

inline double d_total(double ls, double aux, const LossWeights& w) { return ls + w.lambda * aux; }

// (d/d ls, d/d aux)
inline Eigen::Vector2d d_total_gradients(const LossWeights& w) { return {1.0, w.lambda}; }

// ---------------------------------------------------------------------------

template <typename T>
double mean_pixel_l1(const Tensor<T>& a, const Tensor<T>& b) {
  require_shape(a.same_shape(b), "mean_pixel_l1: shapes differ");
  require_shape(a.size() > 0, "mean_pixel_l1: empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    sum += std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
  return sum / static_cast<double>(a.size());
}

// d/da; the subgradient at a == b is taken as 0. d/db is the negation.
template <typename T>
Tensor<double> mean_pixel_l1_gradient(const Tensor<T>& a, const Tensor<T>& b) {
  require_shape(a.same_shape(b), "mean_pixel_l1: shapes differ");
  Tensor<double> g(a.height, a.width, a.channels);
  const double inv = 1.0 / static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    g.data[i] = diff > 0.0 ? inv : (diff < 0.0 ? -inv : 0.0);
  }
  return g;
}

template <typename T>
double g_total(std::span<const double> fake_scores, const Vector6d& pose_fake_est, const Vector6d& theta,
               const Tensor<T>& generated, const Tensor<T>& target, const LossWeights& w) {
  if (fake_scores.empty()) throw Error(ErrorKind::config, "g_total: empty score list");
  double adv = 0.0;
  for (double s : fake_scores) adv += s * s;
  adv = 0.5 * adv / fake_scores.size();
  const double pose = (pose_fake_est - theta).squaredNorm() / 6.0;
  return adv + w.lambda * pose + w.phi * mean_pixel_l1(generated, target);
}

struct GTotalGradients {
  std::vector<double> d_fake_scores;
  Vector6d d_pose_fake;
  Vector6d d_theta;
  Tensor<double> d_generated;
  Tensor<double> d_target;
};

template <typename T>
GTotalGradients g_total_gradients(std::span<const double> fake_scores, const Vector6d& pose_fake_est,
                                  const Vector6d& theta, const Tensor<T>& generated, const Tensor<T>& target,
                                  const LossWeights& w) {
  if (fake_scores.empty()) throw Error(ErrorKind::config, "g_total: empty score list");
  GTotalGradients g;
  for (double s : fake_scores) g.d_fake_scores.push_back(s / fake_scores.size());
  g.d_pose_fake = 2.0 * w.lambda * (pose_fake_est - theta) / 6.0;
  g.d_theta = -g.d_pose_fake;
  g.d_generated = mean_pixel_l1_gradient(generated, target);
  for (auto& v : g.d_generated.data) v *= w.phi;
  g.d_target = g.d_generated;
  for (auto& v : g.d_target.data) v = -v;
  return g;
}

}  // namespace idwarp
