#pragma once

// Central finite-difference checks of every analytic gradient in the library:
// the bilinear sampler (input and grid), the coefficient networks (weights and
// input), and the adversarial/reconstruction losses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "idwarp/coeff_net.hpp"
#include "idwarp/grid_sampler.hpp"
#include "idwarp/losses.hpp"
#include "idwarp/types.hpp"

namespace idwarp {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  int instances = 100;
  int max_size = 16;      // feature maps up to max_size x max_size
  int max_channels = 4;
  std::string corrupt;    // test hook: scale one component's analytic gradient
};

struct ComponentReport {
  std::string name;
  int instances = 0;
  long checked = 0;   // gradient entries compared
  long skipped = 0;   // entries inside a documented kink neighbourhood
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error <= tolerance; }
};

inline constexpr double kSamplerTolerance = 1e-4;
inline constexpr double kNetTolerance = 1e-4;
inline constexpr double kLossTolerance = 1e-5;

// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

namespace detail {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(engine_() >> 11) * 0x1.0p-53); }
  int integer(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }

 private:
  std::mt19937_64 engine_;
};

inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

inline Tensor<double> random_tensor(Rng& rng, int h, int w, int c, double lo, double hi) {
  Tensor<double> t(h, w, c);
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

inline double near_integer_distance(double p) { return std::abs(p - std::nearbyint(p)); }

}  // namespace detail

// L = sum(dV * bilinear_sample(U, grid)); checks dL/dU and dL/dgrid. Grid
// coordinates within 1e-3 px of an integer are skipped on that axis.
inline ComponentReport check_bilinear_gradients(const GradcheckOptions& opt) {
  constexpr double kStep = 1e-4;
  constexpr double kKink = 1e-3;
  detail::Rng rng(opt.seed ^ 0xb111ea5ULL);
  ComponentReport rep{"bilinear_backward", 0, 0, 0, 0.0, kSamplerTolerance};
  const double corrupt = opt.corrupt == rep.name ? 1.01 : 1.0;

  for (int inst = 0; inst < opt.instances; ++inst) {
    const int h = rng.integer(2, opt.max_size), w = rng.integer(2, opt.max_size);
    const int c = rng.integer(1, opt.max_channels);
    const int oh = rng.integer(1, opt.max_size), ow = rng.integer(1, opt.max_size);
    Tensor<double> input = detail::random_tensor(rng, h, w, c, -1.0, 1.0);
    const Tensor<double> d_out = detail::random_tensor(rng, oh, ow, c, -1.0, 1.0);
    SamplingGrid grid(oh, ow);
    for (auto& p : grid.points) p = {rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)};

    auto loss = [&] {
      const Tensor<double> v = bilinear_sample(input, grid);
      double l = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) l += v.data[i] * d_out.data[i];
      return l;
    };
    const SamplerGradients<double> g = bilinear_backward(input, grid, d_out);

    for (std::size_t i = 0; i < input.size(); ++i) {
      const double num = detail::central_difference(loss, input.data[i], kStep);
      rep.max_rel_error = std::max(rep.max_rel_error, relative_error(corrupt * g.d_input.data[i], num));
      ++rep.checked;
    }
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
      for (int axis = 0; axis < 2; ++axis) {
        const int extent = axis == 0 ? w : h;
        const double px = (grid.points[i](axis) + 1.0) * 0.5 * (extent - 1);
        if (detail::near_integer_distance(px) < kKink) {
          ++rep.skipped;
          continue;
        }
        const double num = detail::central_difference(loss, grid.points[i](axis), kStep);
        rep.max_rel_error = std::max(rep.max_rel_error, relative_error(corrupt * g.d_grid[i](axis), num));
        ++rep.checked;
      }
    }
    ++rep.instances;
  }
  return rep;
}

// Random-weight networks (non-zero head) with random hidden widths;
// L = sum(dOut * forward(input)).
inline ComponentReport check_coeff_net_gradients(const GradcheckOptions& opt) {
  constexpr double kStep = 1e-5;
  detail::Rng rng(opt.seed ^ 0xc0eff7e7ULL);
  ComponentReport rep{"coeff_net_backward", 0, 0, 0, 0.0, kNetTolerance};
  const double corrupt = opt.corrupt == rep.name ? 1.01 : 1.0;

  for (int inst = 0; inst < opt.instances; ++inst) {
    const CoeffPathway pathway = inst % 2 == 0 ? CoeffPathway::rotation : CoeffPathway::translation;
    std::vector<int> hidden;
    const int depth = rng.integer(0, 2);
    for (int i = 0; i < depth; ++i) hidden.push_back(rng.integer(2, 32));

    CoeffNetWeights net;
    net.pathway = pathway;
    int in = 3;
    hidden.push_back(pathway_outputs(pathway));
    for (int width : hidden) {
      DenseLayer layer{Eigen::MatrixXd(width, in), Eigen::VectorXd(width)};
      for (int r = 0; r < width; ++r) {
        layer.bias(r) = rng.uniform(-0.5, 0.5);
        for (int cc = 0; cc < in; ++cc) layer.weight(r, cc) = rng.uniform(-1.0, 1.0) / std::sqrt(in);
      }
      net.layers.push_back(std::move(layer));
      in = width;
    }
    Eigen::Vector3d input(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    Eigen::MatrixXd d_out(2, pathway_cols(pathway));
    for (int r = 0; r < d_out.rows(); ++r)
      for (int cc = 0; cc < d_out.cols(); ++cc) d_out(r, cc) = rng.uniform(-1, 1);

    auto loss = [&] { return (coeff_net_forward(input, net).array() * d_out.array()).sum(); };
    const CoeffNetGradients g = coeff_net_backward(input, net, d_out);

    auto compare = [&](double analytic, double& param) {
      const double num = detail::central_difference(loss, param, kStep);
      rep.max_rel_error = std::max(rep.max_rel_error, relative_error(corrupt * analytic, num));
      ++rep.checked;
    };
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      auto& layer = net.layers[li];
      for (int r = 0; r < layer.weight.rows(); ++r) {
        compare(g.d_layers[li].bias(r), layer.bias(r));
        for (int cc = 0; cc < layer.weight.cols(); ++cc) compare(g.d_layers[li].weight(r, cc), layer.weight(r, cc));
      }
    }
    for (int k = 0; k < 3; ++k) compare(g.d_input(k), input(k));
    ++rep.instances;
  }
  return rep;
}

// Every loss and every continuous input. The step for an L1 entry is capped
// at half its distance to the kink; entries with |gen - target| < 1e-6 are
// skipped.
inline ComponentReport check_loss_gradients(const GradcheckOptions& opt) {
  constexpr double kStep = 1e-3;
  constexpr double kKink = 1e-6;
  detail::Rng rng(opt.seed ^ 0x1055e5ULL);
  ComponentReport rep{"loss_gradients", 0, 0, 0, 0.0, kLossTolerance};
  const double corrupt = opt.corrupt == rep.name ? 1.01 : 1.0;

  auto compare = [&](double analytic, const std::function<double()>& f, double& x, double step) {
    const double num = detail::central_difference(f, x, step);
    rep.max_rel_error = std::max(rep.max_rel_error, relative_error(corrupt * analytic, num));
    ++rep.checked;
  };
  auto random_vec6 = [&] {
    Vector6d v;
    for (int i = 0; i < 6; ++i) v(i) = rng.uniform(-2, 2);
    return v;
  };

  for (int inst = 0; inst < opt.instances; ++inst) {
    LossWeights w{rng.uniform(0.0, 1.0), rng.uniform(0.0, 20.0)};

    // ls_d_loss
    std::vector<double> real(rng.integer(1, 8)), fake(rng.integer(1, 8));
    for (auto& s : real) s = rng.uniform(-2, 2);
    for (auto& s : fake) s = rng.uniform(-2, 2);
    {
      const LsDGradients g = ls_d_loss_gradients(real, fake);
      auto f = [&] { return ls_d_loss(real, fake); };
      for (std::size_t i = 0; i < real.size(); ++i) compare(g.d_real[i], f, real[i], kStep);
      for (std::size_t i = 0; i < fake.size(); ++i) compare(g.d_fake[i], f, fake[i], kStep);
    }

    // aux_d_loss
    Vector6d pr = random_vec6(), th = random_vec6(), pf = random_vec6(), z = random_vec6();
    {
      const AuxDGradients g = aux_d_loss_gradients(pr, th, pf, z);
      auto f = [&] { return aux_d_loss(pr, th, pf, z); };
      for (int i = 0; i < 6; ++i) {
        compare(g.d_pose_real(i), f, pr(i), kStep);
        compare(g.d_theta(i), f, th(i), kStep);
        compare(g.d_pose_fake(i), f, pf(i), kStep);
        compare(g.d_z(i), f, z(i), kStep);
      }
    }

    // d_total
    {
      double ls = rng.uniform(0, 2), aux = rng.uniform(0, 2);
      const Eigen::Vector2d g = d_total_gradients(w);
      auto f = [&] { return d_total(ls, aux, w); };
      compare(g(0), f, ls, kStep);
      compare(g(1), f, aux, kStep);
    }

    // g_total, including the mean-pixel-L1 term
    {
      const int h = rng.integer(1, opt.max_size), wd = rng.integer(1, opt.max_size);
      const int c = rng.integer(1, opt.max_channels);
      Tensor<double> gen = detail::random_tensor(rng, h, wd, c, 0.0, 1.0);
      Tensor<double> tgt = detail::random_tensor(rng, h, wd, c, 0.0, 1.0);
      const GTotalGradients g = g_total_gradients(fake, pf, th, gen, tgt, w);
      auto f = [&] { return g_total(fake, pf, th, gen, tgt, w); };
      for (std::size_t i = 0; i < fake.size(); ++i) compare(g.d_fake_scores[i], f, fake[i], kStep);
      for (int i = 0; i < 6; ++i) {
        compare(g.d_pose_fake(i), f, pf(i), kStep);
        compare(g.d_theta(i), f, th(i), kStep);
      }
      for (std::size_t i = 0; i < gen.size(); ++i) {
        const double gap = std::abs(gen.data[i] - tgt.data[i]);
        if (gap < kKink) {
          rep.skipped += 2;
          continue;
        }
        const double step = std::min(kStep, 0.5 * gap);
        compare(g.d_generated.data[i], f, gen.data[i], step);
        compare(g.d_target.data[i], f, tgt.data[i], step);
      }
    }
    ++rep.instances;
  }
  return rep;
}

inline std::vector<ComponentReport> run_gradcheck(const GradcheckOptions& opt) {
  return {check_bilinear_gradients(opt), check_coeff_net_gradients(opt), check_loss_gradients(opt)};
}

}  // namespace idwarp
