#pragma once

// Small fully connected networks that map a 3-vector (rotation or
// translation) to the g (2x6) or h (2x3) coefficient matrix of the grid
// generator. Affine layers with tanh between them and a linear head.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "idwarp/grid_sampler.hpp"
#include "idwarp/types.hpp"

namespace idwarp {

enum class CoeffPathway { rotation, translation };

inline int pathway_cols(CoeffPathway p) { return p == CoeffPathway::rotation ? 6 : 3; }
inline int pathway_outputs(CoeffPathway p) { return 2 * pathway_cols(p); }

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

struct CoeffNetWeights {
  CoeffPathway pathway = CoeffPathway::rotation;
  std::vector<DenseLayer> layers;

  int input_size() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
  int output_size() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

  // Shapes must chain from 3 inputs to 12 (rotation) or 6 (translation) outputs.
  void check() const {
    require_shape(!layers.empty(), "coeff net: no layers");
    require_shape(input_size() == 3, "coeff net: input size must be 3");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      require_shape(layers[i].bias.size() == layers[i].weight.rows(), "coeff net: bias/weight mismatch");
      if (i + 1 < layers.size())
        require_shape(layers[i + 1].weight.cols() == layers[i].weight.rows(), "coeff net: layer sizes do not chain");
    }
    require_shape(output_size() == pathway_outputs(pathway), "coeff net: wrong output size for pathway");
  }
};

// Flattened (row-major) coefficients of the identity grid for a pathway.
inline Eigen::VectorXd identity_coefficients(CoeffPathway p) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(pathway_outputs(p));
  if (p == CoeffPathway::rotation) {
    v(0) = 1.0;      // g(0,0)
    v(6 + 1) = 1.0;  // g(1,1)
  }
  return v;
}

// Hidden layers get Glorot-uniform weights and zero bias. The head is zero
// with its bias at the identity coefficients, so any input maps to the
// identity grid until trained.
inline CoeffNetWeights make_identity_coeff_net(CoeffPathway p, std::uint64_t seed,
                                               const std::vector<int>& hidden = {32, 32}) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double limit) {
    return (2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0) * limit;
  };
  CoeffNetWeights net;
  net.pathway = p;
  int in = 3;
  for (int width : hidden) {
    DenseLayer layer{Eigen::MatrixXd(width, in), Eigen::VectorXd::Zero(width)};
    const double limit = std::sqrt(6.0 / (in + width));
    for (int r = 0; r < width; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = uniform(limit);
    net.layers.push_back(std::move(layer));
    in = width;
  }
  net.layers.push_back({Eigen::MatrixXd::Zero(pathway_outputs(p), in), identity_coefficients(p)});
  return net;
}

// Activations kept for the backward pass: inputs to each layer, and the
// pre-activations of every hidden layer.
struct CoeffNetTape {
  std::vector<Eigen::VectorXd> layer_inputs;
  std::vector<Eigen::VectorXd> pre_activations;
  Eigen::VectorXd output;
};

inline CoeffNetTape coeff_net_record(const Eigen::Vector3d& input, const CoeffNetWeights& w) {
  w.check();
  CoeffNetTape tape;
  Eigen::VectorXd a = input;
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    tape.layer_inputs.push_back(a);
    Eigen::VectorXd z = w.layers[i].weight * a + w.layers[i].bias;
    if (i + 1 < w.layers.size()) {
      tape.pre_activations.push_back(z);
      a = z.array().tanh().matrix();
    } else {
      a = std::move(z);
    }
  }
  tape.output = std::move(a);
  return tape;
}

// Output reshaped row-major to 2x6 (rotation) or 2x3 (translation).
inline Eigen::MatrixXd coeff_net_forward(const Eigen::Vector3d& input, const CoeffNetWeights& w) {
  const Eigen::VectorXd out = coeff_net_record(input, w).output;
  const int cols = pathway_cols(w.pathway);
  Eigen::MatrixXd m(2, cols);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = out(r * cols + c);
  return m;
}

struct CoeffNetGradients {
  Eigen::Vector3d d_input = Eigen::Vector3d::Zero();
  std::vector<DenseLayer> d_layers;
};

// d_out has the shape of coeff_net_forward's result.
inline CoeffNetGradients coeff_net_backward(const Eigen::Vector3d& input, const CoeffNetWeights& w,
                                            const Eigen::MatrixXd& d_out) {
  const int cols = pathway_cols(w.pathway);
  require_shape(d_out.rows() == 2 && d_out.cols() == cols, "coeff_net_backward: upstream gradient shape");
  const CoeffNetTape tape = coeff_net_record(input, w);

  Eigen::VectorXd delta(2 * cols);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < cols; ++c) delta(r * cols + c) = d_out(r, c);

  CoeffNetGradients g;
  g.d_layers.resize(w.layers.size());
  for (std::size_t li = w.layers.size(); li-- > 0;) {
    g.d_layers[li].weight = delta * tape.layer_inputs[li].transpose();
    g.d_layers[li].bias = delta;
    Eigen::VectorXd back = w.layers[li].weight.transpose() * delta;
    if (li > 0) {
      const Eigen::ArrayXd th = tape.pre_activations[li - 1].array().tanh();
      back = (back.array() * (1.0 - th * th)).matrix();
    }
    delta = std::move(back);
  }
  g.d_input = delta;
  return g;
}

// g from the rotation net applied to omega, h from the translation net applied to t.
inline TransformCoeffs coeffs_from_nets(const EgoMotion& m, const CoeffNetWeights& rotation_net,
                                        const CoeffNetWeights& translation_net) {
  require_shape(rotation_net.pathway == CoeffPathway::rotation, "coeffs_from_nets: expected a rotation net");
  require_shape(translation_net.pathway == CoeffPathway::translation, "coeffs_from_nets: expected a translation net");
  TransformCoeffs c;
  c.g = coeff_net_forward(m.omega, rotation_net);
  c.h = coeff_net_forward(m.t, translation_net);
  return c;
}

}  // namespace idwarp
