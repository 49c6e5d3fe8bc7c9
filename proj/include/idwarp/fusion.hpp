#pragma once

// Max-selection fusion of N aligned feature maps:
//   fused(p) = max(V_1(p), ..., V_N(p)) for every p = (y, x, c).
// A post-fusion Conv+BatchNorm+ReLU stage would consume `fused` directly.

#include <cstdint>
#include <span>
#include <vector>

#include "idwarp/types.hpp"

namespace idwarp {

// Winning input index per element, same layout as the fused map.
struct ArgmaxMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint32_t> index;
};

template <typename T>
struct FusionResult {
  Tensor<T> fused;
  ArgmaxMap winners;
};

// Ties go to the lowest input index.
template <typename T>
FusionResult<T> max_select(std::span<const Tensor<T>> maps) {
  if (maps.empty()) throw Error(ErrorKind::config, "max_select: no input maps");
  const Tensor<T>& first = maps.front();
  for (const auto& m : maps) require_shape(m.same_shape(first), "max_select: input maps differ in shape");

  FusionResult<T> out{first, {first.height, first.width, first.channels,
                              std::vector<std::uint32_t>(first.size(), 0)}};
  for (std::size_t n = 1; n < maps.size(); ++n) {
    const auto& src = maps[n].data;
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i] > out.fused.data[i]) {
        out.fused.data[i] = src[i];
        out.winners.index[i] = static_cast<std::uint32_t>(n);
      }
    }
  }
  return out;
}

template <typename T>
FusionResult<T> max_select(const std::vector<Tensor<T>>& maps) {
  return max_select(std::span<const Tensor<T>>(maps));
}

// Routes each upstream gradient entirely to the input that won that element.
template <typename T>
std::vector<Tensor<T>> max_select_backward(const ArgmaxMap& winners, const Tensor<T>& d_fused, std::size_t count) {
  require_shape(d_fused.height == winners.height && d_fused.width == winners.width &&
                    d_fused.channels == winners.channels && winners.index.size() == d_fused.size(),
                "max_select_backward: gradient shape does not match winners");
  std::vector<Tensor<T>> grads(count, Tensor<T>(d_fused.height, d_fused.width, d_fused.channels));
  for (std::size_t i = 0; i < winners.index.size(); ++i) {
    const std::uint32_t w = winners.index[i];
    if (w >= count) throw Error(ErrorKind::shape, "max_select_backward: winner index out of range");
    grads[w].data[i] = d_fused.data[i];
  }
  return grads;
}

}  // namespace idwarp
