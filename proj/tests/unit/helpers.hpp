#pragma once

#include <random>
#include <vector>

#include "oracles.hpp"
#include "vehdet/ops.hpp"

namespace test {

using namespace vehdet;

inline Tensor iota_tensor(Shape4 s, float start = 0.0f) {
  std::vector<float> v(s.count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = start + static_cast<float>(i);
  return Tensor(s, std::move(v));
}

inline ConvParams zero_conv(int out_c, int in_per_group, int k, int stride, int pad, int groups,
                            bool bias = false) {
  ConvParams p{Tensor({out_c, in_per_group, k, k}, 0.0f), {}, stride, pad, groups};
  if (bias) p.bias.assign(static_cast<std::size_t>(out_c), 0.0f);
  return p;
}

inline ConvParams identity_1x1(int c) {
  ConvParams p = zero_conv(c, c, 1, 1, 0, 1);
  for (int i = 0; i < c; ++i) p.weights.at(i, i, 0, 0) = 1.0f;
  return p;
}

inline std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace test
