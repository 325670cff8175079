#pragma once

// Shape validation and per-element formulas shared by the parallel kernels
// and their serial references.

#include <cmath>
#include <string>

#include "vehdet/error.hpp"
#include "vehdet/ops.hpp"

namespace vehdet::detail {

struct ConvGeometry {
  int batch;
  int in_c, in_h, in_w;
  int out_c, out_h, out_w;
  int k, stride, pad, groups;
  int in_per_group, out_per_group;
};

inline ConvGeometry conv_geometry(const Tensor& input, const ConvParams& p) {
  const Shape4& s = input.shape();
  const Shape4& ws = p.weights.shape();
  if (ws.h != ws.w || ws.h < 1) throw ShapeError("conv kernel must be square, got " + ws.str());
  if (p.groups < 1 || p.stride < 1 || p.pad < 0) {
    throw ShapeError("conv needs groups >= 1, stride >= 1, pad >= 0");
  }
  if (s.c % p.groups != 0 || ws.n % p.groups != 0) {
    throw ShapeError("conv channels " + std::to_string(s.c) + "->" + std::to_string(ws.n) +
                     " not divisible by groups " + std::to_string(p.groups));
  }
  if (ws.c * p.groups != s.c) {
    throw ShapeError("conv weights " + ws.str() + " expect " + std::to_string(ws.c * p.groups) +
                     " input channels, input is " + s.str());
  }
  if (!p.bias.empty() && static_cast<int>(p.bias.size()) != ws.n) {
    throw ShapeError("conv bias length " + std::to_string(p.bias.size()) + " != Cout " +
                     std::to_string(ws.n));
  }
  ConvGeometry g{};
  g.batch = s.n;
  g.in_c = s.c;
  g.in_h = s.h;
  g.in_w = s.w;
  g.out_c = ws.n;
  g.k = ws.h;
  g.stride = p.stride;
  g.pad = p.pad;
  g.groups = p.groups;
  g.out_h = conv_out_size(s.h, g.k, p.stride, p.pad);
  g.out_w = conv_out_size(s.w, g.k, p.stride, p.pad);
  g.in_per_group = s.c / p.groups;
  g.out_per_group = ws.n / p.groups;
  return g;
}

inline void check_depthwise(const Tensor& input, const ConvParams& p) {
  const int c = input.shape().c;
  if (p.groups != c || p.out_channels() != c) {
    throw ShapeError("depthwise conv needs groups == Cin == Cout, got groups " +
                     std::to_string(p.groups) + ", Cin " + std::to_string(c) + ", Cout " +
                     std::to_string(p.out_channels()));
  }
}

inline void check_offsets(const ConvGeometry& g, const Tensor& offsets) {
  const Shape4& o = offsets.shape();
  if (o.n != g.batch || o.c != 2 * g.k * g.k || o.h != g.out_h || o.w != g.out_w) {
    throw ShapeError("offset field " + o.str() + " does not match expected " +
                     Shape4{g.batch, 2 * g.k * g.k, g.out_h, g.out_w}.str());
  }
}

struct PoolGeometry {
  int out_h, out_w;
};

inline PoolGeometry pool_geometry(const Tensor& input, int k, int stride, int pad) {
  if (k < 1 || stride < 1 || pad < 0) throw ShapeError("pool needs k >= 1, stride >= 1, pad >= 0");
  // pad >= k would allow windows that see only padding.
  if (pad >= k) throw ShapeError("pool padding must be smaller than the window");
  return {conv_out_size(input.shape().h, k, stride, pad),
          conv_out_size(input.shape().w, k, stride, pad)};
}

inline void check_bn(const Tensor& input, const BnParams& p) {
  const auto c = static_cast<std::size_t>(input.shape().c);
  if (p.gamma.size() != c || p.beta.size() != c || p.mean.size() != c || p.var.size() != c) {
    throw ShapeError("batch_norm parameter length does not match " + std::to_string(c) +
                     " channels");
  }
  if (p.eps < 0.0f) throw ShapeError("batch_norm eps must be non-negative");
}

inline float bn_inv_std(const BnParams& p, std::size_t c) {
  const float denom = p.var[c] + p.eps;
  if (!(denom > 0.0f)) throw ShapeError("batch_norm var + eps must be positive");
  return 1.0f / std::sqrt(denom);
}

inline float bn_apply(float x, float gamma, float beta, float mean, float inv_std) {
  return gamma * ((x - mean) * inv_std) + beta;
}

}  // namespace vehdet::detail
