#include "vehdet/ops_reference.hpp"

#include <algorithm>
#include <limits>

#include "ops_common.hpp"

namespace vehdet::reference {

namespace {

float weight_at(const ConvParams& p, int oc, int ci, int ky, int kx) {
  return p.weights.at(oc, ci, ky, kx);
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvParams& p) {
  const detail::ConvGeometry g = detail::conv_geometry(input, p);
  Tensor out({g.batch, g.out_c, g.out_h, g.out_w});
  for (int n = 0; n < g.batch; ++n) {
    for (int oc = 0; oc < g.out_c; ++oc) {
      const int first_in = (oc / g.out_per_group) * g.in_per_group;
      for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
          float acc = 0.0f;
          for (int ci = 0; ci < g.in_per_group; ++ci) {
            for (int ky = 0; ky < g.k; ++ky) {
              const int iy = oy * g.stride - g.pad + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int kx = 0; kx < g.k; ++kx) {
                const int ix = ox * g.stride - g.pad + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                acc += weight_at(p, oc, ci, ky, kx) * input.at(n, first_in + ci, iy, ix);
              }
            }
          }
          if (!p.bias.empty()) acc += p.bias[static_cast<std::size_t>(oc)];
          out.at(n, oc, oy, ox) = acc;
        }
      }
    }
  }
  return out;
}

Tensor depthwise_conv2d(const Tensor& input, const ConvParams& p) {
  detail::check_depthwise(input, p);
  return reference::conv2d(input, p);
}

Tensor channel_shuffle(const Tensor& input, int groups) {
  const Shape4& s = input.shape();
  if (groups < 1 || s.c % groups != 0) {
    throw ShapeError("channel_shuffle: channels not divisible by groups");
  }
  const int per_group = s.c / groups;
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const int dst = (c % per_group) * groups + c / per_group;
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) out.at(n, dst, y, x) = input.at(n, c, y, x);
      }
    }
  }
  return out;
}

Tensor max_pool(const Tensor& input, int k, int stride, int pad) {
  const detail::PoolGeometry pg = detail::pool_geometry(input, k, stride, pad);
  const Shape4& s = input.shape();
  Tensor out({s.n, s.c, pg.out_h, pg.out_w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int oy = 0; oy < pg.out_h; ++oy) {
        for (int ox = 0; ox < pg.out_w; ++ox) {
          float m = -std::numeric_limits<float>::infinity();
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int y = oy * stride - pad + ky;
              const int x = ox * stride - pad + kx;
              if (y < 0 || y >= s.h || x < 0 || x >= s.w) continue;
              m = std::max(m, input.at(n, c, y, x));
            }
          }
          out.at(n, c, oy, ox) = m;
        }
      }
    }
  }
  return out;
}

Tensor avg_pool(const Tensor& input, int k, int stride, int pad) {
  const detail::PoolGeometry pg = detail::pool_geometry(input, k, stride, pad);
  const Shape4& s = input.shape();
  Tensor out({s.n, s.c, pg.out_h, pg.out_w});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int oy = 0; oy < pg.out_h; ++oy) {
        for (int ox = 0; ox < pg.out_w; ++ox) {
          float sum = 0.0f;
          int count = 0;
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int y = oy * stride - pad + ky;
              const int x = ox * stride - pad + kx;
              if (y < 0 || y >= s.h || x < 0 || x >= s.w) continue;
              sum += input.at(n, c, y, x);
              ++count;
            }
          }
          out.at(n, c, oy, ox) = sum / static_cast<float>(count);
        }
      }
    }
  }
  return out;
}

Tensor batch_norm(const Tensor& input, const BnParams& p) {
  detail::check_bn(input, p);
  const Shape4& s = input.shape();
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      const float inv = detail::bn_inv_std(p, ci);
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          out.at(n, c, y, x) =
              detail::bn_apply(input.at(n, c, y, x), p.gamma[ci], p.beta[ci], p.mean[ci], inv);
        }
      }
    }
  }
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const float v = input.data()[i];
    out.data()[i] = v > 0.0f ? v : 0.0f;
  }
  return out;
}

Tensor deformable_conv2d(const Tensor& input, const Tensor& offsets, const ConvParams& p) {
  const detail::ConvGeometry g = detail::conv_geometry(input, p);
  detail::check_offsets(g, offsets);
  Tensor out({g.batch, g.out_c, g.out_h, g.out_w});
  for (int n = 0; n < g.batch; ++n) {
    for (int oc = 0; oc < g.out_c; ++oc) {
      const int first_in = (oc / g.out_per_group) * g.in_per_group;
      for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
          float acc = 0.0f;
          for (int ci = 0; ci < g.in_per_group; ++ci) {
            auto plane = input.plane(n, first_in + ci);
            for (int ky = 0; ky < g.k; ++ky) {
              for (int kx = 0; kx < g.k; ++kx) {
                const int t = ky * g.k + kx;
                const float y =
                    static_cast<float>(oy * g.stride - g.pad + ky) + offsets.at(n, 2 * t, oy, ox);
                const float x = static_cast<float>(ox * g.stride - g.pad + kx) +
                                offsets.at(n, 2 * t + 1, oy, ox);
                acc += weight_at(p, oc, ci, ky, kx) *
                       bilinear_sample(plane, g.in_h, g.in_w, y, x);
              }
            }
          }
          if (!p.bias.empty()) acc += p.bias[static_cast<std::size_t>(oc)];
          out.at(n, oc, oy, ox) = acc;
        }
      }
    }
  }
  return out;
}

}  // namespace vehdet::reference
