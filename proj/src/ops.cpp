#include "vehdet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ops_common.hpp"

namespace vehdet {

BnParams BnParams::identity(int channels) {
  const auto c = static_cast<std::size_t>(channels);
  return {std::vector<float>(c, 1.0f), std::vector<float>(c, 0.0f), std::vector<float>(c, 0.0f),
          std::vector<float>(c, 1.0f), 0.0f};
}

int conv_out_size(int in, int k, int stride, int pad) {
  const int span = in + 2 * pad - k;
  if (in < 1 || span < 0) {
    throw ShapeError("no output position: input " + std::to_string(in) + ", kernel " +
                     std::to_string(k) + ", pad " + std::to_string(pad));
  }
  return span / stride + 1;
}

namespace {

// Output index range [lo, hi) whose input coordinate o * stride - pad + tap
// lands inside [0, in).
struct Range {
  int lo, hi;
};

Range valid_outputs(int out, int in, int stride, int pad, int tap) {
  // o * stride >= pad - tap  and  o * stride <= in - 1 + pad - tap
  const int lo_num = pad - tap;
  int lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
  const int hi_num = in - 1 + pad - tap;
  int hi = hi_num < 0 ? 0 : hi_num / stride + 1;
  lo = std::min(lo, out);
  hi = std::clamp(hi, lo, out);
  return {lo, hi};
}

// dst[oy, ox] += weight * src[oy * s - pad + ky, ox * s - pad + kx] over valid taps.
void accumulate_tap(float* dst, const float* src, const detail::ConvGeometry& g, int ky, int kx,
                    float weight) {
  const Range ry = valid_outputs(g.out_h, g.in_h, g.stride, g.pad, ky);
  const Range rx = valid_outputs(g.out_w, g.in_w, g.stride, g.pad, kx);
  for (int oy = ry.lo; oy < ry.hi; ++oy) {
    const float* row = src + static_cast<std::ptrdiff_t>(oy * g.stride - g.pad + ky) * g.in_w;
    float* out_row = dst + static_cast<std::ptrdiff_t>(oy) * g.out_w;
    if (g.stride == 1) {
      const float* in_row = row - g.pad + kx;
      for (int ox = rx.lo; ox < rx.hi; ++ox) out_row[ox] += weight * in_row[ox];
    } else {
      for (int ox = rx.lo; ox < rx.hi; ++ox) {
        out_row[ox] += weight * row[ox * g.stride - g.pad + kx];
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvParams& p) {
  const detail::ConvGeometry g = detail::conv_geometry(input, p);
  Tensor out({g.batch, g.out_c, g.out_h, g.out_w});
  const float* in = input.data().data();
  const float* w = p.weights.data().data();
  float* o = out.data().data();
  const std::size_t out_plane = static_cast<std::size_t>(g.out_h) * g.out_w;

  for (int n = 0; n < g.batch; ++n) {
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < g.out_c; ++oc) {
      float* dst = o + out.index(n, oc, 0, 0);
      const int first_in = (oc / g.out_per_group) * g.in_per_group;
      for (int ci = 0; ci < g.in_per_group; ++ci) {
        const float* src = in + input.index(n, first_in + ci, 0, 0);
        const float* wk = w + (static_cast<std::size_t>(oc) * g.in_per_group + ci) * g.k * g.k;
        for (int ky = 0; ky < g.k; ++ky) {
          for (int kx = 0; kx < g.k; ++kx) accumulate_tap(dst, src, g, ky, kx, wk[ky * g.k + kx]);
        }
      }
      if (!p.bias.empty()) {
        const float b = p.bias[static_cast<std::size_t>(oc)];
        for (std::size_t i = 0; i < out_plane; ++i) dst[i] += b;
      }
    }
  }
  return out;
}

Tensor depthwise_conv2d(const Tensor& input, const ConvParams& p) {
  detail::check_depthwise(input, p);
  return conv2d(input, p);
}

std::vector<int> channel_shuffle_sources(int channels, int groups) {
  if (groups < 1 || channels % groups != 0) {
    throw ShapeError("channel_shuffle: " + std::to_string(channels) +
                     " channels not divisible by " + std::to_string(groups) + " groups");
  }
  const int per_group = channels / groups;
  std::vector<int> sources(static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c) {
    sources[static_cast<std::size_t>((c % per_group) * groups + c / per_group)] = c;
  }
  return sources;
}

Tensor channel_shuffle(const Tensor& input, int groups) {
  const Shape4& s = input.shape();
  const std::vector<int> sources = channel_shuffle_sources(s.c, groups);
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < s.c; ++c) {
      auto src = input.plane(n, sources[static_cast<std::size_t>(c)]);
      std::copy(src.begin(), src.end(), out.plane(n, c).begin());
    }
  }
  return out;
}

Tensor max_pool(const Tensor& input, int k, int stride, int pad) {
  const detail::PoolGeometry pg = detail::pool_geometry(input, k, stride, pad);
  const Shape4& s = input.shape();
  Tensor out({s.n, s.c, pg.out_h, pg.out_w});
  for (int n = 0; n < s.n; ++n) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < s.c; ++c) {
      auto src = input.plane(n, c);
      auto dst = out.plane(n, c);
      for (int oy = 0; oy < pg.out_h; ++oy) {
        const int y0 = oy * stride - pad;
        for (int ox = 0; ox < pg.out_w; ++ox) {
          const int x0 = ox * stride - pad;
          float m = -std::numeric_limits<float>::infinity();
          for (int y = std::max(y0, 0); y < std::min(y0 + k, s.h); ++y) {
            for (int x = std::max(x0, 0); x < std::min(x0 + k, s.w); ++x) {
              const float v = src[static_cast<std::size_t>(y) * s.w + x];
              if (v > m) m = v;
            }
          }
          dst[static_cast<std::size_t>(oy) * pg.out_w + ox] = m;
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
#pragma omp parallel for schedule(static)
    for (int c = 0; c < s.c; ++c) {
      auto src = input.plane(n, c);
      auto dst = out.plane(n, c);
      for (int oy = 0; oy < pg.out_h; ++oy) {
        const int y0 = oy * stride - pad;
        for (int ox = 0; ox < pg.out_w; ++ox) {
          const int x0 = ox * stride - pad;
          float sum = 0.0f;
          int count = 0;
          for (int y = std::max(y0, 0); y < std::min(y0 + k, s.h); ++y) {
            for (int x = std::max(x0, 0); x < std::min(x0 + k, s.w); ++x) {
              sum += src[static_cast<std::size_t>(y) * s.w + x];
              ++count;
            }
          }
          dst[static_cast<std::size_t>(oy) * pg.out_w + ox] = sum / static_cast<float>(count);
        }
      }
    }
  }
  return out;
}

Tensor batch_norm(const Tensor& input, const BnParams& p) {
  detail::check_bn(input, p);
  const Shape4& s = input.shape();
  std::vector<float> inv(static_cast<std::size_t>(s.c));
  for (std::size_t c = 0; c < inv.size(); ++c) inv[c] = detail::bn_inv_std(p, c);
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < s.c; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      auto src = input.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = detail::bn_apply(src[i], p.gamma[ci], p.beta[ci], p.mean[ci], inv[ci]);
      }
    }
  }
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  auto src = input.data();
  auto dst = out.data();
  const auto total = static_cast<std::ptrdiff_t>(src.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < total; ++i) dst[i] = src[i] > 0.0f ? src[i] : 0.0f;
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: " + a.shape().str() + " vs " + b.shape().str());
  }
  Tensor out(a.shape());
  auto da = a.data();
  auto db = b.data();
  auto dst = out.data();
  const auto total = static_cast<std::ptrdiff_t>(da.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < total; ++i) dst[i] = da[i] + db[i];
  return out;
}

float bilinear_sample(std::span<const float> plane, int h, int w, float y, float x) {
  if (!(y > -1.0f && y < static_cast<float>(h) && x > -1.0f && x < static_cast<float>(w))) {
    return 0.0f;
  }
  const float fy = std::floor(y);
  const float fx = std::floor(x);
  const int y0 = static_cast<int>(fy);
  const int x0 = static_cast<int>(fx);
  const float ly = y - fy;
  const float lx = x - fx;
  const float hy = 1.0f - ly;
  const float hx = 1.0f - lx;
  auto value = [&](int yy, int xx) {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0f;
    return plane[static_cast<std::size_t>(yy) * w + xx];
  };
  return hy * hx * value(y0, x0) + hy * lx * value(y0, x0 + 1) + ly * hx * value(y0 + 1, x0) +
         ly * lx * value(y0 + 1, x0 + 1);
}

Tensor deformable_conv2d(const Tensor& input, const Tensor& offsets, const ConvParams& p) {
  const detail::ConvGeometry g = detail::conv_geometry(input, p);
  detail::check_offsets(g, offsets);
  Tensor out({g.batch, g.out_c, g.out_h, g.out_w});
  const int taps = g.k * g.k;
  const std::size_t positions = static_cast<std::size_t>(g.out_h) * g.out_w;
  // Sampled columns: (Cin, k*k, Hout*Wout).
  std::vector<float> columns(static_cast<std::size_t>(g.in_c) * taps * positions);
  const float* w = p.weights.data().data();

  for (int n = 0; n < g.batch; ++n) {
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < g.in_c; ++ci) {
      auto src = input.plane(n, ci);
      for (int t = 0; t < taps; ++t) {
        const int ky = t / g.k;
        const int kx = t % g.k;
        auto dy = offsets.plane(n, 2 * t);
        auto dx = offsets.plane(n, 2 * t + 1);
        float* col = columns.data() + (static_cast<std::size_t>(ci) * taps + t) * positions;
        for (int oy = 0; oy < g.out_h; ++oy) {
          for (int ox = 0; ox < g.out_w; ++ox) {
            const std::size_t pos = static_cast<std::size_t>(oy) * g.out_w + ox;
            const float y = static_cast<float>(oy * g.stride - g.pad + ky) + dy[pos];
            const float x = static_cast<float>(ox * g.stride - g.pad + kx) + dx[pos];
            col[pos] = bilinear_sample(src, g.in_h, g.in_w, y, x);
          }
        }
      }
    }

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < g.out_c; ++oc) {
      float* dst = out.data().data() + out.index(n, oc, 0, 0);
      const int first_in = (oc / g.out_per_group) * g.in_per_group;
      for (int ci = 0; ci < g.in_per_group; ++ci) {
        const float* wk = w + (static_cast<std::size_t>(oc) * g.in_per_group + ci) * taps;
        for (int t = 0; t < taps; ++t) {
          const float* col =
              columns.data() + (static_cast<std::size_t>(first_in + ci) * taps + t) * positions;
          const float wv = wk[t];
          for (std::size_t i = 0; i < positions; ++i) dst[i] += wv * col[i];
        }
      }
      if (!p.bias.empty()) {
        const float b = p.bias[static_cast<std::size_t>(oc)];
        for (std::size_t i = 0; i < positions; ++i) dst[i] += b;
      }
    }
  }
  return out;
}

}  // namespace vehdet
