#pragma once

#include <span>
#include <vector>

#include "vehdet/tensor.hpp"

namespace vehdet {

/// Convolution parameters. `weights` is (Cout, Cin / groups, k, k); an empty
/// `bias` means no bias term.
struct ConvParams {
  Tensor weights;
  std::vector<float> bias;
  int stride = 1;
  int pad = 0;
  int groups = 1;

  [[nodiscard]] int out_channels() const { return weights.shape().n; }
  [[nodiscard]] int in_channels_per_group() const { return weights.shape().c; }
  [[nodiscard]] int kernel() const { return weights.shape().h; }
};

/// Inference-mode batch normalization: y = gamma * (x - mean) / sqrt(var + eps) + beta.
struct BnParams {
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> mean;
  std::vector<float> var;
  float eps = 1e-5f;

  /// gamma = 1, beta = 0, mean = 0, var = 1, eps = 0: exact pass-through.
  static BnParams identity(int channels);
};

/// Spatial output extent of a k-window sliding with `stride` over `in + 2 * pad`.
/// Throws ShapeError when no window fits.
int conv_out_size(int in, int k, int stride, int pad);

// Every kernel below is a pure function. Work is split across OpenMP threads
// by output channel; the summation order inside one output element is fixed
// (input channel, then kernel row, then kernel column) and matches the serial
// versions in ops_reference.hpp bit for bit.

Tensor conv2d(const Tensor& input, const ConvParams& p);

/// Grouped convolution with groups == Cin == Cout.
Tensor depthwise_conv2d(const Tensor& input, const ConvParams& p);

/// Reshape-(g, C/g)-transpose permutation: input channel c lands at
/// (c mod (C/g)) * g + c / (C/g).
Tensor channel_shuffle(const Tensor& input, int groups);

/// Output channel j of channel_shuffle(., groups) for C channels reads input channel result[j].
std::vector<int> channel_shuffle_sources(int channels, int groups);

/// Max over each window; padded taps never win.
Tensor max_pool(const Tensor& input, int k, int stride, int pad);

/// Mean over the non-padded taps of each window.
Tensor avg_pool(const Tensor& input, int k, int stride, int pad);

Tensor batch_norm(const Tensor& input, const BnParams& p);

Tensor relu(const Tensor& input);

/// Elementwise sum of equally shaped tensors.
Tensor add(const Tensor& a, const Tensor& b);

/// Bilinear sample of an (h, w) plane at fractional (y, x). Neighbours that
/// fall outside the plane contribute zero.
float bilinear_sample(std::span<const float> plane, int h, int w, float y, float x);

/// Convolution whose tap (ky, kx) at output (oy, ox) reads the input at
/// (oy * stride - pad + ky + dy, ox * stride - pad + kx + dx), bilinearly
/// sampled. `offsets` is (n, 2 k^2, Hout, Wout) with channel 2 t holding dy
/// and channel 2 t + 1 holding dx for tap t = ky * k + kx.
Tensor deformable_conv2d(const Tensor& input, const Tensor& offsets, const ConvParams& p);

}  // namespace vehdet
