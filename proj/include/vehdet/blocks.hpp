#pragma once

#include <array>
#include <string>

#include "vehdet/ops.hpp"
#include "vehdet/tensor.hpp"

namespace vehdet {

/// Exact rational used for channel portions such as 1/8.
struct Fraction {
  int num = 1;
  int den = 1;

  /// num * value / den; throws ShapeError unless the result is a whole number >= 1.
  [[nodiscard]] int of(int value) const;
  [[nodiscard]] double value() const { return static_cast<double>(num) / den; }
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Fraction&, const Fraction&) = default;
};

/// Residual bottleneck: 1x1 grouped conv, channel shuffle, 3x3 depthwise,
/// 1x1 grouped conv. Stride 1 adds the input back; stride 2 concatenates a
/// 3x3/2 average-pooled copy of the input.
struct ShuffleUnitParams {
  ConvParams gconv1;
  BnParams bn1;
  ConvParams dwconv;
  BnParams bn2;
  ConvParams gconv2;
  BnParams bn3;
  int stride = 1;
  int groups = 1;
};

Tensor shuffle_unit(const Tensor& input, const ShuffleUnitParams& p);

/// Input channel split used by the three mincep branches: as equal as
/// possible, earlier branches take the remainder.
std::array<int, 3> mincep_split(int channels);

/// Reduction-style extra layer. The input channels are split across three
/// branches, each halving the resolution:
///   a: 3x3/2 max pool -> 1x1 conv
///   b: 1x1 conv -> 3x3/2 depthwise
///   c: 1x1 conv -> 3x3 depthwise -> 3x3/2 depthwise
/// The branch outputs are concatenated and mixed by a final 1x1 conv. Every
/// conv is followed by batch norm and ReLU.
struct MincepParams {
  ConvParams a_conv;
  BnParams a_bn;
  ConvParams b_conv;
  BnParams b_bn;
  ConvParams b_dw;
  BnParams b_dw_bn;
  ConvParams c_conv;
  BnParams c_bn;
  ConvParams c_dw1;
  BnParams c_dw1_bn;
  ConvParams c_dw2;
  BnParams c_dw2_bn;
  ConvParams out_conv;
  BnParams out_bn;
};

Tensor mincep_block(const Tensor& input, const MincepParams& p);

/// Deformation-adaptation block over the first `input_portion` of the input
/// channels x': ReLU(x' + BN(dconv(BN(conv1(x'))))), where the deformable
/// conv samples at offsets predicted by offset_conv(x').
struct DabParams {
  ConvParams conv1;
  BnParams bn1;
  ConvParams offset_conv;
  ConvParams dconv;
  BnParams bn2;
  Fraction input_portion;
};

Tensor dab_block(const Tensor& input, const DabParams& p);

/// dab_block output followed by the input channels the block did not consume,
/// so the result keeps the input's channel count.
Tensor dab_passthrough(const Tensor& input, const DabParams& p);

}  // namespace vehdet
