#include "vehdet/blocks.hpp"

#include "vehdet/error.hpp"

namespace vehdet {

int Fraction::of(int value) const {
  if (num < 1 || den < 1 || num > den) throw ShapeError("invalid portion " + str());
  const long long scaled = static_cast<long long>(value) * num;
  if (scaled % den != 0 || scaled / den < 1) {
    throw ShapeError("portion " + str() + " of " + std::to_string(value) +
                     " channels is not a whole number >= 1");
  }
  return static_cast<int>(scaled / den);
}

std::string Fraction::str() const {
  return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

namespace {

Tensor conv_bn(const Tensor& x, const ConvParams& conv, const BnParams& bn) {
  return batch_norm(conv2d(x, conv), bn);
}

Tensor conv_bn_relu(const Tensor& x, const ConvParams& conv, const BnParams& bn) {
  return relu(conv_bn(x, conv, bn));
}

}  // namespace

Tensor shuffle_unit(const Tensor& input, const ShuffleUnitParams& p) {
  if (p.stride != 1 && p.stride != 2) throw ShapeError("shuffle unit stride must be 1 or 2");
  if (input.shape().c % p.groups != 0) {
    throw ShapeError("shuffle unit input channels not divisible by groups");
  }
  Tensor branch = conv_bn_relu(input, p.gconv1, p.bn1);
  branch = channel_shuffle(branch, p.groups);
  branch = batch_norm(depthwise_conv2d(branch, p.dwconv), p.bn2);
  branch = conv_bn(branch, p.gconv2, p.bn3);

  if (p.stride == 1) return relu(add(input, branch));
  const std::array<Tensor, 2> parts{avg_pool(input, 3, 2, 1), std::move(branch)};
  return relu(concat_channels(parts));
}

std::array<int, 3> mincep_split(int channels) {
  if (channels < 3) throw ShapeError("mincep needs at least 3 input channels");
  const int base = channels / 3;
  const int extra = channels % 3;
  return {base + (extra > 0 ? 1 : 0), base + (extra > 1 ? 1 : 0), base};
}

Tensor mincep_block(const Tensor& input, const MincepParams& p) {
  const auto split = mincep_split(input.shape().c);
  const Tensor xa = slice_channels(input, 0, split[0]);
  const Tensor xb = slice_channels(input, split[0], split[0] + split[1]);
  const Tensor xc = slice_channels(input, split[0] + split[1], input.shape().c);

  Tensor a = conv_bn_relu(max_pool(xa, 3, 2, 1), p.a_conv, p.a_bn);

  Tensor b = conv_bn_relu(xb, p.b_conv, p.b_bn);
  b = relu(batch_norm(depthwise_conv2d(b, p.b_dw), p.b_dw_bn));

  Tensor c = conv_bn_relu(xc, p.c_conv, p.c_bn);
  c = relu(batch_norm(depthwise_conv2d(c, p.c_dw1), p.c_dw1_bn));
  c = relu(batch_norm(depthwise_conv2d(c, p.c_dw2), p.c_dw2_bn));

  const std::array<Tensor, 3> parts{std::move(a), std::move(b), std::move(c)};
  return conv_bn_relu(concat_channels(parts), p.out_conv, p.out_bn);
}

Tensor dab_block(const Tensor& input, const DabParams& p) {
  const int consumed = p.input_portion.of(input.shape().c);
  const Tensor x = consumed == input.shape().c ? input : slice_channels(input, 0, consumed);
  const Tensor offsets = conv2d(x, p.offset_conv);
  const Tensor reduced = conv_bn(x, p.conv1, p.bn1);
  const Tensor branch = batch_norm(deformable_conv2d(reduced, offsets, p.dconv), p.bn2);
  return relu(add(x, branch));
}

Tensor dab_passthrough(const Tensor& input, const DabParams& p) {
  const int consumed = p.input_portion.of(input.shape().c);
  Tensor adapted = dab_block(input, p);
  if (consumed == input.shape().c) return adapted;
  const std::array<Tensor, 2> parts{std::move(adapted),
                                    slice_channels(input, consumed, input.shape().c)};
  return concat_channels(parts);
}

}  // namespace vehdet
